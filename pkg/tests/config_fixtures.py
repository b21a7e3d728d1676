"""Cluster config documents for system/service/CLI tests."""

from xml.sax.saxutils import escape

PHOTO_SCRIPT = (
    "CREATE TABLE photo (objid INTEGER, ra INTEGER, dec INTEGER);"
    + "".join(
        f"INSERT INTO photo VALUES ({i}, {i * 7 % 10}, {i * 3 % 10});"
        for i in range(40))
)

SPEC_SCRIPT = (
    "CREATE TABLE spec (objid INTEGER, z INTEGER, v INTEGER);"
    + "".join(
        f"INSERT INTO spec VALUES ({i * 13 % 40}, {i % 10}, {i * 11 % 10});"
        for i in range(30))
)

BIG_SCRIPT = (
    "CREATE TABLE big (x INTEGER, y INTEGER);"
    + "".join(
        f"INSERT INTO big VALUES ({(i * 137) % 1000}, {i % 40});"
        for i in range(500))
)


def cluster_config(
    *,
    users=("alice",),
    password="secret",
    scheduler_period="0.05",
    api_port="0",
    mirrors=("n1", "n2"),
    include_remote=True,
    extra_cluster_props="",
    n1_agent_port=None,
) -> str:
    user_entities = "\n".join(
        f'        <entity type="User" name="{u}">'
        f'<property name="password">{escape(password)}</property></entity>'
        for u in users)
    remote = ""
    if include_remote:
        remote = f"""
          <entity type="RemoteDatabaseConnection" name="d2">
            <property name="dialect">variant</property>
            <property name="schema-script">{escape(SPEC_SCRIPT)}</property>
          </entity>"""
    mirror_list = ",".join(mirrors)
    agent_port_prop = (
        f'        <property name="agent-port">{n1_agent_port}</property>'
        if n1_agent_port else "")
    return f"""<?xml version="1.0" encoding="UTF-8"?>
<registry format-version="1">
  <entity type="Cluster" name="c1">
    <property name="api-port">{api_port}</property>
    <property name="scheduler-period">{scheduler_period}</property>
    <property name="default-dataset">d1</property>
    <property name="mydb-machine">n1</property>
{extra_cluster_props}
    <entity type="MachineRole" name="controller">
      <entity type="Machine" name="ctrl">
        <entity type="DiskVolume" name="vol0">
          <property name="path">ctrl/vol0</property>
          <property name="flags">system</property>
        </entity>
      </entity>
    </entity>
    <entity type="MachineRole" name="node">
      <entity type="Machine" name="n1">
{agent_port_prop}
        <entity type="DiskVolume" name="vol0">
          <property name="path">n1/vol0</property>
          <property name="flags">data</property>
        </entity>
      </entity>
      <entity type="Machine" name="n2">
        <entity type="DiskVolume" name="vol0">
          <property name="path">n2/vol0</property>
          <property name="flags">data</property>
        </entity>
      </entity>
    </entity>
    <entity type="Domain" name="science">
      <entity type="Federation" name="fed">
        <entity type="DatabaseDefinition" name="d1">
          <property name="schema-script">{escape(PHOTO_SCRIPT)}</property>
          <entity type="DatabaseVersion" name="full">
            <property name="machines">n1</property>
          </entity>
        </entity>
        <entity type="DatabaseDefinition" name="d3">
          <property name="schema-script">{escape(BIG_SCRIPT)}</property>
          <entity type="DatabaseVersion" name="full">
            <property name="machines">{mirror_list}</property>
          </entity>
          <entity type="DatabaseVersion" name="mini">
            <property name="machines">{mirrors[0]}</property>
            <property name="sample-fraction">0.5</property>
            <property name="sample-seed">7</property>
          </entity>
        </entity>{remote}
      </entity>
{user_entities}
    </entity>
  </entity>
</registry>
"""


def write_config(tmp_path, **kwargs):
    path = tmp_path / "cluster.xml"
    path.write_text(cluster_config(**kwargs))
    return path
