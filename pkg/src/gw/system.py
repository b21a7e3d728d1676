"""Deployment wiring: one object that owns a whole simulated cluster.

A deployment is described by a registry-format XML document (``gw up`` is
a specialization of registry import): machines with disk volumes, database
definitions with versions, remote connections, queues, and users.  The
System materializes node backends, provisions database instances, builds
the catalog and execution environment, and runs the scheduler.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

from .engine.backend import NodeBackend
from .engine.execute import ExecEnv
from .engine.mydb import create_user_mydb
from .jobs.jobstore import JobStore
from .jobs.logging import LogStore
from .jobs.scheduler import JobRuntime, Scheduler, ensure_default_queues
from .registry.discovery import _version_database_name, apply_changes, discover
from .registry.model import DEFAULT_MACHINE_ROLES, Entity, EntityType
from .registry.provision import instantiate_database
from .registry.store import RegistryStore
from .registry.xmlio import import_xml
from .schema.catalog import Catalog, Metadata, MetadataStore
from .schema.model import Dataset, DatasetKind
from .service.auth import hash_password


class ConfigError(Exception):
    pass


class RegistryMetadataStore:
    """Object metadata persisted as entity properties in the registry."""

    def __init__(self, registry: RegistryStore):
        self.registry = registry
        self._owners: dict[str, str] = {}  # dataset name -> entity id

    def bind(self, dataset_name: str, entity_id: str) -> None:
        self._owners[dataset_name.lower()] = entity_id

    def _key(self, path: str) -> str:
        return f"meta.{path.lower()}"

    def get(self, dataset: str, path: str) -> Metadata:
        owner = self._owners.get(dataset.lower())
        if owner is None:
            return Metadata()
        entity = self.registry.get_entity(owner)
        raw = entity.prop(self._key(path))
        if not raw:
            return Metadata()
        data = json.loads(raw)
        return Metadata(content_id=data.get("content", ""),
                        unit=data.get("unit", ""),
                        description=data.get("summary", ""))

    def put(self, dataset: str, path: str, metadata: Metadata) -> None:
        owner = self._owners.get(dataset.lower())
        if owner is None:
            return  # datasets without a registry entity keep no metadata
        entity = self.registry.get_entity(owner)
        props = dict(entity.properties)
        props[self._key(path)] = json.dumps({
            "content": metadata.content_id,
            "unit": metadata.unit,
            "summary": metadata.description,
        }, sort_keys=True)
        self.registry.update_entity(entity.id, entity.version, properties=props)


class RegistryView:
    """ClusterView backed by the live registry (instances + statistics)."""

    def __init__(self, registry: RegistryStore, catalog: Catalog):
        self.registry = registry
        self.catalog = catalog

    def _instances_of(self, dataset_name: str) -> list[Entity]:
        out = []
        for definition in self.registry.find_by_type(EntityType.DATABASE_DEFINITION):
            for version in self.registry.children(definition.id,
                                                  EntityType.DATABASE_VERSION):
                if _version_database_name(definition, version).lower() != \
                        dataset_name.lower():
                    continue
                out.extend(self.registry.children(version.id,
                                                  EntityType.DATABASE_INSTANCE))
        return out

    def hosts(self, dataset_name: str) -> list[str]:
        try:
            dataset = self.catalog.dataset(dataset_name)
        except Exception:
            dataset = None
        if dataset is not None and dataset.kind is DatasetKind.MYDB:
            return [dataset.location] if dataset.location else []
        return sorted({i.prop("machine") for i in self._instances_of(dataset_name)
                       if i.prop("machine")})

    def row_count(self, node_id: str, dataset_name: str, table_name: str) -> int:
        for instance in self._instances_of(dataset_name):
            if instance.prop("machine") == node_id:
                return int(instance.prop(f"rowcount.{table_name}", "0"))
        return 0

    def mydb_dataset(self, user: str) -> Dataset:
        mydb = self.catalog.mydb_of(user)
        if mydb is None:
            raise LookupError(f"user {user!r} has no MyDB")
        return mydb


class System:
    def __init__(self, state_dir: Path):
        self.state_dir = Path(state_dir)
        self.state_dir.mkdir(parents=True, exist_ok=True)
        self.registry = RegistryStore(self.state_dir / "registry.sqlite")
        self.log = LogStore(self.state_dir / "registry.sqlite")
        self.metadata_store = RegistryMetadataStore(self.registry)
        self.catalog = Catalog(metadata_store=self.metadata_store)
        self.view = RegistryView(self.registry, self.catalog)
        self.backends: dict[str, NodeBackend] = {}
        self.remote_backends: dict[str, NodeBackend] = {}
        self.agents: dict[str, tuple[str, int]] = {}
        self.env: Optional[ExecEnv] = None
        self.runtime: Optional[JobRuntime] = None
        self.scheduler: Optional[Scheduler] = None
        self.cluster: Optional[Entity] = None
        self.settings: dict[str, str] = {}

    # -- construction ---------------------------------------------------------

    @classmethod
    def from_config(cls, config_path: Path | str,
                    state_dir: Optional[Path | str] = None) -> "System":
        config_path = Path(config_path)
        state = Path(state_dir) if state_dir is not None else \
            config_path.parent / "gw-state"
        system = cls(state)
        document = config_path.read_bytes()
        import_xml(system.registry, document, merge=True)
        system.assemble(config_dir=config_path.parent)
        return system

    def assemble(self, config_dir: Optional[Path] = None) -> "System":
        """Build runtime objects from whatever the registry now contains."""
        roots = [e for e in self.registry.roots()
                 if e.type is EntityType.CLUSTER]
        if not roots:
            raise ConfigError("the registry holds no Cluster entity")
        self.cluster = roots[0]
        self.settings = dict(self.cluster.properties)

        for role in DEFAULT_MACHINE_ROLES:
            if self.registry.child_by_name(self.cluster.id, role,
                                           EntityType.MACHINE_ROLE) is None:
                self.registry.create_entity(EntityType.MACHINE_ROLE, role,
                                            self.cluster.id)
        self._build_backends()
        ensure_default_queues(self.registry, self.cluster)
        self._provision_databases(config_dir)
        self._register_datasets()

        quota = int(self.settings.get("mydb-row-quota", "1000000"))
        reuse = self.settings.get("reuse-cache", "") == "1"
        self.env = ExecEnv(self.catalog, self.backends, self.view,
                           mydb_row_quota=quota, reuse_cache=reuse)
        for name, backend in self.remote_backends.items():
            self.env.register_remote(name, backend, name)

        self._create_users()
        self._run_discovery()

        self.runtime = JobRuntime(
            registry=self.registry,
            jobs=JobStore(self.registry),
            log=self.log,
            env=self.env,
            catalog=self.catalog,
            view=self.view,
            agents=self.agents,
            extras={"default-dataset": self.settings.get("default-dataset"),
                    "spool-dir": str(self.state_dir / "spool")},
        )
        period = float(self.settings.get("scheduler-period", "0.25"))
        self.scheduler = Scheduler(self.runtime, poll_period=period)
        return self

    def _machines(self) -> list[Entity]:
        out = []
        for role in self.registry.children(self.cluster.id, EntityType.MACHINE_ROLE):
            out.extend(self.registry.children(role.id, EntityType.MACHINE))
        return out

    def _volume_path(self, volume: Entity) -> Path:
        raw = Path(volume.prop("path") or volume.name)
        return raw if raw.is_absolute() else self.state_dir / raw

    def _build_backends(self) -> None:
        for machine in self._machines():
            volumes = self.registry.children(machine.id, EntityType.DISK_VOLUME)
            data_dirs = [self._volume_path(v) for v in volumes
                         if "data" in v.prop("flags", "data")]
            if not data_dirs:
                continue
            resolved = []
            for volume in volumes:
                path = self._volume_path(volume)
                if volume.prop("path") != str(path):
                    self.registry.update_entity(
                        volume.id, self.registry.get_entity(volume.id).version,
                        properties={**volume.properties, "path": str(path)})
                resolved.append(path)
            dialect = machine.prop("dialect", "base")
            self.backends[machine.name] = NodeBackend(
                machine.name, data_dirs, dialect_name=dialect)
            port = machine.prop("agent-port")
            if port:
                self.agents[machine.name] = (
                    machine.prop("agent-host", "127.0.0.1"), int(port))

    def _script_text(self, entity: Entity, config_dir: Optional[Path]) -> str:
        inline = entity.prop("schema-script")
        if inline:
            return inline
        script_path = entity.prop("schema-script-path")
        if not script_path:
            return ""
        path = Path(script_path)
        if not path.is_absolute() and config_dir is not None:
            path = config_dir / path
        return path.read_text()

    def _definitions(self) -> list[tuple[Entity, Entity]]:
        """(federation, definition) pairs in document order."""
        out = []
        for domain in self.registry.children(self.cluster.id, EntityType.DOMAIN):
            for federation in self.registry.children(domain.id, EntityType.FEDERATION):
                for definition in self.registry.children(
                        federation.id, EntityType.DATABASE_DEFINITION):
                    out.append((federation, definition))
        return out

    def _provision_databases(self, config_dir: Optional[Path]) -> None:
        machines = {m.name: m for m in self._machines()}
        for _, definition in self._definitions():
            script = self._script_text(definition, config_dir)
            versions = self.registry.children(definition.id,
                                              EntityType.DATABASE_VERSION)
            fulls = [v for v in versions if float(v.prop("sample-fraction", "1")) >= 1]
            minis = [v for v in versions if float(v.prop("sample-fraction", "1")) < 1]
            full_source: Optional[tuple[NodeBackend, str]] = None

            for version in fulls + minis:
                hosts = [h.strip() for h in version.prop("machines", "").split(",")
                         if h.strip()]
                for host in hosts:
                    machine = machines.get(host)
                    if machine is None:
                        raise ConfigError(
                            f"version {definition.name}/{version.name} names "
                            f"unknown machine {host!r}")
                    backend = self.backends[machine.name]
                    db_name = _version_database_name(definition, version)
                    existing = self.registry.child_by_name(
                        version.id, machine.name, EntityType.DATABASE_INSTANCE)
                    if existing is None:
                        if definition.prop("schema-script") != script and script:
                            self.registry.update_entity(
                                definition.id,
                                self.registry.get_entity(definition.id).version,
                                properties={**definition.properties,
                                            "schema-script": script})
                            definition = self.registry.get_entity(definition.id)
                        instantiate_database(
                            self.registry, definition, version, machine, backend,
                            sample_source=full_source)
                    elif not backend.has_database(db_name):
                        backend.ensure_database(db_name)
                        if script:
                            backend.run_script(db_name, script)
                    if float(version.prop("sample-fraction", "1")) >= 1 and \
                            full_source is None:
                        full_source = (backend, db_name)

    def _register_datasets(self) -> None:
        for federation, definition in self._definitions():
            for version in self.registry.children(definition.id,
                                                  EntityType.DATABASE_VERSION):
                db_name = _version_database_name(definition, version)
                instances = self.registry.children(version.id,
                                                   EntityType.DATABASE_INSTANCE)
                if not instances:
                    continue
                machine = instances[0].prop("machine")
                fraction = float(version.prop("sample-fraction", "1"))
                if fraction >= 1:
                    dataset = Dataset(db_name, DatasetKind.LOCAL,
                                      dialect_name="base", location=machine)
                else:
                    dataset = Dataset(db_name, DatasetKind.MINI,
                                      dialect_name="base", location=machine,
                                      sample_fraction=fraction,
                                      parent=definition.name)
                try:
                    self.catalog.register(dataset, self.backends[machine])
                except ValueError:
                    pass  # already registered (re-assemble)
                self.metadata_store.bind(db_name, definition.id)

            for remote in self.registry.children(
                    federation.id, EntityType.REMOTE_DATABASE_CONNECTION):
                self._register_remote(remote)

    def _register_remote(self, remote: Entity) -> None:
        dialect = remote.prop("dialect", "variant")
        data_dir = Path(remote.prop("data-dir") or f"remote_{remote.name}")
        if not data_dir.is_absolute():
            data_dir = self.state_dir / data_dir
        backend = NodeBackend(f"remote:{remote.name}", [data_dir],
                              dialect_name=dialect)
        if not backend.has_database(remote.name):
            backend.create_database(remote.name)
            script = remote.prop("schema-script")
            if script:
                backend.run_script(remote.name, script)
        self.remote_backends[remote.name] = backend
        dataset = Dataset(remote.name, DatasetKind.REMOTE, dialect_name=dialect,
                          location=f"remote:{remote.name}")
        try:
            self.catalog.register(dataset, backend)
        except ValueError:
            pass
        self.metadata_store.bind(remote.name, remote.id)

    def _create_users(self) -> None:
        mydb_machine = self.settings.get("mydb-machine")
        node = None
        if mydb_machine and mydb_machine in self.backends:
            node = self.backends[mydb_machine]
        elif self.backends:
            node = self.backends[sorted(self.backends)[0]]
        from .service.auth import verify_password

        for domain in self.registry.children(self.cluster.id, EntityType.DOMAIN):
            for user in self.registry.children(domain.id, EntityType.USER):
                plain = user.prop("password")
                if plain:
                    props = dict(user.properties)
                    del props["password"]
                    # an unchanged password keeps its hash, so re-running `up`
                    # converges on a byte-identical registry
                    if not verify_password(plain, props.get("password-hash", "")):
                        props["password-hash"] = hash_password(plain)
                    self.registry.update_entity(
                        user.id, self.registry.get_entity(user.id).version,
                        properties=props)
                if node is not None:
                    create_user_mydb(user.name, node, self.catalog)

    def _run_discovery(self) -> None:
        for machine in self._machines():
            backend = self.backends.get(machine.name)
            if backend is None:
                continue
            changes = discover(self.registry, machine, backend)
            if not changes.empty:
                apply_changes(self.registry, changes)

    # -- lifecycle ----------------------------------------------------------------

    def start(self) -> "System":
        self.scheduler.start()
        return self

    def stop(self, drain: bool = True, grace: float = 5.0) -> None:
        if self.scheduler is not None:
            self.scheduler.stop(drain=drain, grace=grace)

    # -- lookups used by the service/CLI --------------------------------------------

    def find_user(self, name: str) -> Optional[Entity]:
        for domain in self.registry.children(self.cluster.id, EntityType.DOMAIN):
            user = self.registry.child_by_name(domain.id, name, EntityType.USER)
            if user is not None:
                return user
        return None

    def machine_by_name(self, name: str) -> Optional[Entity]:
        for machine in self._machines():
            if machine.name.lower() == name.lower():
                return machine
        return None
