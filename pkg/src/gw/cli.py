"""Operator command line.

``gw up`` brings a whole simulated cluster to life from one XML config
(controller, node agents, REST service); the other subcommands administer
the registry, run queries, and drive the exchange tools.  Exit codes:
0 ok, 1 user error, 2 system error; failures print {code, message} JSON
on stderr.
"""

from __future__ import annotations

import json
import os
import signal
import subprocess
import sys
import time
from pathlib import Path

import click

EXIT_USER_ERROR = 1
EXIT_SYSTEM_ERROR = 2


def _fail(code: str, message: str, exit_code: int = EXIT_USER_ERROR):
    click.echo(json.dumps({"code": code, "message": message}), err=True)
    sys.exit(exit_code)


def _state_dir(value) -> Path:
    return Path(value if value is not None else
                os.environ.get("GW_STATE", "gw-state"))


def _lock_path(state: Path) -> Path:
    return state / "gw.lock"


def _pid_alive(pid: int) -> bool:
    try:
        os.kill(pid, 0)
        return True
    except (ProcessLookupError, PermissionError):
        return False


def _api_url(state: Path) -> str:
    env = os.environ.get("GW_API")
    if env:
        return env.rstrip("/")
    api_file = state / "api-url"
    if not api_file.exists():
        _fail("no-controller", f"no running controller found under {state}")
    return api_file.read_text().strip().rstrip("/")


@click.group()
def main():
    """Desk-scale federated SQL cluster operations."""


# -- cluster lifecycle ---------------------------------------------------------

@main.command()
@click.argument("config", type=click.Path(exists=True, dir_okay=False))
@click.option("--state-dir", default=None, help="runtime state directory")
@click.option("--timeout", default=30.0, show_default=True)
def up(config, state_dir, timeout):
    """Start the controller and node agents from CONFIG."""
    state = _state_dir(state_dir)
    state.mkdir(parents=True, exist_ok=True)
    lock = _lock_path(state)
    if lock.exists():
        pid = int(lock.read_text().split()[0])
        if _pid_alive(pid):
            _fail("already-running", f"a controller (pid {pid}) already owns {state}")
        lock.unlink()

    log_file = open(state / "serve.log", "ab")
    process = subprocess.Popen(
        [sys.executable, "-m", "gw.cli", "serve", str(Path(config).resolve()),
         "--state-dir", str(state.resolve())],
        stdout=log_file, stderr=subprocess.STDOUT,
        start_new_session=True)

    deadline = time.time() + timeout
    api_file = state / "api-url"
    while time.time() < deadline:
        if process.poll() is not None:
            _fail("startup-failed",
                  f"controller exited early; see {state / 'serve.log'}",
                  EXIT_SYSTEM_ERROR)
        if api_file.exists():
            url = api_file.read_text().strip()
            try:
                import httpx
                if httpx.get(f"{url}/api/health", timeout=2).status_code == 200:
                    click.echo(url)
                    return
            except Exception:
                pass
        time.sleep(0.1)
    _fail("startup-timeout", "controller did not become healthy in time",
          EXIT_SYSTEM_ERROR)


@main.command(hidden=True)
@click.argument("config", type=click.Path(exists=True, dir_okay=False))
@click.option("--state-dir", required=True)
def serve(config, state_dir):
    """Run the controller in the foreground (used by `gw up`)."""
    import threading

    import uvicorn

    from .service.app import create_app
    from .system import System

    state = Path(state_dir)
    state.mkdir(parents=True, exist_ok=True)
    lock = _lock_path(state)
    if lock.exists() and _pid_alive(int(lock.read_text().split()[0])):
        _fail("already-running", f"another controller owns {state}")
    lock.write_text(f"{os.getpid()}\n")

    agents: list[subprocess.Popen] = []
    system = None
    try:
        system = System.from_config(config, state_dir=state)
        agents = _spawn_agents(system, state)
        system.start()

        static_dir = _console_assets()
        app = create_app(system, static_dir=static_dir)
        port = int(system.settings.get("api-port", "0"))
        host = system.settings.get("api-host", "127.0.0.1")
        server = uvicorn.Server(uvicorn.Config(
            app, host=host, port=port, log_level="warning"))
        thread = threading.Thread(target=server.run, daemon=True)
        thread.start()
        while not server.started and thread.is_alive():
            time.sleep(0.02)
        if not thread.is_alive():
            _fail("startup-failed", "HTTP server did not start", EXIT_SYSTEM_ERROR)
        bound = server.servers[0].sockets[0].getsockname()[1]
        (state / "api-url").write_text(f"http://{host}:{bound}\n")

        stop = threading.Event()

        def shutdown(signum, frame):
            stop.set()

        signal.signal(signal.SIGTERM, shutdown)
        signal.signal(signal.SIGINT, shutdown)
        stop.wait()

        # drain: running jobs get cancelled after the grace period
        system.stop(drain=True, grace=5.0)
        server.should_exit = True
        thread.join(timeout=5)
    finally:
        for agent in agents:
            agent.terminate()
        if system is not None and system.scheduler is not None:
            system.scheduler.stop()
        for leftover in ("api-url",):
            path = state / leftover
            if path.exists():
                path.unlink()
        if lock.exists():
            lock.unlink()


def _spawn_agents(system, state: Path) -> list[subprocess.Popen]:
    agents = []
    for node, (host, port) in system.agents.items():
        log_file = open(state / f"agent-{node}.log", "ab")
        agents.append(subprocess.Popen(
            [sys.executable, "-m", "gw.agent", "--host", host,
             "--port", str(port)],
            stdout=log_file, stderr=subprocess.STDOUT,
            start_new_session=True))
    return agents


def _console_assets():
    candidate = Path(__file__).resolve().parent.parent.parent / "frontend" / "dist"
    return candidate if candidate.is_dir() else None


@main.command()
@click.option("--state-dir", default=None)
@click.option("--force", is_flag=True, help="SIGKILL a stuck controller")
@click.option("--grace", default=15.0, show_default=True)
def down(state_dir, force, grace):
    """Stop the controller, draining running jobs first."""
    state = _state_dir(state_dir)
    lock = _lock_path(state)
    if not lock.exists():
        _fail("not-running", f"no controller lock under {state}")
    pid = int(lock.read_text().split()[0])
    if not _pid_alive(pid):
        lock.unlink()
        click.echo("stale lock removed")
        return
    os.kill(pid, signal.SIGKILL if force else signal.SIGTERM)
    deadline = time.time() + grace
    while time.time() < deadline and _pid_alive(pid):
        time.sleep(0.1)
    if _pid_alive(pid):
        if not force:
            _fail("still-running",
                  f"controller pid {pid} did not stop; retry with --force",
                  EXIT_SYSTEM_ERROR)
        os.kill(pid, signal.SIGKILL)
    if lock.exists():
        lock.unlink()
    click.echo("stopped")


# -- registry administration -------------------------------------------------------

@main.group()
def registry():
    """Registry import/export, discovery, and direct edits."""


def _open_registry(state_dir):
    from .registry.store import RegistryStore

    state = _state_dir(state_dir)
    path = state / "registry.sqlite"
    if not path.exists():
        _fail("no-registry", f"no registry database under {state}")
    return RegistryStore(path)


@registry.command("export")
@click.option("--state-dir", default=None)
@click.option("--path", "branch", default=None, help="export only this branch")
def registry_export(state_dir, branch):
    """Print the registry as canonical XML."""
    from .registry.xmlio import export_xml

    store = _open_registry(state_dir)
    root_id = store.get_by_path(branch).id if branch else None
    sys.stdout.buffer.write(export_xml(store, root_id))


@registry.command("import")
@click.argument("document", type=click.Path(exists=True, dir_okay=False))
@click.option("--state-dir", default=None)
@click.option("--merge", is_flag=True, help="merge into the existing registry")
def registry_import(document, state_dir, merge):
    from .registry.xmlio import import_xml

    store = _open_registry(state_dir)
    try:
        stats = import_xml(store, Path(document).read_bytes(), merge=merge)
    except Exception as exc:
        _fail("import-failed", str(exc))
    click.echo(json.dumps(stats))


@registry.command("discover")
@click.argument("machine")
@click.option("--state-dir", default=None)
@click.option("--apply", "apply_", is_flag=True, help="persist the change set")
def registry_discover(machine, state_dir, apply_):
    """Compare a node's live state with the registry."""
    from .registry.discovery import apply_changes, discover
    from .system import System

    state = _state_dir(state_dir)
    try:
        system = System(state).assemble()
    except Exception as exc:
        _fail("no-cluster", str(exc), EXIT_SYSTEM_ERROR)
    entity = system.machine_by_name(machine)
    if entity is None:
        _fail("unknown-machine", f"no machine {machine!r}")
    try:
        changes = discover(system.registry, entity, system.backends.get(entity.name))
    except Exception as exc:
        _fail("discovery-failed", str(exc), EXIT_SYSTEM_ERROR)
    for add in changes.additions:
        click.echo(f"+ {add.type.value} {add.name}: {json.dumps(add.properties)}")
    for update in changes.updates:
        click.echo(f"~ {update.entity_name}: {json.dumps(update.properties)}")
    if changes.empty:
        click.echo("registry matches the live state")
    if apply_ and not changes.empty:
        touched = apply_changes(system.registry, changes)
        click.echo(f"applied {touched} change(s)")


def _parse_props(props) -> dict[str, str]:
    out = {}
    for raw in props:
        if "=" not in raw:
            _fail("bad-property", f"property {raw!r} is not key=value")
        key, value = raw.split("=", 1)
        out[key] = value
    return out


@registry.command("create")
@click.argument("entity_type")
@click.argument("path")
@click.option("--prop", "props", multiple=True, help="key=value, repeatable")
@click.option("--state-dir", default=None)
def registry_create(entity_type, path, props, state_dir):
    """Create an entity at PATH (parent path + new name)."""
    from .registry.model import EntityType

    store = _open_registry(state_dir)
    try:
        etype = EntityType(entity_type)
    except ValueError:
        _fail("unknown-type", f"no entity type {entity_type!r}")
    parts = [p for p in path.split("/") if p]
    parent = None
    if len(parts) > 1:
        try:
            parent = store.get_by_path("/".join(parts[:-1])).id
        except Exception as exc:
            _fail("unknown-parent", str(exc))
    try:
        entity = store.create_entity(etype, parts[-1], parent, _parse_props(props))
    except Exception as exc:
        _fail("create-failed", str(exc))
    click.echo(entity.id)


@registry.command("set")
@click.argument("path")
@click.option("--prop", "props", multiple=True, required=True)
@click.option("--state-dir", default=None)
def registry_set(path, props, state_dir):
    """Update properties of the entity at PATH."""
    store = _open_registry(state_dir)
    try:
        entity = store.get_by_path(path)
        merged = dict(entity.properties)
        merged.update(_parse_props(props))
        store.update_entity(entity.id, entity.version, properties=merged)
    except Exception as exc:
        _fail("set-failed", str(exc))
    click.echo("ok")


# -- queries ----------------------------------------------------------------------

def _client(state_dir):
    import httpx

    return httpx.Client(base_url=_api_url(_state_dir(state_dir)), timeout=30.0)


def _login(client, user, password):
    response = client.post("/api/sessions",
                           json={"user": user, "password": password})
    if response.status_code != 200:
        _fail("login-failed", response.json().get("message", response.text))
    return {"Authorization": f"Bearer {response.json()['token']}"}


@main.command()
@click.argument("sql")
@click.option("--queue", default="quick", show_default=True)
@click.option("--user", required=True)
@click.option("--password", default=None, help="defaults to $GW_PASSWORD")
@click.option("--wait", is_flag=True, help="poll until the job is terminal")
@click.option("--out", default=None, type=click.Path(dir_okay=False),
              help="download the destination table as CSV (implies --wait)")
@click.option("--partitions", default=None, type=int)
@click.option("--verbose", is_flag=True)
@click.option("--state-dir", default=None)
@click.option("--timeout", default=300.0, show_default=True)
def query(sql, queue, user, password, wait, out, partitions, verbose, state_dir,
          timeout):
    """Submit SQL as a query job."""
    password = password if password is not None else os.environ.get("GW_PASSWORD", "")
    with _client(state_dir) as client:
        headers = _login(client, user, password)
        body = {"sql": sql, "queue": queue}
        if partitions:
            body["partitions"] = partitions
        response = client.post("/api/queries", json=body, headers=headers)
        if response.status_code == 400:
            payload = response.json()
            click.echo(json.dumps(payload), err=True)
            sys.exit(EXIT_USER_ERROR)
        if response.status_code != 202:
            _fail("submit-failed", response.text, EXIT_SYSTEM_ERROR)
        job_id = response.json()["job"]
        click.echo(job_id)
        if not (wait or out):
            return

        deadline = time.time() + timeout
        while True:
            view = client.get(f"/api/jobs/{job_id}", headers=headers).json()
            if view["state"] in ("completed", "failed", "cancelled", "timed-out"):
                break
            if time.time() > deadline:
                _fail("timeout", f"job {job_id} still {view['state']}",
                      EXIT_SYSTEM_ERROR)
            time.sleep(0.1)
        if verbose:
            click.echo(json.dumps(view, indent=2), err=True)
            for key, value in sorted(view.get("branches", {}).items()):
                click.echo(f"branch {key} -> {value}", err=True)
        if view["state"] != "completed":
            _fail("job-" + view["state"], view.get("error", ""), EXIT_USER_ERROR)
        if out:
            table = view["destination"].split(":", 1)[1]
            download = client.get(f"/api/mydb/tables/{table}?format=csv",
                                  headers=headers)
            if download.status_code != 200:
                _fail("download-failed", download.text, EXIT_SYSTEM_ERROR)
            Path(out).write_bytes(download.content)
            click.echo(out)


# -- exchange tools ---------------------------------------------------------------

@main.command()
@click.argument("action", type=click.Choice(["extract"]))
@click.argument("script", type=click.Path(exists=True, dir_okay=False))
@click.option("--apply", "apply_dataset", default=None,
              help="apply the metadata to this dataset")
@click.option("--state-dir", default=None)
def meta(action, script, apply_dataset, state_dir):
    """Extract (and optionally apply) metadata from a DDL script."""
    from .exchange.sqlmeta import MetadataScriptError, apply_metadata, extract_metadata

    try:
        doc = extract_metadata(Path(script).read_text())
    except MetadataScriptError as exc:
        _fail("metadata-error", str(exc))
    sys.stdout.buffer.write(doc.to_xml())
    if apply_dataset:
        from .system import System

        system = System(_state_dir(state_dir)).assemble()
        errors = apply_metadata(doc, system.catalog, apply_dataset)
        for path, message in errors:
            click.echo(json.dumps({"code": "bad-path", "message": message}), err=True)
        if errors:
            sys.exit(EXIT_USER_ERROR)


@main.command()
@click.argument("script", type=click.Path(exists=True, dir_okay=False))
@click.option("--user", required=True)
@click.option("--out-dir", default="plot-out", show_default=True)
@click.option("--state-dir", default=None)
def plot(script, user, out_dir, state_dir):
    """Preprocess a plot script: run embedded queries, substitute data files."""
    from .exchange.plots import PlotQueryError, preprocess_plot_script

    from .system import System

    system = System(_state_dir(state_dir)).assemble()
    mydb = system.catalog.mydb_of(user)
    if mydb is None:
        _fail("unknown-user", f"user {user!r} has no MyDB")

    def run_query(sql):
        from .exchange.csvfmt import write_header, write_row
        from .schema.resolve import resolve
        from .sql.parser import parse

        rq = resolve(parse(sql), system.catalog, mydb, user=user)
        backend = system.backends[mydb.location]
        from .engine.analyze import result_schema
        from .engine.backend import qualify_table_refs

        schema = result_schema(rq.root, "plot")
        columns, batches = backend.run_statement(
            mydb.name, qualify_table_refs(rq.root), expected_schema=schema.columns)
        yield write_header(columns)
        for batch in batches:
            for row in batch.rows:
                yield write_row(row, batch.columns)

    try:
        rewritten, files = preprocess_plot_script(
            Path(script).read_text(), run_query, Path(out_dir))
    except PlotQueryError as exc:
        _fail("plot-query-failed", str(exc))
    out_script = Path(out_dir) / Path(script).name
    out_script.write_text(rewritten)
    click.echo(str(out_script))
    for f in files:
        click.echo(str(f))


if __name__ == "__main__":
    main()
