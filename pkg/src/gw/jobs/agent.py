"""Node agent: configuration-free remote activity execution.

The agent listens on one TCP port and executes activity requests against
local sqlite stores; every request carries the paths it needs, so the
binary plus a port number is the whole deployment.  Wire format:
4-byte big-endian length prefix, then an XML envelope.

Request:  <request kind="..."><param name="...">value</param></request>
Response: <response status="ok|error"><param .../><payload>base64</payload>
          <error>...</error><detail>...</detail></response>
"""

from __future__ import annotations

import base64
import io
import socket
import socketserver
import threading
import traceback
import xml.etree.ElementTree as ET
from pathlib import Path
from typing import Callable, Optional
from xml.sax.saxutils import escape, quoteattr

from ..engine.backend import NodeBackend

MAX_ENVELOPE = 64 * 1024 * 1024


class DelegationError(Exception):
    """Transport or remote failure; branches treat it as retryable."""


class RemoteActivityError(Exception):
    """The activity itself failed on the remote side."""

    def __init__(self, message: str, detail: str = ""):
        super().__init__(message)
        self.detail = detail


# -- envelope codec -----------------------------------------------------------

def encode_request(kind: str, params: dict[str, str],
                   payload: Optional[bytes] = None) -> bytes:
    parts = [f"<request kind={quoteattr(kind)}>"]
    for key in sorted(params):
        parts.append(f"<param name={quoteattr(key)}>{escape(str(params[key]))}</param>")
    if payload is not None:
        parts.append(f"<payload>{base64.b64encode(payload).decode()}</payload>")
    parts.append("</request>")
    return "".join(parts).encode("utf-8")


def decode_request(data: bytes) -> tuple[str, dict[str, str], Optional[bytes]]:
    root = ET.fromstring(data.decode("utf-8"))
    kind = root.attrib["kind"]
    params = {el.attrib["name"]: el.text or "" for el in root.findall("param")}
    payload_el = root.find("payload")
    payload = base64.b64decode(payload_el.text or "") if payload_el is not None else None
    return kind, params, payload


def encode_response(status: str, params: Optional[dict[str, str]] = None,
                    payload: Optional[bytes] = None, error: str = "",
                    detail: str = "") -> bytes:
    parts = [f"<response status={quoteattr(status)}>"]
    for key in sorted(params or {}):
        parts.append(f"<param name={quoteattr(key)}>{escape(str(params[key]))}</param>")
    if payload is not None:
        parts.append(f"<payload>{base64.b64encode(payload).decode()}</payload>")
    if error:
        parts.append(f"<error>{escape(error)}</error>")
    if detail:
        parts.append(f"<detail>{escape(detail)}</detail>")
    parts.append("</response>")
    return "".join(parts).encode("utf-8")


def decode_response(data: bytes) -> tuple[dict[str, str], Optional[bytes]]:
    root = ET.fromstring(data.decode("utf-8"))
    if root.attrib.get("status") != "ok":
        raise RemoteActivityError(root.findtext("error") or "remote failure",
                                  root.findtext("detail") or "")
    params = {el.attrib["name"]: el.text or "" for el in root.findall("param")}
    payload_el = root.find("payload")
    payload = base64.b64decode(payload_el.text or "") if payload_el is not None else None
    return params, payload


def _send_frame(sock: socket.socket, data: bytes) -> None:
    sock.sendall(len(data).to_bytes(4, "big") + data)


def _recv_frame(sock: socket.socket) -> bytes:
    header = _recv_exact(sock, 4)
    length = int.from_bytes(header, "big")
    if length > MAX_ENVELOPE:
        raise DelegationError(f"envelope of {length} bytes exceeds the limit")
    return _recv_exact(sock, length)


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            raise DelegationError("connection closed mid-frame")
        buf += chunk
    return buf


# -- activity handlers (shared by the agent process and in-process execution) --

Handler = Callable[[dict, Optional[bytes]], tuple[dict, Optional[bytes]]]
HANDLERS: dict[str, Handler] = {}


def handler(kind: str):
    def register(fn: Handler) -> Handler:
        HANDLERS[kind] = fn
        return fn
    return register


def _backend_from(params: dict) -> NodeBackend:
    data_dir = params["data-dir"]
    return NodeBackend(params.get("node", Path(data_dir).name), [data_dir])


@handler("ping")
def _ping(params, payload):
    return {"pong": "1"}, None


@handler("run-statement")
def _run_statement(params, payload):
    from ..exchange.csvfmt import write_header, write_row

    backend = _backend_from(params)
    columns, batches = backend.run_sql_text(params["database"], params["sql"])
    out = io.BytesIO()
    out.write(write_header(columns))
    count = 0
    for batch in batches:
        for row in batch.rows:
            out.write(write_row(row, batch.columns))
            count += 1
    return {"rows": str(count)}, out.getvalue()


@handler("import-file")
def _import_file(params, payload):
    from ..exchange.formatter import import_file

    backend = _backend_from(params)
    if payload is not None:
        stream = io.BytesIO(payload)
    else:
        stream = open(params["file"], "rb")
    try:
        count = import_file(stream, params.get("format", "csv"), backend,
                            params["database"], params["table"])
    finally:
        stream.close()
    return {"rows": str(count)}, None


@handler("export-table")
def _export_table(params, payload):
    from ..exchange.formatter import export_table

    backend = _backend_from(params)
    chunks = export_table(backend, params["database"], params["table"],
                          params.get("format", "csv"))
    dest = params.get("dest")
    if dest:
        # the file lands on this node, not on the caller's machine
        written = 0
        with open(dest, "wb") as fh:
            for chunk in chunks:
                written += fh.write(chunk)
        return {"file": dest, "bytes": str(written)}, None
    return {}, b"".join(chunks)


@handler("drop-table")
def _drop_table(params, payload):
    backend = _backend_from(params)
    backend.drop_table(params["database"], params["table"])
    return {}, None


def run_activity_locally(kind: str, params: dict,
                         payload: Optional[bytes] = None) -> tuple[dict, Optional[bytes]]:
    fn = HANDLERS.get(kind)
    if fn is None:
        raise RemoteActivityError(f"unsupported activity kind {kind!r}")
    return fn(params, payload)


# -- server ------------------------------------------------------------------

class _AgentHandler(socketserver.BaseRequestHandler):
    def handle(self):
        try:
            data = _recv_frame(self.request)
        except DelegationError:
            return
        kind = "?"
        try:
            kind, params, payload = decode_request(data)
            out_params, out_payload = run_activity_locally(kind, params, payload)
            response = encode_response("ok", out_params, out_payload)
            print(f"agent handled {kind}", flush=True)
        except Exception as exc:
            response = encode_response(
                "error", error=str(exc), detail=traceback.format_exc())
            print(f"agent failed {kind}: {exc}", flush=True)
        try:
            _send_frame(self.request, response)
        except OSError:
            pass


class AgentServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, host: str = "127.0.0.1", port: int = 0):
        super().__init__((host, port), _AgentHandler)
        self.host, self.port = self.server_address

    def start(self) -> "AgentServer":
        thread = threading.Thread(target=self.serve_forever,
                                  name=f"agent:{self.port}", daemon=True)
        thread.start()
        return self


class AgentClient:
    def __init__(self, host: str, port: int, timeout: float = 60.0):
        self.host = host
        self.port = port
        self.timeout = timeout

    def call(self, kind: str, params: dict[str, str],
             payload: Optional[bytes] = None) -> tuple[dict[str, str], Optional[bytes]]:
        request = encode_request(kind, params, payload)
        try:
            with socket.create_connection((self.host, self.port),
                                          timeout=self.timeout) as sock:
                _send_frame(sock, request)
                response = _recv_frame(sock)
        except OSError as exc:
            raise DelegationError(
                f"agent {self.host}:{self.port} unreachable: {exc}") from exc
        return decode_response(response)


def main(argv: Optional[list[str]] = None) -> None:
    """Entry point: ``python -m gw.jobs.agent --port N``."""
    import argparse

    parser = argparse.ArgumentParser(description="node agent")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, required=True)
    args = parser.parse_args(argv)
    server = AgentServer(args.host, args.port)
    print(f"agent listening on {server.host}:{server.port}", flush=True)
    server.serve_forever()


if __name__ == "__main__":
    main()
