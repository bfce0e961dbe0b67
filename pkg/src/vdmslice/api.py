"""A small HTTP interface over one loaded document.

GET  /document   what is loaded: source text plus, per operation, its
                 parameters, whether it returns a value, how many
                 postcondition conjuncts it has and the state variables
                 it can touch.
POST /slice      body {"operation": .., "criterion": .., "mode"?: ..,
                 "source"?: .., "file"?: ..}; the criterion uses the same
                 spelling as the command line.  With "source" the posted
                 text is sliced instead of the loaded document.  The
                 response body is byte-identical to the command line's
                 JSON output for the same request.

Errors: 400 {"error": ..} for bad requests and unusable criteria,
422 {"errors": [{message, start, end}, ..]} for source that does not
parse or bind.  Responses carry permissive CORS headers so a UI served
from elsewhere during development can call in.
"""

from __future__ import annotations

import json
import mimetypes
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .binder import BindFailure, SymbolTable, bind
from .parser import ParseFailure, SourceError, parse
from .slicer import (
    CriterionError,
    backward_slice,
    parse_criterion,
    payload_json,
    post_conjuncts,
    result_payload,
)
from .syntax import (
    Document,
    MapType,
    OptionalType,
    PatternIdentifier,
    ProductType,
    SeqType,
    SetType,
    TypeExpr,
    TypeName,
)


def type_text(type_expr: TypeExpr) -> str:
    if isinstance(type_expr, TypeName):
        return type_expr.name
    if isinstance(type_expr, OptionalType):
        return f"[{type_text(type_expr.inner)}]"
    if isinstance(type_expr, SeqType):
        return f"seq of {type_text(type_expr.element)}"
    if isinstance(type_expr, SetType):
        return f"set of {type_text(type_expr.element)}"
    if isinstance(type_expr, MapType):
        return f"map {type_text(type_expr.key)} to {type_text(type_expr.value)}"
    assert isinstance(type_expr, ProductType)
    return " * ".join(type_text(p) for p in type_expr.items)


def document_payload(document: Document, table: SymbolTable, file_label: str) -> dict:
    state_variables = (
        [f.name for f in document.state.fields] if document.state is not None else []
    )
    operations = []
    for op in document.operations:
        parameters = []
        for pattern, its_type in zip(op.params, op.param_types):
            name = pattern.name if isinstance(pattern, PatternIdentifier) else "_"
            parameters.append({"name": name, "type": type_text(its_type)})
        operations.append(
            {
                "name": op.name,
                "parameters": parameters,
                "returns": op.result_type is not None,
                "postConjuncts": (
                    len(post_conjuncts(op.postcondition))
                    if op.postcondition is not None
                    else 0
                ),
                "stateVariables": state_variables,
            }
        )
    return {"file": file_label, "source": document.source_text, "operations": operations}


def _source_error_entries(errors: list[SourceError]) -> list[dict]:
    return [
        {
            "message": e.message,
            "start": {"line": e.span.start.line, "column": e.span.start.column},
            "end": {"line": e.span.end.line, "column": e.span.end.column},
        }
        for e in errors
    ]


class SliceServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, address, document: Document, table: SymbolTable,
                 file_label: str, ui_dir: str | None = None):
        super().__init__(address, _Handler)
        self.document = document
        self.table = table
        self.file_label = file_label
        self.ui_dir = Path(ui_dir) if ui_dir is not None else None

    @property
    def port(self) -> int:
        return self.server_address[1]


class _Handler(BaseHTTPRequestHandler):
    server: SliceServer
    protocol_version = "HTTP/1.1"

    def log_message(self, format: str, *args) -> None:  # noqa: A002 - stdlib hook
        pass

    # ---------------- plumbing ----------------

    def _send(self, status: int, body: bytes, content_type: str = "application/json") -> None:
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.end_headers()
        self.wfile.write(body)

    def _send_json(self, status: int, payload: dict) -> None:
        self._send(status, payload_json(payload).encode())

    # ---------------- requests ----------------

    def do_OPTIONS(self) -> None:  # noqa: N802 - stdlib naming
        self._send(204, b"")

    def do_GET(self) -> None:  # noqa: N802
        if self.path == "/document":
            payload = document_payload(
                self.server.document, self.server.table, self.server.file_label
            )
            self._send_json(200, payload)
            return
        if self.server.ui_dir is not None:
            self._send_static()
            return
        self._send_json(404, {"error": "not found"})

    def _send_static(self) -> None:
        root = self.server.ui_dir
        assert root is not None
        relative = self.path.lstrip("/") or "index.html"
        relative = relative.split("?", 1)[0]
        target = (root / relative).resolve()
        if not str(target).startswith(str(root.resolve())) or not target.is_file():
            self._send_json(404, {"error": "not found"})
            return
        content_type = mimetypes.guess_type(target.name)[0] or "application/octet-stream"
        self._send(200, target.read_bytes(), content_type)

    def do_POST(self) -> None:  # noqa: N802
        if self.path != "/slice":
            self._send_json(404, {"error": "not found"})
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
            request = json.loads(self.rfile.read(length) or b"{}")
        except (ValueError, json.JSONDecodeError):
            self._send_json(400, {"error": "the request body must be a JSON object"})
            return
        if not isinstance(request, dict):
            self._send_json(400, {"error": "the request body must be a JSON object"})
            return
        operation = request.get("operation")
        criterion_text = request.get("criterion")
        mode = request.get("mode", "weak")
        if not isinstance(operation, str) or not isinstance(criterion_text, str):
            self._send_json(
                400, {"error": "'operation' and 'criterion' must be strings"}
            )
            return
        if mode not in ("weak", "strong"):
            self._send_json(400, {"error": "'mode' must be 'weak' or 'strong'"})
            return

        document = self.server.document
        table = self.server.table
        file_label = self.server.file_label
        source = request.get("source")
        if source is not None:
            if not isinstance(source, str):
                self._send_json(400, {"error": "'source' must be a string"})
                return
            file_label = request.get("file", "document")
            try:
                document = parse(source)
                table = bind(document)
            except (ParseFailure, BindFailure) as failure:
                self._send_json(422, {"errors": _source_error_entries(failure.errors)})
                return

        try:
            criterion = parse_criterion(operation, criterion_text)
            result = backward_slice(document, table, criterion, mode=mode)
        except CriterionError as exc:
            self._send_json(400, {"error": str(exc)})
            return
        body = payload_json(result_payload(document, result, file_label)).encode()
        self._send(200, body)


def create_server(
    document: Document,
    table: SymbolTable,
    file_label: str,
    host: str = "127.0.0.1",
    port: int = 0,
    ui_dir: str | None = None,
) -> SliceServer:
    return SliceServer((host, port), document, table, file_label, ui_dir=ui_dir)


def serve(
    document: Document,
    table: SymbolTable,
    file_label: str,
    host: str = "127.0.0.1",
    port: int = 8472,
    ui_dir: str | None = None,
) -> None:
    server = create_server(document, table, file_label, host=host, port=port, ui_dir=ui_dir)
    print(f"listening on http://{host}:{server.port}", flush=True)
    try:
        server.serve_forever()
    finally:
        server.server_close()
