"""The HTTP interface: endpoint shapes, byte identity with the command
line, error statuses, purity across requests, and static file serving."""

import json
import threading
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor

import pytest

import vdmslice as v
from vdmslice import cli
from vdmslice.api import create_server, document_payload, type_text


@pytest.fixture()
def server():
    document = v.parse(v.corpus_path("memberbook_bad.vdmsl").read_text())
    table = v.bind(document)
    srv = create_server(document, table, "memberbook_bad.vdmsl")
    thread = threading.Thread(target=srv.serve_forever, daemon=True)
    thread.start()
    try:
        yield srv
    finally:
        srv.shutdown()
        srv.server_close()
        thread.join(timeout=5)


def get(srv, path):
    try:
        with urllib.request.urlopen(f"http://127.0.0.1:{srv.port}{path}") as reply:
            return reply.status, dict(reply.headers), reply.read()
    except urllib.error.HTTPError as error:
        return error.code, dict(error.headers), error.read()


def post(srv, path, body):
    data = json.dumps(body).encode() if isinstance(body, dict) else body
    request = urllib.request.Request(
        f"http://127.0.0.1:{srv.port}{path}",
        data=data,
        headers={"Content-Type": "application/json"},
        method="POST",
    )
    try:
        with urllib.request.urlopen(request) as reply:
            return reply.status, dict(reply.headers), reply.read()
    except urllib.error.HTTPError as error:
        return error.code, dict(error.headers), error.read()


# ---------------- /document ----------------

def test_document_endpoint_describes_the_loaded_file(server):
    status, headers, body = get(server, "/document")
    assert status == 200
    assert headers["Content-Type"] == "application/json"
    assert int(headers["Content-Length"]) == len(body)
    payload = json.loads(body)
    assert payload["file"] == "memberbook_bad.vdmsl"
    assert "register" in payload["source"]
    (operation,) = payload["operations"]
    assert operation["name"] == "register"
    assert operation["returns"] is True
    assert operation["postConjuncts"] == 2
    assert operation["stateVariables"] == ["NameBook", "EmailBook", "NextId"]
    assert operation["parameters"] == [
        {"name": "name", "type": "Name"},
        {"name": "email", "type": "[Email]"},
    ]


def test_type_text_spells_compound_types():
    cases = {
        "nat": "nat",
        "[Email]": "[Email]",
        "seq of char": "seq of char",
        "set of nat1": "set of nat1",
        "map Id to Name": "map Id to Name",
        "(nat * bool)": "nat * bool",
    }
    for source, expected in cases.items():
        assert type_text(v.parse_type_text(source)) == expected


# ---------------- /slice ----------------

def test_slice_endpoint_matches_the_command_line_exactly(server, capsys):
    status, _, body = post(
        server, "/slice", {"operation": "register", "criterion": "post:1"}
    )
    assert status == 200
    code = cli.main(
        [
            "slice",
            str(v.corpus_path("memberbook_bad.vdmsl")),
            "--operation",
            "register",
            "--criterion",
            "post:1",
        ]
    )
    printed = capsys.readouterr().out
    assert code == 0
    cli_payload = json.loads(printed)
    api_payload = json.loads(body)
    assert api_payload["slice"] == cli_payload["slice"]
    assert api_payload["criterionNodes"] == cli_payload["criterionNodes"]
    # byte identity modulo the file label, which names the server's document
    cli_payload["file"] = "memberbook_bad.vdmsl"
    assert body.decode() == v.payload_json(cli_payload)


def test_slice_endpoint_accepts_modes(server):
    weak = post(
        server,
        "/slice",
        {"operation": "register", "criterion": "state:NextId", "mode": "weak"},
    )
    strong = post(
        server,
        "/slice",
        {"operation": "register", "criterion": "state:NextId", "mode": "strong"},
    )
    assert weak[0] == strong[0] == 200
    weak_ids = {e["nodeId"] for e in json.loads(weak[2])["slice"]}
    strong_ids = {e["nodeId"] for e in json.loads(strong[2])["slice"]}
    assert strong_ids <= weak_ids


def test_posted_source_is_sliced_without_touching_the_loaded_document(server):
    posted = """
operations
    tiny : nat ==> nat
    tiny(x) == return x;
"""
    status, _, body = post(
        server,
        "/slice",
        {
            "operation": "tiny",
            "criterion": "result",
            "source": posted,
            "file": "scratch.vdmsl",
        },
    )
    assert status == 200
    payload = json.loads(body)
    assert payload["file"] == "scratch.vdmsl"
    kinds = {e["kind"] for e in payload["slice"]}
    assert kinds == {"Return", "PatternIdentifier"}

    # the loaded document is untouched: the same request as before answers
    # with register's operations, not tiny's
    status, _, body = get(server, "/document")
    assert json.loads(body)["operations"][0]["name"] == "register"
    status, _, _ = post(
        server, "/slice", {"operation": "tiny", "criterion": "result"}
    )
    assert status == 400


def test_repeated_requests_answer_identically(server):
    request = {"operation": "register", "criterion": "post:2", "mode": "strong"}
    replies = {post(server, "/slice", request)[2] for _ in range(8)}
    assert len(replies) == 1


def test_parallel_requests_do_not_interfere(server):
    requests = [
        {"operation": "register", "criterion": criterion, "mode": mode}
        for criterion in ("result", "post:1", "post:2", "state:NextId", "state:NameBook")
        for mode in ("weak", "strong")
    ] * 4

    def fire(body):
        return body, post(server, "/slice", body)

    with ThreadPoolExecutor(max_workers=8) as pool:
        answers = list(pool.map(fire, requests))

    by_request = {}
    for body, (status, _, reply) in answers:
        assert status == 200
        key = json.dumps(body, sort_keys=True)
        by_request.setdefault(key, set()).add(reply)
    assert all(len(replies) == 1 for replies in by_request.values())


# ---------------- error statuses ----------------

def test_bad_requests_answer_400(server):
    cases = [
        b"not json at all",
        json.dumps(["a", "list"]).encode(),
        json.dumps({"criterion": "result"}).encode(),
        json.dumps({"operation": "register"}).encode(),
        json.dumps({"operation": "register", "criterion": 5}).encode(),
        json.dumps(
            {"operation": "register", "criterion": "result", "mode": "sideways"}
        ).encode(),
        json.dumps(
            {"operation": "register", "criterion": "result", "source": 7}
        ).encode(),
    ]
    for raw in cases:
        status, _, body = post(server, "/slice", raw)
        assert status == 400, raw
        assert "error" in json.loads(body)


def test_unusable_criteria_answer_400_with_the_reason(server):
    status, _, body = post(
        server, "/slice", {"operation": "register", "criterion": "post:9"}
    )
    assert status == 400
    assert json.loads(body)["error"] == (
        "the postcondition has 2 conjunct(s); 9 is out of range"
    )
    status, _, _ = post(
        server, "/slice", {"operation": "ghost", "criterion": "result"}
    )
    assert status == 400


def test_unparseable_source_answers_422_with_positions(server):
    status, _, body = post(
        server,
        "/slice",
        {
            "operation": "o",
            "criterion": "result",
            "source": "operations\n    o : nat ==>\n",
        },
    )
    assert status == 422
    errors = json.loads(body)["errors"]
    assert errors
    for entry in errors:
        assert set(entry) == {"message", "start", "end"}
        assert entry["start"]["line"] >= 1


def test_unbound_source_answers_422(server):
    status, _, body = post(
        server,
        "/slice",
        {
            "operation": "o",
            "criterion": "result",
            "source": "operations\n    o : () ==> nat\n    o() == return mystery;\n",
        },
    )
    assert status == 422
    assert any("mystery" in e["message"] for e in json.loads(body)["errors"])


def test_unknown_paths_answer_404(server):
    status, _, _ = get(server, "/nothing")
    assert status == 404
    status, _, _ = post(server, "/nothing", {"operation": "o"})
    assert status == 404


def test_options_answers_cors_preflight(server):
    request = urllib.request.Request(
        f"http://127.0.0.1:{server.port}/slice", method="OPTIONS"
    )
    with urllib.request.urlopen(request) as reply:
        assert reply.status == 204
        assert reply.headers["Access-Control-Allow-Origin"] == "*"
        assert "POST" in reply.headers["Access-Control-Allow-Methods"]


def test_every_response_carries_cors_headers(server):
    _, headers, _ = get(server, "/document")
    assert headers["Access-Control-Allow-Origin"] == "*"
    status, headers, _ = post(server, "/slice", b"broken")
    assert status == 400
    assert headers["Access-Control-Allow-Origin"] == "*"


def test_get_errors_mirror_404_behaviour(server):
    status, _, body = get(server, "/document.bak")
    assert status == 404
    assert json.loads(body) == {"error": "not found"}


# ---------------- static UI ----------------

def test_static_files_are_served_when_configured(tmp_path):
    (tmp_path / "index.html").write_text("<h1>viewer</h1>")
    (tmp_path / "app.js").write_text("console.log(1)")
    document = v.parse(v.corpus_path("twoops.vdmsl").read_text())
    table = v.bind(document)
    srv = create_server(document, table, "twoops.vdmsl", ui_dir=str(tmp_path))
    thread = threading.Thread(target=srv.serve_forever, daemon=True)
    thread.start()
    try:
        status, headers, body = get(srv, "/")
        assert status == 200
        assert body == b"<h1>viewer</h1>"
        assert headers["Content-Type"].startswith("text/html")
        status, headers, body = get(srv, "/app.js")
        assert status == 200
        assert b"console" in body
        status, _, _ = get(srv, "/../secret")
        assert status == 404
        status, _, _ = get(srv, "/missing.css")
        assert status == 404
        # the document endpoint still wins over the static tree
        status, _, body = get(srv, "/document")
        assert json.loads(body)["file"] == "twoops.vdmsl"
    finally:
        srv.shutdown()
        srv.server_close()
        thread.join(timeout=5)


def test_document_payload_is_pure():
    document = v.parse(v.corpus_path("twoops.vdmsl").read_text())
    table = v.bind(document)
    first = document_payload(document, table, "x")
    second = document_payload(document, table, "x")
    assert first == second
    assert v.payload_json(first) == v.payload_json(second)
