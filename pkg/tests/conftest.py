from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import pytest

from kgtriage.graph import Category, KnowledgeGraph, Provenance, Specialty, Status

TESTS_DIR = Path(__file__).parent


def build_graph(shape: dict[str, tuple[str, list[str]]]) -> KnowledgeGraph:
    """Graph from {disease-label: (specialty, [symptom labels])}."""
    graph = KnowledgeGraph()
    for disease, (specialty, symptoms) in shape.items():
        did = graph.upsert_entity(disease, Category.DISEASE, Specialty(specialty))
        for symptom in symptoms:
            sid = graph.upsert_entity(symptom, Category.SYMPTOM, Specialty.GENERAL)
            graph.add_relation(did, "has-symptom", sid, Provenance.SEED, Status.EXTRACTED)
    return graph


#: 12 diseases / 40 symptoms across all four consultant domains; queries in
#: the oracle-equivalence suite draw from s01..s10.
TWELVE_DISEASES: dict[str, tuple[str, list[str]]] = {
    "d-general-1": ("general", ["s01", "s02", "s03", "s32"]),
    "d-general-2": ("general", ["s01", "s04", "s33"]),
    "d-cardio-1": ("cardiology", ["s02", "s05", "s11", "s34"]),
    "d-cardio-2": ("cardiology", ["s05", "s06", "s12", "s13", "s39", "s40"]),
    "d-cardio-3": ("cardiology", ["s14", "s15", "s26", "s27"]),
    "d-neuro-1": ("neurology", ["s03", "s06", "s16", "s35"]),
    "d-neuro-2": ("neurology", ["s07", "s17", "s18", "s28"]),
    "d-endo-1": ("endocrinology", ["s04", "s08", "s19", "s29", "s30"]),
    "d-endo-2": ("endocrinology", ["s08", "s09", "s20", "s21", "s36"]),
    "d-rheum-1": ("rheumatology", ["s09", "s10", "s22", "s37"]),
    "d-rheum-2": ("rheumatology", ["s10", "s23", "s31"]),
    "d-rheum-3": ("rheumatology", ["s01", "s24", "s25", "s38"]),
}


@pytest.fixture()
def twelve_disease_graph() -> KnowledgeGraph:
    graph = build_graph(TWELVE_DISEASES)
    symptoms = {e.id for e in graph.entities.values() if e.category is Category.SYMPTOM}
    assert len(TWELVE_DISEASES) == 12 and len(symptoms) == 40
    return graph


class _StubHandler(BaseHTTPRequestHandler):
    """POST handler answering with the payload its server was seeded with."""

    def do_POST(self):  # noqa: N802
        length = int(self.headers.get("Content-Length", 0))
        body = json.loads(self.rfile.read(length) or b"{}")
        self.server.requests.append((self.path, body))  # type: ignore[attr-defined]
        status, payload = self.server.responder(self.path, body)  # type: ignore[attr-defined]
        data = payload if isinstance(payload, bytes) else json.dumps(payload).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):  # silence test output
        pass


@pytest.fixture()
def stub_server():
    """HTTP stub; set ``server.responder`` to control replies."""
    server = ThreadingHTTPServer(("127.0.0.1", 0), _StubHandler)
    server.requests = []  # type: ignore[attr-defined]
    server.responder = lambda path, body: (200, {})  # type: ignore[attr-defined]
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        yield server
    finally:
        server.shutdown()
        server.server_close()


@pytest.fixture()
def stub_url(stub_server) -> str:
    host, port = stub_server.server_address
    return f"http://{host}:{port}/augment"
