import json
import random
import socket
import string
import subprocess
import sys
import threading

import pytest

from embedserver.encoders import HashEncoder, make_encoder
from embedserver.server import handle_line


# --- handle_line (in-process) ------------------------------------------------

def test_request_response_shape():
    enc = HashEncoder()
    resp = handle_line('{"id": "1", "unit": "Ethiopia", "sentence": "Ethiopia is a country."}', enc)
    assert resp["id"] == "1"
    assert len(resp["vector"]) == enc.dim


def test_identical_requests_identical_vectors():
    enc = HashEncoder()
    line = '{"id": "7", "unit": "x", "sentence": "y z"}'
    assert handle_line(line, enc) == handle_line(line, enc)


def test_malformed_json_line():
    assert handle_line("{not json", HashEncoder()) == {"id": None, "error": "bad_request"}


def test_missing_fields_echoes_id():
    resp = handle_line('{"id": "9", "unit": "only"}', HashEncoder())
    assert resp == {"id": "9", "error": "bad_request"}


def test_health_shape():
    enc = HashEncoder()
    resp = handle_line('{"op": "health"}', enc)
    assert resp == {"dim": enc.dim, "model": "hash-v1"}
    assert resp == handle_line('{"op": "health"}', enc)


def test_unknown_encoder_selector():
    with pytest.raises(ValueError):
        make_encoder("bogus")


# --- full server over TCP -----------------------------------------------------

@pytest.fixture(scope="module")
def server_address():
    proc = subprocess.Popen(
        [sys.executable, "-m", "embedserver.server", "--mode", "tcp", "--port", "0"],
        stdout=subprocess.PIPE,
        stderr=subprocess.PIPE,
        text=True,
    )
    try:
        banner = proc.stdout.readline().strip()
        assert banner.startswith("listening on "), banner
        yield banner.removeprefix("listening on ")
    finally:
        proc.terminate()
        proc.wait(timeout=10)


def connect(address):
    host, _, port = address.rpartition(":")
    sock = socket.create_connection((host, int(port)), timeout=30)
    return sock, sock.makefile("rw", encoding="utf-8", newline="\n")


def test_health_over_socket(server_address):
    sock, fh = connect(server_address)
    try:
        fh.write('{"op": "health"}\n')
        fh.flush()
        first = json.loads(fh.readline())
        fh.write('{"op": "health"}\n')
        fh.flush()
        second = json.loads(fh.readline())
        assert first == second
        assert first["dim"] > 0
    finally:
        sock.close()


def test_thousand_randomized_requests(server_address):
    rng = random.Random(65537)
    alphabet = string.ascii_letters + " ጥልያን"

    def rand_text():
        return "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 40)))

    requests = []
    for i in range(800):
        requests.append({"id": f"r{i}", "unit": rand_text(), "sentence": rand_text()})
    # 200 duplicates of earlier payloads under fresh ids: must embed identically
    for i in range(200):
        src = requests[rng.randrange(800)]
        requests.append({"id": f"dup{i}", "unit": src["unit"], "sentence": src["sentence"]})

    sock, fh = connect(server_address)
    try:
        def write_all():
            for req in requests:
                fh.write(json.dumps(req, ensure_ascii=False) + "\n")
            fh.flush()

        writer = threading.Thread(target=write_all)
        writer.start()
        responses = [json.loads(fh.readline()) for _ in range(len(requests))]
        writer.join(timeout=30)
    finally:
        sock.close()

    assert [r["id"] for r in responses] == [r["id"] for r in requests]
    dims = {len(r["vector"]) for r in responses}
    assert len(dims) == 1
    by_payload = {}
    for req, resp in zip(requests, responses):
        key = (req["unit"], req["sentence"])
        if key in by_payload:
            assert by_payload[key] == resp["vector"], "repeat request embedded differently"
        else:
            by_payload[key] = resp["vector"]
        assert all(isinstance(x, float) for x in resp["vector"])


def test_malformed_line_over_socket(server_address):
    sock, fh = connect(server_address)
    try:
        fh.write("this is not json\n")
        fh.flush()
        assert json.loads(fh.readline()) == {"id": None, "error": "bad_request"}
        # connection still usable afterwards
        fh.write('{"id": "after", "unit": "a", "sentence": "b"}\n')
        fh.flush()
        assert json.loads(fh.readline())["id"] == "after"
    finally:
        sock.close()


# --- stdio mode -----------------------------------------------------------------

def test_stdio_mode_round_trip():
    lines = (
        '{"op": "health"}\n'
        '{"id": "1", "unit": "Ethiopia", "sentence": "Ethiopia is a country."}\n'
        "garbage\n"
    )
    proc = subprocess.run(
        [sys.executable, "-m", "embedserver.server", "--mode", "stdio"],
        input=lines,
        capture_output=True,
        text=True,
        timeout=60,
    )
    out = [json.loads(l) for l in proc.stdout.splitlines() if l.strip()]
    assert out[0]["model"] == "hash-v1"
    assert out[1]["id"] == "1" and len(out[1]["vector"]) == out[0]["dim"]
    assert out[2] == {"id": None, "error": "bad_request"}
