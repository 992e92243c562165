"""Embedding service over newline-delimited JSON.

One JSON object per line, one response per request, responses in
request order per connection:

    {"id": "1", "unit": "Ethiopia", "sentence": "..."}   ->
    {"id": "1", "vector": [ ... ]}

    {"op": "health"}  ->  {"dim": 384, "model": "hash-v1"}

Malformed lines answer ``{"id": null, "error": "bad_request"}`` (the id
is echoed when one was readable). Runs over standard streams
(``--mode stdio``) or a local TCP socket (``--mode tcp``); with
``--port 0`` the bound port is announced on the first stdout line.
"""
from __future__ import annotations

import argparse
import json
import socketserver
import sys

from .encoders import make_encoder


def handle_line(line: str, encoder) -> dict:
    try:
        request = json.loads(line)
        if not isinstance(request, dict):
            raise ValueError("request is not an object")
    except ValueError:
        return {"id": None, "error": "bad_request"}

    if request.get("op") == "health":
        return {"dim": encoder.dim, "model": encoder.name}

    rid = request.get("id")
    if not isinstance(rid, str) or "unit" not in request or "sentence" not in request:
        return {"id": rid if isinstance(rid, str) else None, "error": "bad_request"}
    try:
        vector = encoder.encode(str(request["unit"]), str(request["sentence"]))
    except Exception:
        return {"id": rid, "error": "encode_failed"}
    return {"id": rid, "vector": vector.tolist()}


def serve_stream(rfile, wfile, encoder) -> None:
    """Answer requests from one connection until EOF, in order."""
    text_mode = hasattr(wfile, "encoding")
    for raw in rfile:
        line = raw.decode("utf-8") if isinstance(raw, bytes) else raw
        if not line.strip():
            continue
        response = json.dumps(handle_line(line, encoder), ensure_ascii=False) + "\n"
        wfile.write(response if text_mode else response.encode("utf-8"))
        wfile.flush()


def serve_tcp(host: str, port: int, encoder, announce=print) -> None:
    class Handler(socketserver.StreamRequestHandler):
        def handle(self):
            serve_stream(self.rfile, self.wfile, encoder)

    class Server(socketserver.ThreadingTCPServer):
        allow_reuse_address = True
        daemon_threads = True

    with Server((host, port), Handler) as server:
        bound_host, bound_port = server.server_address[:2]
        announce(f"listening on {bound_host}:{bound_port}", flush=True)
        server.serve_forever()


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="embedserver", description="NDJSON embedding service")
    parser.add_argument("--mode", choices=["stdio", "tcp"], default="stdio")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=0, help="0 picks a free port")
    parser.add_argument("--model", default="hash", help="hash or st:<model-name>")
    args = parser.parse_args(argv)

    encoder = make_encoder(args.model)
    if args.mode == "stdio":
        serve_stream(sys.stdin, sys.stdout, encoder)
        return 0
    try:
        serve_tcp(args.host, args.port, encoder)
    except KeyboardInterrupt:
        pass
    return 0


if __name__ == "__main__":
    sys.exit(main())
