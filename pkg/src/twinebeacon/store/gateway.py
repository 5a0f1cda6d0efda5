"""HTTP/1.1 gateway: public reads, bearer-token authenticated appends."""
from __future__ import annotations

import hmac
import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import unquote

from ..errors import (
    DecodeError,
    HeadConflict,
    NotFound,
    UnknownChain,
    VerificationFailed,
)
from ..twine.cid import Cid
from ..twine.records import parse_pulse
from .store import BeaconStore

OCTET = "application/octet-stream"

_STATUS = {
    NotFound: (404, "not_found"),
    UnknownChain: (404, "unknown_chain"),
    HeadConflict: (409, "head_conflict"),
    VerificationFailed: (422, "verification_failed"),
    DecodeError: (400, "bad_request"),
}


class _Handler(BaseHTTPRequestHandler):
    server_version = "twinebeacon/0.1"
    protocol_version = "HTTP/1.1"

    store: BeaconStore
    tokens: dict

    def log_message(self, fmt, *args):  # quiet by default
        pass

    def _send(self, status: int, body: bytes, ctype: str) -> None:
        self.send_response(status)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _json(self, status: int, obj) -> None:
        self._send(status, json.dumps(obj).encode(), "application/json")

    def _error(self, status: int, code: str, message: str) -> None:
        self._json(status, {"code": code, "message": message})

    def _fail(self, exc: Exception) -> None:
        for cls, (status, code) in _STATUS.items():
            if isinstance(exc, cls):
                return self._error(status, code, str(exc))
        return self._error(500, "internal", str(exc))

    def _parts(self) -> list[str]:
        path = self.path.split("?", 1)[0]
        return [unquote(p) for p in path.strip("/").split("/") if p]

    def do_GET(self):
        parts = self._parts()
        try:
            if parts == ["chains"]:
                return self._json(
                    200, [{"cid": str(c), "source": s} for c, s in self.store.list_chains()]
                )
            if len(parts) == 2 and parts[0] == "chains":
                cid = Cid.parse(parts[1])
                self.store.chain(cid)
                return self._send(200, self.store.get(cid), OCTET)
            if len(parts) == 4 and parts[0] == "chains" and parts[2] == "pulses":
                chain = Cid.parse(parts[1])
                which = parts[3]
                sel = (chain, "latest") if which == "latest" else (chain, int(which))
                return self._send(200, self.store.get_pulse(sel), OCTET)
            if len(parts) == 2 and parts[0] == "pulses":
                return self._send(200, self.store.get_pulse(Cid.parse(parts[1])), OCTET)
        except ValueError as exc:
            if not isinstance(exc, DecodeError):
                return self._error(400, "bad_request", str(exc))
            return self._fail(exc)
        except Exception as exc:
            return self._fail(exc)
        return self._error(404, "not_found", "no such route")

    def _authorized(self, chain_text: str) -> bool:
        auth = self.headers.get("Authorization", "")
        if not auth.startswith("Bearer "):
            return False
        token = auth[len("Bearer ") :]
        for key in (chain_text, "*"):
            want = self.tokens.get(key)
            if want and hmac.compare_digest(want, token):
                return True
        return False

    def do_POST(self):
        parts = self._parts()
        length = int(self.headers.get("Content-Length", "0"))
        body = self.rfile.read(length)
        try:
            if len(parts) == 3 and parts[0] == "chains" and parts[2] == "pulses":
                if not self._authorized(parts[1]):
                    return self._error(401, "unauthorized", "missing or bad bearer token")
                chain = Cid.parse(parts[1])
                try:
                    target = parse_pulse(body).chain
                except DecodeError as exc:
                    raise VerificationFailed(f"not a pulse: {exc}") from None
                if target != chain:
                    return self._error(400, "bad_request", "pulse belongs to another chain")
                cid = self.store.put_pulse(body)
                return self._json(201, {"cid": str(cid)})
            if parts == ["chains"]:
                if not self._authorized("*"):
                    return self._error(401, "unauthorized", "admin token required")
                cid = self.store.put_chain(body)
                return self._json(201, {"cid": str(cid)})
        except Exception as exc:
            return self._fail(exc)
        return self._error(404, "not_found", "no such route")


class Gateway:
    """Run the HTTP API for a store on a background thread."""

    def __init__(self, store: BeaconStore, host: str = "127.0.0.1", port: int = 0, tokens=None):
        handler = type("Handler", (_Handler,), {"store": store, "tokens": dict(tokens or {})})
        self.httpd = ThreadingHTTPServer((host, port), handler)
        self.httpd.daemon_threads = True
        self._thread: threading.Thread | None = None

    @property
    def url(self) -> str:
        host, port = self.httpd.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "Gateway":
        self._thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def serve_forever(self) -> None:
        self.httpd.serve_forever()

    def stop(self) -> None:
        self.httpd.shutdown()
        self.httpd.server_close()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()
