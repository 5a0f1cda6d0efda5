"""Gateway client; doubles as a Resolver for verification."""
from __future__ import annotations

import json
import urllib.error
import urllib.request

from ..errors import (
    HeadConflict,
    NotFound,
    ResolverUnavailable,
    UnknownChain,
    VerificationFailed,
)
from ..twine.cid import Cid
from ..twine.records import parse_chain

_CODES = {
    "not_found": NotFound,
    "unknown_chain": UnknownChain,
    "head_conflict": HeadConflict,
    "verification_failed": VerificationFailed,
}


class GatewayClient:
    def __init__(self, base_url: str, token: str | None = None, timeout: float = 30.0):
        self.base_url = base_url.rstrip("/")
        self.token = token
        self.timeout = timeout

    def _request(self, method: str, path: str, body: bytes | None = None) -> tuple[bytes, str]:
        req = urllib.request.Request(self.base_url + path, data=body, method=method)
        if body is not None:
            req.add_header("Content-Type", "application/octet-stream")
        if self.token:
            req.add_header("Authorization", f"Bearer {self.token}")
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                return resp.read(), resp.headers.get("Content-Type", "")
        except urllib.error.HTTPError as exc:
            try:
                err = json.loads(exc.read())
            except ValueError:
                err = {"code": "internal", "message": str(exc)}
            cls = _CODES.get(err.get("code"))
            if cls is None:
                if exc.code == 401:
                    raise PermissionError(err.get("message")) from None
                raise ResolverUnavailable(f"{exc.code}: {err.get('message')}") from None
            raise cls(err.get("message")) from None
        except urllib.error.URLError as exc:
            raise ResolverUnavailable(str(exc)) from None

    def get(self, cid: Cid) -> bytes:
        try:
            return self._request("GET", f"/pulses/{cid}")[0]
        except NotFound:
            return self._request("GET", f"/chains/{cid}")[0]

    def get_at(self, chain: Cid, index: int) -> bytes:
        return self._request("GET", f"/chains/{chain}/pulses/{index}")[0]

    def get_latest(self, chain: Cid) -> bytes:
        return self._request("GET", f"/chains/{chain}/pulses/latest")[0]

    def head(self, chain: Cid) -> Cid | None:
        from ..twine.cid import compute_cid

        try:
            return compute_cid(self.get_latest(chain))
        except NotFound:
            return None

    def chain(self, cid: Cid):
        return parse_chain(self._request("GET", f"/chains/{cid}")[0])

    def list_chains(self) -> list[tuple[Cid, str]]:
        body, _ = self._request("GET", "/chains")
        return [(Cid.parse(d["cid"]), d["source"]) for d in json.loads(body)]

    def put_pulse(self, data: bytes) -> Cid:
        from ..twine.records import parse_pulse

        chain = parse_pulse(data).chain
        body, _ = self._request("POST", f"/chains/{chain}/pulses", data)
        return Cid.parse(json.loads(body)["cid"])

    def put_chain(self, data: bytes) -> Cid:
        body, _ = self._request("POST", "/chains", data)
        return Cid.parse(json.loads(body)["cid"])
