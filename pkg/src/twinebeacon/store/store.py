"""Content-addressed, append-only persistence for chains and pulses."""
from __future__ import annotations

import os
import threading
import time
from dataclasses import dataclass

from ..errors import (
    DecodeError,
    HeadConflict,
    NotFound,
    UnknownChain,
    VerificationFailed,
)
from ..twine.cid import Cid, compute_cid
from ..twine.records import ChainMetadata, Pulse, parse_chain, parse_pulse
from ..twine.verify import verify_chain_metadata, verify_pulse


@dataclass(frozen=True)
class StoreRecord:
    cid: Cid
    kind: str  # "pulse" | "chain"
    bytes: bytes
    chain: Cid | None = None
    index: int | None = None
    received_at: float = 0.0


@dataclass(frozen=True)
class ChainHead:
    chain: Cid
    head_pulse: Cid
    head_index: int


class BeaconStore:
    """Stores records exactly as hashed.

    With ``data_dir`` set, each chain gets an append-only log of
    length-prefixed pulse records and chain metadata is kept one file per
    CID; the in-memory indexes are rebuilt from disk on open. Without it
    the store lives in memory only.
    """

    def __init__(self, data_dir: str | os.PathLike | None = None):
        self.data_dir = os.fspath(data_dir) if data_dir is not None else None
        self._chains: dict[Cid, ChainMetadata] = {}
        self._records: dict[Cid, StoreRecord] = {}
        self._at: dict[tuple[Cid, int], Cid] = {}
        self._heads: dict[Cid, ChainHead] = {}
        self._offsets: dict[Cid, tuple[str, int, int]] = {}
        self._locks: dict[Cid, threading.Lock] = {}
        self._global = threading.Lock()
        if self.data_dir is not None:
            os.makedirs(os.path.join(self.data_dir, "chains"), exist_ok=True)
            os.makedirs(os.path.join(self.data_dir, "pulses"), exist_ok=True)
            self._load()

    # -- persistence -----------------------------------------------------
    def _chain_path(self, cid: Cid) -> str:
        return os.path.join(self.data_dir, "chains", cid.encode())

    def _log_path(self, chain: Cid) -> str:
        return os.path.join(self.data_dir, "pulses", chain.encode() + ".log")

    def _load(self) -> None:
        chain_dir = os.path.join(self.data_dir, "chains")
        for name in sorted(os.listdir(chain_dir)):
            with open(os.path.join(chain_dir, name), "rb") as fh:
                data = fh.read()
            cid = Cid.parse(name)
            self._index_chain(cid, data)
        for chain in list(self._chains):
            path = self._log_path(chain)
            if not os.path.exists(path):
                continue
            with open(path, "rb") as fh:
                blob = fh.read()
            pos = 0
            while pos + 4 <= len(blob):
                size = int.from_bytes(blob[pos : pos + 4], "big")
                data = blob[pos + 4 : pos + 4 + size]
                if len(data) != size:
                    break  # torn tail write; ignore the partial record
                self._index_pulse(compute_cid(data), data, parse_pulse(data), (path, pos + 4, size))
                pos += 4 + size

    def _index_chain(self, cid: Cid, data: bytes) -> None:
        self._chains[cid] = parse_chain(data)
        self._records[cid] = StoreRecord(cid, "chain", data, received_at=time.time())

    def _index_pulse(self, cid: Cid, data: bytes, pulse: Pulse, where=None) -> None:
        self._records[cid] = StoreRecord(
            cid, "pulse", data, pulse.chain, pulse.index, received_at=time.time()
        )
        self._at[(pulse.chain, pulse.index)] = cid
        self._heads[pulse.chain] = ChainHead(pulse.chain, cid, pulse.index)
        if where is not None:
            self._offsets[cid] = where

    def _lock(self, chain: Cid) -> threading.Lock:
        with self._global:
            return self._locks.setdefault(chain, threading.Lock())

    # -- writes ------------------------------------------------------------
    def put_chain(self, data: bytes) -> Cid:
        try:
            chain = parse_chain(data)
        except DecodeError as exc:
            raise VerificationFailed(f"not chain metadata: {exc}") from None
        cid = compute_cid(data)
        report = verify_chain_metadata(chain, cid)
        if not report.ok:
            raise VerificationFailed("; ".join(report.details))
        with self._global:
            if cid in self._chains:
                return cid
            if self.data_dir is not None:
                tmp = self._chain_path(cid) + ".tmp"
                with open(tmp, "wb") as fh:
                    fh.write(data)
                    fh.flush()
                    os.fsync(fh.fileno())
                os.replace(tmp, self._chain_path(cid))
            self._index_chain(cid, data)
        return cid

    def put_pulse(self, data: bytes) -> Cid:
        try:
            pulse = parse_pulse(data)
        except DecodeError as exc:
            raise VerificationFailed(f"not a pulse: {exc}") from None
        cid = compute_cid(data)
        chain = self._chains.get(pulse.chain)
        if chain is None:
            raise UnknownChain(str(pulse.chain))
        with self._lock(pulse.chain):
            if cid in self._records:
                return cid
            head = self._heads.get(pulse.chain)
            want = 0 if head is None else head.head_index + 1
            if pulse.index != want:
                raise HeadConflict(f"index {pulse.index} but next index is {want}")
            report = verify_pulse(pulse, chain, self, cid)
            if not report.ok:
                raise VerificationFailed("; ".join(report.details))
            where = None
            if self.data_dir is not None:
                path = self._log_path(pulse.chain)
                with open(path, "ab") as fh:
                    offset = fh.tell()
                    fh.write(len(data).to_bytes(4, "big") + data)
                    fh.flush()
                    os.fsync(fh.fileno())
                where = (path, offset + 4, len(data))
            self._index_pulse(cid, data, pulse, where)
        return cid

    # -- reads -------------------------------------------------------------
    def get(self, cid: Cid) -> bytes:
        rec = self._records.get(cid)
        if rec is None:
            raise NotFound(str(cid))
        return rec.bytes

    def get_at(self, chain: Cid, index: int) -> bytes:
        cid = self._at.get((chain, index))
        if cid is None:
            raise NotFound(f"{chain} @ {index}")
        return self.get(cid)

    def get_latest(self, chain: Cid) -> bytes:
        head = self._heads.get(chain)
        if head is None:
            raise NotFound(f"{chain} has no pulses")
        return self.get(head.head_pulse)

    def get_pulse(self, selector) -> bytes:
        """``selector`` is a Cid, ``(chain, index)`` or ``(chain, "latest")``."""
        if isinstance(selector, Cid):
            rec = self._records.get(selector)
            if rec is None or rec.kind != "pulse":
                raise NotFound(str(selector))
            return rec.bytes
        chain, which = selector
        if which == "latest":
            return self.get_latest(chain)
        return self.get_at(chain, int(which))

    def head(self, chain: Cid) -> Cid | None:
        head = self._heads.get(chain)
        return head.head_pulse if head else None

    def chain_head(self, chain: Cid) -> ChainHead | None:
        return self._heads.get(chain)

    def chain(self, cid: Cid) -> ChainMetadata:
        try:
            return self._chains[cid]
        except KeyError:
            raise UnknownChain(str(cid)) from None

    def list_chains(self) -> list[tuple[Cid, str]]:
        return sorted(((c, m.source) for c, m in self._chains.items()), key=lambda t: t[0].encode())

    def pulses(self, chain: Cid):
        """Yield ``(cid, pulse)`` in index order."""
        head = self._heads.get(chain)
        if head is None:
            return
        for i in range(head.head_index + 1):
            cid = self._at[(chain, i)]
            yield cid, parse_pulse(self._records[cid].bytes)

    def records(self):
        return list(self._records.values())

    def __contains__(self, cid: Cid) -> bool:
        return cid in self._records

    def audit(self) -> list[str]:
        """Full scan: every key re-derives from its bytes, heads are contiguous."""
        problems = []
        for cid, rec in list(self._records.items()):
            data = rec.bytes
            if cid in self._offsets:
                path, off, size = self._offsets[cid]
                with open(path, "rb") as fh:
                    fh.seek(off)
                    data = fh.read(size)
            if compute_cid(data) != cid:
                problems.append(f"{cid}: stored bytes do not match key")
        for chain, head in self._heads.items():
            for i in range(head.head_index + 1):
                if (chain, i) not in self._at:
                    problems.append(f"{chain}: missing index {i}")
        return problems
