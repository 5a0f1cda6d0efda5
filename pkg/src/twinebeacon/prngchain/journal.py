"""Encrypted journal of pending commitments, keyed by pulse index."""
from __future__ import annotations

import os
import secrets
import threading

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from ..errors import DecodeError


class CommitmentJournal:
    """local randomness committed by pulse ``index``, sealed with AES-GCM.

    With ``path`` unset the journal lives in memory only.
    """

    def __init__(self, key: bytes, path: str | os.PathLike | None = None):
        self._aead = AESGCM(key)
        self._path = os.fspath(path) if path is not None else None
        self._mem: dict[int, bytes] = {}
        self._lock = threading.Lock()
        if self._path:
            os.makedirs(self._path, exist_ok=True)

    def _file(self, index: int) -> str:
        return os.path.join(self._path, f"{index:012d}.bin")

    def put(self, index: int, local_rand: bytes) -> None:
        nonce = secrets.token_bytes(12)
        blob = nonce + self._aead.encrypt(nonce, local_rand, index.to_bytes(8, "big"))
        with self._lock:
            self._mem[index] = blob
            if self._path:
                tmp = self._file(index) + ".tmp"
                with open(tmp, "wb") as fh:
                    fh.write(blob)
                    fh.flush()
                    os.fsync(fh.fileno())
                os.replace(tmp, self._file(index))

    def get(self, index: int) -> bytes | None:
        with self._lock:
            blob = self._mem.get(index)
            if blob is None and self._path and os.path.exists(self._file(index)):
                with open(self._file(index), "rb") as fh:
                    blob = fh.read()
        if blob is None:
            return None
        try:
            return self._aead.decrypt(blob[:12], blob[12:], index.to_bytes(8, "big"))
        except InvalidTag:
            raise DecodeError(f"journal entry {index} failed authentication") from None

    def forget(self, index: int) -> None:
        """Drop an entry once its successor pulse is published."""
        with self._lock:
            self._mem.pop(index, None)
            if self._path and os.path.exists(self._file(index)):
                os.remove(self._file(index))
