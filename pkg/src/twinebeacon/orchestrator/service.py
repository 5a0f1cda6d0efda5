"""Deployment wiring: config, persistent keys and chain registry."""
from __future__ import annotations

import json
import os
import secrets
import time
from dataclasses import dataclass, field
from importlib import resources

from ..bellsim.source import SourceParams
from ..bellsim.timing import worst_case_scenario
from ..prngchain.chain import PrngChainWriter
from ..prngchain.journal import CommitmentJournal
from ..prngchain.sources import SystemSource, external_source
from ..rsaprng.prng import RsaPrng, generate, open_state, seal_state
from ..store.config import load_config, tomllib
from ..store.store import BeaconStore
from ..twine.cid import Cid
from ..twine.keys import SigningKey
from ..twine.records import build_chain
from .profile import profile_from_config
from .protocol import CHAINS, Beacon
from .upstream import HttpUpstream, MockUpstream


def default_config() -> dict:
    with resources.files("twinebeacon").joinpath("data/default.toml").open("rb") as fh:
        return tomllib.load(fh)


def load(path=None) -> dict:
    """Packaged defaults overlaid with the user's file, section by section."""
    cfg = {k: dict(v) if isinstance(v, dict) else v for k, v in default_config().items()}
    if path is not None:
        for section, values in load_config(path).items():
            if isinstance(values, dict):
                cfg.setdefault(section, {}).update(values)
            else:
                cfg[section] = values
    return cfg


def _write_private(path: str, data: bytes) -> None:
    fd = os.open(path, os.O_WRONLY | os.O_CREAT | os.O_TRUNC, 0o600)
    with os.fdopen(fd, "wb") as fh:
        fh.write(data)


@dataclass
class Deployment:
    data_dir: str
    store: BeaconStore
    cfg: dict
    registry: dict = field(default_factory=dict)  # name -> chain cid text
    keys: dict = field(default_factory=dict)

    @property
    def keys_dir(self) -> str:
        return os.path.join(self.data_dir, "keys")

    @property
    def private_dir(self) -> str:
        return os.path.join(self.data_dir, "private")

    def _registry_path(self) -> str:
        return os.path.join(self.data_dir, "registry.json")

    def save_registry(self) -> None:
        with open(self._registry_path(), "w") as fh:
            json.dump(self.registry, fh, indent=2, sort_keys=True)

    def secret(self, name: str, size: int = 32) -> bytes:
        """A persistent local secret (at-rest encryption keys)."""
        path = os.path.join(self.keys_dir, name)
        if not os.path.exists(path):
            _write_private(path, secrets.token_bytes(size))
        with open(path, "rb") as fh:
            return fh.read()

    def chain(self, name: str, create: bool = True):
        """Chain metadata and signing key for ``name``, creating both if asked."""
        key_path = os.path.join(self.keys_dir, f"{name}.pem")
        if name in self.registry:
            cid = Cid.parse(self.registry[name])
            with open(key_path, "rb") as fh:
                key = SigningKey.from_pem(fh.read())
            self.keys[name] = key
            return self.store.chain(cid), key
        if not create:
            raise KeyError(f"no chain named {name!r}")
        kc = self.cfg.get("keys", {})
        key = SigningKey.generate(kc.get("alg", "RS256"), int(kc.get("bits", 4096)))
        _write_private(key_path, key.to_pem())
        meta, cid = build_chain(key, source=name)
        self.store.put_chain(meta.to_bytes())
        self.registry[name] = str(cid)
        self.keys[name] = key
        self.save_registry()
        return meta, key


def open_deployment(cfg: dict, data_dir: str | None = None) -> Deployment:
    data_dir = data_dir or cfg.get("store", {}).get("data_dir", "beacon-data")
    os.makedirs(os.path.join(data_dir, "keys"), exist_ok=True)
    os.chmod(os.path.join(data_dir, "keys"), 0o700)
    dep = Deployment(data_dir, BeaconStore(os.path.join(data_dir, "store")), cfg)
    if os.path.exists(dep._registry_path()):
        with open(dep._registry_path()) as fh:
            dep.registry = json.load(fh)
    return dep


def make_upstream(cfg: dict, clock=time.time):
    up = cfg.get("upstream", {})
    if up.get("mode", "mock") == "http":
        return HttpUpstream(up["base_url"])
    return MockUpstream(period=float(up.get("period_s", 3.0)), genesis=float(up.get("genesis", 1.6e9)), clock=clock)


def source_params(section: dict | None) -> SourceParams:
    s = dict(section or {})
    if "angles" in s:
        s["angles"] = tuple(float(a) for a in s["angles"])
    return SourceParams(**s)


class PersistentRsaSource:
    """RSA-iteration source whose state is sealed to disk after every read."""

    name = "rsaprng"

    def __init__(self, path: str, key: bytes, bits: int):
        self.path = path
        self.key = key
        if os.path.exists(path):
            with open(path, "rb") as fh:
                state = open_state(fh.read(), key)
        else:
            state = generate(bits).state
            _write_private(path, seal_state(state, key))
        self.prng = RsaPrng(state)

    def read(self, nbytes: int = 64) -> bytes:
        out = self.prng.block(nbytes)
        _write_private(self.path, seal_state(self.prng.state, self.key))
        return out


def build_beacon(dep: Deployment, clock=time.time, sleep=time.sleep, upstream=None) -> Beacon:
    cfg = dep.cfg
    chains, keys = {}, {}
    for name in CHAINS:
        chains[name], keys[name] = dep.chain(name)
    svc = cfg.get("service", {})
    timing = cfg.get("timing", {})
    prng = None
    if svc.get("prng_chain", False):
        meta, key = dep.chain("prng")
        rsa = PersistentRsaSource(
            os.path.join(dep.keys_dir, "rsaprng.state"), dep.secret("state.key"), int(svc.get("rsaprng_bits", 1536))
        )
        journal = CommitmentJournal(dep.secret("journal.key"), os.path.join(dep.data_dir, "journal"))
        prng = PrngChainWriter(meta, key, dep.store, [SystemSource(), external_source(), rsa], journal)
    return Beacon(
        dep.store,
        keys,
        chains,
        profile_from_config(cfg.get("profile")),
        upstream if upstream is not None else make_upstream(cfg, clock),
        source=source_params(cfg.get("source")),
        timing=worst_case_scenario(
            float(timing.get("distance_m", 120.0)), float(timing.get("t1_ns", 49.0)), float(timing.get("t2_ns", 31.3))
        ),
        timing_samples=int(timing.get("samples", 1000)),
        rng_seed=int(svc.get("rng_seed", 0)),
        private_dir=dep.private_dir,
        clock=clock,
        sleep=sleep,
        prng=prng,
    )
