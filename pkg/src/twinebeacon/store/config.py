"""Deployment config: one TOML file shared by store, gateway and orchestrator."""
from __future__ import annotations

import sys

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

DEFAULTS = {
    "store": {"data_dir": "beacon-data", "listen": "127.0.0.1:8080"},
    "tokens": {},
}


def load_config(path) -> dict:
    with open(path, "rb") as fh:
        cfg = tomllib.load(fh)
    out = {k: dict(v) for k, v in DEFAULTS.items()}
    for section, values in cfg.items():
        if isinstance(values, dict):
            out.setdefault(section, {}).update(values)
        else:
            out[section] = values
    return out


def parse_listen(listen: str) -> tuple[str, int]:
    host, _, port = listen.rpartition(":")
    return host or "127.0.0.1", int(port)
