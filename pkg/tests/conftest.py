import os

import pytest
from hypothesis import HealthCheck, settings

from twinebeacon.store import BeaconStore
from twinebeacon.twine import SigningKey, build_chain, build_pulse

DATA = os.path.join(os.path.dirname(__file__), "data")

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def es_key():
    return SigningKey.generate("ES256")


@pytest.fixture(scope="session")
def rs_key():
    """Pinned RS256/4096 key; PKCS#1 v1.5 signatures are deterministic."""
    with open(os.path.join(DATA, "rs256_test_key.pem"), "rb") as fh:
        return SigningKey.from_pem(fh.read())


@pytest.fixture
def store():
    return BeaconStore()


def grow(store, chain, key, n, payload=lambda i: {"i": i}, mixins=lambda i: ()):
    """Append ``n`` pulses to ``chain`` in ``store``; returns the pulses."""
    out = []
    head = None
    cid = store.head(chain.cid)
    if cid is not None:
        from twinebeacon.twine import parse_pulse

        head = parse_pulse(store.get(cid))
    for _ in range(n):
        i = 0 if head is None else head.index + 1
        head, _ = build_pulse(chain, head, store, mixins=mixins(i), payload=payload(i), signing_key=key)
        store.put_pulse(head.to_bytes())
        out.append(head)
    return out


def new_chain(store, key, source="test", **kw):
    chain, _ = build_chain(key, source=source, **kw)
    store.put_chain(chain.to_bytes())
    return chain
