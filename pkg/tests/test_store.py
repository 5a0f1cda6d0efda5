"""Append-only store, persistence and the HTTP gateway."""
import dataclasses
import json
import threading
import urllib.request

import pytest

from conftest import grow, new_chain
from twinebeacon.errors import HeadConflict, NotFound, UnknownChain, VerificationFailed
from twinebeacon.store import BeaconStore, Gateway, GatewayClient
from twinebeacon.twine import SigningKey, build_chain, build_pulse, compute_cid, parse_pulse, verify_pulse


def test_sequential_append_and_selectors(store, es_key):
    chain = new_chain(store, es_key)
    ps = grow(store, chain, es_key, 3)
    head = store.chain_head(chain.cid)
    assert head.head_index == 2 and head.head_pulse == ps[2].cid
    assert parse_pulse(store.get_pulse((chain.cid, "latest"))).index == 2
    assert store.get_pulse((chain.cid, 0)) == ps[0].to_bytes()
    data = store.get_pulse(ps[1].cid)
    assert compute_cid(data) == ps[1].cid


def test_idempotent_put(store, es_key):
    chain = new_chain(store, es_key)
    p = grow(store, chain, es_key, 1)[0]
    assert store.put_pulse(p.to_bytes()) == p.cid
    assert len([r for r in store.records() if r.kind == "pulse"]) == 1


def test_gap_is_head_conflict(store, es_key):
    chain = new_chain(store, es_key)
    grow(store, chain, es_key, 4)
    # a pulse at index 5 from a fork that saw an extra pulse at index 4
    side = BeaconStore()
    side.put_chain(chain.to_bytes())
    for cid, p in store.pulses(chain.cid):
        side.put_pulse(p.to_bytes())
    p5 = grow(side, chain, es_key, 2)[-1]
    assert p5.index == 5
    with pytest.raises(HeadConflict):
        store.put_pulse(p5.to_bytes())


def test_fork_rejected(store, es_key):
    chain = new_chain(store, es_key)
    p0 = grow(store, chain, es_key, 1)[0]
    grow(store, chain, es_key, 1)
    alt, _ = build_pulse(chain, p0, None, payload={"alt": True}, signing_key=es_key)
    with pytest.raises(HeadConflict):
        store.put_pulse(alt.to_bytes())


def test_unknown_chain(store, es_key):
    chain, _ = build_chain(es_key, source="nowhere")
    p, _ = build_pulse(chain, None, None, signing_key=es_key)
    with pytest.raises(UnknownChain):
        store.put_pulse(p.to_bytes())


def test_bad_signature_rejected(store, es_key):
    chain = new_chain(store, es_key)
    p, _ = build_pulse(chain, None, store, signing_key=es_key)
    bad = dataclasses.replace(p, signature=p.signature[:-2] + b"AA")
    with pytest.raises(VerificationFailed):
        store.put_pulse(bad.to_bytes())
    forged = dataclasses.replace(chain, source="other")
    with pytest.raises(VerificationFailed):
        store.put_chain(forged.to_bytes())


def test_not_found(store, es_key):
    chain = new_chain(store, es_key)
    with pytest.raises(NotFound):
        store.get_pulse((chain.cid, "latest"))
    with pytest.raises(NotFound):
        store.get_at(chain.cid, 0)


def test_list_chains_ordered(store):
    keys = [SigningKey.generate("ES256") for _ in range(3)]
    chains = [new_chain(store, k, source=f"src{i}") for i, k in enumerate(keys)]
    listed = store.list_chains()
    assert [c for c, _ in listed] == sorted(c.cid for c in chains)
    assert {s for _, s in listed} == {"src0", "src1", "src2"}


def test_persistence_and_audit(tmp_path, es_key):
    s = BeaconStore(tmp_path)
    chain = new_chain(s, es_key)
    ps = grow(s, chain, es_key, 25)
    reopened = BeaconStore(tmp_path)
    assert reopened.chain_head(chain.cid).head_index == 24
    assert reopened.get(ps[11].cid) == ps[11].to_bytes()
    assert reopened.audit() == []
    more = grow(reopened, chain, es_key, 1)[0]
    assert verify_pulse(more, chain, reopened).ok


def test_audit_detects_corrupt_log(tmp_path, es_key):
    s = BeaconStore(tmp_path)
    chain = new_chain(s, es_key)
    grow(s, chain, es_key, 3)
    log = next((tmp_path / "pulses").iterdir())
    raw = bytearray(log.read_bytes())
    raw[-3] ^= 0x01
    log.write_bytes(bytes(raw))
    assert s.audit()


def test_concurrent_appends_are_linear(store, es_key):
    chain = new_chain(store, es_key)
    p0 = grow(store, chain, es_key, 1)[0]
    candidates = [build_pulse(chain, p0, store, payload={"w": w}, signing_key=es_key)[0] for w in range(8)]
    results = []

    def put(p):
        try:
            store.put_pulse(p.to_bytes())
            results.append("ok")
        except HeadConflict:
            results.append("conflict")

    threads = [threading.Thread(target=put, args=(p,)) for p in candidates]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert results.count("ok") == 1
    assert store.chain_head(chain.cid).head_index == 1


# -- gateway ------------------------------------------------------------------------

@pytest.fixture
def gateway(store):
    with Gateway(store, tokens={"*": "admin-token"}) as gw:
        yield gw


def test_gateway_read_write(store, gateway, es_key):
    chain, _ = build_chain(es_key, source="gw")
    writer = GatewayClient(gateway.url, token="admin-token")
    assert writer.put_chain(chain.to_bytes()) == chain.cid
    prev = None
    for i in range(12):
        prev, _ = build_pulse(chain, prev, writer, payload={"i": i}, signing_key=es_key)
        assert writer.put_pulse(prev.to_bytes()) == prev.cid
    reader = GatewayClient(gateway.url)
    assert reader.head(chain.cid) == prev.cid
    assert reader.get_at(chain.cid, 3) == store.get_at(chain.cid, 3)
    assert verify_pulse(prev, reader.chain(chain.cid), reader).ok
    assert (chain.cid, "gw") in reader.list_chains()


def test_gateway_errors(store, gateway, es_key):
    chain = new_chain(store, es_key)
    p0 = grow(store, chain, es_key, 1)[0]
    anon = GatewayClient(gateway.url)
    p1, _ = build_pulse(chain, p0, store, signing_key=es_key)
    with pytest.raises(PermissionError):
        anon.put_pulse(p1.to_bytes())
    writer = GatewayClient(gateway.url, token="admin-token")
    rival_genesis, _ = build_pulse(chain, None, None, payload={"rival": True}, signing_key=es_key)
    with pytest.raises(HeadConflict):
        writer.put_pulse(rival_genesis.to_bytes())
    with pytest.raises(NotFound):
        anon.get_at(chain.cid, 7)
    try:
        urllib.request.urlopen(gateway.url + "/chains/not-a-cid")
    except urllib.error.HTTPError as exc:
        assert exc.code == 400
        assert json.loads(exc.read())["code"] == "bad_request"
    else:
        pytest.fail("expected HTTP 400")


def test_gateway_per_chain_token(store, es_key):
    chain = new_chain(store, es_key)
    with Gateway(store, tokens={str(chain.cid): "chain-token"}) as gw:
        p0, _ = build_pulse(chain, None, store, signing_key=es_key)
        assert GatewayClient(gw.url, token="chain-token").put_pulse(p0.to_bytes()) == p0.cid
        with pytest.raises(PermissionError):
            GatewayClient(gw.url, token="wrong").put_pulse(build_pulse(chain, p0, store, signing_key=es_key)[0].to_bytes())
