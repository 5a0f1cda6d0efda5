"""Canonical encoding, content IDs, signatures, links and order proofs."""
import dataclasses
import hashlib
import random

import cbor2
import pytest
from hypothesis import given, strategies as st

from conftest import grow, new_chain
from twinebeacon.errors import (
    DecodeError,
    HeadMismatch,
    InvalidRadix,
    ResolverMiss,
    UnsupportedAlgorithm,
    UnsupportedValue,
)
from twinebeacon.twine import (
    Cid,
    MemoryResolver,
    SigningKey,
    build_chain,
    build_pulse,
    canonical_parse,
    canonical_serialize,
    compute_cid,
    decode_real,
    encode_real,
    parse_pulse,
    prove_order,
    skip_link_indices,
    verify_chain_metadata,
    verify_detached,
    verify_order_proof,
    verify_pulse,
)
from twinebeacon.twine.keys import signing_digest

# -- canonical serialization -------------------------------------------------

plain = st.recursive(
    st.none()
    | st.booleans()
    | st.integers(min_value=-(2**64), max_value=2**64 - 1)
    | st.binary(max_size=40)
    | st.text(max_size=20),
    lambda kids: st.lists(kids, max_size=5) | st.dictionaries(st.text(max_size=8), kids, max_size=5),
    max_leaves=25,
)


def test_empty_map_is_one_byte():
    assert canonical_serialize({}) == b"\xa0"


def test_insertion_order_irrelevant():
    assert canonical_serialize({"a": 1, "b": 2}) == canonical_serialize({"b": 2, "a": 1})


def test_keys_sorted_length_first():
    data = canonical_serialize({"bb": 1, "a": 2, "c": 3})
    assert list(cbor2.loads(data)) == ["a", "c", "bb"]


@pytest.mark.parametrize("bad", [1.5, {1: 2}, {"x": [0.0]}, object(), 2**64])
def test_rejects_unsupported(bad):
    with pytest.raises(UnsupportedValue):
        canonical_serialize(bad)


@given(plain)
def test_roundtrip_and_matches_reference_decoder(value):
    data = canonical_serialize(value)
    back = canonical_parse(data)
    assert canonical_serialize(back) == data
    # an independent decoder reads the same structure
    assert cbor2.loads(data) == _normalize(value)


@given(plain)
def test_matches_reference_canonical_encoder(value):
    assert canonical_serialize(value) == cbor2.dumps(value, canonical=True)


def _normalize(v):
    if isinstance(v, tuple):
        return [_normalize(x) for x in v]
    if isinstance(v, list):
        return [_normalize(x) for x in v]
    if isinstance(v, dict):
        return {k: _normalize(x) for k, x in v.items()}
    return v


@pytest.mark.parametrize(
    "raw",
    [
        b"\x18\x05",  # non-shortest integer head
        b"\xbf\xff",  # indefinite-length map
        b"\xa2\x61b\x01\x61a\x02",  # keys out of order
        b"\xf9\x3c\x00",  # half float
        b"\x01\x01",  # trailing bytes
    ],
)
def test_strict_decoder_rejects_noncanonical(raw):
    with pytest.raises(DecodeError):
        canonical_parse(raw)


@given(st.floats(allow_nan=False))
def test_real_text_encoding_is_exact(x):
    assert decode_real(encode_real(x)) == x


# -- content IDs ---------------------------------------------------------------

def test_cid_text_shape():
    cid = compute_cid(canonical_serialize({"hello": "world"}))
    text = str(cid)
    assert text.startswith("bafyriq")
    assert text == text.lower() and "=" not in text
    # 4 header bytes + 64 digest bytes in unpadded base32
    assert len(text) == 1 + -(-68 * 8 // 5)
    assert Cid.parse(text) == cid


def test_cid_digest_is_sha3_512():
    data = b"\xa1\x61a\x01"
    cid = compute_cid(data)
    assert cid.digest == hashlib.sha3_512(data).digest()
    assert cid.matches(data)
    assert cid.to_bytes()[:4] == bytes([0x01, 0x71, 0x14, 0x40])


def test_cid_deterministic():
    data = canonical_serialize({"k": [1, 2, 3]})
    assert compute_cid(data) == compute_cid(data)


def test_cid_single_bit_avalanche():
    rng = random.Random(7)
    data = bytearray(canonical_serialize({"payload": bytes(range(200))}))
    base = compute_cid(bytes(data))
    for _ in range(100):
        i, b = rng.randrange(len(data)), rng.randrange(8)
        data[i] ^= 1 << b
        assert compute_cid(bytes(data)).digest != base.digest
        data[i] ^= 1 << b


def test_unknown_hash_rejected():
    with pytest.raises(UnsupportedAlgorithm):
        compute_cid(b"x", hash_alg="md5")


def test_cid_roundtrips_inside_records():
    cid = compute_cid(b"abc")
    rec = {"link": cid, "list": [cid]}
    assert canonical_parse(canonical_serialize(rec)) == rec
    tag = cbor2.loads(canonical_serialize(cid))
    assert tag.tag == 42 and tag.value == b"\x00" + cid.to_bytes()


# -- keys and chains -------------------------------------------------------------

def test_rs256_is_4096_and_deterministic(rs_key):
    assert rs_key.alg == "RS256" and rs_key.key_size == 4096
    msg = signing_digest(b"payload")
    assert rs_key.sign_detached(msg) == rs_key.sign_detached(msg)
    assert verify_detached(rs_key.public_jwk(), msg, rs_key.sign_detached(msg))


def test_es256_sign_verify(es_key):
    msg = signing_digest(b"payload")
    jws = es_key.sign_detached(msg)
    assert verify_detached(es_key.public_jwk(), msg, jws)
    assert not verify_detached(es_key.public_jwk(), signing_digest(b"other"), jws)


def test_chain_signature_and_tamper(es_key):
    chain, cid = build_chain(es_key, source="alice")
    assert verify_chain_metadata(chain, cid).ok
    forged = dataclasses.replace(chain, source="mallory")
    assert not verify_chain_metadata(forged).signature_ok


def test_chain_identity_depends_on_key(es_key):
    other = SigningKey.generate("ES256")
    a, _ = build_chain(es_key, source="same", meta={"x": 1})
    b, _ = build_chain(other, source="same", meta={"x": 1})
    assert a.cid != b.cid


@pytest.mark.parametrize("radix", [0, 1, 2.5])
def test_bad_radix(es_key, radix):
    with pytest.raises(InvalidRadix):
        build_chain(es_key, source="x", links_radix=radix)


# -- skip links --------------------------------------------------------------------

@pytest.mark.parametrize(
    "index,radix,expected",
    [(0, 10, []), (7, 10, [6]), (10, 10, [9, 0]), (100, 10, [99, 90, 0]), (120, 10, [119, 110]), (8, 2, [7, 6, 4, 0])],
)
def test_skip_link_rule_by_hand(index, radix, expected):
    assert skip_link_indices(index, radix) == expected


@given(st.integers(1, 10**6), st.integers(2, 16))
def test_skip_links_property(index, radix):
    links = skip_link_indices(index, radix)
    assert links[0] == index - 1
    want = [index - radix**j for j in range(1, 64) if radix**j <= index and index % radix**j == 0]
    assert links[1:] == want


def test_pulse_links_on_chain(es_key):
    res = MemoryResolver()
    chain, _ = build_chain(es_key, source="s")
    res.add(chain)
    pulses, prev = [], None
    for i in range(12):
        prev, _ = build_pulse(chain, prev, res, payload={"i": i}, signing_key=es_key)
        res.add(prev)
        pulses.append(prev)
    assert pulses[0].links == ()
    assert pulses[7].links == (pulses[6].cid,)
    assert pulses[10].links == (pulses[9].cid, pulses[0].cid)
    for p in pulses:
        assert verify_pulse(p, chain, res, p.cid).ok


def test_build_pulse_requires_head(es_key):
    res = MemoryResolver()
    chain, _ = build_chain(es_key, source="s")
    p0, _ = build_pulse(chain, None, res, signing_key=es_key)
    res.add(p0)
    with pytest.raises(HeadMismatch):
        build_pulse(chain, None, res, signing_key=es_key)
    p1, _ = build_pulse(chain, p0, res, signing_key=es_key)
    res.add(p1)
    with pytest.raises(HeadMismatch):
        build_pulse(chain, p0, res, signing_key=es_key)


def test_missing_skip_target(es_key):
    res = MemoryResolver()
    chain, _ = build_chain(es_key, source="s", links_radix=2)
    prev = None
    for _ in range(2):
        prev, _ = build_pulse(chain, prev, res, signing_key=es_key)
        res.add(prev)
    lonely = MemoryResolver()
    lonely.add(prev)
    with pytest.raises(ResolverMiss):
        build_pulse(chain, prev, lonely, signing_key=es_key)


def test_pulse_roundtrip_bytes(es_key):
    res = MemoryResolver()
    chain, _ = build_chain(es_key, source="s")
    p, cid = build_pulse(chain, None, res, payload={"nested": {"b": b"\x00", "l": [1, "x"]}}, signing_key=es_key)
    data = p.to_bytes()
    assert parse_pulse(data).to_bytes() == data
    assert compute_cid(data) == cid


# -- verification ------------------------------------------------------------------

def _small_chain(key, n=5):
    res = MemoryResolver()
    chain, _ = build_chain(key, source="s")
    res.add(chain)
    prev, out = None, []
    for i in range(n):
        prev, _ = build_pulse(chain, prev, res, payload={"i": i}, signing_key=key)
        res.add(prev)
        out.append(prev)
    return res, chain, out


def test_payload_mutation(es_key):
    res, chain, ps = _small_chain(es_key)
    p = ps[3]
    bad = dataclasses.replace(p, payload={"i": 99})
    rep = verify_pulse(bad, chain, res, p.cid)
    assert not rep.cid_ok and not rep.signature_ok and not rep.ok


def test_link_repointed(es_key):
    res, chain, ps = _small_chain(es_key)
    p = ps[4]
    unsigned = dataclasses.replace(p, links=(ps[2].cid,), signature=b"")
    sig = es_key.sign_detached(signing_digest(canonical_serialize(unsigned.unsigned_record())))
    bad = dataclasses.replace(unsigned, signature=sig)
    rep = verify_pulse(bad, chain, res)
    assert rep.signature_ok and not rep.link_ok


def test_wrong_chain_key(es_key):
    res, chain, ps = _small_chain(es_key)
    other, _ = build_chain(SigningKey.generate("ES256"), source="s")
    assert not verify_pulse(ps[1], other, res).ok


# -- order proofs --------------------------------------------------------------------

def test_consecutive_order(es_key):
    res, chain, ps = _small_chain(es_key)
    proof = prove_order(ps[1].cid, ps[2].cid, res)
    assert proof.earlier == ps[1].cid and proof.path == (ps[2].cid, ps[1].cid)
    assert verify_order_proof(proof, res)
    again = prove_order(ps[2].cid, ps[1].cid, res)
    assert again.earlier == ps[1].cid


def test_unrelated_genesis_no_path(es_key):
    res = MemoryResolver()
    a, _ = build_chain(es_key, source="a")
    b, _ = build_chain(es_key, source="b")
    pa, _ = build_pulse(a, None, res, signing_key=es_key)
    pb, _ = build_pulse(b, None, res, signing_key=es_key)
    res.add(pa)
    res.add(pb)
    assert prove_order(pa.cid, pb.cid, res) is None


def test_order_proof_rejects_broken_hop(es_key):
    res, chain, ps = _small_chain(es_key)
    proof = prove_order(ps[0].cid, ps[3].cid, res)
    forged = dataclasses.replace(proof, path=(ps[3].cid, ps[0].cid))
    assert len(proof.path) == 4
    assert not verify_order_proof(forged, res)


def test_toy_figure_relations(store, es_key):
    """Three parties mixing in their neighbours' latest pulses."""
    keys = {n: SigningKey.generate("ES256") for n in "ABC"}
    chains = {n: new_chain(store, keys[n], source=n) for n in "ABC"}
    x = grow(store, chains["C"], keys["C"], 1)[0]
    h = grow(store, chains["B"], keys["B"], 1)[0]
    i = grow(store, chains["B"], keys["B"], 1, mixins=lambda _: [(chains["C"].cid, x.cid)])[0]
    a = grow(store, chains["A"], keys["A"], 1)[0]
    b = grow(store, chains["A"], keys["A"], 1, mixins=lambda _: [(chains["B"].cid, i.cid)])[0]
    j = grow(store, chains["B"], keys["B"], 1, mixins=lambda _: [(chains["A"].cid, b.cid)])[0]

    after_i = prove_order(i.cid, b.cid, store)
    before_j = prove_order(b.cid, j.cid, store)
    assert after_i.earlier == i.cid and verify_order_proof(after_i, store)
    assert before_j.earlier == b.cid and verify_order_proof(before_j, store)
    via_i = prove_order(x.cid, b.cid, store)
    assert via_i.earlier == x.cid and i.cid in via_i.path
    assert prove_order(a.cid, h.cid, store) is None
