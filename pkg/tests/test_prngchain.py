"""Pre/salt commitment chain, its sources, journal and output values."""
import dataclasses
import hashlib
import json
import os
import random

import numpy as np
import pytest

from conftest import DATA, new_chain
from twinebeacon.errors import CommitmentMismatch, DecodeError, GenesisInvalid, SourceUnavailable
from twinebeacon.prngchain.chain import (
    COMMITMENT_BREAK,
    ZERO_SALT,
    PrngChainWriter,
    PrngPayload,
    build_prng_pulse,
    output_value,
    verify_prng_pair,
)
from twinebeacon.prngchain.journal import CommitmentJournal
from twinebeacon.prngchain.sources import ChaChaSource, FixedSource, RsaSource, SystemSource, combine_sources, read_all
from twinebeacon.rsaprng.prng import RsaPrng, generate
from twinebeacon.rsaprng.stats import monobit_pvalue
from twinebeacon.store import BeaconStore
from twinebeacon.twine import parse_chain, parse_pulse, verify_pulse


def _sha3(b):
    return hashlib.sha3_512(b).digest()


def _xor(a, b):
    return bytes(x ^ y for x, y in zip(a, b))


# -- sources --------------------------------------------------------------------

def test_combine_sources_definition():
    s = [bytes([i]) * 64 for i in range(3)]
    out = combine_sources(*s)
    assert out == _sha3(b"".join(s)) and len(out) == 64
    assert combine_sources(*s) == out
    with pytest.raises(ValueError):
        combine_sources(b"x" * 63, s[1], s[2])


def test_combine_sources_avalanche():
    rng = random.Random(1)
    base = [rng.randbytes(64) for _ in range(3)]
    ref = combine_sources(*base)
    for _ in range(100):
        which, pos, bit = rng.randrange(3), rng.randrange(64), rng.randrange(8)
        blocks = list(base)
        b = bytearray(blocks[which])
        b[pos] ^= 1 << bit
        blocks[which] = bytes(b)
        out = combine_sources(*blocks)
        assert out != ref
        flipped = sum(bin(x ^ y).count("1") for x, y in zip(out, ref))
        assert 150 < flipped < 362  # about half of 512 bits


def test_read_all_requires_three_and_fails_closed():
    good = [SystemSource(), ChaChaSource(), FixedSource([bytes(64)])]
    rand, meta = read_all(good)
    assert len(rand) == 64 and meta["sources"] == ["system", "chacha20", "fixed"]
    with pytest.raises(ValueError):
        read_all(good[:2])

    class Broken:
        name = "broken"

        def read(self, nbytes=64):
            raise OSError("device gone")

    with pytest.raises(SourceUnavailable):
        read_all([SystemSource(), Broken(), SystemSource()])
    with pytest.raises(SourceUnavailable):
        read_all([SystemSource(), SystemSource(), FixedSource([])])


def test_rsa_source_blocks():
    prng = RsaPrng(generate(32, random.Random(2)).state)
    src = RsaSource(prng)
    a, b = src.read(), src.read()
    assert len(a) == 64 and a != b and prng.state.bits_emitted == 1024


# -- golden pulses --------------------------------------------------------------

def _golden():
    with open(os.path.join(DATA, "prng_golden.json")) as fh:
        return json.load(fh)


class _ListResolver:
    def __init__(self, pulses):
        self.pulses = pulses

    def head(self, chain):
        return self.pulses[-1].cid if self.pulses else None

    def get(self, cid):
        return {p.cid: p.to_bytes() for p in self.pulses}[cid]


def _golden_rands():
    return [combine_sources(bytes([3 * i]) * 64, bytes([3 * i + 1]) * 64, bytes([3 * i + 2]) * 64) for i in range(3)]


def test_golden_pulses_byte_exact(rs_key):
    gold = _golden()
    chain = parse_chain(bytes.fromhex(gold["chain"]))
    rands = _golden_rands()
    built, prev, prev_rand = [], None, None
    for i in range(3):
        p, _ = build_prng_pulse(
            chain, prev, prev_rand, rands[i], rs_key, resolver=_ListResolver(built), sources_meta={"sources": ["a", "b", "c"]}
        )
        assert p.to_bytes().hex() == gold["pulses"][i]
        assert str(p.cid) == gold["cids"][i]
        built.append(p)
        prev, prev_rand = p, rands[i]


def test_golden_commitments_by_hand():
    gold = _golden()
    pulses = [parse_pulse(bytes.fromhex(h)) for h in gold["pulses"]]
    rands = _golden_rands()
    assert pulses[0].payload["salt"] == ZERO_SALT
    for i, p in enumerate(pulses):
        assert p.payload["pre"] == _sha3(rands[i])
        # the output is the sha3-512 of the canonical pulse bytes
        assert p.cid.digest == _sha3(bytes.fromhex(gold["pulses"][i]))
    for i in range(2):
        assert pulses[i + 1].payload["salt"] == _xor(rands[i], pulses[i].cid.digest)
        assert _sha3(_xor(pulses[i + 1].payload["salt"], pulses[i].cid.digest)) == pulses[i].payload["pre"]
        assert verify_prng_pair(pulses[i], pulses[i + 1])


# -- writer ---------------------------------------------------------------------

@pytest.fixture
def writer(store, es_key):
    chain = new_chain(store, es_key, source="prng")
    return PrngChainWriter(chain, es_key, store, [SystemSource(), ChaChaSource(), SystemSource()], CommitmentJournal(bytes(32)))


def test_honest_run_verifies(writer, store):
    pulses = [writer.step() for _ in range(40)]
    assert pulses[0].payload["salt"] == ZERO_SALT
    chain = store.chain(writer.chain)
    for a, b in zip(pulses, pulses[1:]):
        assert verify_prng_pair(a, b)
        assert verify_pulse(b, chain, store).ok
    with pytest.raises(GenesisInvalid):
        output_value(pulses[0])
    assert output_value(pulses[5]) == pulses[5].cid.digest == _sha3(pulses[5].to_bytes())
    assert len({output_value(p) for p in pulses[1:]}) == 39


def test_salt_tamper_detected(writer, store):
    pulses = [writer.step() for _ in range(4)]
    for pos in range(64):
        salt = bytearray(pulses[2].payload["salt"])
        salt[pos] ^= 0x01
        bad = dataclasses.replace(pulses[2], payload={**pulses[2].payload, "salt": bytes(salt)})
        assert not verify_prng_pair(pulses[1], bad)


def test_pre_tamper_breaks_pair_and_signature(writer, store):
    pulses = [writer.step() for _ in range(3)]
    pre = bytearray(pulses[1].payload["pre"])
    pre[7] ^= 0x80
    bad = dataclasses.replace(pulses[1], payload={**pulses[1].payload, "pre": bytes(pre)})
    assert not verify_prng_pair(bad, pulses[2])
    assert not verify_pulse(bad, store.chain(writer.chain), store).ok


def test_pair_rejects_non_consecutive(writer):
    pulses = [writer.step() for _ in range(3)]
    assert not verify_prng_pair(pulses[0], pulses[2])
    assert not verify_prng_pair(pulses[1], pulses[0])


def test_output_avalanche(writer, store):
    p = writer.step()
    p = writer.step()
    ref = output_value(p)
    for key in ("pre", "salt"):
        for pos in range(0, 64, 8):
            v = bytearray(p.payload[key])
            v[pos] ^= 1
            changed = dataclasses.replace(p, payload={**p.payload, key: bytes(v)})
            assert _sha3(changed.to_bytes()) != ref


def test_commitment_mismatch_on_wrong_retained_value(writer, store, es_key):
    p0 = writer.step()
    with pytest.raises(CommitmentMismatch):
        build_prng_pulse(store.chain(writer.chain), p0, bytes(64), bytes(64), es_key, resolver=store)


def test_lost_journal_emits_commitment_break(store, es_key):
    chain = new_chain(store, es_key, source="prng")
    w = PrngChainWriter(chain, es_key, store, [SystemSource()] * 3, CommitmentJournal(bytes(32)))
    p = [w.step() for _ in range(3)]
    # a restarted writer with an empty journal cannot open pulse 2
    w2 = PrngChainWriter(chain, es_key, store, [SystemSource()] * 3, CommitmentJournal(bytes(32)))
    brk = w2.step()
    assert brk.payload["status"] == COMMITMENT_BREAK and brk.payload["salt"] == ZERO_SALT
    assert not verify_prng_pair(p[2], brk)
    with pytest.raises(GenesisInvalid):
        output_value(brk)
    nxt = w2.step()
    assert verify_prng_pair(brk, nxt)
    assert PrngPayload.from_pulse(nxt).status is None


def test_journal_survives_restart(tmp_path, es_key):
    store = BeaconStore(tmp_path / "store")
    chain = new_chain(store, es_key, source="prng")
    key = bytes(range(32))
    w = PrngChainWriter(chain, es_key, store, [SystemSource()] * 3, CommitmentJournal(key, tmp_path / "j"))
    a = [w.step() for _ in range(2)]
    assert [f.name for f in (tmp_path / "j").iterdir()] == ["000000000001.bin"]
    store2 = BeaconStore(tmp_path / "store")
    w2 = PrngChainWriter(chain, es_key, store2, [SystemSource()] * 3, CommitmentJournal(key, tmp_path / "j"))
    b = w2.step()
    assert verify_prng_pair(a[1], b)


def test_journal_rejects_wrong_key_and_index(tmp_path):
    j = CommitmentJournal(bytes(32), tmp_path)
    j.put(4, b"r" * 64)
    assert CommitmentJournal(bytes(32), tmp_path).get(4) == b"r" * 64
    assert b"r" * 64 not in (tmp_path / "000000000004.bin").read_bytes()
    with pytest.raises(DecodeError):
        CommitmentJournal(bytes([1]) * 32, tmp_path).get(4)
    os.replace(tmp_path / "000000000004.bin", tmp_path / "000000000005.bin")
    with pytest.raises(DecodeError):
        CommitmentJournal(bytes(32), tmp_path).get(5)
    assert j.get(99) is None


def test_output_bits_monobit(writer):
    writer.step()  # genesis
    outs = [output_value(writer.step()) for _ in range(300)]
    bits = np.unpackbits(np.frombuffer(b"".join(outs), np.uint8))
    assert bits.size == 300 * 512
    assert monobit_pvalue(bits) > 1e-4
