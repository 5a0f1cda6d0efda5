"""Walk through one honest round and one failed round, then audit both.

Runs the toy profile against an in-memory store, a deterministic upstream
seed beacon and a fake clock, so it finishes in a few seconds.

    python demos/round_walkthrough.py
"""
import numpy as np

from twinebeacon.certify.pef import Pef
from twinebeacon.orchestrator.audit import audit_order, audit_round, audit_store
from twinebeacon.orchestrator.profile import TOY
from twinebeacon.orchestrator.protocol import Beacon, FakeClock, RoundFaults
from twinebeacon.orchestrator.upstream import MockUpstream
from twinebeacon.store import BeaconStore
from twinebeacon.twine import SigningKey


def show(report):
    for c in report.checks:
        print(f"    [{'ok' if c.ok else 'FAIL':>4}] {c.name}" + (f": {c.detail}" if c.detail else ""))


def main():
    store = BeaconStore()
    keys = {name: SigningKey.generate("ES256") for name in ("curby", "bell", "drand")}
    chains = Beacon.create_chains(store, keys)
    clock = FakeClock()
    upstream = MockUpstream(period=3.0, genesis=clock.now - 30.0, clock=clock.time)
    beacon = Beacon(store, keys, chains, TOY, upstream, clock=clock.time, sleep=clock.sleep, timing_samples=200)

    print(f"profile {TOY.name}: sigma={TOY.sigma}, n_stop={TOY.n_stop}, sigma_h={TOY.sigma_h}")

    print("\n1. honest round")
    state = beacon.run_round()
    print(f"   phase {state.phase}, certified {state.certificate.certified_bits:.1f} bits, "
          f"crossing at trial {state.certificate.crossing}")
    print(f"   output {state.output.hex()}")
    for k in ("X", "B", "C", "Y", "S", "Z"):
        print(f"   {k} {state.refs[k]}")

    print("\n   auditor, with the disclosed trial file:")
    show(audit_round(store, state.refs["Z"], beacon.load_trials(state.trials_path)))

    print("\n   the request provably precedes the output:")
    show(audit_order(store, state.refs["X"], state.refs["Z"]))

    print("\n2. a round certified with a useless PEF (f = 1)")
    bad = beacon.run_round(faults=RoundFaults(pef_override=Pef(np.ones(16), 0.1)))
    print(f"   phase {bad.phase}: {bad.error}; certified {bad.certificate.certified_bits:.1f} bits")
    print(f"   E {bad.refs['E']}, no Z pulse")

    print("\n3. a round whose detections land outside the light cone")
    late = beacon.run_round(faults=RoundFaults(detect_delay_ns=40.0))
    print(f"   phase {late.phase}: {late.error}")

    print("\n4. store scan over the curby chain")
    show(audit_store(store, beacon.chain_cid("curby")))


if __name__ == "__main__":
    main()
