"""Three parties cross-link their chains; order proofs and tamper detection.

    python demos/ledger_tamper.py
"""
import dataclasses

from twinebeacon.store import BeaconStore
from twinebeacon.twine import SigningKey, build_chain, build_pulse, parse_pulse, prove_order, verify_pulse


def main():
    store = BeaconStore()
    keys = {n: SigningKey.generate("ES256") for n in "ABC"}
    chains = {}
    for n in "ABC":
        meta, _ = build_chain(keys[n], source=n)
        store.put_chain(meta.to_bytes())
        chains[n] = meta

    def append(n, label, mixins=()):
        head_cid = store.head(chains[n].cid)
        head = None if head_cid is None else parse_pulse(store.get(head_cid))
        p, _ = build_pulse(chains[n], head, store, mixins=mixins, payload={"label": label}, signing_key=keys[n])
        store.put_pulse(p.to_bytes())
        return p

    x = append("C", "x")
    i = append("B", "i", [(chains["C"].cid, x.cid)])
    b = append("A", "b", [(chains["B"].cid, i.cid)])
    j = append("B", "j", [(chains["A"].cid, b.cid)])

    for early, late, name in ((i, b, "b came after i"), (b, j, "b came before j"), (x, j, "x came before j")):
        proof = prove_order(early.cid, late.cid, store)
        hops = " -> ".join(parse_pulse(store.get(c)).payload["label"] for c in proof.path)
        print(f"{name}: path {hops}")

    print("\ntampering with pulse b:")
    meta = chains["A"]
    for field, bad in [
        ("payload", dataclasses.replace(b, payload={"label": "B"})),
        ("mixins", dataclasses.replace(b, mixins=())),
        ("index", dataclasses.replace(b, index=b.index + 1)),
        ("signature", dataclasses.replace(b, signature=bytes(len(b.signature)))),
    ]:
        rep = verify_pulse(bad, meta, store, b.cid)
        print(f"  {field:<10} ok={rep.ok}  {'; '.join(rep.details)}")


if __name__ == "__main__":
    main()
