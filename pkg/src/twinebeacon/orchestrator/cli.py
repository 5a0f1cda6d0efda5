"""``beacon`` command line: service, single rounds and auditor checks.

Every command exits 0 on success, 1 when a check fails and 2 on usage or
input errors. ``--json`` switches the report to one JSON document.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time

from ..bellsim.source import ch_value, joint_distribution, sample_trials
from ..certify.entropy import certify
from ..certify.trials import TrialBlock
from ..errors import BeaconError
from ..extract.extractor import bits_to_bytes, extract_with
from ..extract.params import ExtractorParams
from ..extract.seed import expand_seed
from ..store.config import parse_listen, tomllib
from ..store.gateway import Gateway
from ..twine.cid import Cid
from ..twine.records import parse_pulse
from ..twine.verify import verify_pulse
from . import service
from .audit import audit_order, audit_round, audit_store
from .protocol import RequestPayload, certificate_from_record

log = logging.getLogger("beacon")


class CheckFailed(Exception):
    """A command ran but its verdict is negative (exit status 1)."""

    def __init__(self, report: dict):
        super().__init__(report.get("error", "check failed"))
        self.report = report


def _emit(args, report: dict) -> None:
    if args.json:
        print(json.dumps(report, indent=2, sort_keys=True, default=str))
        return
    for key, value in report.items():
        if key == "checks":
            for c in value:
                mark = "ok  " if c["ok"] else "FAIL"
                print(f"  [{mark}] {c['name']}" + (f": {c['detail']}" if c["detail"] else ""))
        elif isinstance(value, dict):
            print(f"{key}:")
            for k, v in value.items():
                print(f"  {k}: {v}")
        else:
            print(f"{key}: {value}")


def _deployment(args):
    cfg = service.load(args.config)
    return service.open_deployment(cfg, args.data_dir)


def _pulse(store, text: str):
    return parse_pulse(store.get(Cid.parse(text)))


def _request_of(store, text: str):
    """The request payload behind an X or Y pulse, plus the Y pulse if given."""
    p = _pulse(store, text)
    kind = p.payload.get("kind") if isinstance(p.payload, dict) else None
    if kind == "request":
        return RequestPayload.from_record(p.payload), None
    if kind == "precommit":
        x = _pulse(store, str(p.payload["request"]))
        return RequestPayload.from_record(x.payload), p
    raise BeaconError(f"{text} is neither a request nor a precommit pulse")


# -- commands -----------------------------------------------------------------

def cmd_run(args) -> dict:
    dep = _deployment(args)
    beacon = service.build_beacon(dep)
    cadence = float(dep.cfg.get("service", {}).get("cadence_s", 60.0))
    gateway = None
    if not args.no_serve:
        host, port = parse_listen(dep.cfg["store"].get("listen", "127.0.0.1:8080"))
        gateway = Gateway(dep.store, host, port, dep.cfg.get("tokens")).start()
        log.info("gateway listening on %s", gateway.url)
    beacon.status("ok", "service started")
    done, published, failed = 0, 0, 0
    try:
        while args.rounds is None or done < args.rounds:
            started = time.time()
            state = beacon.run_round()
            done += 1
            published += state.phase == "Published"
            failed += state.phase == "Failed"
            log.info("round %d: %s %s", done, state.phase, state.error or "")
            if args.rounds is not None and done >= args.rounds:
                break
            time.sleep(max(0.0, cadence - (time.time() - started)))
    except KeyboardInterrupt:
        pass
    finally:
        if gateway is not None:
            gateway.stop()
    return {"rounds": done, "published": published, "failed": failed}


def cmd_round(args) -> dict:
    dep = _deployment(args)
    beacon = service.build_beacon(dep)
    state = beacon.run_round()
    report = state.summary()
    if state.phase != "Published":
        raise CheckFailed(report)
    return report


def cmd_verify_pulse(args) -> dict:
    dep = _deployment(args)
    p = _pulse(dep.store, args.cid)
    rep = verify_pulse(p, dep.store.chain(p.chain), dep.store)
    out = {"pulse": args.cid, "index": p.index, "chain": str(p.chain), **rep.as_dict()}
    if not rep.ok:
        raise CheckFailed(out)
    return out


def _audit_result(rep) -> dict:
    out = rep.as_dict()
    if not rep.ok:
        raise CheckFailed(out)
    return out


def cmd_audit_order(args) -> dict:
    dep = _deployment(args)
    return _audit_result(audit_order(dep.store, Cid.parse(args.a), Cid.parse(args.b)))


def cmd_audit_round(args) -> dict:
    dep = _deployment(args)
    trials = None
    if args.trials:
        with open(args.trials, "rb") as fh:
            trials = fh.read()
    return _audit_result(audit_round(dep.store, Cid.parse(args.z), trials))


def cmd_audit_store(args) -> dict:
    dep = _deployment(args)
    if "curby" not in dep.registry:
        raise BeaconError("deployment has no curby chain yet")
    return _audit_result(audit_store(dep.store, Cid.parse(dep.registry["curby"])))


def cmd_certify(args) -> dict:
    dep = _deployment(args)
    req, _ = _request_of(dep.store, args.request)
    block = TrialBlock.read(args.trials)
    cert = certify(block, req.pef, req.eps_h, req.sigma_h)
    out = {"trials": block.n, "certificate": cert.record(), "certified_bits": cert.certified_bits, "passed": cert.passed}
    if block.n != req.n_stop:
        out["error"] = f"file has {block.n} trials, request committed to {req.n_stop}"
        raise CheckFailed(out)
    if not cert.passed:
        raise CheckFailed(out)
    return out


def cmd_extract(args) -> dict:
    dep = _deployment(args)
    req, y = _request_of(dep.store, args.params)
    block = TrialBlock.read(args.trials)
    cert = certify(block, req.pef, req.eps_h, req.sigma_h)
    if y is not None:
        committed = certificate_from_record(y.payload["certificate"])
        if abs(committed.log2_T - cert.log2_T) > 1e-9 * max(1.0, abs(cert.log2_T)):
            raise CheckFailed({"error": "trial file does not reproduce the precommitted certificate"})
    if not cert.passed:
        raise CheckFailed({"error": "certificate below threshold", "certified_bits": cert.certified_bits})
    params = ExtractorParams(2 * block.n, cert.certified_bits, req.sigma, req.eps_x, req.w, req.r, req.l)
    seed = expand_seed(bytes.fromhex(args.seed), req.l)
    out = bits_to_bytes(extract_with(block.output_bits(), seed, params))
    return {"bits": out.hex(), "sigma": req.sigma, "certified_bits": cert.certified_bits}


def cmd_simulate(args) -> dict:
    section = {}
    if args.params:
        with open(args.params, "rb") as fh:
            raw = tomllib.load(fh)
        section = raw.get("source", raw)
    params = service.source_params(section)
    block = sample_trials(params, args.n, rng_seed=args.seed, meta={"purpose": "simulate", "source": params.record()})
    digest = block.write(args.out)
    return {
        "out": args.out,
        "trials": block.n,
        "sha3_512": digest.hex(),
        "counts": [int(c) for c in block.counts],
        "ch": ch_value(joint_distribution(params)),
    }


def cmd_chain_new(args) -> dict:
    dep = _deployment(args)
    if args.source in dep.registry:
        raise BeaconError(f"chain {args.source!r} already exists: {dep.registry[args.source]}")
    meta, _ = dep.chain(args.source)
    return {"source": args.source, "chain": str(meta.cid)}


# -- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="FILE", help="deployment TOML (defaults are packaged)")
    common.add_argument("--data-dir", metavar="DIR", help="override [store].data_dir")
    common.add_argument("--json", action="store_true", help="machine-readable report")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="beacon", description="Traceable randomness beacon.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="run the service and rounds continuously")
    p.add_argument("--rounds", type=int, help="stop after this many rounds")
    p.add_argument("--no-serve", action="store_true", help="do not start the HTTP gateway")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("round", parents=[common], help="run a single round")
    p.add_argument("--once", action="store_true", default=True)
    p.set_defaults(func=cmd_round)

    p = sub.add_parser("verify", help="verify ledger records")
    vsub = p.add_subparsers(dest="what", required=True)
    q = vsub.add_parser("pulse", parents=[common])
    q.add_argument("cid")
    q.set_defaults(func=cmd_verify_pulse)

    p = sub.add_parser("audit", help="auditor checks")
    asub = p.add_subparsers(dest="what", required=True)
    q = asub.add_parser("order", parents=[common])
    q.add_argument("a", metavar="CID_A")
    q.add_argument("b", metavar="CID_B")
    q.set_defaults(func=cmd_audit_order)
    q = asub.add_parser("round", parents=[common])
    q.add_argument("z", metavar="CID_Z")
    q.add_argument("--trials", metavar="FILE")
    q.set_defaults(func=cmd_audit_round)
    q = asub.add_parser("store", parents=[common], help="fail-closed scan of the whole curby chain")
    q.set_defaults(func=cmd_audit_store)

    p = sub.add_parser("certify", parents=[common], help="certify a trial file against a request's PEF")
    p.add_argument("--trials", metavar="FILE", required=True)
    p.add_argument("--request", metavar="CID", required=True)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("extract", parents=[common], help="recompute output bits")
    p.add_argument("--trials", metavar="FILE", required=True)
    p.add_argument("--seed", metavar="HEX", required=True, help="upstream randomness (hex)")
    p.add_argument("--params", metavar="CID", required=True, help="request (X) or precommit (Y) pulse")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("simulate", parents=[common], help="write simulated Bell trials")
    p.add_argument("--params", metavar="FILE", help="TOML with source parameters")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", metavar="FILE", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("chain", help="chain management")
    csub = p.add_subparsers(dest="what", required=True)
    q = csub.add_parser("new", parents=[common])
    q.add_argument("--source", metavar="NAME", required=True)
    q.set_defaults(func=cmd_chain_new)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        report = args.func(args)
    except CheckFailed as exc:
        _emit(args, {"ok": False, **exc.report})
        return 1
    except (BeaconError, OSError, ValueError, KeyError) as exc:
        _emit(args, {"ok": False, "error": f"{type(exc).__name__}: {exc}"})
        return 2
    _emit(args, {"ok": True, **report})
    return 0


if __name__ == "__main__":
    sys.exit(main())
