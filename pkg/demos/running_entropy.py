"""Running entropy of a simulated full-scale response, written as CSV.

Fits a PEF to calibration trials, accumulates log2 of the PEF product over
fresh trials and writes (pulse index, trial, log2 T) rows.

    python demos/running_entropy.py [out.csv] [trials]
"""
import sys

import numpy as np

from twinebeacon.bellsim import write_running_entropy_csv
from twinebeacon.bellsim.source import SourceParams, sample_trials
from twinebeacon.certify.entropy import accumulate, certify, success_target
from twinebeacon.certify.mle import mle_conditional
from twinebeacon.certify.pef import optimize_beta
from twinebeacon.certify.polytope import TrialModel
from twinebeacon.orchestrator.profile import PRODUCTION


def main():
    out = sys.argv[1] if len(sys.argv) > 1 else "running_entropy.csv"
    n = int(sys.argv[2]) if len(sys.argv) > 2 else 5_000_000
    model = TrialModel.build(PRODUCTION.model, PRODUCTION.eps_b)
    calibration = sample_trials(SourceParams(), PRODUCTION.calibration_trials, rng_seed=1)
    nu = mle_conditional(calibration.counts, model)
    choice = optimize_beta(nu.p, model, PRODUCTION.sigma_h, PRODUCTION.eps_h, beta_grid=np.logspace(-3, 0, 30))
    print(f"beta {choice.beta:.4f}, expected trials to certify {choice.n_exp:,.0f}")

    trials = sample_trials(SourceParams(), n, rng_seed=2)
    acc = accumulate(trials, choice.pef, stride=10_000, target=success_target(choice.beta, PRODUCTION.sigma_h, PRODUCTION.eps_h))
    rows = write_running_entropy_csv(out, acc, pulse_index=0)
    cert = certify(trials, choice.pef, PRODUCTION.eps_h, PRODUCTION.sigma_h)
    print(f"{rows} rows written to {out}")
    print(f"certified {cert.certified_bits:.0f} bits over {n:,} trials; threshold crossed at trial {cert.crossing}")


if __name__ == "__main__":
    main()
