"""Source model, CH value, trial sampling, timing margins and the distance survey."""
import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from twinebeacon.bellsim.export import write_running_entropy_csv
from twinebeacon.bellsim.source import (
    SourceParams,
    aggregated_pair_probability,
    ch_value,
    joint_distribution,
    sample_trials,
    settings_probabilities,
)
from twinebeacon.bellsim.timing import (
    TimingGeometry,
    audit_taus,
    distance_mc,
    light_time,
    require_spacelike,
    tau_bounds,
    worst_case_scenario,
)
from twinebeacon.certify.entropy import accumulate
from twinebeacon.certify.pef import Pef
from twinebeacon.certify.polytope import marginals
from twinebeacon.certify.trials import cell
from twinebeacon.errors import TimingViolation

REF_ANGLES = (6.7, -29.26, -6.7, 29.26)


def _ideal(**kw):
    base = dict(p_pair=1.0, eta_a=1.0, eta_b=1.0, dark=0.0)
    base.update(kw)
    return SourceParams(**base)


# -- quantum-mechanics oracle ---------------------------------------------------

def _analyzer(theta_deg):
    t = math.radians(theta_deg)
    v = np.array([math.cos(t), math.sin(t)])
    return np.outer(v, v)


def _oracle_distribution(p: SourceParams):
    """Density-matrix evaluation with click POVMs E = eta * projector."""
    psi = np.zeros(4)
    psi[0], psi[3] = p.amp_hh, p.amp_vv  # |HH>, |VV>
    rho = np.outer(psi, psi)
    out = np.zeros(16)
    eye = np.eye(2)
    for x, y in itertools.product((0, 1), repeat=2):
        ea = p.eta_a * _analyzer(p.angles[x])
        eb = p.eta_b * _analyzer(p.angles[2 + y])
        povm_a = {1: ea, 0: eye - ea}
        povm_b = {1: eb, 0: eye - eb}
        for a, b in itertools.product((0, 1), repeat=2):
            pair = np.trace(rho @ np.kron(povm_a[a], povm_b[b]))
            empty = 1.0 if (a, b) == (0, 0) else 0.0
            q = p.p_pair * pair + (1 - p.p_pair) * empty
            out[cell(a, b, x, y)] = q
        # independent dark clicks turn a 0 into a 1 on each side
        q = {ab: out[cell(*ab, x, y)] for ab in itertools.product((0, 1), repeat=2)}
        d = p.dark
        for a, b in itertools.product((0, 1), repeat=2):
            total = 0.0
            for (a0, b0), v in q.items():
                pa = (1.0 if a == 1 else 0.0) if a0 == 1 else (d if a == 1 else 1 - d)
                pb = (1.0 if b == 1 else 0.0) if b0 == 1 else (d if b == 1 else 1 - d)
                total += v * pa * pb
            out[cell(a, b, x, y)] = total
    return out


def test_aligned_analyzers_pass_hh():
    d = joint_distribution(_ideal(angles=(0.0, 0.0, 0.0, 0.0)))
    assert d.p[cell(1, 1, 0, 0)] == pytest.approx(0.383**2, abs=1e-12)
    assert 0.383**2 == pytest.approx(0.14669, abs=1e-5)


def test_reference_angles_amplitude():
    d = joint_distribution(_ideal(angles=REF_ANGLES))
    a, b = math.radians(6.7), math.radians(-6.7)
    amp = 0.383 * math.cos(a) * math.cos(b) + 0.924 * math.sin(a) * math.sin(b)
    assert amp == pytest.approx(0.36521, abs=5e-5)
    assert d.p[cell(1, 1, 0, 0)] == pytest.approx(amp**2, abs=1e-12)
    assert d.p[cell(1, 1, 0, 0)] == pytest.approx(0.1334, abs=5e-5)


@given(
    st.floats(0.0, math.pi / 2),
    st.floats(0.0, 1.0),
    st.floats(0.0, 1.0),
    st.floats(0.0, 1.0),
    st.floats(0.0, 1e-2),
    st.lists(st.floats(-90.0, 90.0), min_size=4, max_size=4),
)
def test_matches_density_matrix_oracle(theta, p_pair, eta_a, eta_b, dark, angles):
    p = SourceParams(math.cos(theta), math.sin(theta), p_pair, eta_a, eta_b, dark, tuple(angles))
    np.testing.assert_allclose(joint_distribution(p).p, _oracle_distribution(p), atol=1e-12)


def test_no_pairs_means_no_clicks():
    d = joint_distribution(SourceParams(p_pair=0.0, dark=0.0))
    for x, y in itertools.product((0, 1), repeat=2):
        assert d.p[cell(0, 0, x, y)] == 1.0


@given(
    st.floats(0.0, 1.0),
    st.floats(0.0, 1.0),
    st.floats(0.0, 1.0),
    st.floats(0.0, 1e-3),
    st.lists(st.floats(-90.0, 90.0), min_size=4, max_size=4),
)
def test_exactly_no_signaling(p_pair, eta_a, eta_b, dark, angles):
    d = joint_distribution(SourceParams(p_pair=p_pair, eta_a=eta_a, eta_b=eta_b, dark=dark, angles=tuple(angles)))
    d.check(norm_tol=1e-12, ns_tol=1e-12)
    alice, bob = marginals(d.p)
    assert np.abs(alice[:, 0] - alice[:, 1]).max() <= 1e-12
    assert np.abs(bob[0] - bob[1]).max() <= 1e-12


def test_source_params_validation():
    with pytest.raises(ValueError):
        SourceParams(amp_hh=0.5, amp_vv=0.5)
    with pytest.raises(ValueError):
        SourceParams(eta_a=1.2)
    with pytest.raises(ValueError):
        SourceParams(angles=(1.0, 2.0))
    assert aggregated_pair_probability() == pytest.approx(1 - (1 - 1 / 363) ** 14)
    assert aggregated_pair_probability() == pytest.approx(0.0379, abs=1e-4)


# -- CH -------------------------------------------------------------------------

def test_ch_local_deterministic_vertices():
    for fa0, fa1, fb0, fb1 in itertools.product((0, 1), repeat=4):
        p = np.zeros(16)
        for x, y in itertools.product((0, 1), repeat=2):
            p[cell((fa0, fa1)[x], (fb0, fb1)[y], x, y)] = 1.0
        assert ch_value(p) <= 0.0


def test_ch_pr_box():
    p = np.zeros(16)
    for x, y, a in itertools.product((0, 1), repeat=3):
        p[cell(a, a ^ (x & y), x, y)] = 0.5
    assert ch_value(p) == pytest.approx(0.5, abs=1e-15)


def test_ch_violated_at_operating_point():
    assert ch_value(joint_distribution(SourceParams())) > 0
    assert ch_value(joint_distribution(_ideal(angles=REF_ANGLES))) > 0


@given(st.floats(0.4, 1.0), st.floats(0.0, 0.6))
def test_ch_monotone_in_efficiency(eta, drop):
    # CH is eta*(eta*X - Y) up to dark counts, so it only rises with eta above
    # its minimum near eta = 0.37; the violation threshold sits near 0.74
    lower = max(0.4, eta - drop)
    hi = ch_value(joint_distribution(SourceParams(eta_a=eta, eta_b=eta)))
    lo = ch_value(joint_distribution(SourceParams(eta_a=lower, eta_b=lower)))
    assert lo <= hi + 1e-15


def test_ch_violation_threshold():
    def ch(eta):
        return ch_value(joint_distribution(SourceParams(eta_a=eta, eta_b=eta)))

    assert ch(0.70) < 0 < ch(0.75)


# -- sampling -------------------------------------------------------------------

def _binomial_ok(count, n, p, z):
    return abs(count - n * p) <= z * math.sqrt(n * p * (1 - p)) + 1e-9


def test_sampling_matches_distribution():
    n = 10_000_000
    params = SourceParams()
    block = sample_trials(params, n, rng_seed=11)
    counts = block.counts.reshape(4, 4)  # [c, z]
    per_setting = counts.sum(axis=0)
    table = joint_distribution(params).table
    for c, z in itertools.product(range(4), repeat=2):
        assert _binomial_ok(counts[c, z], per_setting[z], table[c, z], 5), (c, z)


def test_settings_uniform_and_empty_trials():
    n = 1_000_000
    params = SourceParams()
    block = sample_trials(params, n, rng_seed=3)
    counts = block.counts.reshape(4, 4)
    per_setting = counts.sum(axis=0)
    for z in range(4):
        assert _binomial_ok(per_setting[z], n, 0.25, 3)
    # roughly 96% of trials carry no pair; every such trial is a (0, 0) outcome
    no_pair = 1 - params.p_pair
    assert no_pair == pytest.approx(0.962, abs=1e-3)
    freq00 = counts[0] / per_setting
    assert (freq00 >= no_pair).all()
    for z in range(4):
        assert _binomial_ok(counts[0, z], per_setting[z], joint_distribution(params).table[0, z], 3)


def test_settings_bias():
    mu = settings_probabilities(0.1)
    assert mu.sum() == pytest.approx(1.0)
    assert mu[3] == pytest.approx(0.55**2)
    block = sample_trials(SourceParams(), 400_000, eps_b=0.1, rng_seed=4)
    z = block.counts.reshape(4, 4).sum(axis=0)
    assert _binomial_ok(z[3], 400_000, mu[3], 4)


def test_sampling_deterministic(tmp_path):
    a = sample_trials(SourceParams(), 50_000, rng_seed=9)
    b = sample_trials(SourceParams(), 50_000, rng_seed=9)
    c = sample_trials(SourceParams(), 50_000, rng_seed=10)
    assert a.to_bytes() == b.to_bytes() != c.to_bytes()
    with pytest.raises(ValueError):
        sample_trials(SourceParams(), 0)


def test_running_entropy_export(tmp_path):
    block = sample_trials(SourceParams(), 20_000, rng_seed=1)
    acc = accumulate(block, Pef(np.ones(16), 0.1), stride=1000)
    rows = write_running_entropy_csv(tmp_path / "run.csv", acc, pulse_index=7)
    lines = (tmp_path / "run.csv").read_text().splitlines()
    assert rows == 20 and len(lines) == 21
    assert lines[0] == "pulse_index,trial,log2_T"
    assert lines[-1].startswith("7,20000,")


# -- timing ---------------------------------------------------------------------

def test_tau_examples():
    geom = TimingGeometry(d_ab=110.0, d_ba=110.0)
    assert light_time(110.0) == pytest.approx(366.92, abs=0.01)
    t = tau_bounds(0.0, 300.0, geom, "A")
    assert t == pytest.approx(24.6 + 110.0 / 0.299792458 - 300.0, abs=1e-9)
    assert t == pytest.approx(91.5, abs=0.05)
    t = tau_bounds(0.0, 400.0, geom, "A")
    assert t == pytest.approx(-8.5, abs=0.05)
    assert not audit_taus([t], [10.0]).ok
    with pytest.raises(ValueError):
        tau_bounds(0.0, 0.0, geom, "C")


@given(st.floats(-1e6, 1e6), st.floats(-1e3, 1e3), st.floats(-1e3, 1e3))
def test_tau_translation_invariant(shift, marker, detect):
    geom = TimingGeometry(d_ab=120.0, d_ba=95.0)
    for station in "AB":
        a = tau_bounds(marker, detect, geom, station)
        b = tau_bounds(marker + shift, detect + shift, geom, station)
        assert a == pytest.approx(b, abs=1e-6)


def test_worst_case_scenario_means():
    scen = worst_case_scenario()
    assert scen.taus() == pytest.approx((49.0, 31.3))
    t1, t2 = scen.sample(200_000, rng_seed=2)
    assert abs(t1.mean() - 49.0) < 3.6
    assert abs(t2.mean() - 31.3) < 3.6
    assert t1.std() == pytest.approx(3.6, abs=0.5)
    assert audit_taus(t1, t2).ok  # both margins sit about nine sigma above zero


def test_any_nonpositive_tau_fails():
    scen = worst_case_scenario()
    cert = audit_taus(*scen.taus())
    assert cert.ok
    require_spacelike(cert)
    late = scen.delayed(31.4)
    cert = audit_taus(*late.taus())
    assert not cert.ok
    with pytest.raises(TimingViolation):
        require_spacelike(cert)
    taus = np.full(1000, 20.0)
    taus[417] = 0.0
    assert not audit_taus(taus, np.full(1000, 20.0)).ok


def test_geometry_rejects_bad_distance():
    with pytest.raises(ValueError):
        TimingGeometry(d_ab=0.0, d_ba=1.0)


# -- distance survey ------------------------------------------------------------

def test_distance_single_span():
    mean, std = distance_mc([100.0], 1.55e-3, 0.0, trials=200_000)
    assert mean == pytest.approx(100.0, abs=1e-4)
    assert std == pytest.approx(1.55e-3, rel=0.01)


def test_distance_orthogonal_spans_pythagoras():
    mean, std = distance_mc([30.0, 40.0], 0.01, 0.0, trials=200_000)
    assert mean == pytest.approx(50.0, abs=1e-3)
    # per-axis projections (0.6, 0.8) recombine to the span sigma
    assert std == pytest.approx(0.01, rel=0.01)


def test_distance_survey_band():
    mean, std = distance_mc([100.0, 40.0, 10.0], 1.55e-3, 4.5)
    assert mean == pytest.approx(math.sqrt(100**2 + 40**2 + 10**2), rel=0.01)
    assert 0.3 <= std <= 3.0


def test_distance_preconditions():
    with pytest.raises(ValueError):
        distance_mc([], 0.1, 0.0)
    with pytest.raises(ValueError):
        distance_mc([1.0], 0.1, 0.0, trials=100)
