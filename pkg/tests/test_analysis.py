from __future__ import annotations

import math

import numpy as np
import pytest

import oracles
from conftest import FAMILIES, FIBONACCI_RULES, GOLDEN, GOLDEN_CF, SILVER_CF, family
from spectral_shift.analysis import (
    commutant_dimension,
    commutant_dimension_svd,
    estimate_lr_constant,
    eta_zeta_checks,
    exp_summability,
    find_sft_cycle,
    fitted_degree,
    lr_certificate,
    power_summability,
    q_reconstruction_defect,
    qw_bound_check,
    qw_pairs,
    qw_random_trial,
    sft_fk_experiment,
    sft_projection_identities,
    sturmian_witness,
)
from spectral_shift.config import RunConfig
from spectral_shift.errors import InsufficientDataError, PrecisionError, ValidationError
from spectral_shift.experiments import EXPERIMENTS, get
from spectral_shift.generators import ContinuedFraction, SftGraph, Substitution, perron, unbounded_theta
from spectral_shift.hilbert import Dirac, TruncatedSpace, make_alpha
from spectral_shift.measures import parry_measure, substitution_measure
from spectral_shift.words import special_words

PHI = (1 + math.sqrt(5)) / 2


def space_D(name, N, alpha="linear"):
    _, t, m = family(name, N)
    s = TruncatedSpace(t, m, N)
    return s, Dirac(s, make_alpha(alpha, N))


# -- summability


def test_exp_summability_golden_mean_phase_transition():
    g = SftGraph(GOLDEN)
    above = exp_summability(g, math.log(PHI) + 0.2, 60)
    below = exp_summability(g, math.log(PHI) - 0.2, 60)
    assert above.verdict == "converging" and above.tail_term < 1e-5
    assert below.verdict == "diverging"
    assert all(b > a for a, b in zip(below.terms[10:], below.terms[11:]))


def test_exp_summability_full_shift_entropy_is_log2():
    r = exp_summability(SftGraph([["0", 0, 0], ["1", 0, 0]]), 1.0, 20)
    assert r.estimate == pytest.approx(math.log(2), abs=1e-12)


def test_power_summability_sturmian():
    t = ContinuedFraction(GOLDEN_CF).language(60)
    assert power_summability(t, 1.5, 60).verdict == "converging"
    low = power_summability(t, 0.8, 60)
    assert low.trend == "diverging"
    assert low.verdict == "inconclusive"  # 0.8 is within the margin of the fitted degree 1
    assert fitted_degree(t.counts()) == pytest.approx(1.0, abs=0.05)


def test_summability_needs_enough_levels():
    t = ContinuedFraction(GOLDEN_CF).language(5)
    with pytest.raises(InsufficientDataError):
        power_summability(t, 1.5, 10)


# -- commutant


@pytest.mark.parametrize("name", ["bernoulli", "golden", "fib_sub", "fib_sturm"])
def test_commutant_is_one_dimensional(name):
    for N in (2, 4, 6):
        s, D = space_D(name, N)
        r = commutant_dimension(s, D)
        assert r["dimension"] == 1 and not r["ambiguous"]


@pytest.mark.parametrize("name", ["bernoulli", "golden", "fib_sturm"])
def test_commutant_matches_svd_oracle(name):
    s, D = space_D(name, 4)
    assert commutant_dimension_svd(s, D) == 1
    assert oracles.commutant_dim_by_svd(D.matrix) == 1


# -- eta / zeta


@pytest.mark.parametrize("name", FAMILIES)
def test_eta_zeta_identities(name):
    s, D = space_D(name, 6)
    for n in range(6):
        for p in special_words(s.table, n):
            for w in s.table.children_of(p):
                r = eta_zeta_checks(s, D, w)
                for k in ("in_C_n+1", "perp_C_n", "square", "norm2", "osc", "zeta_in_C_n", "rank2", "norm_product"):
                    assert r[k] < 1e-10, (w, k, r[k])
                assert r["bound_margin"] >= -1e-12


# -- SFT witnesses


def golden_setup(N):
    g = SftGraph(GOLDEN)
    t = g.language(N)
    return g, t, parry_measure(g, None, t)


def test_find_cycle_golden_mean():
    g, t, m = golden_setup(6)
    c = find_sft_cycle(g, m)
    assert c.cycle == "a" and c.vertex == 0
    assert c.a == pytest.approx(PHI, abs=1e-12)
    assert c.w_k(2) == "aaaaa"


def test_find_cycle_rejects_graph_without_branching():
    with pytest.raises(ValidationError):
        find_sft_cycle(SftGraph([["a", 0, 1], ["b", 1, 0]]))


def test_fk_oscillation_exact_value():
    g, t, m = golden_setup(9)
    for r in sft_fk_experiment(g, t, m, 4):
        K = r.extra["K"]
        H = sum(1 / k for k in range(1, K + 1))
        assert r.osc == pytest.approx(((PHI - 1) * H + 1) / 2, abs=1e-9)
        assert r.lip == pytest.approx(r.extra["lip_lowrank"], rel=1e-10)
        assert r.extra["min_value"] == pytest.approx(-1.0, abs=1e-12)
        assert r.extra["plateau_value"] == pytest.approx((PHI - 1) * H, abs=1e-12)


def test_fk_lip_increases_and_osc_grows():
    g, t, m = golden_setup(11)
    reps = sft_fk_experiment(g, t, m, 5)
    lips = [r.lip for r in reps]
    oscs = [r.osc for r in reps]
    assert all(b > a for a, b in zip(lips, lips[1:]))
    assert all(b - a > 0.05 for a, b in zip(oscs, oscs[1:]))


def test_fk_needs_enough_levels():
    g, t, m = golden_setup(6)
    with pytest.raises(InsufficientDataError):
        sft_fk_experiment(g, t, m, 4)


def test_projection_identities_from_k2():
    g, t, m = golden_setup(12)
    for k in range(2, 7):
        r = sft_projection_identities(g, t, m, k)
        assert max(r["pt1"], r["pt2"], r["pt3"], r["pt4"]) < 1e-10


def test_projection_identity_defect_at_k1_is_mass_factor():
    g, t, m = golden_setup(4)
    r = sft_projection_identities(g, t, m, 1)
    pd = perron(g)
    assert r["uv"] == pytest.approx(pd.u[0] * pd.v[0])
    assert r["pt1"] == pytest.approx(abs(r["uv"] - 1) / PHI**2, abs=1e-12)
    assert r["pt4"] < 1e-12


# -- Sturmian witnesses


def test_witness_for_unbounded_quotients():
    cf = unbounded_theta(4)
    for n in range(1, 5):
        r = sturmian_witness(cf, n, build_function=False)
        assert r.extra["certified_at_least_n"]
        assert r.extra["ratio_quantity_lo"] >= n
        assert r.extra["m"] == cf.q(n) + cf.q(n - 1) - 1


def test_witness_ratio_matches_high_precision_oracle():
    cf = unbounded_theta(4)
    q = list(cf.partial_quotients)
    for n in range(1, 4):
        ln = oracles.lambda_value(q, cf.q(n - 1), cf.p(n - 1))
        ln1 = oracles.lambda_value(q, cf.q(n), cf.p(n))
        m = cf.q(n) + cf.q(n - 1) - 1
        r = sturmian_witness(cf, n, build_function=False)
        assert r.ratio_quantity == pytest.approx(ln / ln1 / (m + 1) ** 2, rel=1e-12)


def test_fibonacci_witness_decays_and_is_lipschitz():
    cf = ContinuedFraction(GOLDEN_CF)
    reps = [sturmian_witness(cf, n) for n in range(1, 7)]
    rq = [r.ratio_quantity for r in reps]
    assert all(b < a for a, b in zip(rq, rq[1:])) and rq[-1] < 0.01
    for r in reps:
        assert r.lip <= 1 + 1e-9
        assert r.osc == pytest.approx(r.extra["osc_predicted"], abs=1e-12)


def test_witness_built_function_on_unbounded_quotients():
    r = sturmian_witness(unbounded_theta(3), 1)
    assert r.lip <= 1 + 1e-9 and r.osc == pytest.approx(r.extra["osc_predicted"], abs=1e-12)


def test_witness_needs_next_quotient():
    with pytest.raises(PrecisionError):
        sturmian_witness(ContinuedFraction([1, 2]), 2, build_function=False)


# -- Q_w control


@pytest.mark.parametrize("name", ["bernoulli", "golden", "fib_sturm", "silver_sturm"])
def test_qw_identity_and_bounds(name):
    s, D = space_D(name, 6)
    rng = np.random.default_rng(3)
    for _ in range(5):
        r = qw_random_trial(s, D, rng)
        assert r["identity_residual"] < 1e-10
        assert r["margin_printed"] >= -1e-10
        assert r["margin_derived"] >= r["margin_printed"] - 1e-12


def test_qw_pairs_need_special_ancestor():
    _, t, _ = family("golden", 6)
    for w, m in qw_pairs(t, 6):
        assert m < len(w) and t.is_special(w)


def test_qw_bound_check_rejects_bad_pairs():
    s, D = space_D("golden", 6)
    f = s.xi("a")
    with pytest.raises(ValidationError):
        qw_bound_check(s, D, f, "aa", 3)


def test_q_reconstruction():
    s, _ = space_D("silver_sturm", 7)
    assert q_reconstruction_defect(s, s.random_function(np.random.default_rng(0))) < 1e-10


# -- linear recurrence


def test_lr_certificate_fibonacci():
    sub = Substitution(FIBONACCI_RULES)
    t = sub.language(11)
    m = substitution_measure(sub, t)
    sample = sub.sample(100_000, seed=0)
    est = estimate_lr_constant(t, m, sample)
    assert math.isfinite(est["K_hat"]) and est["K_hat"] == pytest.approx(3.0)
    assert est["frequency_bound"] == pytest.approx(1 + PHI, abs=1e-9)
    cert = lr_certificate(t, m, est["K_hat"], 10, sample)
    assert max(cert["band_counts"].values()) <= cert["branch_bound"]
    tails = [cert["tail_bound"][k] for k in range(13)]
    assert all(math.isfinite(x) for x in tails)
    assert np.allclose(np.array(tails[1:]) / np.array(tails[:-1]), cert["alpha"])


def test_lr_certificate_needs_flags():
    sub = Substitution(FIBONACCI_RULES)
    t = sub.language(6)
    m = substitution_measure(sub, t)
    with pytest.raises(InsufficientDataError):
        lr_certificate(t, m, 3.0, 6, sub.sample(1000))


# -- experiments registry


def cfg(subshift, **kw):
    return RunConfig.from_dict({"subshift": subshift, **kw})


GOLDEN_SPEC = {"type": "sft", "vertices": [0, 1], "edges": [["a", 0, 0], ["b", 0, 1], ["c", 1, 0]]}
FIB_STURM_SPEC = {"type": "sturmian", "partial_quotients": GOLDEN_CF}


def test_experiment_registry_is_complete():
    assert set(EXPERIMENTS) == {
        "complexity", "three_distance", "sturmian_witness", "sft_fk", "sft_projection", "summability",
        "commutant", "du_norm", "eta_zeta", "qw_control", "lr_certificate",
    }
    with pytest.raises(ValidationError):
        get("nope")


@pytest.mark.parametrize(
    "name,spec,params,verdict",
    [
        ("complexity", GOLDEN_SPEC, {"N": 10}, "computed"),
        ("three_distance", FIB_STURM_SPEC, {"N": 12}, "conforming"),
        ("sturmian_witness", {"type": "sturmian", "preset": "unbounded", "n_max": 4}, {"n_max": 4, "build_function": False}, "unbounded"),
        ("sft_fk", GOLDEN_SPEC, {"K_max": 3}, None),
        ("commutant", GOLDEN_SPEC, {"N_max": 4}, "constants only"),
        ("du_norm", GOLDEN_SPEC, {"N_max": 4}, "bounded"),
        ("eta_zeta", FIB_STURM_SPEC, {}, "holds"),
        ("qw_control", GOLDEN_SPEC, {"trials": 3}, "holds"),
    ],
)
def test_experiments_run(name, spec, params, verdict):
    rows, summary = get(name)(cfg(spec, N=5), params)
    assert rows
    if verdict is not None:
        assert summary["verdict"] == verdict


def test_experiment_type_mismatch():
    with pytest.raises(ValidationError):
        get("sft_fk")(cfg(FIB_STURM_SPEC), {})


def test_summability_experiment_rejects_kind():
    with pytest.raises(ValidationError):
        get("summability")(cfg(GOLDEN_SPEC), {"kind": "zeta"})
