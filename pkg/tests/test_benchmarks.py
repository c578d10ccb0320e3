from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mqsvt_spoof.benchmarks import (
    EnsembleConfig,
    SweepRow,
    analytic_cross_term_lb,
    analytic_f2_sum,
    analytic_gamma,
    analytic_sxq_lb,
    analytic_sxq_lb_terms,
    crossover,
    f_moment_report,
    gamma_sweep,
    noisy_scoring_distribution,
    hog_check,
    run_ensemble,
    sxes_score,
    sxq_estimate,
    weingarten_gamma,
    xeb_score,
    xhog_check,
    xq_formula,
)
from mqsvt_spoof.circuit import build_mqsvt, ensemble_member, identity_unitary, random_architecture
from mqsvt_spoof.simulator import full_distribution
from mqsvt_spoof.stats import batch_means

N = 3
XS = [format(x, "03b") for x in range(8)]


def test_sxes_examples():
    uni = {x: 2.0**-4 for x in XS}
    assert sxes_score(uni, uni) == pytest.approx(7 / 2**8)
    p = {x: v for x, v in zip(XS, np.linspace(0.01, 0.2, 8))}
    flat = {x: 2.0**-3 for x in XS}
    assert sxes_score(p, flat) == pytest.approx(2.0**-3 * sum(v for x, v in p.items() if x != "000"))
    assert sxes_score(p, {x: 0.0 for x in XS}) == 0.0
    with pytest.raises(ValueError):
        sxes_score(p, {"001": 1.0})


@given(st.lists(st.floats(-1, 1), min_size=8, max_size=8), st.lists(st.floats(0, 1), min_size=8, max_size=8))
def test_xeb_identity(a, b):
    p = dict(zip(XS, b))
    q = dict(zip(XS, a))
    assert xeb_score(p, q, N) == pytest.approx(2**N * sxes_score(p, q) - 1)


def test_xeb_examples():
    p = {x: (1 / 7 if x != "000" else 0.0) for x in XS}
    assert xeb_score(p, {x: 2.0**-3 for x in XS}, 3) == pytest.approx(0.0)
    p2 = {"000": 0.0, "001": 0.5, "010": 0.5, **{x: 0.0 for x in XS[3:]}}
    # sum p^2 = 1/2 = 2 * 2^-2 at n = 2 style scaling
    assert xeb_score(p2, p2, 2) == pytest.approx(1.0)


def test_xhog():
    c = build_mqsvt(identity_unitary(random_architecture(4, 1, 0)), 1, [0.0] * 3)
    p = {x: v for x, v in zip(XS, full_distribution(c).probs[0])}
    assert not xhog_check(["001", "010"], p, 1.1, 3)
    flat = {x: 2.0**-3 for x in XS}
    assert not xhog_check(["001", "111"], flat, 1.1, 3)
    with pytest.raises(ValueError):
        xhog_check(["001"], flat, 0.9, 3)
    with pytest.raises(ValueError):
        xhog_check(["001", "001"], flat, 1.1, 3)
    with pytest.raises(ValueError):
        xhog_check(["000"], flat, 1.1, 3)
    dist = full_distribution(ensemble_member(4, 1, 1, 5, 0)).probs[0]
    pr = dict(zip(XS, dist))
    top = sorted(XS[1:], key=lambda x: -pr[x])[:2]
    assert xhog_check(top, pr, 1.1, 3) == ((pr[top[0]] + pr[top[1]]) / 2 > 1.1 / 8)


def test_hog():
    p = {"a": 0.3, "b": 0.2, "c": 0.05}
    assert hog_check(["a", "b"], p, 0.1)
    assert hog_check(["a", "b", "c"], p, 0.1)
    assert not hog_check(["c"], p, 0.1)
    with pytest.raises(ValueError):
        hog_check(["a"], p, -1)


def test_xq_formula_trivial():
    p = np.random.default_rng(0).random(100)
    assert xq_formula(p, np.full(100, 2.0**-3), 3) == 0.0


def test_gamma_values():
    assert analytic_gamma(1) == Fraction(95232, 5160960)
    assert float(analytic_gamma(1)) == pytest.approx(0.0184524, rel=1e-5)
    assert float(analytic_gamma(2)) == pytest.approx(3.2196e-4, rel=1e-4)
    for d in range(1, 6):
        assert analytic_gamma(d + 1) / analytic_gamma(d) == Fraction(90048, 5160960)
    assert weingarten_gamma(1) == Fraction(1, 420)
    assert weingarten_gamma(2) / weingarten_gamma(1) == Fraction(1, 70)


def test_f2_sum_values():
    assert float(analytic_f2_sum(3, 1)) == pytest.approx(5.0456e-4, rel=1e-4)
    assert float(analytic_f2_sum(1, 1)) == pytest.approx(1.1533e-3, rel=1e-4)


def test_cross_term_values():
    assert analytic_cross_term_lb(3, 1) == Fraction(1167360, 1321205760)
    assert analytic_cross_term_lb(2, 1) > 0
    with pytest.raises(ValueError):
        analytic_cross_term_lb(1, 1)


def test_sxq_lb_values():
    assert float(analytic_sxq_lb(3, 1)) == pytest.approx(0.0127, abs=5e-5)
    a, b = analytic_sxq_lb_terms(3, 1)
    assert float(a) == pytest.approx(0.0046131, rel=1e-4)
    assert float(b) == pytest.approx(0.0080782, rel=1e-4)
    assert a + b == analytic_sxq_lb(3, 1)
    assert 0 < analytic_sxq_lb(3, 2) / analytic_sxq_lb(3, 1) < 1
    for n in range(2, 11):
        for d in range(1, 6):
            assert analytic_sxq_lb(n, d) > 0


def test_config_validation():
    with pytest.raises(ValueError):
        EnsembleConfig(n=2, d_U=1)
    with pytest.raises(ValueError):
        EnsembleConfig(n=3, d_U=0)
    with pytest.raises(ValueError):
        sxq_estimate(EnsembleConfig(n=3, d_U=1, circuits=10))


def test_batch_means():
    v = np.arange(400, dtype=float)
    m, se = batch_means(v, 40)
    assert m == pytest.approx(v.mean())
    with pytest.raises(ValueError):
        batch_means(v, 10)


def test_trivial_estimator_exactly_zero():
    rep = sxq_estimate(EnsembleConfig(n=3, d_U=1, circuits=200, master_seed=1), estimator="trivial")
    assert rep.estimate == 0.0 and rep.stderr == 0.0
    assert rep.extra["main_text_form"] == 0.0


def test_sxq_normalizations_related():
    rep = sxq_estimate(EnsembleConfig(n=3, d_U=1, circuits=400, master_seed=2))
    assert rep.extra["main_text_form"] * 4**3 == pytest.approx(rep.estimate)


def test_f2_matches_exact_weingarten_constant():
    cfg = EnsembleConfig(n=3, d_U=1, circuits=40_000, master_seed=3)
    rep = f_moment_report(cfg)["sum_F2"]
    ref = rep.extra["weingarten_reference"]
    assert abs(rep.estimate - ref) < 3 * rep.stderr


def test_crossover_logic():
    def row(g, w):
        return SweepRow(g, 0, 0, 0, 0, 0, 0, w, 0)

    assert crossover([row(0.0, False), row(0.5, True), row(1.0, True)]) == 0.5
    assert crossover([row(0.0, False), row(0.5, True), row(1.0, False)]) is None
    assert crossover([row(0.2, True), row(0.1, True)]) == 0.1


def test_noisy_sxes_decreases_with_gamma():
    # Joint scoring: at gamma = 0 the noisy score is sum_x p^2 and the curve falls monotonically.
    cfg = EnsembleConfig(n=3, d_U=2, circuits=2000, master_seed=4)
    res = gamma_sweep(cfg, [0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3], normalization="joint")
    noisy = [r["noisy"] for r in res["rows"]]
    assert all(a > b for a, b in zip(noisy, noisy[1:]))
    assert res["noisy_monotone_decreasing"]


def test_ideal_beats_spoofer_without_noise():
    res = gamma_sweep(EnsembleConfig(n=3, d_U=1, circuits=2000, master_seed=5), [0.0])
    row = res["rows"][0]
    assert row["noisy"] > row["spoof"] + 3 * row["diff_stderr"]


def test_full_noise_equals_uniform_term():
    cfg = EnsembleConfig(n=3, d_U=1, circuits=500, master_seed=6)
    data = run_ensemble(cfg, gammas=[1.0])
    assert np.allclose(data["noisy0"], 2.0**-4)
    assert np.allclose(noisy_scoring_distribution(data["noisy0"], "postselected"), 2.0**-3)
    res = gamma_sweep(cfg, [1.0])
    row = res["rows"][0]
    assert np.isclose(row["noisy"], row["uniform"])


def test_zero_noise_scores_match_ideal():
    cfg = EnsembleConfig(n=3, d_U=1, circuits=300, master_seed=8)
    data = run_ensemble(cfg, gammas=[0.0])
    assert np.allclose(data["noisy0"], data["p"])
    p = data["p"][:, 1:]
    joint = gamma_sweep(cfg, [0.0], normalization="joint")["rows"][0]
    assert np.isclose(joint["noisy"], np.mean(np.sum(p**2, axis=1)))


def test_unknown_normalization_rejected():
    with pytest.raises(ValueError):
        gamma_sweep(EnsembleConfig(n=3, d_U=1, circuits=100), [0.5], normalization="other")


def test_run_ensemble_independent_of_workers():
    cfg1 = EnsembleConfig(n=3, d_U=1, circuits=2500, master_seed=7, workers=1)
    cfg2 = EnsembleConfig(n=3, d_U=1, circuits=2500, master_seed=7, workers=3)
    a = run_ensemble(cfg1, gammas=[0.5])
    b = run_ensemble(cfg2, gammas=[0.5])
    assert all(np.array_equal(a[k], b[k]) for k in a)


def test_gamma_sweep_independent_of_workers():
    a = gamma_sweep(EnsembleConfig(n=3, d_U=1, circuits=2500, master_seed=9, workers=1), [0.0, 0.5])
    b = gamma_sweep(EnsembleConfig(n=3, d_U=1, circuits=2500, master_seed=9, workers=3), [0.0, 0.5])
    assert a == b
