import warnings
from datetime import date, timedelta

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import optimize

from cascade_rebalance.errors import CoverageError, DegenerateError, InfeasibleError
from cascade_rebalance.market_data import CovarianceMatrix, ReturnSeries, rolling_stats, vvv_adjusted_volatility
from cascade_rebalance.weights import (
    Scheme, WeightConfig, WeightVector, aggregate_weight_bounds, compute_weight_table,
    constrained_min_variance_weights, equal_weights, inverse_measure_weights, kkt_residual, min_variance_weights,
    perturbed_risk_parity, regularized, risk_contributions, risk_parity_weights,
)

START = date(2022, 1, 1)


def cov_of(matrix):
    m = np.asarray(matrix, dtype=float)
    return CovarianceMatrix(tuple(f"A{i}" for i in range(len(m))), m)


def random_cov(rng, k):
    a = rng.normal(0, 0.03, (k, k))
    vols = rng.uniform(0.01, 0.1, k)
    corr = a @ a.T + np.eye(k) * 0.01
    d = np.sqrt(np.diag(corr))
    corr = corr / np.outer(d, d)
    return cov_of(corr * np.outer(vols, vols))


covs = st.builds(lambda seed, k: random_cov(np.random.default_rng(seed), k), st.integers(0, 10**6), st.integers(2, 12))


def vec(weights, scheme=Scheme.VVV):
    return WeightVector(scheme, tuple(f"A{i}" for i in range(len(weights))), np.asarray(weights, dtype=float))


# -- simple schemes ---------------------------------------------------------------------


def test_equal_weights():
    assert list(equal_weights(list("ABCD")).weights) == [0.25] * 4
    assert list(equal_weights(["A"]).weights) == [1.0]
    assert abs(equal_weights(list("ABC")).weights.sum() - 1) <= 1e-15
    with pytest.raises(CoverageError):
        equal_weights([])


def test_inverse_measure():
    assert np.allclose(inverse_measure_weights({"A": 2.0, "B": 2.0, "C": 2.0}).weights, 1 / 3, rtol=0, atol=1e-16)
    w = inverse_measure_weights({"A": 1.0, "B": 3.0}).weights
    assert w == pytest.approx([0.75, 0.25], abs=1e-15)
    doubled = inverse_measure_weights({"A": 2.0, "B": 6.0}).weights
    assert np.allclose(w, doubled, rtol=0, atol=1e-15)


def test_non_positive_measure_names_asset():
    with pytest.raises(DegenerateError, match="B"):
        inverse_measure_weights({"A": 1.0, "B": 0.0})


@settings(max_examples=100)
@given(st.lists(st.floats(1e-4, 10), min_size=1, max_size=30))
def test_inverse_measure_positive_and_normalized(ms):
    w = inverse_measure_weights({f"A{i}": m for i, m in enumerate(ms)}).weights
    assert np.all(w > 0)
    assert abs(w.sum() - 1) <= 1e-10


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.integers(2, 10))
def test_vvv_with_theta_zero_is_simple_parity(seed, k):
    rng = np.random.default_rng(seed)
    vol, vvv = {}, {}
    for i in range(k):
        r = ReturnSeries(f"A{i}", tuple(START + timedelta(days=d) for d in range(150)), rng.normal(0, 0.04, 150))
        s = vvv_adjusted_volatility(rolling_stats(r, 90), window=30, theta=0.0)[-1]
        vol[r.asset_id], vvv[r.asset_id] = s.volatility, s.vvv_volatility
    a = inverse_measure_weights(vol, Scheme.SIMPLE_PARITY).weights
    b = inverse_measure_weights(vvv, Scheme.VVV).weights
    assert np.array_equal(a, b)


# -- risk parity ------------------------------------------------------------------------------


def test_risk_parity_diagonal_is_simple_parity():
    sig = np.array([0.01, 0.02, 0.05, 0.1])
    rp = risk_parity_weights(cov_of(np.diag(sig**2))).weights
    sp = inverse_measure_weights({f"A{i}": s for i, s in enumerate(sig)}).weights
    assert np.allclose(rp, sp, rtol=1e-9, atol=0)


def test_risk_parity_identity():
    assert np.allclose(risk_parity_weights(cov_of(np.eye(5))).weights, 0.2, rtol=0, atol=1e-14)


@settings(max_examples=60, deadline=None)
@given(covs)
def test_risk_parity_contributions_equal(cov):
    w = risk_parity_weights(cov).weights
    assert np.all(w > 0) and abs(w.sum() - 1) <= 1e-12
    rc = w * (cov.entries @ w)
    assert np.max(np.abs(rc - rc.mean())) / rc.mean() <= 1e-8
    assert np.allclose(rc, risk_contributions(w, cov.entries), rtol=1e-14, atol=0)


@settings(max_examples=30, deadline=None)
@given(covs, st.floats(1e-3, 1e3))
def test_risk_parity_scale_invariant(cov, c):
    a = risk_parity_weights(cov).weights
    b = risk_parity_weights(CovarianceMatrix(cov.asset_ids, cov.entries * c)).weights
    assert np.allclose(a, b, rtol=1e-8, atol=1e-12)


# -- minimum variance ---------------------------------------------------------------------------


def test_min_variance_identity_and_diagonal():
    assert np.allclose(min_variance_weights(cov_of(np.eye(4))).weights, 0.25, rtol=0, atol=1e-15)
    var = np.array([0.04, 0.01, 0.09])
    w = min_variance_weights(cov_of(np.diag(var))).weights
    sv = inverse_measure_weights({f"A{i}": v for i, v in enumerate(var)}).weights
    assert np.allclose(w, sv, rtol=1e-12, atol=0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_min_variance_matches_numerical_minimizer(seed):
    cov = random_cov(np.random.default_rng(seed), 3)
    x = cov.entries
    w = min_variance_weights(cov).weights
    # eliminate the budget constraint and minimise over the two free weights
    def f(v):
        full = np.append(v, 1 - v.sum())
        return full @ x @ full / x.trace()
    res = optimize.minimize(f, np.full(2, 1 / 3), method="BFGS", options={"gtol": 1e-14})
    brute = np.append(res.x, 1 - res.x.sum())
    assert np.allclose(w, brute, rtol=0, atol=1e-6)
    g = x @ w
    assert np.max(np.abs(g - g.mean())) / abs(g.mean()) <= 1e-8


@settings(max_examples=30, deadline=None)
@given(covs, st.floats(1e-3, 1e3))
def test_min_variance_scale_invariant(cov, c):
    a = min_variance_weights(cov).weights
    b = min_variance_weights(CovarianceMatrix(cov.asset_ids, cov.entries * c)).weights
    assert np.allclose(a, b, rtol=1e-8, atol=1e-10)


def test_singular_matrix_is_regularized():
    x = np.ones((3, 3)) * 0.01
    fixed = regularized(x)
    assert not np.array_equal(fixed, x)
    assert np.allclose(fixed - x, np.eye(3) * 1e-10, rtol=0, atol=1e-18)
    w = min_variance_weights(cov_of(x)).weights
    assert np.allclose(w, 1 / 3)


def test_positive_definite_matrix_untouched():
    x = np.diag([0.01, 0.02])
    assert regularized(x) is not None and np.array_equal(regularized(x), x)


# -- constrained -------------------------------------------------------------------------------


def test_constrained_interior_optimum():
    w = constrained_min_variance_weights(cov_of(np.eye(3)), 0.0, 1.0).weights
    assert np.allclose(w, 1 / 3, rtol=0, atol=1e-14)


def test_constrained_single_binding_bound():
    cov = cov_of(np.diag([0.01, 0.04]))
    assert min_variance_weights(cov).weights[0] > 0.15
    w = constrained_min_variance_weights(cov, 0.0, [0.15, 1.0]).weights
    assert w == pytest.approx([0.15, 0.85], abs=1e-14)


def test_constrained_infeasible_cap():
    with pytest.raises(InfeasibleError):
        constrained_min_variance_weights(random_cov(np.random.default_rng(0), 4), 0.0, 0.15)


def _slsqp(x, lo, hi):
    k = len(x)
    with warnings.catch_warnings():
        # SLSQP may step slightly outside the box and clip; harmless for a reference value
        warnings.simplefilter("ignore", RuntimeWarning)
        res = _run_slsqp(x, k, lo, hi)
    return res.x


def _run_slsqp(x, k, lo, hi):
    return optimize.minimize(
        lambda w: w @ x @ w / x.trace(), np.full(k, 1 / k), jac=lambda w: 2 * x @ w / x.trace(),
        bounds=[(lo, hi)] * k, constraints=[{"type": "eq", "fun": lambda w: w.sum() - 1}],
        method="SLSQP", options={"ftol": 1e-16, "maxiter": 1000},
    )


@settings(max_examples=40, deadline=None)
@given(covs, st.sampled_from([(0.0, None), (0.0, 0.3), (0.02, 0.25)]))
def test_constrained_kkt_and_oracle(cov, box):
    lo, hi = box
    k = cov.k
    if hi is not None and hi * k < 1 or lo * k > 1:
        with pytest.raises(InfeasibleError):
            constrained_min_variance_weights(cov, lo, hi)
        return
    w = constrained_min_variance_weights(cov, lo, hi).weights
    assert kkt_residual(w, cov.entries, lo, hi) <= 1e-8
    assert np.all(w >= lo - 1e-12)
    if hi is not None:
        assert np.all(w <= hi + 1e-12)
    ref = _slsqp(cov.entries, lo, 1.0 if hi is None else hi)
    # the solver is never worse than an off-the-shelf SQP
    assert w @ cov.entries @ w <= ref @ cov.entries @ ref * (1 + 1e-7)


# -- perturbed risk parity and bands ----------------------------------------------------------


def test_perturbed_risk_parity():
    rp = vec([0.10, 0.01, 0.89], Scheme.RISK_PARITY)
    minus = perturbed_risk_parity(rp, -0.02)
    plus = perturbed_risk_parity(rp, 0.02)
    assert minus.weights[0] == pytest.approx(0.08, abs=1e-15)
    assert minus.weights[1] == 0.0
    assert plus.weights[0] == pytest.approx(0.12, abs=1e-15)
    assert minus.scheme is Scheme.RISK_PARITY_MINUS_2 and plus.scheme is Scheme.RISK_PARITY_PLUS_2


def test_single_candidate_band_collapses():
    wvvv = vec([0.10, 0.90])
    b = aggregate_weight_bounds([wvvv], wvvv)
    assert (b["A0"].min_w, b["A0"].ideal_w, b["A0"].max_w) == (0.10, 0.10, 0.10)


def test_band_from_candidate_envelope():
    wvvv = vec([0.10, 0.90])
    cands = [vec([0.05, 0.95], Scheme.EQUAL), vec([0.20, 0.80], Scheme.RISK_PARITY), wvvv]
    b = aggregate_weight_bounds(cands, wvvv)["A0"]
    assert (b.min_w, b.ideal_w, b.max_w) == (0.05, 0.10, 0.15)


def test_full_exit_band():
    wvvv = vec([0.10, 0.90])
    b = aggregate_weight_bounds([wvvv], wvvv, full_exit={"A1"})["A1"]
    assert (b.min_w, b.ideal_w, b.max_w) == (0.0, 0.0, 0.0)


def test_missing_candidate_asset():
    wvvv = vec([0.10, 0.90])
    short = WeightVector(Scheme.EQUAL, ("A0",), np.array([1.0]))
    with pytest.raises(CoverageError):
        aggregate_weight_bounds([short], wvvv)


def test_ideal_outside_envelope_widens_band():
    wvvv = vec([0.30, 0.70])
    b = aggregate_weight_bounds([vec([0.05, 0.95], Scheme.EQUAL), vec([0.2, 0.8], Scheme.MIN_VARIANCE)], wvvv)["A0"]
    assert b.min_w == 0.05 and b.ideal_w == 0.30 and b.max_w == 0.30


@settings(max_examples=50)
@given(st.integers(1, 8).flatmap(lambda k: st.lists(
    st.lists(st.floats(-0.5, 1.5), min_size=k, max_size=k), min_size=1, max_size=6).map(lambda c: (k, c))),
    st.floats(0, 0.2), st.floats(0.2, 1))
def test_bounds_always_ordered(data, lo, hi):
    k, cands = data
    ideal = np.abs(np.asarray(cands[0])) + 1e-3
    wvvv = vec(ideal / ideal.sum())
    vectors = [vec(c, Scheme.MIN_VARIANCE) for c in cands]
    cfg = WeightConfig(min_asset_weight=lo, max_asset_weight=hi)
    for b in aggregate_weight_bounds(vectors, wvvv, cfg).values():
        assert 0 <= b.min_w <= b.ideal_w <= b.max_w


# -- full table ------------------------------------------------------------------------------


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6), st.integers(2, 15))
def test_weight_table(seed, k):
    rng = np.random.default_rng(seed)
    cov = random_cov(rng, k)
    vol = {a: float(np.sqrt(cov.entries[i, i])) for i, a in enumerate(cov.asset_ids)}
    vvv = {a: v * (1 + rng.uniform(0, 1)) for a, v in vol.items()}
    table = compute_weight_table(vol, vvv, cov)
    assert (Scheme.CONSTRAINED_MIN_VARIANCE in table.vectors) == (k >= 7)
    assert bool(table.warnings) == (k < 7)
    for s in (Scheme.EQUAL, Scheme.SIMPLE_VARIANCE, Scheme.SIMPLE_PARITY, Scheme.VVV):
        w = table.vectors[s].weights
        assert np.all(w > 0) and abs(w.sum() - 1) <= 1e-10
    assert abs(table.vectors[Scheme.MIN_VARIANCE].weights.sum() - 1) <= 1e-10
    for a in cov.asset_ids:
        b = table.bounds[a]
        assert 0 <= b.min_w <= b.ideal_w <= b.max_w
        assert table.min_weight[a] <= table.true_min_weight[a]
        assert b.ideal_w == table.vectors[Scheme.VVV].as_dict()[a]
