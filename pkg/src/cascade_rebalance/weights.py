"""Weighting schemes and the (min, ideal, max) weight bands.

The VVV weights (inverse vol-of-vol adjusted volatility) are the reference
"ideal" weights. Every other scheme only widens or narrows the band around
them through :func:`aggregate_weight_bounds`.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import linalg

from .errors import CoverageError, DegenerateError, InfeasibleError, SingularMatrixError, SolverError
from .market_data import CovarianceMatrix

log = logging.getLogger(__name__)


class Scheme(str, enum.Enum):
    EQUAL = "Equal"
    SIMPLE_VARIANCE = "SimpleVariance"
    SIMPLE_PARITY = "SimpleParity"
    VVV = "VVV"
    RISK_PARITY = "RiskParity"
    MIN_VARIANCE = "MinVariance"
    CONSTRAINED_MIN_VARIANCE = "ConstrainedMinVariance"
    NO_SHORT = "NoShort"
    RISK_PARITY_MINUS_2 = "RiskParityMinus2"
    RISK_PARITY_PLUS_2 = "RiskParityPlus2"


@dataclass(frozen=True)
class WeightVector:
    scheme: Scheme
    asset_ids: tuple[str, ...]
    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        if len(self.asset_ids) != len(self.weights):
            raise ValueError("asset_ids and weights differ in length")

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.asset_ids, map(float, self.weights)))


@dataclass(frozen=True)
class WeightConfig:
    theta: float = 1.0
    min_asset_weight: float = 0.0
    max_asset_weight: float = 0.15
    rp_perturbation: float = 0.02
    rp_tolerance: float = 1e-10
    rp_max_iter: int = 10_000
    rp_damping: float = 0.5
    qp_tolerance: float = 1e-10
    qp_max_iter: int = 500

    def __post_init__(self):
        if not 0 <= self.min_asset_weight <= self.max_asset_weight <= 1:
            raise ValueError("need 0 <= min_asset_weight <= max_asset_weight <= 1")
        if self.theta < 0:
            raise ValueError("theta must be non-negative")


@dataclass(frozen=True)
class WeightBounds:
    asset_id: str
    min_w: float
    ideal_w: float
    max_w: float

    def __post_init__(self):
        if not (0 <= self.min_w <= self.ideal_w <= self.max_w):
            raise ValueError(f"{self.asset_id}: need 0 <= min_w <= ideal_w <= max_w")


FULL_EXIT = (0.0, 0.0, 0.0)


def equal_weights(asset_ids: Sequence[str]) -> WeightVector:
    k = len(asset_ids)
    if k == 0:
        raise CoverageError("empty portfolio")
    return WeightVector(Scheme.EQUAL, tuple(asset_ids), np.full(k, 1.0 / k))


def inverse_measure_weights(
    measure: Mapping[str, float], scheme: Scheme = Scheme.SIMPLE_PARITY
) -> WeightVector:
    """``w_i = (1/m_i) / sum_j (1/m_j)`` for a positive per-asset measure."""
    if not measure:
        raise CoverageError("empty portfolio")
    ids = tuple(measure)
    m = np.array([measure[a] for a in ids], dtype=float)
    bad = [a for a, v in zip(ids, m) if not v > 0 or not math.isfinite(v)]
    if bad:
        raise DegenerateError(f"non-positive measure for {bad}")
    inv = 1.0 / m
    return WeightVector(scheme, ids, inv / inv.sum())


def regularized(cov: np.ndarray) -> np.ndarray:
    """Return ``cov`` unchanged if it is comfortably positive definite, else ``cov + lambda*I``.

    ``lambda = 1e-8 * trace / k``. The ridge is applied when the smallest
    eigenvalue is below ``lambda``, i.e. when the matrix is singular at the
    ridge's own scale. Raises :class:`SingularMatrixError` when even the ridge
    does not rescue the matrix.
    """
    cov = np.asarray(cov, dtype=float)
    k = cov.shape[0]
    ridge = 1e-8 * np.trace(cov) / k
    if linalg.eigvalsh(cov, subset_by_index=[0, 0])[0] >= ridge > 0:
        return cov
    fixed = cov + ridge * np.eye(k)
    try:
        linalg.cholesky(fixed, lower=True)
    except linalg.LinAlgError:
        raise SingularMatrixError("covariance matrix is not positive definite after regularization") from None
    log.warning("covariance matrix regularized with ridge %.3e", ridge)
    return fixed


def risk_contributions(w: np.ndarray, cov: np.ndarray) -> np.ndarray:
    return w * (cov @ w)


def _rc_spread(w: np.ndarray, cov: np.ndarray) -> float:
    rc = risk_contributions(w, cov)
    mean = rc.mean()
    return float(np.max(np.abs(rc - mean)) / mean)


def _fixed_point(cov, w, damping, tol, max_iter):
    k = len(w)
    for _ in range(max_iter):
        xw = cov @ w
        if np.any(xw <= 0):
            return w, False
        target = (w @ xw) / (k * xw)
        target /= target.sum()
        nxt = damping * w + (1 - damping) * target
        nxt /= nxt.sum()
        if np.max(np.abs(nxt - w)) < tol:
            return nxt, True
        w = nxt
    return w, False


def _coordinate_descent(cov, tol, max_iter):
    # Cyclical coordinate descent on 1/2 y'Xy - (1/k) sum log y; the
    # minimizer normalized to sum 1 has equal risk contributions.
    k = cov.shape[0]
    y = 1.0 / np.sqrt(np.diag(cov))
    b = 1.0 / k
    for _ in range(max_iter):
        prev = y.copy()
        for i in range(k):
            c = cov[i] @ y - cov[i, i] * y[i]
            y[i] = (-c + math.sqrt(c * c + 4 * cov[i, i] * b)) / (2 * cov[i, i])
        if np.max(np.abs(y - prev)) <= tol * np.max(np.abs(y)):
            break
    return y / y.sum()


def _newton_polish(cov, w, max_steps=100):
    # Damped Newton on the same convex objective; needed when X is close to
    # singular and the first-order methods crawl.
    k = len(w)
    b = 1.0 / k

    def objective(y):
        return 0.5 * y @ cov @ y - b * np.log(y).sum()

    y = w * math.sqrt(b / (w @ cov @ w))
    for _ in range(max_steps):
        f = cov @ y - b / y
        jac = cov + np.diag(b / y ** 2)
        step = linalg.solve(jac, f, assume_a="pos")
        if np.max(np.abs(step)) <= 1e-15 * np.max(y):
            break
        t = 1.0
        while np.any(y - t * step <= 0):
            t /= 2
        base, slope = objective(y), f @ step
        while t > 1e-12 and objective(y - t * step) > base - 1e-4 * t * slope:
            t /= 2
        y = y - t * step
    return y / y.sum()


def risk_parity_weights(cov: CovarianceMatrix, config: WeightConfig = WeightConfig()) -> WeightVector:
    """Equal-risk-contribution weights.

    Damped fixed-point iteration on ``w_i = w'Xw / (k (Xw)_i)``; if it stalls,
    cyclical coordinate descent takes over. A few Newton steps finish the job
    so the risk contributions agree to near machine precision.
    """
    x = regularized(cov.entries)
    k = cov.k
    if k == 0:
        raise CoverageError("empty portfolio")
    w0 = 1.0 / np.sqrt(np.diag(x))
    w0 /= w0.sum()
    w, ok = _fixed_point(x, w0, config.rp_damping, config.rp_tolerance, config.rp_max_iter)
    if not ok:
        log.info("risk parity fixed point stalled; falling back to coordinate descent")
        w = _coordinate_descent(x, config.rp_tolerance, config.rp_max_iter)
    w = _newton_polish(x, w)
    spread = _rc_spread(w, x)
    if not np.all(w > 0) or spread > 1e-8:
        raise SolverError("risk parity did not converge", residual=spread)
    return WeightVector(Scheme.RISK_PARITY, cov.asset_ids, w)


def min_variance_weights(cov: CovarianceMatrix) -> WeightVector:
    """Closed-form ``X^-1 1 / (1' X^-1 1)``; entries may be negative."""
    x = regularized(cov.entries)
    ones = np.ones(cov.k)
    factor = linalg.cho_factor(x)
    z = linalg.cho_solve(factor, ones)
    denom = ones @ z
    if not denom > 0:
        raise SingularMatrixError("1' X^-1 1 is not positive")
    return WeightVector(Scheme.MIN_VARIANCE, cov.asset_ids, z / denom)


def _feasible_start(lower, upper):
    # Shift a flat vector and clip into the box until it sums to one.
    lo_t, hi_t = -1.0 - np.max(np.abs(upper[np.isfinite(upper)]), initial=1.0), 2.0
    for _ in range(200):
        mid = (lo_t + hi_t) / 2
        s = np.clip(mid, lower, upper).sum()
        if s < 1:
            lo_t = mid
        else:
            hi_t = mid
    w = np.clip(hi_t, lower, upper)
    # put the rounding residue on a variable with room
    resid = 1.0 - w.sum()
    for i in range(len(w)):
        room = (upper[i] - w[i]) if resid > 0 else (w[i] - lower[i])
        move = min(abs(resid), room)
        w[i] += math.copysign(move, resid)
        resid = 1.0 - w.sum()
        if abs(resid) < 1e-15:
            break
    return w


def _equality_qp(x, w, free):
    # minimize 1/2 w'Xw with w fixed off `free` and sum(w) = 1; returns
    # the free-variable optimum and the multiplier of the sum constraint.
    idx = np.flatnonzero(free)
    fixed = ~free
    n = len(idx)
    kkt = np.zeros((n + 1, n + 1))
    kkt[:n, :n] = x[np.ix_(idx, idx)]
    kkt[:n, n] = -1.0
    kkt[n, :n] = 1.0
    rhs = np.zeros(n + 1)
    rhs[:n] = -x[np.ix_(idx, np.flatnonzero(fixed))] @ w[fixed]
    rhs[n] = 1.0 - w[fixed].sum()
    sol = linalg.solve(kkt, rhs)
    return sol[:n], sol[n]


def constrained_min_variance_weights(
    cov: CovarianceMatrix,
    lower: float | Sequence[float] = 0.0,
    upper: float | Sequence[float] | None = None,
    config: WeightConfig = WeightConfig(),
    scheme: Scheme = Scheme.CONSTRAINED_MIN_VARIANCE,
) -> WeightVector:
    """Minimum variance with ``sum(w) = 1`` and ``lower <= w <= upper``.

    Primal active-set method: bounds enter the working set when they block a
    step and leave when their multiplier has the wrong sign.
    """
    x = regularized(cov.entries)
    k = cov.k
    lo = np.broadcast_to(np.asarray(lower, dtype=float), (k,)).copy()
    hi = np.full(k, np.inf) if upper is None else np.broadcast_to(np.asarray(upper, dtype=float), (k,)).copy()
    if np.any(lo > hi) or lo.sum() > 1 + 1e-12 or hi.sum() < 1 - 1e-12:
        raise InfeasibleError(f"weight bounds infeasible: sum(lower)={lo.sum():.6g}, sum(upper)={hi.sum():.6g}")

    w = _feasible_start(lo, hi)
    at_lo = np.isclose(w, lo, rtol=0, atol=1e-15)
    at_hi = np.isclose(w, hi, rtol=0, atol=1e-15) & ~at_lo
    tol = config.qp_tolerance
    for _ in range(config.qp_max_iter):
        free = ~(at_lo | at_hi)
        if free.any():
            target_free, nu = _equality_qp(x, w, free)
            step = np.zeros(k)
            step[free] = target_free - w[free]
        else:
            step = np.zeros(k)
        if np.max(np.abs(step)) <= 1e-14:
            g = x @ w
            nu = _multiplier(g, free, at_lo, at_hi)
            mult = np.where(at_lo, g - nu, np.where(at_hi, nu - g, 0.0))
            worst = int(np.argmin(mult))
            if mult[worst] >= -tol * max(abs(nu), 1e-300):
                break
            at_lo[worst] = at_hi[worst] = False
            continue
        alpha = 1.0
        blocking = None
        for i in np.flatnonzero(free):
            if step[i] < 0 and np.isfinite(lo[i]):
                a = (lo[i] - w[i]) / step[i]
                if a < alpha:
                    alpha, blocking = a, (i, "lo")
            elif step[i] > 0 and np.isfinite(hi[i]):
                a = (hi[i] - w[i]) / step[i]
                if a < alpha:
                    alpha, blocking = a, (i, "hi")
        w = w + max(alpha, 0.0) * step
        if blocking is not None:
            i, side = blocking
            if side == "lo":
                w[i] = lo[i]
                at_lo[i] = True
            else:
                w[i] = hi[i]
                at_hi[i] = True
    else:
        raise SolverError("active-set solver hit its iteration cap")
    return WeightVector(scheme, cov.asset_ids, w)


def _multiplier(g, free, at_lo, at_hi) -> float:
    # With every weight on a bound the budget multiplier is only bracketed.
    if free.any():
        return float(np.mean(g[free]))
    if at_hi.any():
        return float(np.max(g[at_hi]))
    return float(np.min(g[at_lo]))


def kkt_residual(w: np.ndarray, cov: np.ndarray, lower, upper) -> float:
    """Largest violation of the KKT conditions of the box-constrained problem."""
    k = len(w)
    lo = np.broadcast_to(np.asarray(lower, dtype=float), (k,))
    hi = np.full(k, np.inf) if upper is None else np.broadcast_to(np.asarray(upper, dtype=float), (k,))
    g = cov @ w
    at_lo = np.isclose(w, lo, rtol=0, atol=1e-12)
    at_hi = np.isclose(w, hi, rtol=0, atol=1e-12)
    free = ~(at_lo | at_hi)
    at_hi &= ~at_lo
    nu = _multiplier(g, free, at_lo, at_hi)
    res = [abs(w.sum() - 1)]
    res.append(float(np.max(np.maximum(lo - w, 0))))
    res.append(float(np.max(np.maximum(w - hi, 0))))
    if free.any():
        res.append(float(np.max(np.abs(g[free] - nu))) / max(abs(nu), 1e-300))
    if at_lo.any():
        res.append(float(np.max(np.maximum(nu - g[at_lo], 0))) / max(abs(nu), 1e-300))
    if at_hi.any():
        res.append(float(np.max(np.maximum(g[at_hi] - nu, 0))) / max(abs(nu), 1e-300))
    return max(res)


def perturbed_risk_parity(w: WeightVector, delta: float) -> WeightVector:
    """Shift every risk-parity weight by ``delta`` weight points, floored at 0.

    The result is not renormalized; it only serves as a band candidate.
    """
    scheme = Scheme.RISK_PARITY_PLUS_2 if delta >= 0 else Scheme.RISK_PARITY_MINUS_2
    return WeightVector(scheme, w.asset_ids, np.maximum(w.weights + delta, 0.0))


def aggregate_weight_bounds(
    candidates: Sequence[WeightVector],
    wvvv: WeightVector,
    config: WeightConfig = WeightConfig(),
    full_exit: frozenset[str] | set[str] = frozenset(),
) -> dict[str, WeightBounds]:
    """Band per asset from the envelope of every candidate scheme.

    ``min_w = max(min(candidates), min(wvvv, MIN))`` and
    ``max_w = min(max(candidates), max(wvvv, MAX))``, ideal = ``wvvv``. If the
    envelope excludes the ideal weight, the violated edge is widened to it.
    Assets in ``full_exit`` get ``(0, 0, 0)``.
    """
    ideal = wvvv.as_dict()
    columns = [c.as_dict() for c in candidates]
    out = {}
    for asset in wvvv.asset_ids:
        if asset in full_exit:
            out[asset] = WeightBounds(asset, *FULL_EXIT)
            continue
        values = []
        for c, col in zip(candidates, columns):
            if asset not in col:
                raise CoverageError(f"{c.scheme.value} weights missing asset {asset}")
            values.append(col[asset])
        w = ideal[asset]
        lo = max(min(values, default=w), min(w, config.min_asset_weight))
        hi = min(max(values, default=w), max(w, config.max_asset_weight))
        lo = max(min(lo, w), 0.0)
        hi = max(hi, w)
        out[asset] = WeightBounds(asset, lo, w, hi)
    return out


@dataclass
class WeightTable:
    """Every scheme for one event, plus the derived band columns."""

    asset_ids: tuple[str, ...]
    vectors: dict[Scheme, WeightVector]
    bounds: dict[str, WeightBounds]
    min_weight: dict[str, float]
    min_weight_alt: dict[str, float]
    true_min_weight: dict[str, float]
    warnings: list[str] = field(default_factory=list)


def compute_weight_table(
    volatility: Mapping[str, float],
    vvv_volatility: Mapping[str, float],
    cov: CovarianceMatrix,
    config: WeightConfig = WeightConfig(),
    full_exit: frozenset[str] | set[str] = frozenset(),
) -> WeightTable:
    """Run every scheme and aggregate the bands.

    Constrained schemes that are infeasible for the asset count (e.g. a 15%
    cap with fewer than 7 assets) are dropped with a warning.
    """
    ids = cov.asset_ids
    warnings = []
    variance = {a: volatility[a] ** 2 for a in ids}
    vectors = {
        Scheme.EQUAL: equal_weights(ids),
        Scheme.SIMPLE_VARIANCE: inverse_measure_weights({a: variance[a] for a in ids}, Scheme.SIMPLE_VARIANCE),
        Scheme.SIMPLE_PARITY: inverse_measure_weights({a: volatility[a] for a in ids}, Scheme.SIMPLE_PARITY),
        Scheme.VVV: inverse_measure_weights({a: vvv_volatility[a] for a in ids}, Scheme.VVV),
    }
    rp = risk_parity_weights(cov, config)
    vectors[Scheme.RISK_PARITY] = rp
    vectors[Scheme.RISK_PARITY_MINUS_2] = perturbed_risk_parity(rp, -config.rp_perturbation)
    vectors[Scheme.RISK_PARITY_PLUS_2] = perturbed_risk_parity(rp, config.rp_perturbation)
    vectors[Scheme.MIN_VARIANCE] = min_variance_weights(cov)
    try:
        vectors[Scheme.CONSTRAINED_MIN_VARIANCE] = constrained_min_variance_weights(
            cov, config.min_asset_weight, config.max_asset_weight, config
        )
    except InfeasibleError as exc:
        warnings.append(f"minMaxWeight skipped: {exc}")
        log.info("minMaxWeight skipped: %s", exc)
    vectors[Scheme.NO_SHORT] = constrained_min_variance_weights(cov, 0.0, None, config, Scheme.NO_SHORT)

    candidates = list(vectors.values())
    bounds = aggregate_weight_bounds(candidates, vectors[Scheme.VVV], config, full_exit)
    cols = [v.as_dict() for v in candidates]
    no_floor = [v.as_dict() for s, v in vectors.items() if s is not Scheme.RISK_PARITY_MINUS_2]
    min_weight = {a: min(c[a] for c in cols) for a in ids}
    true_min = {a: min(c[a] for c in no_floor) for a in ids}
    wvvv = vectors[Scheme.VVV].as_dict()
    min_alt = {a: max(min_weight[a], min(wvvv[a], config.min_asset_weight)) for a in ids}
    return WeightTable(ids, vectors, bounds, min_weight, min_alt, true_min, warnings)
