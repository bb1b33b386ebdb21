"""Penalized cubic B-spline smoothing and derivative evaluation.

Curves are represented in a clamped cubic B-spline basis. Noisy
observations are fitted by penalized least squares with a roughness
penalty on the integrated squared second derivative; error-free
observations are interpolated with a natural cubic spline.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import linalg
from scipy.interpolate import BSpline, make_interp_spline

from .curves import FeatureStack, SampledCurveSet, reflect_boundaries
from .errors import DataError, ExtrapolationError, FitError, ParameterError

__all__ = [
    "SmoothedCurve",
    "SmoothingConfig",
    "fit_spline",
    "interpolate_curve",
    "eval_derivative",
    "build_feature_stack",
    "smooth_curve_set",
    "prepare_features",
    "default_knots",
    "GCV_CANDIDATES",
]

DEGREE = 3
MAX_DEFAULT_KNOTS = 35
GCV_CANDIDATES = 21
# relative to trace(B'B) / trace(P)
_GCV_LOG10_RANGE = (-8.0, 4.0)
_DOMAIN_RTOL = 1e-9


@dataclass(frozen=True, eq=False)
class SmoothedCurve:
    """Clamped cubic spline on ``domain`` with the given interior knots."""

    knots: np.ndarray
    coefficients: np.ndarray
    domain: tuple

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float)
        coef = np.asarray(self.coefficients, dtype=float)
        if coef.shape != (knots.size + DEGREE + 1,):
            raise FitError(f"{coef.size} coefficients for {knots.size} interior knots")
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "coefficients", coef)
        object.__setattr__(self, "domain", (float(self.domain[0]), float(self.domain[1])))

    @cached_property
    def spline(self) -> BSpline:
        a, b = self.domain
        t = _full_knots(self.knots, a, b)
        return BSpline(t, self.coefficients, DEGREE, extrapolate=False)

    def __call__(self, x):
        return eval_derivative(self, 0, x)


def _full_knots(interior, a, b):
    return np.concatenate([np.full(DEGREE + 1, a), interior, np.full(DEGREE + 1, b)])


def default_knots(times, cap=MAX_DEFAULT_KNOTS):
    """One interior knot per interior observation instant, at most ``cap``."""
    times = np.unique(np.asarray(times, dtype=float))
    inner = times[1:-1]
    if inner.size <= cap:
        return inner
    pos = np.linspace(0, inner.size - 1, cap)
    return inner[np.round(pos).astype(int)]


def _resolve_knots(knots, times):
    a, b = times[0], times[-1]
    if knots is None:
        return default_knots(times)
    if np.isscalar(knots):
        count = int(knots)
        if count < 0:
            raise ParameterError(f"knot count must be non-negative, got {count}")
        return np.linspace(a, b, count + 2)[1:-1]
    knots = np.sort(np.asarray(knots, dtype=float))
    if knots.size and (knots[0] <= a or knots[-1] >= b):
        raise ParameterError("interior knots must lie strictly inside the observation range")
    return knots


class _PenalizedBasis:
    """Design and penalty matrices shared by curves observed at the same times."""

    def __init__(self, times, interior):
        self.times = times
        self.interior = interior
        a, b = times[0], times[-1]
        self.domain = (a, b)
        t = _full_knots(interior, a, b)
        nb = interior.size + DEGREE + 1
        eye = np.eye(nb)
        basis = BSpline(t, eye, DEGREE, extrapolate=False)
        self.design = np.nan_to_num(basis(times))
        self.penalty = _roughness_penalty(basis, np.unique(t))
        self.gram = self.design.T @ self.design
        self.nb = nb

    def factor(self, lam):
        A = self.gram + lam * self.penalty
        try:
            cho = linalg.cho_factor(A, lower=True, check_finite=False)
        except linalg.LinAlgError:
            raise FitError(
                f"singular normal equations (penalty={lam:g}): the knot spans "
                "are not covered by enough observations") from None
        cond = np.linalg.cond(A)
        if not np.isfinite(cond) or cond > 1e13:
            raise FitError(
                f"numerically singular normal equations (condition {cond:.3g}, "
                f"penalty={lam:g}): reduce the knot count or raise the penalty")
        return cho

    def gcv_scores(self, Y, lambdas):
        """Pooled GCV score for each candidate penalty; ``Y`` is (n_obs, m)."""
        n = self.times.size
        BtY = self.design.T @ Y
        scores = np.full(len(lambdas), np.inf)
        for i, lam in enumerate(lambdas):
            try:
                cho = self.factor(lam)
            except FitError:
                continue
            C = linalg.cho_solve(cho, BtY, check_finite=False)
            rss = float(np.sum((Y - self.design @ C) ** 2))
            df = float(np.trace(linalg.cho_solve(cho, self.gram, check_finite=False)))
            resid_df = n - df
            if resid_df <= 1e-6:
                continue
            scores[i] = n * rss / resid_df ** 2
        return scores

    def lambda_grid(self):
        scale = np.trace(self.gram) / max(np.trace(self.penalty), 1e-300)
        return scale * np.logspace(*_GCV_LOG10_RANGE, GCV_CANDIDATES)

    def select_penalty(self, Y):
        lambdas = self.lambda_grid()
        scores = self.gcv_scores(Y, lambdas)
        if not np.any(np.isfinite(scores)):
            raise FitError("no GCV candidate penalty yields a well-posed fit")
        return float(lambdas[int(np.argmin(scores))])


def _roughness_penalty(basis, breaks):
    # B'' is piecewise linear, so 2-point Gauss-Legendre is exact per span.
    nodes, weights = np.polynomial.legendre.leggauss(2)
    d2 = basis.derivative(2)
    nb = basis.c.shape[0]
    P = np.zeros((nb, nb))
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        half = 0.5 * (hi - lo)
        x = lo + half * (nodes + 1.0)
        D = np.nan_to_num(d2(x))
        P += (D.T * (weights * half)) @ D
    return 0.5 * (P + P.T)


def _check_obs(times, obs):
    times = np.asarray(times, dtype=float)
    obs = np.asarray(obs, dtype=float)
    if times.ndim != 1 or obs.shape[0] != times.size:
        raise DataError("times and observations must have matching lengths")
    if times.size < DEGREE + 1:
        raise FitError(f"need at least {DEGREE + 1} observations, got {times.size}")
    if np.any(np.diff(times) <= 0):
        raise DataError("observation times must be strictly increasing")
    if not (np.all(np.isfinite(times)) and np.all(np.isfinite(obs))):
        raise DataError("observations must be finite")
    return times, obs


def fit_spline(times, obs, knots=None, penalty=None) -> SmoothedCurve:
    """Penalized least-squares cubic spline fit of one curve.

    Parameters
    ----------
    times, obs : array_like
        Strictly increasing observation instants and observed values.
    knots : None, int or array_like
        Interior knots. ``None`` places one knot at each interior instant
        (capped at 35), an integer requests that many equally spaced knots.
    penalty : float or None
        Weight of the integrated squared second derivative. ``None`` picks
        it by generalized cross-validation over a fixed log-spaced grid.
    """
    times, obs = _check_obs(times, obs)
    basis = _PenalizedBasis(times, _resolve_knots(knots, times))
    return _fit_with_basis(basis, obs, penalty)


def _fit_with_basis(basis, obs, penalty):
    if penalty is None:
        penalty = basis.select_penalty(obs[:, None])
    if penalty < 0:
        raise ParameterError(f"penalty must be non-negative, got {penalty}")
    if penalty == 0 and basis.times.size < basis.nb:
        raise FitError(
            f"{basis.times.size} observations cannot determine {basis.nb} "
            "basis coefficients without a penalty")
    cho = basis.factor(penalty)
    coef = linalg.cho_solve(cho, basis.design.T @ obs, check_finite=False)
    return SmoothedCurve(basis.interior, coef, basis.domain)


def interpolate_curve(times, obs) -> SmoothedCurve:
    """Natural cubic spline through every observation."""
    times, obs = _check_obs(times, obs)
    spl = make_interp_spline(times, obs, k=DEGREE, bc_type="natural")
    return SmoothedCurve(spl.t[DEGREE + 1:-(DEGREE + 1)], spl.c, (times[0], times[-1]))


def eval_derivative(sc: SmoothedCurve, l: int, grid) -> np.ndarray:
    """Exact ``l``-th derivative of the spline at each grid point."""
    if l not in (0, 1, 2):
        raise ParameterError(f"derivative order must be 0, 1 or 2, got {l}")
    x = np.asarray(grid, dtype=float)
    a, b = sc.domain
    tol = _DOMAIN_RTOL * (b - a)
    if x.size and (x.min() < a - tol or x.max() > b + tol):
        raise ExtrapolationError(
            f"grid [{x.min():g}, {x.max():g}] leaves the domain [{a:g}, {b:g}]")
    x = np.clip(x, a, b)
    spl = sc.spline if l == 0 else sc.spline.derivative(l)
    return spl(x)


def build_feature_stack(curves, grid, ids=None, labels=None) -> FeatureStack:
    """Evaluate trajectories and first two derivatives on ``grid``.

    Order ``l`` uses the first ``len(grid) - l`` grid points.
    """
    curves = list(curves)
    if not curves:
        raise DataError("cannot build a feature stack from no curves")
    grid = np.asarray(grid, dtype=float)
    if grid.size < 3:
        raise DataError("a feature stack needs at least 3 grid points")
    if ids is None:
        ids = tuple(str(i) for i in range(len(curves)))
    feats = []
    for l in range(3):
        g = grid[:grid.size - l]
        vals = np.vstack([eval_derivative(c, l, g) for c in curves])
        feats.append(SampledCurveSet(g, vals, ids, labels))
    return FeatureStack(tuple(feats))


@dataclass(frozen=True)
class SmoothingConfig:
    """How raw curves become functions.

    ``error_free`` interpolates instead of smoothing. ``reflect`` pads both
    ends with mirrored samples before fitting. ``n_eval`` resamples the
    original domain on that many equally spaced points; by default the
    observation grid is kept.
    """

    knots: object = None
    penalty: float | None = None
    reflect: float | None = None
    error_free: bool = False
    n_eval: int | None = None
    n_jobs: int = 1


def smooth_curve_set(cs: SampledCurveSet, config: SmoothingConfig = SmoothingConfig()):
    """Fit every curve of ``cs``; returns ``(curves, evaluation grid)``.

    Under GCV a single penalty is chosen for the whole set by pooling the
    residuals of all curves, so all curves share one smoothness level.
    """
    src = cs if config.reflect is None else reflect_boundaries(cs, config.reflect)
    times = src.grid
    if config.n_eval is None:
        grid = cs.grid.copy()
    else:
        if config.n_eval < 3:
            raise ParameterError("n_eval must be at least 3")
        grid = np.linspace(cs.grid[0], cs.grid[-1], config.n_eval)

    if config.error_free:
        def fit_one(r):
            return interpolate_curve(times, src.values[r])
    else:
        _check_obs(times, src.values[0])
        basis = _PenalizedBasis(times, _resolve_knots(config.knots, times))
        penalty = config.penalty
        if penalty is None:
            penalty = basis.select_penalty(src.values.T)

        def fit_one(r):
            return _fit_with_basis(basis, src.values[r], penalty)

    rows = range(cs.n)
    if config.n_jobs > 1:
        with ThreadPoolExecutor(config.n_jobs) as pool:
            curves = list(pool.map(fit_one, rows))
    else:
        curves = [fit_one(r) for r in rows]
    return curves, grid


def prepare_features(cs: SampledCurveSet, config: SmoothingConfig = SmoothingConfig()) -> FeatureStack:
    """Smooth ``cs`` and evaluate its feature stack."""
    curves, grid = smooth_curve_set(cs, config)
    return build_feature_stack(curves, grid, ids=cs.ids, labels=cs.labels)
