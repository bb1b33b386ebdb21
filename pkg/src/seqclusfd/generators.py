"""Synthetic functional data sets with known groups.

* ``toy``: flat lines at two levels plus sloped lines starting at the
  lower level.
* Sangalli-type models ``A``, ``B``, ``C``: sums of sines with random
  amplitude, phase and rate, differing by sign and time warping.
* ``SW`` (Serban-Wasserman-type): four mean functions plus smooth Gaussian
  process errors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .curves import SampledCurveSet
from .errors import NumericError, ParameterError

__all__ = [
    "GeneratorSpec",
    "generate",
    "gen_toy",
    "gen_sangalli",
    "gen_serban",
    "sample_gp",
    "sq_exp_kernel",
    "serban_means",
    "MODEL_GROUPS",
]

MODEL_GROUPS = {"toy": 3, "A": 2, "B": 2, "C": 3, "SW": 4}
_PSD_RTOL = 1e-8


def _ids(n, prefix="c"):
    width = max(3, len(str(n - 1)))
    return tuple(f"{prefix}{i:0{width}d}" for i in range(n))


def _labels(sizes):
    return tuple(str(g + 1) for g, size in enumerate(sizes) for _ in range(size))


def gen_toy(n_per_group=25, grid=None, seed=0, low=0.0, high=3.0, slope=0.02,
            jitter=0.2) -> SampledCurveSet:
    """Three groups of straight lines.

    Groups 1 and 2 are constant at ``low`` and ``high``; group 3 has common
    positive ``slope`` and intercepts drawn around ``low``, so its levels
    stay mixed with group 1 everywhere while its derivative differs.
    Every line's level offset is ``N(0, jitter**2)``.
    """
    if n_per_group < 10:
        raise ParameterError(f"toy groups need at least 10 curves, got {n_per_group}")
    t = np.linspace(0.0, 10.0, 101) if grid is None else np.asarray(grid, dtype=float)
    rng = np.random.default_rng(seed)
    offs = rng.normal(0.0, jitter, size=3 * n_per_group)
    level = np.repeat([low, high, low], n_per_group) + offs
    rate = np.repeat([0.0, 0.0, slope], n_per_group)
    values = level[:, None] + rate[:, None] * t[None, :]
    return SampledCurveSet(t, values, _ids(3 * n_per_group),
                           _labels([n_per_group] * 3))


def _sangalli_curve(kind, t, e1, e2, e3, e4):
    """One curve of group (3), (4) or (5); the rate is 1 + e4."""
    if kind == 5:
        arg = e3 + (1.0 + e4) * (-1.0 / 3.0 + 0.75 * t)
    else:
        arg = e3 + (1.0 + e4) * t
    first = (1.0 + e1) * np.sin(arg)
    second = (1.0 + e2) * np.sin(arg ** 2 / (2.0 * math.pi))
    return first + second if kind == 3 else first - second


_SANGALLI_GROUPS = {"A": (3, 4), "B": (3, 5), "C": (3, 4, 5)}


def gen_sangalli(model="A", n=90, grid=None, seed=0, sigma=0.05) -> SampledCurveSet:
    """Curves from models A, B or C on ``[0, 2*pi]``.

    Each curve draws four independent ``N(0, sigma**2)`` perturbations
    ``(e1, e2, e3, e4)`` for the two amplitudes, the phase and the rate.
    """
    try:
        kinds = _SANGALLI_GROUPS[model]
    except KeyError:
        raise ParameterError(f"unknown model {model!r}; expected A, B or C") from None
    g = len(kinds)
    if n % g or n < g:
        raise ParameterError(f"model {model} needs n divisible by {g}, got {n}")
    t = np.linspace(0.0, 2.0 * math.pi, 101) if grid is None else np.asarray(grid, dtype=float)
    rng = np.random.default_rng(seed)
    eps = rng.normal(0.0, sigma, size=(n, 4))
    per = n // g
    rows = [_sangalli_curve(kinds[i // per], t, *eps[i]) for i in range(n)]
    return SampledCurveSet(t, np.vstack(rows), _ids(n), _labels([per] * g))


def serban_means(t):
    """The four group mean functions, shape (4, len(t))."""
    t = np.asarray(t, dtype=float)
    lin = (2.0 - 5.0 * t) / 2.0
    f1 = np.minimum(lin, lin ** 2 * np.sin(2.5 * math.pi * t))
    f3 = np.cos(2.0 * math.pi * t)
    return np.vstack([f1, -f1, f3, -f3])


def sq_exp_kernel(variance=0.3, scale=0.3):
    """``k(s, t) = variance * exp(-(s - t)**2 / scale)``."""
    def kernel(s, t):
        return variance * np.exp(-((s - t) ** 2) / scale)
    return kernel


def sample_gp(mean, kernel, grid, m, seed=0) -> np.ndarray:
    """``m`` Gaussian process paths on ``grid``; returns shape (m, len(grid)).

    The covariance matrix is factored by its eigendecomposition. Negative
    eigenvalues within ``1e-8`` of the largest one are rounding error and
    set to zero; anything more negative is rejected.
    """
    t = np.asarray(grid, dtype=float)
    K = np.asarray(kernel(t[:, None], t[None, :]), dtype=float)
    if K.shape != (t.size, t.size):
        raise NumericError("kernel must return a square matrix on the grid")
    if not np.allclose(K, K.T, rtol=1e-12, atol=1e-14):
        raise NumericError("kernel matrix is not symmetric")
    K = 0.5 * (K + K.T)
    w, V = np.linalg.eigh(K)
    top = max(float(w.max()), 0.0)
    if w.min() < -_PSD_RTOL * max(top, 1e-300) and w.min() < 0:
        raise NumericError(
            f"kernel matrix is not positive semidefinite (smallest eigenvalue {w.min():.3g})")
    root = V * np.sqrt(np.clip(w, 0.0, None))
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((m, t.size))
    mu = np.broadcast_to(np.asarray(mean, dtype=float), t.shape)
    return mu[None, :] + z @ root.T


def gen_serban(n_per_cluster=150, grid=None, seed=0, error_mean=0.4, variance=0.3,
               scale=0.3) -> SampledCurveSet:
    """Four mean functions plus correlated Gaussian process errors on [0, 1]."""
    t = np.linspace(0.0, 1.0, 101) if grid is None else np.asarray(grid, dtype=float)
    if t.min() < 0.0 or t.max() > 1.0:
        raise ParameterError("the SW model is defined on [0, 1]")
    if n_per_cluster < 1:
        raise ParameterError("n_per_cluster must be positive")
    f = serban_means(t)
    errs = sample_gp(error_mean, sq_exp_kernel(variance, scale), t, 4 * n_per_cluster, seed)
    values = np.repeat(f, n_per_cluster, axis=0) + errs
    return SampledCurveSet(t, values, _ids(4 * n_per_cluster), _labels([n_per_cluster] * 4))


@dataclass(frozen=True)
class GeneratorSpec:
    """A reproducible synthetic data set: model, total size, seed, options."""

    model: str
    n: int
    seed: int = 0
    grid: tuple | None = None
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.model not in MODEL_GROUPS:
            raise ParameterError(f"unknown model {self.model!r}; expected one of "
                                 f"{', '.join(MODEL_GROUPS)}")
        g = MODEL_GROUPS[self.model]
        if self.n < g or self.n % g:
            raise ParameterError(f"model {self.model} needs n divisible by {g}, got {self.n}")

    def with_seed(self, seed) -> "GeneratorSpec":
        return replace(self, seed=seed)


def generate(spec: GeneratorSpec) -> SampledCurveSet:
    grid = None if spec.grid is None else np.asarray(spec.grid, dtype=float)
    opts = dict(spec.options)
    if spec.model == "toy":
        return gen_toy(spec.n // 3, grid, spec.seed, **opts)
    if spec.model == "SW":
        return gen_serban(spec.n // 4, grid, spec.seed, **opts)
    return gen_sangalli(spec.model, spec.n, grid, spec.seed, **opts)
