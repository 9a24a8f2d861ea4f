"""Per-step moment kernels for Gaussian data.

For a_i ~ N(0, sigma^2 I_d) and batch matrix H (a sum of b outer products),
the s-th moment of the step factor reduces to a two-dimensional chi-square
integral:

    h(s; eta) = E[ ((1 - eta sigma^2 X / b)^2 + eta^2 sigma^4 X Y / b^2)^(s/2) ]

with X ~ chi2(b) and Y ~ chi2(d - 1) independent. The per-step Lyapunov
contribution is half the expected log of the same quantity. This module
evaluates both by Monte Carlo over a shareable common-random-number panel
or by deterministic Gauss-Laguerre quadrature, plus the spectral-norm
upper-bound kernel E[ ||I - (eta/b) H||^s ].
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_genlaguerre, roots_jacobi, roots_laguerre

from . import rng as _rng
from .errors import ConfigError, DomainError

DEFAULT_NODES = 128
DEFAULT_MC = 200_000
DEFAULT_RHO_MC = 1_000_000
N_BATCHES = 50


@dataclass(frozen=True)
class GaussianDataModel:
    """Data scale sigma, batch size b and dimension d of the Gaussian design."""

    sigma: float
    batch: int
    dim: int

    def __post_init__(self):
        if self.sigma <= 0:
            raise DomainError(f"sigma must be positive, got {self.sigma}")
        if self.batch < 1 or int(self.batch) != self.batch:
            raise DomainError(f"batch size must be a positive integer, got {self.batch}")
        if self.dim < 1 or int(self.dim) != self.dim:
            raise DomainError(f"dimension must be a positive integer, got {self.dim}")


@dataclass(frozen=True)
class KernelEstimate:
    """A kernel value with its sampling error.

    Moment estimates are nonnegative by construction (means of nonnegative
    samples); Lyapunov estimates reuse this type and may be negative.
    """

    value: float
    stderr: float
    n_samples: int
    method: str  # monte_carlo | quadrature | closed_form

    def __post_init__(self):
        if self.method in ("quadrature", "closed_form") and self.stderr != 0.0:
            raise ValueError("deterministic methods must report zero stderr")


def batch_means_stderr(values: np.ndarray, n_batches: int = N_BATCHES) -> float:
    """Batch-means standard error; robust to heavy integrand tails."""
    n = values.size
    nb = min(n_batches, n)
    usable = n - n % nb
    means = values[:usable].reshape(nb, -1).mean(axis=1)
    if nb < 2:
        return 0.0
    return float(means.std(ddof=1) / math.sqrt(nb))


# ---------------------------------------------------------------------------
# common-random-number panel
# ---------------------------------------------------------------------------

class MomentPanel:
    """Immutable (X, Y) chi-square sample panel.

    Panels with the same (seed, n) are prefix-coupled across batch and
    dimension: X is accumulated as the first b squared normals of one
    stream and Y as the first d - 1 of another, so sweeps over b or d
    compare paired draws and strict monotonicity becomes testable.
    For d = 1 the Y factor is the point mass at zero.
    """

    def __init__(self, seed: int, n: int, batch: int, dim: int):
        if n < 1:
            raise ConfigError(f"panel size must be positive, got {n}")
        self.seed = seed
        self.n = n
        self.batch = batch
        self.dim = dim
        self.x = self._accumulate(_rng.substream(seed, _rng.DOMAIN_PANEL_X), batch, n)
        if dim == 1:
            self.y = np.zeros(n)
        else:
            self.y = self._accumulate(_rng.substream(seed, _rng.DOMAIN_PANEL_Y), dim - 1, n)

    @staticmethod
    def _accumulate(stream: np.random.Generator, df: int, n: int) -> np.ndarray:
        acc = np.zeros(n)
        for _ in range(df):
            z = stream.standard_normal(n)
            acc += z * z
        return acc


_panel_cache: dict = {}
_PANEL_CACHE_MAX = 8


def get_panel(seed: int, n: int, model: GaussianDataModel) -> MomentPanel:
    key = (seed, n, model.batch, model.dim)
    panel = _panel_cache.get(key)
    if panel is None:
        panel = MomentPanel(seed, n, model.batch, model.dim)
        if len(_panel_cache) >= _PANEL_CACHE_MAX:
            _panel_cache.pop(next(iter(_panel_cache)))
        _panel_cache[key] = panel
    return panel


def _step_factor(x: np.ndarray, y: np.ndarray, eta: float, model: GaussianDataModel) -> np.ndarray:
    c = eta * model.sigma**2 / model.batch
    return (1.0 - c * x) ** 2 + (eta * model.sigma**2 / model.batch) ** 2 * x * y


# ---------------------------------------------------------------------------
# quadrature backend
# ---------------------------------------------------------------------------

@lru_cache(maxsize=64)
def _genlaguerre_nodes(df: int, n_nodes: int):
    alpha = df / 2.0 - 1.0
    t, w = roots_genlaguerre(n_nodes, alpha)
    # weights carry t^alpha e^-t; normalize against Gamma(df/2) to make a law
    return t, w / math.gamma(df / 2.0)


@lru_cache(maxsize=64)
def _jacobi_nodes(df: int, n_nodes: int):
    # weight (1 + t)^(df/2 - 1) on [-1, 1], for the sub-kink piece at d = 1
    return roots_jacobi(n_nodes, 0.0, df / 2.0 - 1.0)


@lru_cache(maxsize=8)
def _laguerre_nodes(n_nodes: int):
    return roots_laguerre(n_nodes)


def _h_quad_d1(s: float, eta: float, model: GaussianDataModel, n_nodes: int) -> float:
    """h(s) = E|1 - c X|^s for d = 1, split at the kink X = 1/c."""
    b = model.batch
    c = eta * model.sigma**2 / b
    xstar = 1.0 / c
    lognorm = (b / 2.0) * math.log(2.0) + math.lgamma(b / 2.0)
    # piece below the kink: Gauss-Jacobi absorbs the x^(b/2-1) endpoint factor
    t, v = _jacobi_nodes(b, n_nodes)
    xk = xstar * (1.0 + t) / 2.0
    below = (xstar / 2.0) ** (b / 2.0) * np.sum(v * (1.0 - c * xk) ** s * np.exp(-xk / 2.0))
    # piece above the kink: plain Gauss-Laguerre after x = x* + 2u
    u, w = _laguerre_nodes(n_nodes)
    above = (
        2.0
        * math.exp(-xstar / 2.0)
        * np.sum(w * (2.0 * c * u) ** s * (xstar + 2.0 * u) ** (b / 2.0 - 1.0))
    )
    return float((below + above) * math.exp(-lognorm))


def _h_quad(s: float, eta: float, model: GaussianDataModel, n_nodes: int) -> float:
    if model.dim == 1:
        return _h_quad_d1(s, eta, model, n_nodes)
    tx, wx = _genlaguerre_nodes(model.batch, n_nodes)
    ty, wy = _genlaguerre_nodes(model.dim - 1, n_nodes)
    x = 2.0 * tx[:, None]
    y = 2.0 * ty[None, :]
    g = _step_factor(x, y, eta, model)
    vals = g ** (s / 2.0)
    return float(wx @ vals @ wy)


# ---------------------------------------------------------------------------
# kernel operations
# ---------------------------------------------------------------------------

def h_step(
    s: float,
    eta: float,
    model: GaussianDataModel,
    method: str = "quadrature",
    n: int | None = None,
    seed: int = 0,
    panel: MomentPanel | None = None,
    n_nodes: int = DEFAULT_NODES,
) -> KernelEstimate:
    """s-th moment of the per-step factor at stepsize eta.

    The zeroth moment and the eta = 0 case are returned symbolically.
    Monte Carlo draws come from ``panel`` (or a cached panel for
    ``seed``/``n``) so sweeps share common random numbers; the standard
    error uses 50-batch means.
    """
    if s < 0:
        raise DomainError(f"moment order must be nonnegative, got {s}")
    if s == 0 or eta == 0:
        return KernelEstimate(1.0, 0.0, 0, "closed_form")
    if method == "quadrature":
        return KernelEstimate(_h_quad(s, eta, model, n_nodes), 0.0, n_nodes, "quadrature")
    if method != "monte_carlo":
        raise ConfigError(f"unknown method {method!r}")
    if panel is None:
        if not n:
            raise ConfigError("monte_carlo needs a sample count or an explicit panel")
        panel = get_panel(seed, n, model)
    g = _step_factor(panel.x, panel.y, eta, model)
    vals = g ** (s / 2.0)
    return KernelEstimate(float(vals.mean()), batch_means_stderr(vals), panel.n, "monte_carlo")


def h2_closed(eta_mean: float, eta_sq_mean: float, model: GaussianDataModel) -> float:
    """Second-moment factor 1 - 2 E[eta] sigma^2 + (E[eta^2] sigma^4 / b)(d + b + 1)."""
    if eta_sq_mean < eta_mean**2 - 1e-15:
        raise DomainError(
            f"invalid moment pair: E[eta^2]={eta_sq_mean} < (E[eta])^2={eta_mean ** 2}"
        )
    s2, s4 = model.sigma**2, model.sigma**4
    return 1.0 - 2.0 * eta_mean * s2 + (eta_sq_mean * s4 / model.batch) * (
        model.dim + model.batch + 1
    )


def rho_step(
    eta: float,
    model: GaussianDataModel,
    n: int = DEFAULT_RHO_MC,
    seed: int = 0,
    panel: MomentPanel | None = None,
) -> KernelEstimate:
    """Per-step Lyapunov contribution (1/2) E[log of the step factor].

    A sampled factor of exactly zero (a measure-zero event) is resampled
    from a reserve stream rather than propagated into the log.
    """
    if eta == 0:
        return KernelEstimate(0.0, 0.0, 0, "closed_form")
    if panel is None:
        if n < 1:
            raise ConfigError("rho_step needs at least one sample")
        panel = get_panel(seed, n, model)
    g = _step_factor(panel.x, panel.y, eta, model)
    retry = 1
    while np.any(g == 0.0):
        idx = np.nonzero(g == 0.0)[0]
        reserve = _rng.substream(panel.seed, _rng.DOMAIN_PANEL_X, subindex=retry)
        x = reserve.chisquare(model.batch, idx.size)
        y = np.zeros(idx.size) if model.dim == 1 else reserve.chisquare(model.dim - 1, idx.size)
        g[idx] = _step_factor(x, y, eta, model)
        retry += 1
    vals = 0.5 * np.log(g)
    return KernelEstimate(float(vals.mean()), batch_means_stderr(vals), panel.n, "monte_carlo")


# ---------------------------------------------------------------------------
# matrix-norm upper-bound kernel
# ---------------------------------------------------------------------------

class SpectralPanel:
    """Eigenvalues of sampled batch Gram matrices H = sum of b outer products.

    Eigenvalues are computed once per (seed, n, model); norm moments at any
    (s, eta) then reuse them, which is the common-random-number coupling
    for the norm-kernel sweeps.
    """

    _CHUNK = 4096

    def __init__(self, seed: int, n: int, model: GaussianDataModel):
        if n < 1:
            raise ConfigError(f"panel size must be positive, got {n}")
        self.seed, self.n, self.model = seed, n, model
        b, d = model.batch, model.dim
        stream = _rng.substream(seed, _rng.DOMAIN_WISHART)
        eigs = np.empty((n, min(b, d)))
        done = 0
        while done < n:
            k = min(self._CHUNK, n - done)
            a = stream.standard_normal((k, b, d)) * model.sigma
            gram = a @ a.transpose(0, 2, 1) if b <= d else a.transpose(0, 2, 1) @ a
            eigs[done : done + k] = np.linalg.eigvalsh(gram)
            done += k
        self.eigs = eigs
        self.has_null_direction = b < d

    def norms(self, eta: float) -> np.ndarray:
        scale = eta / self.model.batch
        m = np.abs(1.0 - scale * self.eigs).max(axis=1)
        if self.has_null_direction:
            m = np.maximum(m, 1.0)
        return m


_spectral_cache: dict = {}


def get_spectral_panel(seed: int, n: int, model: GaussianDataModel) -> SpectralPanel:
    key = (seed, n, model)
    panel = _spectral_cache.get(key)
    if panel is None:
        panel = SpectralPanel(seed, n, model)
        if len(_spectral_cache) >= _PANEL_CACHE_MAX:
            _spectral_cache.pop(next(iter(_spectral_cache)))
        _spectral_cache[key] = panel
    return panel


def hhat_norm(
    s: float,
    eta: float,
    model: GaussianDataModel,
    n: int = 100_000,
    seed: int = 0,
    panel: SpectralPanel | None = None,
) -> KernelEstimate:
    """Spectral-norm moment E[ ||I - (eta/b) H||^s ], an upper bound on h(s)."""
    if s < 0:
        raise DomainError(f"moment order must be nonnegative, got {s}")
    if s == 0 or eta == 0:
        return KernelEstimate(1.0, 0.0, 0, "closed_form")
    if panel is None:
        panel = get_spectral_panel(seed, n, model)
    vals = panel.norms(eta) ** s
    return KernelEstimate(float(vals.mean()), batch_means_stderr(vals), panel.n, "monte_carlo")


def hhat_log_norm(
    eta: float,
    model: GaussianDataModel,
    n: int = 100_000,
    seed: int = 0,
    panel: SpectralPanel | None = None,
) -> KernelEstimate:
    """E[ log ||I - (eta/b) H|| ], the Lyapunov diagnostic of the norm bound."""
    if eta == 0:
        return KernelEstimate(0.0, 0.0, 0, "closed_form")
    if panel is None:
        panel = get_spectral_panel(seed, n, model)
    vals = np.log(panel.norms(eta))
    return KernelEstimate(float(vals.mean()), batch_means_stderr(vals), panel.n, "monte_carlo")
