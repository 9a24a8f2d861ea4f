"""Schedule-level moment kernels, tail-index roots and threshold reports.

A ScheduleKernel maps a moment order s to an estimate of the schedule's
growth kernel: h_c(s) for a constant stepsize, the stepsize average for
i.i.d. schedules, the per-cycle geometric mean for cyclic schedules, and
the regeneration-block product for Markovian schedules. The tail index is
the unique positive root of kernel(alpha) = 1, which exists when the
Lyapunov diagnostic rho is negative.

Three independent evaluators cover the Markovian case: a closed form for
the two-state chain, Monte Carlo over sampled regeneration paths (with
per-step factors from quadrature), and an exact-in-expectation hitting
system solved per start state. Tests hold them against each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import rng as _rng
from .errors import (
    DivergenceError,
    NoStationarySolutionError,
    OutOfDomainError,
    RootAboveCapError,
    SingularParameterError,
    UnsupportedScheduleError,
)
from .kernel import (
    GaussianDataModel,
    KernelEstimate,
    batch_means_stderr,
    get_panel,
    get_spectral_panel,
    h2_closed,
    h_step,
    _step_factor,
)
from .schedule import (
    Constant,
    Cyclic,
    IIDGrid,
    IIDUniformContinuous,
    MarkovFolded,
    MarkovTwoState,
    Schedule,
    StepsizeGrid,
    build_folded_state_space,
    sample_visit_counts,
    stationary_distribution,
)

N_BATCHES = 50


@dataclass(frozen=True)
class KernelOptions:
    """Evaluation backends and sample budgets shared by kernel factories."""

    method: str = "quadrature"  # per-step factors: quadrature | monte_carlo
    n_nodes: int = 128
    n_mc: int = 200_000
    rho_n: int = 1_000_000
    n_paths: int = 200_000
    seed: int = 0


DEFAULT_OPTS = KernelOptions()


class ScheduleKernel:
    """Evaluator s -> KernelEstimate for a fixed (schedule, model) pair.

    ``evaluate(0)`` is exactly 1 for every kind. ``rho()`` returns the
    matching Lyapunov diagnostic (per step for constant and i.i.d., summed
    over a cycle or regeneration block for the periodic and Markov kinds;
    only the sign matters for root admissibility).
    """

    def __init__(self, kind, eval_fn, rho_fn, model=None, meta=None):
        self.kind = kind
        self._eval_fn = eval_fn
        self._rho_fn = rho_fn
        self.model = model
        self.meta = dict(meta or {})
        self._rho_cache = None

    def evaluate(self, s: float) -> KernelEstimate:
        if s == 0:
            return KernelEstimate(1.0, 0.0, 0, "closed_form")
        return self._eval_fn(float(s))

    def rho(self) -> KernelEstimate:
        if self._rho_cache is None:
            self._rho_cache = self._rho_fn()
        return self._rho_cache


# ---------------------------------------------------------------------------
# per-state factor helpers
# ---------------------------------------------------------------------------

def _quad_factors(s, etas, model, opts):
    return np.array([h_step(s, e, model, n_nodes=opts.n_nodes).value for e in etas])


def _sample_logs(etas, model, opts, weights=None, half=True):
    """Weighted per-sample combination of log step factors over the panel.

    Returns the (n,) array sum_i w_i * (1/2) log g(eta_i); its mean is the
    corresponding rho combination and batch means give the stderr.
    """
    panel = get_panel(opts.seed, opts.rho_n, model)
    if weights is None:
        weights = np.ones(len(etas))
    acc = np.zeros(panel.n)
    for w, eta in zip(weights, etas):
        if eta == 0 or w == 0:
            continue
        g = _step_factor(panel.x, panel.y, eta, model)
        np.maximum(g, np.finfo(float).tiny, out=g)
        acc += w * np.log(g)
    if half:
        acc *= 0.5
    return acc


def _rho_from_logs(logs) -> KernelEstimate:
    return KernelEstimate(float(logs.mean()), batch_means_stderr(logs), logs.size, "monte_carlo")


def _mc_state_batches(etas, model, opts, s):
    """Per-state full means and 50-batch means of the step factor at s."""
    panel = get_panel(opts.seed, opts.n_mc, model)
    nb = min(N_BATCHES, panel.n)
    usable = panel.n - panel.n % nb
    means = np.empty(len(etas))
    batches = np.empty((nb, len(etas)))
    for i, eta in enumerate(etas):
        g = _step_factor(panel.x, panel.y, eta, model)
        v = g ** (s / 2.0)
        means[i] = v.mean()
        batches[:, i] = v[:usable].reshape(nb, -1).mean(axis=1)
    return means, batches


def _composite_estimate(etas, model, opts, s, combine) -> KernelEstimate:
    """Apply ``combine`` to per-state factors; stderr via batchwise recompute."""
    if opts.method == "quadrature":
        vals = _quad_factors(s, etas, model, opts)
        return KernelEstimate(float(combine(vals)), 0.0, opts.n_nodes, "quadrature")
    means, batches = _mc_state_batches(etas, model, opts, s)
    value = float(combine(means))
    per_batch = np.array([combine(b) for b in batches])
    stderr = float(per_batch.std(ddof=1) / math.sqrt(len(per_batch)))
    return KernelEstimate(value, stderr, opts.n_mc, "monte_carlo")


# ---------------------------------------------------------------------------
# kernel factories
# ---------------------------------------------------------------------------

def kernel_constant(eta: float, model: GaussianDataModel, opts: KernelOptions = DEFAULT_OPTS) -> ScheduleKernel:
    """h_c(s) for a deterministic stepsize."""

    def ev(s):
        return h_step(s, eta, model, method=opts.method, n=opts.n_mc, seed=opts.seed,
                      n_nodes=opts.n_nodes)

    def rho():
        return _rho_from_logs(_sample_logs([eta], model, opts))

    return ScheduleKernel("constant", ev, rho, model, {"eta": eta})


def kernel_iid(schedule: Schedule, model: GaussianDataModel, opts: KernelOptions = DEFAULT_OPTS) -> ScheduleKernel:
    """Stepsize-averaged kernel h(s) = E_eta[h_step(s, eta)].

    Grid schedules average the K grid points with equal weights; the
    continuous variant integrates the uniform law on the stepsize interval
    with 64-point Gauss-Legendre.
    """
    if isinstance(schedule, IIDGrid):
        etas = np.asarray(schedule.grid.points)
        weights = np.full(len(etas), 1.0 / len(etas))
        meta = {"grid": schedule.grid}
    elif isinstance(schedule, IIDUniformContinuous):
        if schedule.range == 0:
            return kernel_constant(schedule.center, model, opts)
        nodes, gl_w = np.polynomial.legendre.leggauss(64)
        etas = schedule.center + schedule.range * nodes
        weights = gl_w / 2.0
        meta = {"center": schedule.center, "range": schedule.range}
    else:
        raise UnsupportedScheduleError(f"kernel_iid needs an i.i.d. schedule, got {schedule.variant}")

    def ev(s):
        return _composite_estimate(etas, model, opts, s, lambda a: float(weights @ a))

    def rho():
        return _rho_from_logs(_sample_logs(etas, model, opts, weights))

    return ScheduleKernel("iid", ev, rho, model, meta)


def kernel_cyclic(grid: StepsizeGrid, model: GaussianDataModel, opts: KernelOptions = DEFAULT_OPTS) -> ScheduleKernel:
    """Per-cycle geometric mean (prod_i h_step(s, eta_i))^(1/m) over the folded states.

    Its root coincides with the root of the full-cycle product, and the
    geometric-mean form shares the (0, 1, crossing) shape of the other
    kernels.
    """
    etas = np.asarray(build_folded_state_space(grid).values)
    m = len(etas)

    def ev(s):
        return _composite_estimate(
            etas, model, opts, s,
            lambda a: float(np.exp(np.mean(np.log(np.maximum(a, np.finfo(float).tiny))))),
        )

    def rho():
        # full-cycle sum; same sign as the per-step average
        return _rho_from_logs(_sample_logs(etas, model, opts) * m)

    return ScheduleKernel("cyclic", ev, rho, model, {"grid": grid, "m": m})


def two_state_closed_form(x: float, y: float, p: float) -> float:
    """Regeneration-block kernel of the two-state chain from its per-state factors."""
    if (1.0 - p) * x >= 1.0 or (1.0 - p) * y >= 1.0:
        raise OutOfDomainError(
            f"two-state closed form needs (1-p)*factor < 1, got factors ({x:.6g}, {y:.6g}) at p={p}",
            s=None,
        )
    return x * (1 - p + (2 * p - 1) * y) / (2 * (1 - (1 - p) * y)) + y * (
        1 - p + (2 * p - 1) * x
    ) / (2 * (1 - (1 - p) * x))


def kernel_markov_two_state(
    eta_lo: float, eta_hi: float, p: float, model: GaussianDataModel,
    opts: KernelOptions = DEFAULT_OPTS,
) -> ScheduleKernel:
    """Closed-form regeneration kernel of the two-state chain.

    At p = 1 it degenerates to the two-step cycle product. The formula is
    valid while (1 - p) h_step(s, eta) < 1 at both states; outside that
    region the block expectation diverges and the evaluator raises.
    """
    etas = np.array([eta_lo, eta_hi])

    def ev(s):
        try:
            return _composite_estimate(
                etas, model, opts, s, lambda a: two_state_closed_form(a[0], a[1], p)
            )
        except OutOfDomainError as exc:
            raise OutOfDomainError("two-state kernel out of its validity region", s=s) from exc

    def rho():
        # block sum over one regeneration cycle: rho_l + rho_u
        return _rho_from_logs(_sample_logs(etas, model, opts) * 2.0)

    return ScheduleKernel(
        "markov_two_state_closed", ev, rho, model,
        {"eta_lo": eta_lo, "eta_hi": eta_hi, "p": p},
    )


def _stationary_auto(schedule) -> np.ndarray:
    try:
        return stationary_distribution(schedule, "closed_form").probabilities
    except SingularParameterError:
        return stationary_distribution(schedule, "linear_solve").probabilities


def kernel_markov_regen_mc(
    schedule: Schedule, model: GaussianDataModel, n_paths: int | None = None,
    opts: KernelOptions = DEFAULT_OPTS,
) -> ScheduleKernel:
    """Monte Carlo over regeneration paths started from the stationary law.

    Per-step factors inside each sampled path come from quadrature, so the
    reported noise is attributable to the path law alone. The sampled
    paths are frozen at construction: evaluations at different s reuse
    them (common random numbers), which keeps root finding deterministic.
    """
    if not isinstance(schedule, (MarkovFolded, MarkovTwoState, Cyclic)):
        raise UnsupportedScheduleError(
            f"regeneration kernel needs a finite-state Markov schedule, got {schedule.variant}"
        )
    n_paths = n_paths or opts.n_paths
    if n_paths < 1:
        raise ValueError("need at least one regeneration path")
    stream = _rng.substream(opts.seed, _rng.DOMAIN_REGEN)
    counts, _ = sample_visit_counts(schedule, n_paths, stream)
    etas = np.asarray(schedule.state_values, dtype=float)
    pi = _stationary_auto(schedule)
    m = len(etas)

    def ev(s):
        a = _quad_factors(s, etas, model, opts)
        w = np.exp(counts @ np.log(np.maximum(a, np.finfo(float).tiny)))
        return KernelEstimate(float(w.mean()), batch_means_stderr(w), n_paths, "monte_carlo")

    def rho():
        # renewal-reward with stationary start: E[sum over block] = m * E_pi[rho_step]
        return _rho_from_logs(_sample_logs(etas, model, opts, weights=m * pi))

    return ScheduleKernel(
        "markov_regen_mc", ev, rho, model,
        {"n_paths": n_paths, "p": getattr(schedule, "p", 1.0), "mean_r1": float(counts.sum(1).mean())},
    )


def kernel_markov_regen_direct(
    schedule: Schedule, model: GaussianDataModel, n_paths: int = 50_000,
    opts: KernelOptions = DEFAULT_OPTS, chunk: int = 8192,
) -> ScheduleKernel:
    """Brute-force oracle: sample paths and the Gaussian batch matrices.

    Evaluates E[ || prod_i (I - (eta_i / b) H_i) e_1 ||^s ] directly, with
    no chi-square reduction and no per-step quadrature; running log-norms
    avoid overflow. Slow but independent of every other route.
    """
    if not isinstance(schedule, (MarkovFolded, MarkovTwoState, Cyclic)):
        raise UnsupportedScheduleError(
            f"regeneration kernel needs a finite-state Markov schedule, got {schedule.variant}"
        )
    b, d, sigma = model.batch, model.dim, model.sigma
    pi = _stationary_auto(schedule)
    lognorms = np.empty(n_paths)
    done = 0
    part = 0
    while done < n_paths:
        k = min(chunk, n_paths - done)
        stream = _rng.substream(opts.seed, _rng.DOMAIN_REGEN, index=1, subindex=part)
        starts = stream.choice(schedule.m, size=k, p=pi) + 1
        state = starts.copy()
        v = np.zeros((k, d))
        v[:, 0] = 1.0
        logn = np.zeros(k)
        active = np.ones(k, dtype=bool)
        two_state = isinstance(schedule, MarkovTwoState)
        p = schedule.p
        K = None if two_state else schedule.grid.num_points
        values = np.asarray(schedule.state_values)
        while active.any():
            idx = np.nonzero(active)[0]
            s_now = state[idx]
            u = stream.random(idx.size)
            if two_state:
                nxt = np.where(u < p, 3 - s_now, s_now)
            else:
                forward = (s_now == 1) | (s_now == K) | (u < p)
                nxt = np.where(forward, s_now % schedule.m + 1, s_now - 1)
            eta = values[nxt - 1]
            a = stream.standard_normal((idx.size, b, d)) * sigma
            av = np.einsum("kbd,kd->kb", a, v[idx])
            v[idx] -= (eta / b)[:, None] * np.einsum("kbd,kb->kd", a, av)
            nrm = np.linalg.norm(v[idx], axis=1)
            logn[idx] += np.log(np.maximum(nrm, np.finfo(float).tiny))
            v[idx] /= np.maximum(nrm, np.finfo(float).tiny)[:, None]
            returned = nxt == starts[idx]
            state[idx] = nxt
            active[idx[returned]] = False
        lognorms[done : done + k] = logn
        done += k
        part += 1

    def ev(s):
        w = np.exp(s * lognorms)
        return KernelEstimate(float(w.mean()), batch_means_stderr(w), n_paths, "monte_carlo")

    def rho():
        return KernelEstimate(
            float(lognorms.mean()), batch_means_stderr(lognorms), n_paths, "monte_carlo"
        )

    return ScheduleKernel("markov_regen_direct", ev, rho, model, {"n_paths": n_paths})


def _hitting_system_value(P, a, pi, radius_margin=1e-8):
    """h^(r)(s) = sum_i pi_i h_ii from per-start hitting systems.

    W = P diag(a) weights each transition by the destination factor; for
    target j the first-passage expectation solves (I - Q^j) h^j = p^j with
    Q^j = W minus its j-th column and p^j that column.
    """
    m = len(a)
    if not np.all(np.isfinite(a)):
        raise DivergenceError("per-step factor overflowed; block expectation diverges")
    W = P * a[None, :]
    radius = np.abs(np.linalg.eigvals(W)).max()
    diag = np.empty(m)
    for j in range(m):
        Q = W.copy()
        pj = Q[:, j].copy()
        Q[:, j] = 0.0
        qr = np.abs(np.linalg.eigvals(Q)).max()
        if qr >= 1.0 - radius_margin:
            raise DivergenceError(
                f"hitting system diverges: spectral radius {qr:.6f} at target {j + 1}"
            )
        try:
            h = np.linalg.solve(np.eye(m) - Q, pj)
        except np.linalg.LinAlgError as exc:
            # entries so large the factorization degenerates: the value is
            # beyond float range, which is divergence for root-finding purposes
            raise DivergenceError(f"hitting system overflow at target {j + 1}") from exc
        if not np.isfinite(h[j]):
            raise DivergenceError(f"hitting system overflow at target {j + 1}")
        diag[j] = h[j]
    return float(pi @ diag), radius


def kernel_markov_linear_system(
    schedule: Schedule, model: GaussianDataModel, opts: KernelOptions = DEFAULT_OPTS,
) -> ScheduleKernel:
    """Exact-in-expectation regeneration kernel via per-target hitting systems."""
    if not isinstance(schedule, (MarkovFolded, MarkovTwoState, Cyclic)):
        raise UnsupportedScheduleError(
            f"linear-system kernel needs a finite-state Markov schedule, got {schedule.variant}"
        )
    P = schedule.transition_matrix()
    etas = np.asarray(schedule.state_values, dtype=float)
    pi = _stationary_auto(schedule)
    m = len(etas)

    def ev(s):
        a = _quad_factors(s, etas, model, opts)
        value, _ = _hitting_system_value(P, a, pi)
        return KernelEstimate(value, 0.0, opts.n_nodes, "quadrature")

    def rho():
        return _rho_from_logs(_sample_logs(etas, model, opts, weights=m * pi))

    return ScheduleKernel(
        "markov_linear_system", ev, rho, model, {"p": getattr(schedule, "p", 1.0), "m": m}
    )


def h_markov_linear_system(schedule, model, s, opts: KernelOptions = DEFAULT_OPTS) -> float:
    """Single-point convenience wrapper around the hitting-system kernel."""
    return kernel_markov_linear_system(schedule, model, opts).evaluate(s).value


def kernel_hhat_grid(
    etas, weights, model: GaussianDataModel, n: int = 100_000,
    opts: KernelOptions = DEFAULT_OPTS,
) -> ScheduleKernel:
    """Stationary-weighted spectral-norm bound kernel E_eta E_H ||I - (eta/b)H||^s."""
    etas = np.asarray(etas, dtype=float)
    weights = np.asarray(weights, dtype=float)
    panel = get_spectral_panel(opts.seed, n, model)
    norms = np.stack([panel.norms(e) for e in etas])  # (m, n)

    def ev(s):
        vals = weights @ norms**s
        return KernelEstimate(float(vals.mean()), batch_means_stderr(vals), n, "monte_carlo")

    def rho():
        vals = weights @ np.log(np.maximum(norms, np.finfo(float).tiny))
        return KernelEstimate(float(vals.mean()), batch_means_stderr(vals), n, "monte_carlo")

    return ScheduleKernel("hhat_grid", ev, rho, model, {"etas": etas, "weights": weights})


# ---------------------------------------------------------------------------
# root finding
# ---------------------------------------------------------------------------

@dataclass
class TailIndexResult:
    alpha: float
    rho: KernelEstimate
    bracket: tuple
    tol: float
    method: str
    mc_stderr_at_root: float
    alpha_stderr: float
    slope: float
    trace: list = field(repr=False, default_factory=list)

    @property
    def alpha_tol(self) -> float:
        """Half-width of the alpha interval implied by |h - 1| <= tol."""
        return self.tol / self.slope if self.slope > 0 else math.inf

    def combined_alpha_error(self, sigmas: float = 3.0) -> float:
        return self.alpha_tol + sigmas * self.alpha_stderr


def find_tail_index(
    kernel: ScheduleKernel,
    s_max: float = 8.0,
    tol: float = 1e-3,
    expand_limit: float = 64.0,
    rho_sigmas: float = 3.0,
    max_iter: int = 200,
    s_atol: float = 1e-10,
) -> TailIndexResult:
    """Locate the root of kernel(alpha) = 1 by bracketing and bisection.

    Refuses when the Lyapunov diagnostic is not negative beyond
    ``rho_sigmas`` standard errors (no stationary regime) and errors out
    when the kernel never exceeds 1 below ``expand_limit``. Bisection
    stops once |h - 1| <= tol, or once the bracket narrows to ``s_atol``
    (near a divergence pole the kernel crosses 1 too steeply for the
    h-tolerance to be meaningful, but the root stays pinned). All kernel
    evaluations reuse one CRN panel, so the trace is deterministic given
    the seed; the secant slope at the bracket converts the h-tolerance
    and the MC noise into alpha units.
    """
    rho = kernel.rho()
    if rho.value + rho_sigmas * rho.stderr >= 0:
        raise NoStationarySolutionError(
            f"rho = {rho.value:.6g} +- {rho.stderr:.2g} is not negative; "
            "no stationary heavy-tailed solution"
        )
    trace = []

    def ev(s):
        # a diverged block expectation (closed form out of its validity
        # region, or a non-contracting hitting system) counts as h = inf,
        # which the bracket simply treats as "past the root"
        try:
            est = kernel.evaluate(s)
        except (OutOfDomainError, DivergenceError):
            est = KernelEstimate(math.inf, 0.0, 0, "closed_form")
        trace.append((s, est.value))
        return est

    lo, hi = 1e-6, float(s_max)
    est_lo = ev(lo)
    if est_lo.value >= 1.0:
        raise NoStationarySolutionError(
            f"kernel({lo}) = {est_lo.value:.6g} >= 1 despite rho < 0; kernel inconsistent"
        )
    est_hi = ev(hi)
    while est_hi.value <= 1.0 and hi < expand_limit:
        hi = min(2.0 * hi, expand_limit)
        est_hi = ev(hi)
    if est_hi.value <= 1.0:
        raise RootAboveCapError(
            f"kernel stays <= 1 up to s = {hi}; root above cap or no root"
        )
    mid, est_mid = hi, est_hi
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        est_mid = ev(mid)
        if abs(est_mid.value - 1.0) <= tol or hi - lo <= s_atol:
            break
        if est_mid.value < 1.0:
            lo, est_lo = mid, est_mid
        else:
            hi, est_hi = mid, est_mid
    else:
        raise RootAboveCapError(f"bisection did not converge within {max_iter} iterations")

    # secant slope from the tightest finite bracketing evaluations
    below = [(s, h) for s, h in trace if h < 1.0]
    above = [(s, h) for s, h in trace if 1.0 < h < math.inf]
    if below and above:
        s_lo, h_lo_v = max(below)
        s_hi, h_hi_v = min(above)
        slope = (h_hi_v - h_lo_v) / max(s_hi - s_lo, 1e-12)
    else:
        slope = float("nan")
    stderr_h = est_mid.stderr
    alpha_stderr = stderr_h / slope if slope > 0 else 0.0
    return TailIndexResult(
        alpha=mid,
        rho=rho,
        bracket=(lo, hi),
        tol=tol,
        method=kernel.kind,
        mc_stderr_at_root=stderr_h,
        alpha_stderr=float(alpha_stderr),
        slope=float(slope),
        trace=trace,
    )


# ---------------------------------------------------------------------------
# infinite-variance thresholds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ThresholdReport:
    c_value: float
    regime: str  # heavy | boundary | light
    tol: float


def _per_state_c(etas, model):
    return np.array([h2_closed(e, e * e, model) for e in etas])


def threshold_report(schedule: Schedule, model: GaussianDataModel, tol: float = 1e-9) -> ThresholdReport:
    """Second-moment factor and variance regime for any schedule variant.

    c > 1 means the stationary law (when it exists) has infinite variance
    (tail index below 2), c = 1 is the boundary alpha = 2, and c < 1 gives
    a finite-variance regime. All cases use exact closed forms; the folded
    chain combines per-state factors through the hitting systems.
    """
    if isinstance(schedule, Constant):
        c = h2_closed(schedule.eta, schedule.eta**2, model)
    elif isinstance(schedule, IIDGrid):
        pts = np.asarray(schedule.grid.points)
        c = h2_closed(pts.mean(), float((pts**2).mean()), model)
    elif isinstance(schedule, IIDUniformContinuous):
        c = h2_closed(schedule.center, schedule.center**2 + schedule.range**2 / 3.0, model)
    elif isinstance(schedule, MarkovTwoState):
        cs = _per_state_c(schedule.state_values, model)
        c = two_state_closed_form(cs[0], cs[1], schedule.p)
    elif isinstance(schedule, Cyclic):
        cs = _per_state_c(schedule.state_values, model)
        c = float(np.prod(cs))
    elif isinstance(schedule, MarkovFolded):
        cs = _per_state_c(schedule.state_values, model)
        c, _ = _hitting_system_value(schedule.transition_matrix(), cs, _stationary_auto(schedule))
    else:
        raise UnsupportedScheduleError(f"no threshold form for schedule {schedule.variant}")
    if abs(c - 1.0) <= tol:
        regime = "boundary"
    elif c > 1.0:
        regime = "heavy"
    else:
        regime = "light"
    return ThresholdReport(float(c), regime, tol)


# ---------------------------------------------------------------------------
# schedule comparison
# ---------------------------------------------------------------------------

def kernel_for_schedule(schedule: Schedule, model, opts: KernelOptions = DEFAULT_OPTS) -> ScheduleKernel:
    """Default analytic kernel route for each schedule variant."""
    if isinstance(schedule, Constant):
        return kernel_constant(schedule.eta, model, opts)
    if isinstance(schedule, (IIDGrid, IIDUniformContinuous)):
        return kernel_iid(schedule, model, opts)
    if isinstance(schedule, Cyclic):
        return kernel_cyclic(schedule.grid, model, opts)
    if isinstance(schedule, MarkovTwoState):
        return kernel_markov_two_state(schedule.eta_lo, schedule.eta_hi, schedule.p, model, opts)
    if isinstance(schedule, MarkovFolded):
        return kernel_markov_linear_system(schedule, model, opts)
    raise UnsupportedScheduleError(f"no kernel route for schedule {schedule.variant}")


@dataclass
class ComparisonRow:
    tag: str
    p: float | None
    result: TailIndexResult
    in_validity_set: bool | None = None


@dataclass
class ComparisonReport:
    rows: list
    orderings: dict

    def alpha(self, tag, p=None):
        for row in self.rows:
            if row.tag == tag and (p is None or row.p == p):
                return row.result.alpha
        raise KeyError((tag, p))


def _two_state_validity(eta_lo, eta_hi, p, model, alpha, opts):
    x = h_step(alpha, eta_lo, model, n_nodes=opts.n_nodes).value
    y = h_step(alpha, eta_hi, model, n_nodes=opts.n_nodes).value
    return (1.0 - p) * max(x, y) < 1.0


def compare_schedules(
    eta_hat: float,
    R: float,
    K: int,
    p_list,
    model: GaussianDataModel,
    opts: KernelOptions = DEFAULT_OPTS,
    s_max: float = 8.0,
    tol: float = 1e-3,
) -> ComparisonReport:
    """Tail indices of the four schedule families on one stepsize grid.

    K = 2 runs the two-state family (closed-form Markov kernel); larger K
    runs the folded chain through the hitting systems. Ordering flags
    record whether the strict comparisons hold beyond 3 combined errors,
    with the i.i.d./Markov order expected to flip across p = 1/2.
    """
    grid = StepsizeGrid(eta_hat, R, K)
    rows = []
    r_const = find_tail_index(kernel_constant(eta_hat, model, opts), s_max, tol)
    rows.append(ComparisonRow("constant", None, r_const))
    r_iid = find_tail_index(kernel_iid(IIDGrid(grid), model, opts), s_max, tol)
    rows.append(ComparisonRow("iid", None, r_iid))
    r_cyc = find_tail_index(kernel_cyclic(grid, model, opts), s_max, tol)
    rows.append(ComparisonRow("cyclic", None, r_cyc))
    markov_rows = []
    for p in p_list:
        if K == 2:
            kern = kernel_markov_two_state(grid.points[0], grid.points[-1], p, model, opts)
        else:
            kern = kernel_markov_linear_system(MarkovFolded(grid, p), model, opts)
        r = find_tail_index(kern, s_max, tol)
        valid = None
        if K == 2:
            valid = _two_state_validity(grid.points[0], grid.points[-1], p, model, r.alpha, opts)
        row = ComparisonRow("markov", p, r, valid)
        rows.append(row)
        markov_rows.append(row)

    def err(r):
        return r.combined_alpha_error()

    orderings = {
        "iid_lt_cyclic": r_iid.alpha < r_cyc.alpha - err(r_iid) - err(r_cyc),
        "cyclic_lt_constant": r_cyc.alpha < r_const.alpha - err(r_cyc) - err(r_const),
    }
    for row in markov_rows:
        r = row.result
        margin = err(r) + err(r_iid)
        key = f"markov_p{row.p:g}"
        if row.p is not None and row.p > 0.5:
            orderings[key] = (
                r_iid.alpha < r.alpha - margin and r.alpha < r_cyc.alpha - err(r) - err(r_cyc)
            )
        elif row.p is not None and row.p < 0.5:
            orderings[key] = r.alpha < r_iid.alpha - margin
        else:
            orderings[key] = abs(r.alpha - r_iid.alpha) <= margin
    return ComparisonReport(rows, orderings)
