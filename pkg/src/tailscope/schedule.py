"""Stepsize schedules as state machines on a finite grid.

The grid (c_1, ..., c_K) is equally spaced on [center - range, center + range].
Stochastic and cyclic schedules walk the *folded* arrangement

    (c_1, c_2, ..., c_{K-1}, c_K, c_{K-1}, ..., c_2)

of m = 2K - 2 states, so one forward sweep of the cycle runs the stepsize
up the grid and back down. State indices are 1-based throughout, matching
the folded layout; index m + 1 wraps to index 1.

Transition rule of the folded chain: state 1 always advances to 2, state K
always advances to K + 1 (the first descending copy of c_{K-1}); every
other state advances with probability p and retreats with probability
1 - p. At p = 1 the chain is the deterministic cycle.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DomainError,
    InvalidGridError,
    NonreturnError,
    SingularParameterError,
    UnsupportedScheduleError,
)

RETURN_CAP = 10_000_000


# ---------------------------------------------------------------------------
# grid and folded state space
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StepsizeGrid:
    """Equally spaced stepsize grid with K points on [center - range, center + range]."""

    center: float
    range: float
    num_points: int

    def __post_init__(self):
        if self.num_points < 2:
            raise InvalidGridError(f"need at least 2 grid points, got {self.num_points}")
        if self.range < 0:
            raise InvalidGridError(f"range must be nonnegative, got {self.range}")
        if self.center <= self.range:
            raise InvalidGridError(
                f"grid reaches a nonpositive stepsize: center={self.center}, range={self.range}"
            )

    @property
    def spacing(self) -> float:
        return 2.0 * self.range / (self.num_points - 1)

    @property
    def points(self) -> np.ndarray:
        k = np.arange(self.num_points)
        return self.center - self.range + k * self.spacing


@dataclass(frozen=True)
class FoldedStateSpace:
    """The 2K - 2 state arrangement (c_1, ..., c_K, c_{K-1}, ..., c_2)."""

    values: tuple

    @property
    def m(self) -> int:
        return len(self.values)

    def __post_init__(self):
        m = len(self.values)
        if m < 2 or m % 2 != 0:
            raise InvalidGridError(f"folded state space must have even length >= 2, got {m}")


def build_folded_state_space(grid: StepsizeGrid) -> FoldedStateSpace:
    """Fold the K-point grid into its 2K - 2 state cycle.

    For K = 2 the result degenerates to the two-element sequence (c_1, c_2).
    """
    pts = list(grid.points)
    return FoldedStateSpace(tuple(pts + pts[-2:0:-1]))


def folded_transition_matrix(num_points: int, p: float) -> np.ndarray:
    """Row-stochastic transition matrix of the folded chain (m x m, 1-based layout)."""
    if not 0.0 <= p <= 1.0:
        raise InvalidGridError(f"transition probability must lie in [0, 1], got {p}")
    K = num_points
    m = 2 * K - 2
    P = np.zeros((m, m))
    for i in range(1, m + 1):
        up = i % m + 1  # i + 1 with wraparound m -> 1
        down = i - 1
        if i in (1, K):
            P[i - 1, up - 1] = 1.0
        else:
            P[i - 1, up - 1] = p
            P[i - 1, down - 1] += 1.0 - p
    return P


# ---------------------------------------------------------------------------
# schedule variants
# ---------------------------------------------------------------------------

class Schedule:
    """Base class: a single-owner mutable stepsize state machine.

    ``step(rng)`` advances the machine and returns the new stepsize. The
    stochastic finite-state variants additionally expose ``state`` (current
    1-based index), ``state_values`` and ``transition_matrix()``.
    """

    variant = "base"
    stochastic = False

    def step(self, rng: np.random.Generator) -> float:
        raise NotImplementedError

    def clone(self) -> "Schedule":
        raise NotImplementedError


class Constant(Schedule):
    variant = "constant"

    def __init__(self, eta: float):
        if eta < 0:
            raise InvalidGridError(f"stepsize must be nonnegative, got {eta}")
        self.eta = eta

    def step(self, rng=None) -> float:
        return self.eta

    def clone(self):
        return Constant(self.eta)


class IIDGrid(Schedule):
    """Uniformly random grid point, drawn independently each step."""

    variant = "iid_grid"
    stochastic = True

    def __init__(self, grid: StepsizeGrid):
        self.grid = grid
        self._points = grid.points

    def step(self, rng: np.random.Generator) -> float:
        return float(self._points[rng.integers(len(self._points))])

    def clone(self):
        return IIDGrid(self.grid)


class IIDUniformContinuous(Schedule):
    """Uniform draw on (center - range, center + range) each step."""

    variant = "iid_uniform"
    stochastic = True

    def __init__(self, center: float, range: float):
        if range < 0 or center <= range:
            raise InvalidGridError(
                f"interval reaches a nonpositive stepsize: center={center}, range={range}"
            )
        self.center = center
        self.range = range

    def step(self, rng: np.random.Generator) -> float:
        return float(self.center + self.range * (2.0 * rng.random() - 1.0))

    def clone(self):
        return IIDUniformContinuous(self.center, self.range)


class _FiniteChain(Schedule):
    """Shared machinery for the folded chain and its p = 1 (cyclic) case."""

    stochastic = True

    def __init__(self, grid: StepsizeGrid, p: float, start_state: int = 1):
        self.grid = grid
        self.p = float(p)
        self.space = build_folded_state_space(grid)
        self.state_values = np.asarray(self.space.values)
        self.m = self.space.m
        if not 1 <= start_state <= self.m:
            raise InvalidGridError(f"start state {start_state} outside 1..{self.m}")
        self.state = start_state

    def transition_matrix(self) -> np.ndarray:
        return folded_transition_matrix(self.grid.num_points, self.p)

    def _advance(self, state: int, u: float) -> int:
        K = self.grid.num_points
        if state == 1 or state == K or u < self.p:
            return state % self.m + 1
        return state - 1

    def step(self, rng: np.random.Generator) -> float:
        u = rng.random() if self.p < 1.0 else 0.0
        self.state = self._advance(self.state, u)
        return float(self.state_values[self.state - 1])


class MarkovFolded(_FiniteChain):
    variant = "markov"

    def clone(self):
        return MarkovFolded(self.grid, self.p, self.state)


class Cyclic(_FiniteChain):
    """Deterministic cycle through the folded states (MarkovFolded at p = 1)."""

    variant = "cyclic"

    def __init__(self, grid: StepsizeGrid, start_state: int = 1):
        super().__init__(grid, 1.0, start_state)

    def step(self, rng=None) -> float:
        self.state = self.state % self.m + 1
        return float(self.state_values[self.state - 1])

    def clone(self):
        return Cyclic(self.grid, self.state)


class MarkovTwoState(Schedule):
    """Two-state chain on {eta_lo, eta_hi} that flips with probability p both ways."""

    variant = "markov_two_state"
    stochastic = True

    def __init__(self, eta_lo: float, eta_hi: float, p: float, start_state: int = 1):
        if eta_lo <= 0 or eta_hi <= 0:
            raise InvalidGridError("two-state stepsizes must be positive")
        if not 0.0 <= p <= 1.0:
            raise InvalidGridError(f"transition probability must lie in [0, 1], got {p}")
        self.eta_lo = eta_lo
        self.eta_hi = eta_hi
        self.p = float(p)
        self.state_values = np.array([eta_lo, eta_hi])
        self.m = 2
        if start_state not in (1, 2):
            raise InvalidGridError("two-state start state must be 1 or 2")
        self.state = start_state

    def transition_matrix(self) -> np.ndarray:
        p = self.p
        return np.array([[1.0 - p, p], [p, 1.0 - p]])

    def step(self, rng: np.random.Generator) -> float:
        if rng.random() < self.p:
            self.state = 3 - self.state
        return float(self.state_values[self.state - 1])

    def clone(self):
        return MarkovTwoState(self.eta_lo, self.eta_hi, self.p, self.state)


def next_step(schedule: Schedule, rng: np.random.Generator | None = None) -> float:
    """Advance the schedule one step and return the emitted stepsize."""
    return schedule.step(rng)


# ---------------------------------------------------------------------------
# stationary distribution
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StationaryDist:
    probabilities: np.ndarray
    source: str  # closed_form | linear_solve | empirical

    def __post_init__(self):
        pi = np.asarray(self.probabilities, dtype=float)
        if np.any(pi < -1e-14):
            raise ValueError("stationary probabilities must be nonnegative")
        if abs(pi.sum() - 1.0) > 1e-12:
            raise ValueError(f"stationary probabilities sum to {pi.sum()}, not 1")


def _closed_form_folded(K: int, p: float) -> np.ndarray:
    """Explicit stationary law of the folded chain.

    Solving the balance equations: on each monotone branch the law is an
    affine-geometric profile pi_i = A q^(dist to branch end) + B with
    q = (1 - p)/p, pinned by pi_{m-1} = pi_m / p and pi_m = p pi_{m-1};
    the two always-advancing states carry pi_1 = pi_K. The chain is
    invariant under the half-cycle shift i -> i + (K - 1), so each branch
    repeats and the normalizer follows from one branch sum. K = 2
    alternates deterministically regardless of p.
    """
    m = 2 * K - 2
    if p <= 0.0:
        raise SingularParameterError("folded chain is reducible at p = 0")
    if K == 2:
        return np.array([0.5, 0.5])
    if abs(p - 0.5) < 1e-12:
        raise SingularParameterError(
            "closed form has (2p - 1) factors and is singular at p = 1/2; use linear_solve"
        )
    q = (1.0 - p) / p
    t = 2.0 * p - 1.0
    A = (p - 1.0) / t
    B = p / t
    # one branch holds pi_K plus the K - 2 interior states K+1 .. m
    branch = (
        p * A * q ** (K - 2)
        + p**2 / t
        + A * (1.0 - q ** (K - 2)) / (1.0 - q)
        + B * (K - 2)
    )
    pi_m = 0.5 / branch
    pi = np.empty(m)
    pi[0] = ((1.0 - p) * A * q ** (K - 3) + p**2 / t) * pi_m
    for i in range(2, K):
        pi[i - 1] = (A * q ** (K - 1 - i) + B) * pi_m
    pi[K - 1] = (p * A * q ** (K - 2) + p**2 / t) * pi_m
    for i in range(K + 1, m + 1):
        pi[i - 1] = (A * q ** (m - i) + B) * pi_m
    return pi


def _null_space_solve(P: np.ndarray) -> np.ndarray:
    """Stationary vector as the normalized null vector of (P^T - I)."""
    m = P.shape[0]
    A = P.T - np.eye(m)
    # replace one balance equation by the normalization constraint
    A[-1, :] = 1.0
    b = np.zeros(m)
    b[-1] = 1.0
    pi = np.linalg.solve(A, b)
    pi = np.where(np.abs(pi) < 1e-15, 0.0, pi)
    return pi / pi.sum()


def stationary_distribution(schedule: Schedule, method: str = "closed_form") -> StationaryDist:
    """Stationary law of a finite-state stepsize chain.

    ``closed_form`` uses the explicit per-state formulas (folded chain) or
    the symmetric (1/2, 1/2) law (two-state chain); ``linear_solve``
    computes the normalized null vector of (P^T - I).
    """
    if method not in ("closed_form", "linear_solve"):
        raise ValueError(f"unknown method {method!r}")
    if isinstance(schedule, MarkovTwoState):
        if schedule.p <= 0.0:
            raise SingularParameterError("two-state chain is frozen at p = 0")
        if method == "closed_form":
            return StationaryDist(np.array([0.5, 0.5]), "closed_form")
        return StationaryDist(_null_space_solve(schedule.transition_matrix()), "linear_solve")
    if isinstance(schedule, _FiniteChain):
        if method == "closed_form":
            pi = _closed_form_folded(schedule.grid.num_points, schedule.p)
            return StationaryDist(pi, "closed_form")
        return StationaryDist(_null_space_solve(schedule.transition_matrix()), "linear_solve")
    raise UnsupportedScheduleError(
        f"stationary_distribution needs a finite-state Markov schedule, got {schedule.variant}"
    )


# ---------------------------------------------------------------------------
# regeneration machinery
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RegenerationPath:
    """Stepsizes eta_1 .. eta_{r_1} up to and including the first return."""

    stepsizes: np.ndarray
    states: np.ndarray  # visited 1-based state indices, same length
    start_state: int

    @property
    def length(self) -> int:
        return len(self.stepsizes)


def _require_finite_chain(schedule: Schedule):
    if not isinstance(schedule, (_FiniteChain, MarkovTwoState)):
        raise UnsupportedScheduleError(
            f"regeneration paths need a finite-state schedule, got {schedule.variant}"
        )


def sample_regeneration_path(
    schedule: Schedule,
    rng: np.random.Generator,
    start_state: int | None = None,
    cap: int = RETURN_CAP,
) -> RegenerationPath:
    """Walk the chain until it first returns to its starting state.

    The start state is drawn from the stationary distribution unless
    overridden. Exceeding ``cap`` steps raises NonreturnError, which
    signals p too small for the chain to mix (or a misconfiguration).
    """
    _require_finite_chain(schedule)
    if start_state is None:
        pi = stationary_distribution(schedule, "linear_solve").probabilities
        start_state = int(rng.choice(len(pi), p=pi)) + 1
    walker = schedule.clone()
    walker.state = start_state
    states = []
    steps = []
    for _ in range(cap):
        eta = walker.step(rng)
        states.append(walker.state)
        steps.append(eta)
        if walker.state == start_state:
            return RegenerationPath(np.array(steps), np.array(states, dtype=np.int64), start_state)
    raise NonreturnError(
        f"no return to state {start_state} within {cap} steps (p={getattr(schedule, 'p', None)})"
    )


def sample_visit_counts(
    schedule: Schedule,
    n_paths: int,
    rng: np.random.Generator,
    start_states: np.ndarray | None = None,
    max_rounds: int = 10_000_000,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized regeneration sampling: per-path state visit counts.

    Returns ``(counts, starts)`` where ``counts[k, i]`` is how many times
    path k visited state i + 1 before (and including) its first return to
    ``starts[k]``. Path products of any per-state weights w follow as
    ``exp(counts @ log w)``, which keeps a fixed set of sampled paths
    reusable across exponents (common random numbers).
    """
    _require_finite_chain(schedule)
    m = schedule.m
    if start_states is None:
        pi = stationary_distribution(schedule, "linear_solve").probabilities
        starts = rng.choice(m, size=n_paths, p=pi) + 1
    else:
        starts = np.asarray(start_states, dtype=np.int64)
        if starts.shape != (n_paths,):
            raise ValueError("start_states must have shape (n_paths,)")
    counts = np.zeros((n_paths, m), dtype=np.int64)
    state = starts.copy()
    active = np.ones(n_paths, dtype=bool)

    if isinstance(schedule, MarkovTwoState):
        p = schedule.p
        always_forward = np.zeros(m + 1, dtype=bool)
    else:
        p = schedule.p
        K = schedule.grid.num_points
        always_forward = np.zeros(m + 1, dtype=bool)
        always_forward[1] = True
        always_forward[K] = True

    two_state = isinstance(schedule, MarkovTwoState)
    for _ in range(max_rounds):
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            return counts, starts
        s = state[idx]
        u = rng.random(idx.size)
        if two_state:
            flip = u < p
            nxt = np.where(flip, 3 - s, s)
        else:
            forward = always_forward[s] | (u < p)
            nxt = np.where(forward, s % m + 1, s - 1)
        counts[idx, nxt - 1] += 1
        returned = nxt == starts[idx]
        state[idx] = nxt
        active[idx[returned]] = False
    raise NonreturnError(f"{active.sum()} paths did not return within {max_rounds} rounds")


def regeneration_pmf_two_state(p: float, k: int) -> float:
    """P(r_1 = k) for the two-state chain: 1 - p at k = 1, p^2 (1-p)^(k-2) beyond."""
    if not 0.0 < p <= 1.0:
        raise DomainError(f"p must lie in (0, 1], got {p}")
    if k < 1:
        raise DomainError(f"return time must be >= 1, got {k}")
    if k == 1:
        return 1.0 - p
    return p * p * (1.0 - p) ** (k - 2)
