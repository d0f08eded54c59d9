"""Grover primitives, canonical amplitude estimation and Durr-Hoyer minimum finding.

Two execution paths share the same semantics:

* gate level: every stage is a :class:`CircuitBlock` that can be applied to a
  full statevector (used for small instances and cross-checks);
* fast path: the QAE state is assembled from the powers ``Q^y`` applied to the
  prepared work state, and the Durr-Hoyer diffusion ``P S0 P^dag`` is applied
  as the equivalent reflection ``2|Psi><Psi| - I`` about the stored prepared
  state. Both are exact rewrites, not approximations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .accumulate import build_evolution_block
from .lattice import CollisionModel, QoISpec
from .mapping import MappingSpec, build_amplitude_mapping, build_constant_comparator
from .parallel import ConfigurationSet, build_layout, build_marker_prep
from .simulator import (
    DEFAULT_MAX_QUBITS,
    CircuitBlock,
    CircuitOp,
    RegisterLayout,
    apply_ops_array,
    h,
    qft_op,
    ry,
    x,
    z,
)

DEFAULT_LAMBDA = 6 / 5
DEFAULT_BUDGET_C = 3.0
WORK_REGISTERS = ("B", "D", "AM", "C")


@dataclass(frozen=True)
class GroverDiagnostics:
    """Closed-form amplitudes of Grover search with ``t`` marked items out of ``n``."""

    t: int
    n: int

    def __post_init__(self):
        if not 0 < self.t < self.n:
            raise ValueError("need 0 < t < N for a nontrivial Grover rotation")

    @property
    def theta(self) -> float:
        return math.asin(math.sqrt(self.t / self.n))

    def k(self, j: int) -> float:
        return math.sin((2 * j + 1) * self.theta) / math.sqrt(self.t)

    def l(self, j: int) -> float:
        return math.cos((2 * j + 1) * self.theta) / math.sqrt(self.n - self.t)

    def good_probability(self, j: int) -> float:
        return math.sin((2 * j + 1) * self.theta) ** 2


@dataclass
class PipelineSpec:
    configset: ConfigurationSet
    collision: CollisionModel
    n_steps: int
    qoi: QoISpec
    mapping: MappingSpec = field(default_factory=MappingSpec)
    e: int = 4
    lam: float = DEFAULT_LAMBDA
    budget_c: float = DEFAULT_BUDGET_C
    use_overlap: bool = True
    max_qubits: int = DEFAULT_MAX_QUBITS

    def __post_init__(self):
        if self.e < 1:
            raise ValueError("estimation register needs e >= 1")
        if self.n_steps < 0:
            raise ValueError("number of time steps must be non-negative")
        if not self.budget_c > 0:
            raise ValueError("budget constant must be positive")
        validate_lambda(self.lam)
        self.qoi.validate(self.configset.reference, self.n_steps)
        self.mapping = self.mapping.resolved(self.qoi)

    def layout(self, check: bool = True) -> RegisterLayout:
        return build_layout(
            self.configset, self.qoi, self.e, self.mapping.kind, self.max_qubits if check else None
        )

    def budget(self) -> int:
        return max(1, math.ceil(self.budget_c * math.sqrt(self.configset.size)))

    def true_phi(self, f: float) -> float:
        return self.mapping.phi(f, self.qoi.n_acc_qubits)


def validate_lambda(lam: float) -> None:
    if not 1 < lam < 4 / 3:
        raise ValueError(f"exponential-search growth factor must satisfy 1 < lambda < 4/3, got {lam}")


# -- circuit builders --------------------------------------------------------


def build_state_prep_A(pipeline: PipelineSpec) -> CircuitBlock:
    """Work-register preparation: evolution, accumulation and amplitude mapping."""
    layout = pipeline.layout(check=False)
    block = build_evolution_block(
        pipeline.configset,
        pipeline.collision,
        pipeline.qoi,
        layout,
        pipeline.n_steps,
        pipeline.use_overlap,
    ) + build_amplitude_mapping(layout, pipeline.mapping)
    block.label = "A"
    return block


def reflect_about_zero(qubits: Sequence[int]) -> list[CircuitOp]:
    """2|0><0| - I on ``qubits`` (including the global -1 so controlled use is exact)."""
    qs = list(qubits)
    pivot, rest = qs[0], qs[1:]
    return [
        x(pivot),
        z(pivot, [(q, 0) for q in rest]),
        x(pivot),
        # Z X Z X = -I
        z(pivot),
        x(pivot),
        z(pivot),
        x(pivot),
    ]


def work_qubits(layout: RegisterLayout) -> list[int]:
    out: list[int] = []
    for name in WORK_REGISTERS:
        if name in layout:
            out.extend(layout.qubits(name))
    return out


def build_grover_iterator(A: CircuitBlock, layout: RegisterLayout) -> CircuitBlock:
    coin = layout.qubits("C")[0]
    wq = work_qubits(layout)
    # pivot on the coin so the reflection block touches it first
    wq.remove(coin)
    ops = [z(coin)] + A.adjoint().ops + reflect_about_zero([coin] + wq) + A.ops
    return CircuitBlock(ops, "Q")


def build_qae(pipeline: PipelineSpec, A: CircuitBlock | None = None) -> CircuitBlock:
    """Gate-level canonical QAE: H on E, controlled Q^(2^k), inverse QFT on E.

    The work registers must already hold A|0> (after the marker preparation).
    """
    layout = pipeline.layout()
    if A is None:
        A = build_state_prep_A(pipeline)
    return build_qae_from_prep(A, layout)


def build_qae_from_prep(A: CircuitBlock, layout: RegisterLayout) -> CircuitBlock:
    est = layout.qubits("E")
    q_block = build_grover_iterator(A, layout)
    ops = [h(qb) for qb in est]
    for k, qb in enumerate(est):
        controlled = q_block.controlled([(qb, 1)]).ops
        for _ in range(1 << k):
            ops.extend(controlled)
    ops.append(qft_op(est, inverse=True))
    return CircuitBlock(ops, "QAE")


def qae_estimate_from_outcome(y: int, e: int) -> float:
    if not 0 <= y < 1 << e:
        raise ValueError(f"outcome {y} outside 0..{(1 << e) - 1}")
    return math.sin(math.pi * y / (1 << e)) ** 2


def qae_error_bound(phi: float, l: int) -> float:
    if not -1e-12 <= phi <= 1 + 1e-12:
        raise ValueError("phi must lie in [0, 1]")
    if l < 1:
        raise ValueError("l must be >= 1")
    phi = min(max(phi, 0.0), 1.0)
    return 2 * math.pi * math.sqrt(phi * (1 - phi)) / l + (math.pi / l) ** 2


def folded_outcome(y, e: int):
    """Index of the estimate on the monotone half of the grid: min(y, 2^e - y)."""
    return np.minimum(y, (1 << e) - np.asarray(y)) if isinstance(y, np.ndarray) else min(y, (1 << e) - y)


def nearest_outcome(phi: float, e: int) -> int:
    """Folded grid index whose estimate is closest to ``phi``."""
    ts = np.arange((1 << (e - 1)) + 1)
    est = np.sin(np.pi * ts / (1 << e)) ** 2
    return int(np.argmin(np.abs(est - phi)))


def build_threshold_oracle(layout: RegisterLayout, tau: int, fold: bool = False) -> CircuitBlock:
    """Phase -1 on basis states whose E outcome lies below ``tau``; G is restored.

    With ``fold`` the comparison uses the folded outcome min(y, 2^e - y), which
    orders outcomes by their estimate sin^2(pi y / 2^e).
    """
    est = layout.qubits("E")
    flag = layout.qubits("G")[0]
    e = len(est)
    if fold:
        if not 0 <= tau <= (1 << (e - 1)) + 1:
            raise ValueError(f"folded threshold {tau} outside 0..{(1 << (e - 1)) + 1}")
        if tau == 0:
            return CircuitBlock([], "oracle")
        if tau > 1 << (e - 1):
            compute = [x(flag)]
        else:
            # [y < tau] xor [y < 2^e - tau + 1] xor 1 == [fold(y) < tau]
            compute = (
                build_constant_comparator(est, tau, flag).ops
                + build_constant_comparator(est, (1 << e) - tau + 1, flag).ops
                + [x(flag)]
            )
    else:
        if not 0 <= tau <= 1 << e:
            raise ValueError(f"threshold {tau} outside 0..{1 << e}")
        compute = build_constant_comparator(est, tau, flag).ops
    ops = list(compute) + [z(flag)] + [op.adjoint() for op in reversed(compute)]
    return CircuitBlock(ops, "oracle")


def grover_schedule(m: float, lam: float, rng: np.random.Generator) -> int:
    """Iteration count for one exponential-search round: uniform on 0..ceil(m)-1."""
    if m < 1:
        raise ValueError("m must be >= 1")
    validate_lambda(lam)
    return int(rng.integers(0, math.ceil(m - 1e-12)))


# -- fast QAE ----------------------------------------------------------------


@dataclass
class SearchState:
    """Prepared search state over (work + marker) x E, with the flag G left out.

    ``amps[y, w]`` is the amplitude of E outcome ``y`` and prefix basis index
    ``w``; the marker register sits at ``m_start`` with width ``m_width``.
    ``keys[y]`` orders outcomes for the threshold oracle and ``estimates[y]``
    is the reported estimate; by default they are the folded QAE index and
    sin^2(pi y / 2^e).
    """

    amps: np.ndarray
    e: int
    m_start: int
    m_width: int
    decode: Callable[[int], int | None]
    n_items: int
    keys: np.ndarray | None = None
    estimates: np.ndarray | None = None

    def __post_init__(self):
        ys = np.arange(1 << self.e)
        if self.keys is None:
            self.keys = folded_outcome(ys, self.e)
        if self.estimates is None:
            self.estimates = np.sin(np.pi * ys / (1 << self.e)) ** 2

    def joint_probs(self, amps: np.ndarray | None = None) -> np.ndarray:
        """Probability table indexed [y, marker value]."""
        a = self.amps if amps is None else amps
        p = np.abs(a) ** 2
        n_w = a.shape[1]
        hi = n_w >> (self.m_start + self.m_width)
        p = p.reshape(a.shape[0], hi, 1 << self.m_width, 1 << self.m_start)
        return p.sum(axis=(1, 3))

    def marker_distributions(self) -> dict[int, np.ndarray]:
        probs = self.joint_probs()
        out = {}
        for code in range(probs.shape[1]):
            j = self.decode(code)
            col = probs[:, code]
            if j is None or col.sum() <= 1e-15:
                continue
            out[j] = col / col.sum()
        return out


def qae_amplitudes(
    psi0: np.ndarray,
    A_ops: Sequence[CircuitOp],
    n: int,
    coin: int,
    keep_qubits: Sequence[int],
    e: int,
) -> np.ndarray:
    """QAE amplitudes ``[y, w]`` from the prepared ``n``-qubit state ``psi0 = P A |0>``.

    The reflection about zero acts on every qubit except ``keep_qubits`` (the
    marker), so it is block diagonal in the marker value.
    """
    A_ops = list(A_ops)
    A_adj = [op.adjoint() for op in reversed(A_ops)]
    idx = np.arange(1 << n)
    coin_one = (idx >> coin & 1).astype(bool)
    keep_mask = sum(1 << q for q in keep_qubits)
    zero_work = (idx & ~keep_mask & ((1 << n) - 1)) == 0

    def apply_q(v: np.ndarray) -> np.ndarray:
        v = v.copy()
        v[coin_one] *= -1
        apply_ops_array(v, n, A_adj)
        v *= -1
        v[zero_work] *= -1
        apply_ops_array(v, n, A_ops)
        return v

    dim = 1 << e
    cols = np.empty((dim, 1 << n), dtype=complex)
    v = np.asarray(psi0, dtype=complex).copy()
    for y in range(dim):
        cols[y] = v
        if y + 1 < dim:
            v = apply_q(v)
    cols /= math.sqrt(dim)
    # inverse QFT over the E index
    return np.fft.fft(cols, axis=0, norm="ortho")


def prepared_work_state(pipeline: PipelineSpec, A: CircuitBlock | None = None) -> tuple[np.ndarray, RegisterLayout]:
    """Marker prep followed by A, on the registers below E."""
    layout = pipeline.layout()
    prefix = layout.prefix("C")
    if A is None:
        A = build_state_prep_A(pipeline)
    psi = np.zeros(1 << prefix.total_qubits, dtype=complex)
    psi[0] = 1.0
    apply_ops_array(psi, prefix.total_qubits, build_marker_prep(pipeline.configset))
    apply_ops_array(psi, prefix.total_qubits, A)
    return psi, prefix


def prepare_search_state(pipeline: PipelineSpec) -> SearchState:
    layout = pipeline.layout()
    A = build_state_prep_A(pipeline)
    psi0, prefix = prepared_work_state(pipeline, A)
    amps = qae_amplitudes(
        psi0, A.ops, prefix.total_qubits, layout.qubits("C")[0], layout.qubits("M"), pipeline.e
    )
    m = layout["M"]
    return SearchState(amps, pipeline.e, m.start, m.width, pipeline.configset.decode, pipeline.configset.size)


def qae_synthetic_search_state(phis: Sequence[float], e: int) -> SearchState:
    """QAE state for per-item coin probabilities, bypassing the lattice pipeline.

    Item ``j`` gets a coin rotated to P(1) = phis[j]; the items are indexed by a
    compact marker register held in uniform superposition.
    """
    n = len(phis)
    if n < 1:
        raise ValueError("need at least one item")
    wm = math.ceil(math.log2(n)) if n > 1 else 0
    coin = wm
    A_ops = [
        ry(coin, 2 * math.asin(math.sqrt(min(max(p, 0.0), 1.0))), [(b, j >> b & 1) for b in range(wm)])
        for j, p in enumerate(phis)
    ]
    psi0 = np.zeros(1 << (wm + 1), dtype=complex)
    psi0[:n] = 1 / math.sqrt(n)
    apply_ops_array(psi0, wm + 1, A_ops)
    amps = qae_amplitudes(psi0, A_ops, wm + 1, coin, range(wm), e)
    return SearchState(amps, e, 0, wm, lambda v: v if v < n else None, n)


def valued_search_state(values: Sequence[float]) -> SearchState:
    """Each item carries a hardwired estimate; the oracle compares it directly.

    Item ``j`` is paired with outcome ``y = j`` whose estimate is ``values[j]``.
    """
    n = len(values)
    if n < 1:
        raise ValueError("need at least one item")
    wm = math.ceil(math.log2(n)) if n > 1 else 0
    e = max(1, wm)
    amps = np.zeros((1 << e, 1 << wm), dtype=complex)
    amps[np.arange(n), np.arange(n)] = 1 / math.sqrt(n)
    est = np.full(1 << e, np.inf)
    est[:n] = values
    return SearchState(amps, e, 0, wm, lambda v: v if v < n else None, n, est, est)


def outcome_search_state(outcomes: Sequence[int], e: int) -> SearchState:
    """Each item carries one definite E outcome (ideal exact estimates)."""
    n = len(outcomes)
    wm = math.ceil(math.log2(n)) if n > 1 else 0
    amps = np.zeros((1 << e, 1 << wm), dtype=complex)
    for j, y in enumerate(outcomes):
        if not 0 <= y < 1 << e:
            raise ValueError(f"outcome {y} outside 0..{(1 << e) - 1}")
        amps[y, j] = 1 / math.sqrt(n)
    return SearchState(amps, e, 0, wm, lambda v: v if v < n else None, n)


# -- estimation ---------------------------------------------------------------


@dataclass
class EstimateResult:
    e: int
    distributions: dict[int, np.ndarray]
    true_phi: dict[int, float] = field(default_factory=dict)

    def phi_hat(self, y: int) -> float:
        return qae_estimate_from_outcome(y, self.e)

    def epsilon_bound(self, phi: float) -> float:
        return qae_error_bound(phi, 1 << self.e)

    def mass_within_bound(self, j: int, phi: float | None = None) -> float:
        phi = self.true_phi[j] if phi is None else phi
        eps = self.epsilon_bound(phi)
        dist = self.distributions[j]
        return float(
            sum(p for y, p in enumerate(dist) if abs(self.phi_hat(y) - phi) <= eps + 1e-12)
        )

    def mode(self, j: int) -> int:
        return int(np.argmax(self.distributions[j]))


# -- minimum finding ---------------------------------------------------------


@dataclass
class RoundRecord:
    round: int
    tau: float
    marker: int
    y: int
    phi_hat: float
    iterations: int
    improved: bool


@dataclass
class MinFindResult:
    best_marker: int
    best_estimate: float
    best_y: int
    threshold_trace: list[tuple[float, int, int]]
    grover_iterations_total: int
    oracle_queries_total: int
    rounds: list[RoundRecord] = field(default_factory=list)
    budget: int = 0
    votes: dict[int, int] = field(default_factory=dict)
    medians: dict[int, float] = field(default_factory=dict)
    degenerate: bool = False


def _sample(state: SearchState, amps: np.ndarray, rng: np.random.Generator) -> tuple[int, int]:
    probs = state.joint_probs(amps).reshape(-1)
    probs = probs / probs.sum()
    k = int(rng.choice(probs.size, p=probs))
    y, code = divmod(k, 1 << state.m_width)
    marker = state.decode(code)
    if marker is None:
        raise FloatingPointError(f"sampled unassigned marker value {code}")
    return y, marker


def grover_iterate(state: SearchState, amps: np.ndarray, tau: float, count: int) -> np.ndarray:
    """``count`` rounds of (2|Psi><Psi| - I) O_tau starting from ``amps``."""
    psi = state.amps
    marked = state.keys < tau
    v = amps.copy()
    for _ in range(count):
        v[marked] *= -1
        overlap = np.vdot(psi, v)
        v = 2 * overlap * psi - v
    return v


def run_durr_hoyer(
    target: PipelineSpec | SearchState,
    rng: np.random.Generator,
    lam: float | None = None,
    budget: int | None = None,
    budget_c: float | None = None,
    max_rounds: int = 10_000,
) -> MinFindResult:
    """Threshold-tracking minimum search over the (marker, estimate) registers."""
    if isinstance(target, PipelineSpec):
        lam = target.lam if lam is None else lam
        budget_c = target.budget_c if budget_c is None else budget_c
        state = prepare_search_state(target)
    else:
        state = target
    lam = DEFAULT_LAMBDA if lam is None else lam
    validate_lambda(lam)
    n = state.n_items
    if budget is None:
        c = DEFAULT_BUDGET_C if budget_c is None else budget_c
        budget = math.ceil(c * math.sqrt(n))
    if budget < 1:
        raise ValueError("iteration budget must be >= 1")

    y, marker = _sample(state, state.amps, rng)
    keys = state.keys
    tau = keys[y].item()
    best = (marker, y)
    trace = [(tau, marker, y)]
    rounds = [RoundRecord(0, tau, marker, y, float(state.estimates[y]), 0, True)]
    total = 0
    if n == 1:
        return MinFindResult(marker, rounds[0].phi_hat, y, trace, 0, 0, rounds, budget)

    m = 1.0
    cap = math.sqrt(n)
    for r in range(1, max_rounds + 1):
        if total >= budget:
            break
        j = grover_schedule(m, lam, rng)
        amps = grover_iterate(state, state.amps, tau, j) if j else state.amps
        total += j
        y, marker = _sample(state, amps, rng)
        t = keys[y].item()
        improved = t < tau
        rounds.append(RoundRecord(r, tau, marker, y, float(state.estimates[y]), j, improved))
        if improved:
            tau = t
            best = (marker, y)
            trace.append((tau, marker, y))
            m = 1.0
        else:
            m = min(lam * m, cap)

    marker, y = best
    return MinFindResult(
        marker,
        float(state.estimates[y]),
        y,
        trace,
        total,
        total,
        rounds,
        budget,
    )
