"""Classical references for the quantum pipeline.

The exact per-lattice objective comes from statevector marginals. The
classical LGA enumerator is an independent cross-check: it streams
occupancies by coordinate arithmetic rather than through the swap network,
and branches over collision outcomes with Born weights.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from statistics import median
from typing import Sequence

import numpy as np

from .lattice import CollisionModel, LatticeSpec, QoISpec
from .search import (
    EstimateResult,
    MinFindResult,
    PipelineSpec,
    SearchState,
    prepare_search_state,
    prepared_work_state,
    qae_error_bound,
    run_durr_hoyer,
)

WORKERS_ENV = "PQLGA_WORKERS"


def exact_expectation(pipeline: PipelineSpec) -> np.ndarray:
    """P(coin = 1 | marker = j) for every lattice j, from exact marginals."""
    psi, prefix = prepared_work_state(pipeline)
    probs = np.abs(psi) ** 2
    idx = np.arange(psi.size)
    m = prefix["M"]
    coin = prefix["C"].start
    codes = idx >> m.start & m.mask
    coin_one = (idx >> coin & 1).astype(bool)
    cs = pipeline.configset
    out = np.empty(cs.size)
    for j in range(cs.size):
        sel = codes == cs.code(j)
        out[j] = probs[sel & coin_one].sum() / probs[sel].sum()
    return out


def estimate(pipeline: PipelineSpec, state: SearchState | None = None) -> EstimateResult:
    """Per-lattice QAE outcome distributions alongside the exact objective."""
    if state is None:
        state = prepare_search_state(pipeline)
    phis = exact_expectation(pipeline)
    return EstimateResult(pipeline.e, state.marker_distributions(), {j: float(p) for j, p in enumerate(phis)})


# -- classical lattice gas -------------------------------------------------


def _classical_stream(spec: LatticeSpec, occupied: frozenset) -> frozenset:
    out = set()
    for g, c in occupied:
        coords = spec.coords(g)
        moved = [a + v for a, v in zip(coords, spec.velocities[c])]
        if spec.periodic:
            out.add((int(np.ravel_multi_index([a % s for a, s in zip(moved, spec.shape)], spec.shape)), c))
        elif all(0 <= a < s for a, s in zip(moved, spec.shape)):
            out.add((int(np.ravel_multi_index(moved, spec.shape)), c))
        else:
            out.add((g, spec.opposite(c)))
    return frozenset(out)


def _classical_boundary(spec: LatticeSpec, occupied: frozenset) -> frozenset:
    links = spec.links
    return frozenset((g, links.get((g, c), c)) for g, c in occupied)


def _collision_branches(spec: LatticeSpec, u: np.ndarray, occupied: frozenset, atol: float):
    """All outcomes of colliding every gridpoint, with their Born weights."""
    per_site = []
    for g in range(spec.n_gridpoints):
        occ = sum(1 << c for c in range(spec.q) if (g, c) in occupied)
        col = np.abs(u[:, occ]) ** 2
        per_site.append([(o, float(w)) for o, w in enumerate(col) if w > atol])
    branches = [(frozenset(), 1.0)]
    for g, options in enumerate(per_site):
        nxt = []
        for occ_set, w in branches:
            for o, wo in options:
                bits = {(g, c) for c in range(spec.q) if o >> c & 1}
                nxt.append((occ_set | bits, w * wo))
        branches = nxt
    return branches


def classical_lga_enumerate(
    spec: LatticeSpec,
    collision_model: CollisionModel,
    n_steps: int,
    qoi: QoISpec,
    atol: float = 1e-14,
) -> dict[int, float]:
    """Branch-weighted distribution of the cumulative QoI of one lattice."""
    if spec.n_qubits > 20:
        raise ValueError(f"enumeration limited to 20 occupancy bits, lattice has {spec.n_qubits}")
    qoi.validate(spec, n_steps)
    u = collision_model.unitary(spec)
    weights = {(g, c): w for g in qoi.region for c, w in zip(qoi.channels, qoi.weights)}
    acc = set(qoi.acc_steps)
    dist: dict[tuple[frozenset, int], float] = {(frozenset(spec.initial_occupancy), 0): 1.0}
    for t in range(1, n_steps + 1):
        nxt: dict[tuple[frozenset, int], float] = {}
        for (occ, f), p in dist.items():
            for out, w in _collision_branches(spec, u, occ, atol):
                new = _classical_boundary(spec, _classical_stream(spec, out))
                nf = f + (sum(weights.get(el, 0) for el in new) if t in acc else 0)
                key = (new, nf)
                nxt[key] = nxt.get(key, 0.0) + p * w
        dist = nxt
    out: dict[int, float] = {}
    for (_, f), p in dist.items():
        out[f] = out.get(f, 0.0) + p
    return dict(sorted(out.items()))


# -- analytics ---------------------------------------------------------------


@dataclass
class GapReport:
    phis: list[float]
    best: int
    delta: float
    e: int
    degenerate: bool
    bound_exceeds_half_gap: bool
    resolvable: bool


def compute_gap(phi_table: Sequence[float], e: int) -> GapReport:
    """Gap between the optimum and the runner-up, and whether e bits can resolve it.

    The instance is resolvable when the estimate grid point nearest to the
    optimum lies strictly below the grid points nearest to every other value.
    """
    phis = [float(p) for p in phi_table]
    if len(phis) < 2:
        raise ValueError("a gap needs at least two configurations")
    best = int(np.argmin(phis))
    others = [p for k, p in enumerate(phis) if k != best]
    delta = max(0.0, min(others) - phis[best])
    degenerate = delta <= 1e-12
    bound = qae_error_bound(phis[best], 1 << e)
    scale = (1 << e) / math.pi

    def grid(p: float) -> int:
        return int(round(scale * math.asin(math.sqrt(min(max(p, 0.0), 1.0)))))

    resolvable = not degenerate and all(grid(phis[best]) < grid(p) for p in others)
    return GapReport(phis, best, delta, e, degenerate, bound > delta / 2, resolvable)


def classical_query_baseline(n: int, t: int) -> float:
    """Expected draws without replacement until one of t marked items appears."""
    if not 1 <= t <= n:
        raise ValueError(f"need 1 <= t <= N, got t={t}, N={n}")
    return (n + 1) / (t + 1)


# -- classical repetition ------------------------------------------------------


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None


def repeated_median_minfind(
    target: PipelineSpec | SearchState,
    k: int,
    rng: np.random.Generator,
    workers: int | None = None,
    **kwargs,
) -> MinFindResult:
    """k independent minimum searches combined by plurality vote."""
    if k < 1 or k % 2 == 0:
        raise ValueError(f"repetition count must be odd and positive, got {k}")
    state = prepare_search_state(target) if isinstance(target, PipelineSpec) else target
    if isinstance(target, PipelineSpec):
        kwargs.setdefault("lam", target.lam)
        kwargs.setdefault("budget_c", target.budget_c)
    seeds = np.random.SeedSequence(int(rng.integers(2**63))).spawn(k)

    def one(seed):
        return run_durr_hoyer(state, np.random.default_rng(seed), **kwargs)

    workers = worker_count() if workers is None else workers
    if workers > 1 and k > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(one, seeds))
    else:
        runs = [one(s) for s in seeds]
    if k == 1:
        res = runs[0]
        res.votes = {res.best_marker: 1}
        res.medians = {res.best_marker: res.best_estimate}
        return res

    votes: dict[int, int] = {}
    estimates: dict[int, list[float]] = {}
    for run in runs:
        votes[run.best_marker] = votes.get(run.best_marker, 0) + 1
        estimates.setdefault(run.best_marker, []).append(run.best_estimate)
    medians = {j: float(median(v)) for j, v in estimates.items()}
    top = max(votes.values())
    leaders = [j for j, v in votes.items() if v == top]
    winner = min(leaders, key=lambda j: (medians[j], j))
    degenerate = len(leaders) > 1 or any(
        abs(medians[j] - medians[winner]) <= 1e-12 for j in medians if j != winner
    )
    chosen = next(r for r in runs if r.best_marker == winner)
    return MinFindResult(
        winner,
        medians[winner],
        chosen.best_y,
        chosen.threshold_trace,
        sum(r.grover_iterations_total for r in runs),
        sum(r.oracle_queries_total for r in runs),
        [rec for r in runs for rec in r.rounds],
        chosen.budget,
        votes,
        medians,
        degenerate,
    )
