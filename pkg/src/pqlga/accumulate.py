"""Coherent QoI accumulation into the data register.

The data register D is moved to Fourier space once, every accumulation step
adds the weighted occupancy of the region through controlled phases, and a
single inverse QFT at the end brings the cumulative value back.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .lattice import CollisionModel, LatticeSpec, QoISpec
from .parallel import ConfigurationSet, build_parallel_initial, build_parallel_step
from .simulator import CircuitBlock, RegisterLayout, StateVector, marginal_array, phase, qft_op


def build_mhwa(layout: RegisterLayout, qoi: QoISpec, spec: LatticeSpec) -> CircuitBlock:
    """Weighted Hamming weight adder acting on a Fourier-space data register."""
    data = layout.qubits("D")
    n = len(data)
    sources = qoi.sources(spec)
    ops = []
    # anti-diagonal order: op (s, k) lands in layer s + k, so depth is |sources| + n - 1
    for layer in range(len(sources) + n - 1):
        for s in range(max(0, layer - n + 1), min(len(sources), layer + 1)):
            src, w = sources[s]
            k = layer - s
            ops.append(phase(data[k], w * math.pi / (1 << (n - 1 - k)), [(src, 1)]))
    return CircuitBlock(ops, "mhwa")


@dataclass
class AccumulationSchedule:
    """Where the adder and the two Fourier transforms sit in an N_t-step run.

    ``mhwa[t]`` is applied right after time step ``t`` (1-based).
    """

    n_steps: int
    qft: CircuitBlock
    iqft: CircuitBlock
    mhwa: dict[int, CircuitBlock] = field(default_factory=dict)

    def blocks(self, step: CircuitBlock) -> list[CircuitBlock]:
        """The full interleaved sequence, given the block for one time step."""
        out = [self.qft]
        for t in range(1, self.n_steps + 1):
            out.append(step)
            if t in self.mhwa:
                out.append(self.mhwa[t])
        out.append(self.iqft)
        return out


def build_accumulation_schedule(
    layout: RegisterLayout, qoi: QoISpec, spec: LatticeSpec, n_steps: int
) -> AccumulationSchedule:
    if n_steps < 0:
        raise ValueError("number of time steps must be non-negative")
    for t in qoi.acc_steps:
        if not 1 <= t <= n_steps:
            raise ValueError(f"accumulation step {t} outside 1..{n_steps}")
    data = layout.qubits("D")
    adder = build_mhwa(layout, qoi, spec)
    return AccumulationSchedule(
        n_steps,
        CircuitBlock([qft_op(data)], "qft_D"),
        CircuitBlock([qft_op(data, inverse=True)], "iqft_D"),
        {t: adder for t in qoi.acc_steps},
    )


def build_evolution_block(
    configset: ConfigurationSet,
    collision: CollisionModel,
    qoi: QoISpec,
    layout: RegisterLayout,
    n_steps: int,
    use_overlap: bool = True,
) -> CircuitBlock:
    """Controlled initial conditions, then N_t steps interleaved with accumulation."""
    spec = configset.reference
    qoi.validate(spec, n_steps)
    schedule = build_accumulation_schedule(layout, qoi, spec, n_steps)
    step = build_parallel_step(configset, collision, use_overlap)
    block = build_parallel_initial(configset, use_overlap)
    for part in schedule.blocks(step):
        block = block + part
    block.label = "evolution"
    return block


def accumulated_state_check(
    state: StateVector, configset: ConfigurationSet, qoi: QoISpec | None = None
) -> dict[int, dict[int, float]]:
    """Per-lattice distribution of the data register, conditioned on the marker."""
    joint = marginal_array(state, ["M", "D"])
    out = {}
    for j in range(configset.size):
        row = joint[configset.code(j)]
        total = row.sum()
        if total <= 1e-15:
            raise ValueError(f"marker of lattice {j} has zero probability")
        row = row / total
        out[j] = {int(f): float(p) for f, p in enumerate(row) if p > 1e-14}
    return out


def point_mass(dist: dict[int, float], atol: float = 1e-10) -> int | None:
    """The value carrying all the mass, or None for a spread distribution."""
    for v, p in dist.items():
        if abs(p - 1.0) <= atol:
            return v
    return None


def mean_value(dist: dict[int, float]) -> float:
    return float(sum(v * p for v, p in dist.items()))


def depth_bound(qoi: QoISpec, n_data: int) -> int:
    """Layer budget for one adder: sources plus data width."""
    return len(qoi.region) * len(qoi.channels) + n_data

