"""Structural qubit and gate counts, plus the asymptotic cost terms.

Everything here is counted from the circuits the builders actually emit (or
from layout widths), so it works far above the simulation cap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .accumulate import build_mhwa
from .lattice import build_collision, build_streaming
from .mapping import build_amplitude_mapping, build_comparator_less_than
from .parallel import (
    ConfigurationSet,
    build_layout,
    build_marker_prep,
    build_parallel_boundary,
    build_parallel_initial,
    naive_controlled_count,
)
from .search import PipelineSpec, build_threshold_oracle
from .simulator import CircuitBlock, qft_gate_count


def toffoli_estimate(block: CircuitBlock) -> int:
    """Toffoli-equivalents after decomposing multi-controlled ops.

    An op with k >= 3 controls costs 4(k - 2) Toffolis using k - 2 borrowed
    ancillas, a doubly controlled op costs one, and ops with at most one
    control are already elementary.
    """
    total = 0
    for op in block:
        k = len(op.controls)
        if k == 2:
            total += 1
        elif k >= 3:
            total += 4 * (k - 2)
    return total


@dataclass
class ResourceReport:
    qubits: dict[str, int]
    total_qubits: int
    gates: dict[str, int]
    terms: dict[str, float]
    notes: list[str] = field(default_factory=list)

    def rows(self) -> list[tuple[str, str, float]]:
        out = [("qubits", k, v) for k, v in self.qubits.items()]
        out.append(("qubits", "total", self.total_qubits))
        out += [("gates", k, v) for k, v in self.gates.items()]
        out += [("terms", k, v) for k, v in self.terms.items()]
        return out

    def summary(self) -> str:
        lines = ["qubits:"]
        lines += [f"  {k:<40}{v}" for k, v in self.qubits.items()]
        lines.append(f"  {'total':<40}{self.total_qubits}")
        lines.append("gates:")
        lines += [f"  {k:<40}{v}" for k, v in self.gates.items()]
        lines.append("cost terms:")
        lines += [f"  {k:<40}{v:.6g}" for k, v in self.terms.items()]
        lines += self.notes
        return "\n".join(lines)


def resource_report(pipeline: PipelineSpec) -> ResourceReport:
    cs: ConfigurationSet = pipeline.configset
    spec = cs.reference
    qoi = pipeline.qoi
    layout = build_layout(cs, qoi, pipeline.e, pipeline.mapping.kind, max_qubits=None)
    n_acc = layout.width("D")

    qubits = {
        "base": layout.width("B"),
        "marker": layout.width("M"),
        "accumulation": layout.width("D"),
        "mapping_ancilla": layout.width("AM"),
        "qae": layout.width("E"),
        "coin_and_flag": layout.width("C") + layout.width("G"),
    }

    stream = build_streaming(spec)
    collide = build_collision(spec, pipeline.collision)
    boundary = build_parallel_boundary(cs, pipeline.use_overlap)
    init = build_parallel_initial(cs, pipeline.use_overlap)
    mhwa = build_mhwa(layout, qoi, spec)
    mapping = build_amplitude_mapping(layout, pipeline.mapping)
    oracle = build_threshold_oracle(layout, 1 << (pipeline.e - 2) if pipeline.e >= 2 else 1, fold=True)
    moving = sum(1 for c in range(spec.q) if not spec.is_rest(c))
    n_g = spec.n_gridpoints
    qft = qft_gate_count(n_acc)

    gates = {
        "marker_prep": len(build_marker_prep(cs)),
        "initial_conditions": len(init),
        "initial_conditions_controlled": init.count(controlled=True),
        "initial_conditions_naive_controlled": naive_controlled_count(cs, "init"),
        "collision_blocks_per_step": len(collide),
        "streaming_swaps_per_step": len(stream),
        "streaming_swaps_formula": moving * (n_g - 1),
        "streaming_layers": stream.layers(),
        "boundary_swaps_per_step": len(boundary),
        "boundary_swaps_controlled": boundary.count(controlled=True),
        "boundary_naive_controlled": naive_controlled_count(cs, "bc"),
        "mhwa_phases_per_step": len(mhwa),
        "mhwa_phases_total": len(mhwa) * len(qoi.acc_steps),
        "mhwa_layers": mhwa.layers(),
        "qft_gates_data": 2 * qft,
        "mapping_gates": len(mapping),
        "comparator_gates": len(build_comparator_less_than(range(n_acc), range(n_acc, 2 * n_acc), 2 * n_acc))
        if pipeline.mapping.kind == "linear"
        else 0,
        "oracle_gates": len(oracle),
        "qft_gates_estimation": qft_gate_count(pipeline.e),
        "grover_iterator_calls_qae": (1 << pipeline.e) - 1,
    }
    step_ops = len(collide) + len(stream) + len(boundary)
    a_ops = (
        len(init) + 2 + pipeline.n_steps * step_ops + len(mhwa) * len(qoi.acc_steps) + len(mapping)
    )
    gates["state_prep_ops"] = a_ops
    gates["toffoli_estimate_step"] = toffoli_estimate(collide + stream + boundary)
    gates["toffoli_estimate_semantics"] = toffoli_estimate(init + boundary)
    gates["toffoli_estimate_mapping"] = toffoli_estimate(mapping)

    n_l = cs.size
    n_bc_max = max(lat.n_boundary_gridpoints for lat in cs.lattices)
    log_l = math.log2(n_l) if n_l > 1 else 0.0
    terms = {
        "qlga": 2 ** spec.q + math.log2(n_g) if n_g > 1 else float(2 ** spec.q),
        "accumulation": math.log2(max(1, len(qoi.acc_steps) * len(qoi.region) * (spec.q + 1))) ** 2,
        "parallel_semantics": n_bc_max * n_l * log_l**2,
        "sqrt_configurations": math.sqrt(n_l),
        "inverse_epsilon": float(1 << pipeline.e),
        "n_steps": float(pipeline.n_steps),
    }
    terms["per_query"] = (
        pipeline.n_steps * terms["qlga"]
        + len(qoi.acc_steps) * terms["accumulation"]
        + pipeline.n_steps * terms["parallel_semantics"]
    )
    terms["total_estimate"] = terms["per_query"] * terms["sqrt_configurations"] * terms["inverse_epsilon"]

    notes = []
    if gates["streaming_swaps_per_step"] != gates["streaming_swaps_formula"]:
        notes.append(
            "note: streaming swaps differ from moving_channels*(N_g-1) because the shift "
            "cycles of this lattice are shorter than N_g"
        )
    return ResourceReport(qubits, layout.total_qubits, gates, terms, notes)

