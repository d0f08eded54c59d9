"""Superposed lattice configurations addressed through a marker register.

Collision and streaming are shared by every configuration and act on the
base register without touching the marker. Only initial occupancies and
boundary reflections differ between configurations; those are emitted as
marker-controlled ops, with common features grouped so that they need fewer
(or no) controls.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

from .lattice import (
    CollisionModel,
    LatticeSpec,
    QoISpec,
    boundary_pairs,
    build_collision,
    build_streaming,
    qubit_index,
)
from .simulator import (
    DEFAULT_MAX_QUBITS,
    CircuitBlock,
    CircuitOp,
    RegisterLayout,
    StateVector,
    apply_block,
    h,
    ry,
    swap,
    x,
)

ENCODINGS = ("compact", "onehot")
REGISTER_ORDER = ("B", "M", "D", "AM", "C", "E", "G")


@dataclass(frozen=True)
class ConfigurationSet:
    lattices: tuple[LatticeSpec, ...]
    encoding: str = "compact"

    def __post_init__(self):
        lattices = tuple(self.lattices)
        object.__setattr__(self, "lattices", lattices)
        if not lattices:
            raise ValueError("a configuration set needs at least one lattice")
        if self.encoding not in ENCODINGS:
            raise ValueError(f"unknown marker encoding {self.encoding!r}")
        ref = lattices[0]
        for k, lat in enumerate(lattices[1:], start=1):
            if not ref.same_discretization(lat):
                raise ValueError(f"lattice {k} does not share the discretization of lattice 0")

    @property
    def size(self) -> int:
        return len(self.lattices)

    @property
    def reference(self) -> LatticeSpec:
        return self.lattices[0]

    @property
    def marker_width(self) -> int:
        if self.encoding == "onehot":
            return self.size
        return math.ceil(math.log2(self.size)) if self.size > 1 else 0

    def code(self, j: int) -> int:
        """Marker register value assigned to lattice ``j``."""
        if not 0 <= j < self.size:
            raise IndexError(f"lattice {j} outside 0..{self.size - 1}")
        return 1 << j if self.encoding == "onehot" else j

    def decode(self, value: int) -> int | None:
        if self.encoding == "onehot":
            if value > 0 and value & (value - 1) == 0 and value.bit_length() <= self.size:
                return value.bit_length() - 1
            return None
        return value if value < self.size else None

    @property
    def has_unassigned_codes(self) -> bool:
        """True when some marker basis state with amplitude could be unassigned."""
        return self.encoding == "compact" and self.size != 1 << self.marker_width

    def with_encoding(self, encoding: str) -> "ConfigurationSet":
        return ConfigurationSet(self.lattices, encoding)


@dataclass(frozen=True)
class FeatureGroup:
    """Semantics elements shared by exactly ``members``, applied under ``reduced_controls``.

    Elements are ``("init", g, c)`` occupancies or ``("bc", g, c, partner)``
    reflection pairs.
    """

    feature: frozenset
    members: frozenset
    reduced_controls: tuple[tuple[int, int], ...]

    def ops(self, spec: LatticeSpec) -> list[CircuitOp]:
        out = []
        for el in sorted(self.feature):
            if el[0] == "init":
                out.append(x(qubit_index(spec, el[1], el[2]), self.reduced_controls))
            else:
                _, g, c, p = el
                out.append(
                    swap(qubit_index(spec, g, c), qubit_index(spec, g, p), self.reduced_controls)
                )
        return out


def build_layout(
    configset: ConfigurationSet,
    qoi: QoISpec,
    e: int,
    mapping_kind: str = "linear",
    max_qubits: int | None = DEFAULT_MAX_QUBITS,
) -> RegisterLayout:
    if e < 1:
        raise ValueError("estimation register needs e >= 1")
    n_acc = qoi.n_acc_qubits
    layout = RegisterLayout(
        [
            ("B", configset.reference.n_qubits),
            ("M", configset.marker_width),
            ("D", n_acc),
            ("AM", n_acc if mapping_kind == "linear" else 0),
            ("C", 1),
            ("E", e),
            ("G", 1),
        ]
    )
    if max_qubits is not None:
        layout.check_capacity(max_qubits)
    return layout


def base_layout(configset: ConfigurationSet) -> RegisterLayout:
    """Base and marker registers only: enough for parallel evolution."""
    return RegisterLayout([("B", configset.reference.n_qubits), ("M", configset.marker_width)])


def marker_qubits(configset: ConfigurationSet) -> tuple[int, ...]:
    start = configset.reference.n_qubits
    return tuple(range(start, start + configset.marker_width))


def marker_controls(configset: ConfigurationSet, j: int) -> tuple[tuple[int, int], ...]:
    mq = marker_qubits(configset)
    if configset.encoding == "onehot":
        configset.code(j)
        return ((mq[j], 1),)
    code = configset.code(j)
    return tuple((q, code >> b & 1) for b, q in enumerate(mq))


def build_marker_prep(configset: ConfigurationSet) -> CircuitBlock:
    mq = marker_qubits(configset)
    n = configset.size
    block = CircuitBlock([], "marker_prep")
    if configset.encoding == "onehot":
        # cascaded single-excitation preparation, amplitude 1/sqrt(n) on each e_j
        block.append(x(mq[0]))
        for k in range(n - 1):
            theta = 2 * math.acos(math.sqrt(1.0 / (n - k)))
            block.append(ry(mq[k + 1], theta, [(mq[k], 1)]))
            block.append(x(mq[k], [(mq[k + 1], 1)]))
        return block
    w = len(mq)
    if n == 1 << w:
        block.extend(h(q) for q in mq)
        return block
    # amplitude tree over codes 0..n-1, most significant bit first
    for b in range(w - 1, -1, -1):
        for prefix in range(1 << (w - 1 - b)):
            lo = prefix << (b + 1)
            total = max(0, min(n, lo + (1 << (b + 1))) - lo)
            if total == 0:
                continue
            zeros = max(0, min(n, lo + (1 << b)) - lo)
            theta = 2 * math.acos(math.sqrt(zeros / total))
            if abs(theta) < 1e-15:
                continue
            ctrls = [(mq[k], prefix >> (k - b - 1) & 1) for k in range(b + 1, w)]
            block.append(ry(mq[b], theta, ctrls))
    return block


def controlled_on_marker(block: CircuitBlock, lattice_index: int, configset: ConfigurationSet) -> CircuitBlock:
    out = block.controlled(marker_controls(configset, lattice_index))
    out.label = f"{block.label}@L{lattice_index}"
    return out


def lattice_elements(spec: LatticeSpec, kind: str) -> set[tuple]:
    if kind == "init":
        return {("init", g, c) for g, c in spec.initial_occupancy}
    if kind == "bc":
        out = set()
        for (g, c), p in spec.boundary_links:
            if c < p:
                out.add(("bc", g, c, p))
        return out
    raise ValueError(f"unknown feature kind {kind!r}")


def _subcube_partition(codes: set[int], width: int) -> list[tuple[frozenset, tuple[tuple[int, int], ...]]]:
    """Greedy split of marker codes into disjoint exact subcubes.

    Each part comes with the (bit, value) pattern shared by all of its codes.
    """
    remaining = set(codes)
    parts = []
    while remaining:
        found = None
        for d in range(width, -1, -1):
            for free in itertools.combinations(range(width), d):
                free_mask = sum(1 << b for b in free)
                for base in sorted(remaining):
                    if base & free_mask:
                        continue
                    cube = {base | sum(((s >> i) & 1) << b for i, b in enumerate(free)) for s in range(1 << d)}
                    if cube <= remaining:
                        fixed = tuple((b, base >> b & 1) for b in range(width) if b not in free)
                        found = (frozenset(cube), fixed)
                        break
                if found:
                    break
            if found:
                break
        parts.append(found)
        remaining -= found[0]
    return parts


def plan_shared_semantics(configset: ConfigurationSet, kind: str = "init") -> list[FeatureGroup]:
    """Group configuration-specific elements by the exact set of lattices sharing them."""
    by_members: dict[frozenset, set] = {}
    element_members: dict[tuple, set[int]] = {}
    for j, lat in enumerate(configset.lattices):
        for el in lattice_elements(lat, kind):
            element_members.setdefault(el, set()).add(j)
    for el, members in element_members.items():
        by_members.setdefault(frozenset(members), set()).add(el)

    everyone = frozenset(range(configset.size))
    # unassigned compact codes must keep the vacuum, so shared occupancies stay controlled
    uncontrolled_ok = kind == "bc" or not configset.has_unassigned_codes
    mq = marker_qubits(configset)
    groups = []
    for members, feature in sorted(by_members.items(), key=lambda kv: sorted(kv[0])):
        feature = frozenset(feature)
        if members == everyone and uncontrolled_ok:
            groups.append(FeatureGroup(feature, members, ()))
        elif configset.encoding == "onehot":
            for j in sorted(members):
                groups.append(FeatureGroup(feature, frozenset({j}), marker_controls(configset, j)))
        else:
            codes = {configset.code(j) for j in members}
            for cube, fixed in _subcube_partition(codes, configset.marker_width):
                ctrls = tuple((mq[b], v) for b, v in fixed)
                groups.append(FeatureGroup(feature, frozenset(cube), ctrls))
    return groups


def naive_controlled_count(configset: ConfigurationSet, kind: str) -> int:
    """Controlled gates of the plan that applies every lattice's semantics separately."""
    if configset.marker_width == 0:
        return 0
    return sum(len(lattice_elements(lat, kind)) for lat in configset.lattices)


def plan_controlled_count(groups: Sequence[FeatureGroup]) -> int:
    return sum(len(g.feature) for g in groups if g.reduced_controls)


def _semantics_block(configset: ConfigurationSet, kind: str, use_overlap: bool, label: str) -> CircuitBlock:
    spec = configset.reference
    block = CircuitBlock([], label)
    if use_overlap:
        for group in plan_shared_semantics(configset, kind):
            block.extend(group.ops(spec))
        return block
    for j, lat in enumerate(configset.lattices):
        ctrls = marker_controls(configset, j) if configset.marker_width else ()
        group = FeatureGroup(frozenset(lattice_elements(lat, kind)), frozenset({j}), ctrls)
        block.extend(group.ops(spec))
    return block


def build_parallel_initial(configset: ConfigurationSet, use_overlap: bool = True) -> CircuitBlock:
    return _semantics_block(configset, "init", use_overlap, "init")


def build_parallel_boundary(configset: ConfigurationSet, use_overlap: bool = True) -> CircuitBlock:
    for lat in configset.lattices:
        boundary_pairs(lat)  # rejects overlapping pairs
    return _semantics_block(configset, "bc", use_overlap, "boundary")


def build_parallel_step(
    configset: ConfigurationSet, collision_model: CollisionModel, use_overlap: bool = True
) -> CircuitBlock:
    spec = configset.reference
    block = (
        build_collision(spec, collision_model)
        + build_streaming(spec)
        + build_parallel_boundary(configset, use_overlap)
    )
    block.label = "parallel_step"
    return block


def run_parallel_evolution(
    configset: ConfigurationSet,
    collision_model: CollisionModel,
    n_steps: int,
    state: StateVector,
    use_overlap: bool = True,
) -> StateVector:
    if n_steps < 0:
        raise ValueError("number of time steps must be non-negative")
    step = build_parallel_step(configset, collision_model, use_overlap)
    for _ in range(n_steps):
        apply_block(state, step)
    return state


def prepare_configurations(
    configset: ConfigurationSet, state: StateVector, use_overlap: bool = True
) -> StateVector:
    """Marker superposition followed by marker-controlled initial occupancies."""
    apply_block(state, build_marker_prep(configset))
    apply_block(state, build_parallel_initial(configset, use_overlap))
    return state
