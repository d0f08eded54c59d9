"""Lattice specifications and the single-lattice QLGA circuit builders.

Linear encoding: one qubit per (gridpoint, channel) occupancy bit, with
gridpoints linearized row-major and the channel index varying fastest, so
the qubit of ``(g, c)`` is ``g * q + c``.

Within a gridpoint an occupancy bitstring is an integer whose bit ``c`` is
channel ``c``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .simulator import CircuitBlock, CircuitOp, swap, unitary, x


@dataclass(frozen=True)
class LatticeSpec:
    shape: tuple[int, ...]
    velocities: tuple[tuple[int, ...], ...]
    rest_weight: int = 2
    initial_occupancy: frozenset = frozenset()
    # ((gridpoint, channel), partner_channel) pairs; kept as a sorted tuple for hashing
    boundary_links: tuple = ()
    periodic: bool = True

    def __post_init__(self):
        shape = tuple(int(s) for s in np.atleast_1d(self.shape))
        vel = tuple(tuple(int(c) for c in np.atleast_1d(v)) for v in self.velocities)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "velocities", vel)
        if len(shape) not in (1, 2):
            raise ValueError(f"only 1D and 2D lattices are supported, got shape {shape}")
        if any(s < 1 for s in shape):
            raise ValueError(f"shape entries must be positive, got {shape}")
        for c, v in enumerate(vel):
            if len(v) != len(shape):
                raise ValueError(f"channel {c} velocity {v} does not match {len(shape)} dims")
            if any(abs(comp) > 1 for comp in v):
                raise ValueError(f"channel {c} velocity {v} moves more than one gridpoint")
        if self.rest_weight < 1:
            raise ValueError("rest_weight must be a positive integer")
        occ = frozenset((int(g), int(c)) for g, c in self.initial_occupancy)
        for g, c in occ:
            self._check(g, c)
        object.__setattr__(self, "initial_occupancy", occ)
        links = self.boundary_links
        if isinstance(links, Mapping):
            links = links.items()
        links = tuple(sorted(((int(g), int(c)), int(p)) for (g, c), p in links))
        object.__setattr__(self, "boundary_links", links)
        table = dict(links)
        if len(table) != len(links):
            raise ValueError("a (gridpoint, channel) has more than one reflection partner")
        for (g, c), p in links:
            self._check(g, c)
            self._check(g, p)
            if p == c:
                raise ValueError(f"boundary link at gridpoint {g} pairs channel {c} with itself")
            if table.get((g, p)) != c:
                raise ValueError(
                    f"boundary link ({g}, {c}) -> {p} is not mutual; "
                    f"expected ({g}, {p}) -> {c}"
                )
            if self.is_rest(c) or self.is_rest(p):
                raise ValueError(f"rest channel cannot reflect (gridpoint {g})")

    @property
    def dims(self) -> int:
        return len(self.shape)

    @property
    def q(self) -> int:
        return len(self.velocities)

    @property
    def n_gridpoints(self) -> int:
        return int(np.prod(self.shape))

    @property
    def n_qubits(self) -> int:
        return self.q * self.n_gridpoints

    @property
    def links(self) -> dict[tuple[int, int], int]:
        return dict(self.boundary_links)

    @property
    def n_boundary_gridpoints(self) -> int:
        return len({g for (g, _), _ in self.boundary_links})

    def is_rest(self, channel: int) -> bool:
        return not any(self.velocities[channel])

    def channel_mass(self, channel: int) -> int:
        return self.rest_weight if self.is_rest(channel) else 1

    def opposite(self, channel: int) -> int | None:
        target = tuple(-c for c in self.velocities[channel])
        for k, v in enumerate(self.velocities):
            if v == target and k != channel:
                return k
        return None

    def gridpoint_index(self, gridpoint) -> int:
        if isinstance(gridpoint, (int, np.integer)):
            g = int(gridpoint)
            if not 0 <= g < self.n_gridpoints:
                raise IndexError(f"gridpoint {g} outside lattice of {self.n_gridpoints} points")
            return g
        coords = tuple(int(c) for c in gridpoint)
        if len(coords) != self.dims or any(not 0 <= c < s for c, s in zip(coords, self.shape)):
            raise IndexError(f"gridpoint {coords} outside shape {self.shape}")
        return int(np.ravel_multi_index(coords, self.shape))

    def coords(self, g: int) -> tuple[int, ...]:
        return tuple(int(c) for c in np.unravel_index(g, self.shape))

    def _check(self, g: int, c: int) -> None:
        if not 0 <= g < self.n_gridpoints:
            raise IndexError(f"gridpoint {g} outside lattice of {self.n_gridpoints} points")
        if not 0 <= c < self.q:
            raise IndexError(f"channel {c} outside 0..{self.q - 1}")

    def with_conditions(self, initial_occupancy=None, boundary_links=None) -> "LatticeSpec":
        return LatticeSpec(
            self.shape,
            self.velocities,
            self.rest_weight,
            self.initial_occupancy if initial_occupancy is None else frozenset(initial_occupancy),
            self.boundary_links if boundary_links is None else boundary_links,
            self.periodic,
        )

    def same_discretization(self, other: "LatticeSpec") -> bool:
        return (
            self.shape == other.shape
            and self.velocities == other.velocities
            and self.rest_weight == other.rest_weight
            and self.periodic == other.periodic
        )


def d1q2(n: int, **kw) -> LatticeSpec:
    """1D lattice with a right-moving (channel 0) and left-moving (channel 1) channel."""
    return LatticeSpec((n,), ((1,), (-1,)), **kw)


def d2q4(nx: int, ny: int, **kw) -> LatticeSpec:
    """2D HPP lattice; channels E, N, W, S."""
    return LatticeSpec((nx, ny), ((1, 0), (0, 1), (-1, 0), (0, -1)), **kw)


def occupancy_from_string(bits: str) -> int:
    """``"1010"`` (channel 0 written first) -> integer occupancy with bit c = channel c."""
    return sum(1 << c for c, b in enumerate(bits) if b == "1")


def occupancy_to_string(value: int, q: int) -> str:
    return "".join("1" if value >> c & 1 else "0" for c in range(q))


@dataclass(frozen=True, eq=False)
class CollisionModel:
    """Per-gridpoint collision acting on the q channel qubits of one gridpoint.

    ``kind`` is one of ``identity``, ``hpp``, ``rotation`` (angle ``theta``) or
    ``custom`` (a 2^q x 2^q ``matrix``).
    """

    kind: str = "identity"
    theta: float = 0.0
    matrix: np.ndarray | None = None

    def __post_init__(self):
        kind = self.kind.lower()
        if kind not in ("identity", "hpp", "rotation", "custom"):
            raise ValueError(f"unknown collision kind {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if kind == "custom":
            if self.matrix is None:
                raise ValueError("custom collision needs a matrix")
            object.__setattr__(self, "matrix", np.asarray(self.matrix, dtype=complex))

    @classmethod
    def identity(cls):
        return cls("identity")

    @classmethod
    def hpp(cls):
        return cls("hpp")

    @classmethod
    def rotation(cls, theta: float):
        return cls("rotation", theta=float(theta))

    @classmethod
    def custom(cls, matrix):
        return cls("custom", matrix=matrix)

    def unitary(self, spec: LatticeSpec) -> np.ndarray:
        dim = 1 << spec.q
        if self.kind == "identity":
            return np.eye(dim, dtype=complex)
        if self.kind == "custom":
            if self.matrix.shape != (dim, dim):
                raise ValueError(
                    f"custom collision matrix {self.matrix.shape} does not match q={spec.q}"
                )
            return self.matrix
        a, b = head_on_states(spec)
        u = np.eye(dim, dtype=complex)
        if self.kind == "hpp":
            u[a, a] = u[b, b] = 0.0
            u[a, b] = u[b, a] = 1.0
        else:
            c, s = math.cos(self.theta), math.sin(self.theta)
            u[a, a], u[b, a] = c, s
            u[a, b], u[b, b] = -s, c
        return u

    def is_identity(self) -> bool:
        return self.kind == "identity"


def head_on_states(spec: LatticeSpec) -> tuple[int, int]:
    """The two 2-particle zero-momentum occupancies built from opposite moving pairs."""
    states = []
    for c in range(spec.q):
        o = spec.opposite(c)
        if o is not None and c < o and not spec.is_rest(c):
            states.append((1 << c) | (1 << o))
    if len(states) != 2:
        raise ValueError(
            f"head-on collision needs exactly two opposite channel pairs, found {len(states)}"
        )
    return states[0], states[1]


def mass_momentum(spec: LatticeSpec, occupancy: int) -> tuple[int, tuple[int, ...]]:
    mass = 0
    mom = [0] * spec.dims
    for c in range(spec.q):
        if occupancy >> c & 1:
            m = spec.channel_mass(c)
            mass += m
            for d, v in enumerate(spec.velocities[c]):
                mom[d] += m * v
    return mass, tuple(mom)


@dataclass
class ConservationReport:
    passed: bool
    violations: list[tuple[int, int, complex]] = field(default_factory=list)


def verify_conservation(model: CollisionModel, spec: LatticeSpec, atol: float = 1e-10) -> ConservationReport:
    u = model.unitary(spec)
    dim = 1 << spec.q
    invariants = [mass_momentum(spec, s) for s in range(dim)]
    bad = []
    for xs in range(dim):
        for ys in range(dim):
            if invariants[xs] != invariants[ys] and abs(u[ys, xs]) > atol:
                bad.append((xs, ys, complex(u[ys, xs])))
    return ConservationReport(not bad, bad)


@dataclass(frozen=True)
class QoISpec:
    """Weighted occupancy sum over a region, cumulated over selected time steps."""

    region: tuple[int, ...]
    channels: tuple[int, ...]
    weights: tuple[int, ...]
    acc_steps: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "region", tuple(sorted(set(int(g) for g in self.region))))
        object.__setattr__(self, "channels", tuple(int(c) for c in self.channels))
        object.__setattr__(self, "weights", tuple(int(w) for w in self.weights))
        object.__setattr__(self, "acc_steps", tuple(sorted(set(int(t) for t in self.acc_steps))))
        if len(set(self.channels)) != len(self.channels):
            raise ValueError("repeated QoI channel")
        if len(self.weights) != len(self.channels):
            raise ValueError("one weight per QoI channel is required")
        if any(w < 1 for w in self.weights):
            raise ValueError("QoI weights must be positive integers")
        if any(t < 1 for t in self.acc_steps):
            raise ValueError("accumulation steps are 1-based")

    @classmethod
    def for_lattice(cls, spec: LatticeSpec, region, channels=None, acc_steps=(1,), weights=None):
        """QoI whose weights default to the channel masses of ``spec``."""
        channels = tuple(range(spec.q)) if channels is None else tuple(channels)
        if weights is None:
            weights = tuple(spec.channel_mass(c) for c in channels)
        region = tuple(spec.gridpoint_index(g) for g in region)
        return cls(region, channels, tuple(weights), tuple(acc_steps))

    @property
    def channel_bound(self) -> int:
        return sum(self.weights)

    @property
    def f_max(self) -> int:
        return len(self.acc_steps) * len(self.region) * self.channel_bound

    @property
    def n_acc_qubits(self) -> int:
        # one extra qubit at exact powers of two keeps F_max itself representable
        return max(1, self.f_max.bit_length())

    def validate(self, spec: LatticeSpec, n_steps: int | None = None) -> None:
        for g in self.region:
            if not 0 <= g < spec.n_gridpoints:
                raise IndexError(f"region gridpoint {g} outside lattice")
        for c in self.channels:
            if not 0 <= c < spec.q:
                raise IndexError(f"QoI channel {c} outside 0..{spec.q - 1}")
        if n_steps is not None:
            for t in self.acc_steps:
                if t > n_steps:
                    raise ValueError(f"accumulation step {t} exceeds N_t={n_steps}")

    def sources(self, spec: LatticeSpec) -> list[tuple[int, int]]:
        """(qubit, weight) of every source bit feeding the adder."""
        return [
            (qubit_index(spec, g, c), w)
            for g in self.region
            for c, w in zip(self.channels, self.weights)
        ]

    def step_value(self, spec: LatticeSpec, occupied: Iterable[int]) -> int:
        """QoI contribution of one lattice state, given its occupied qubits."""
        occ = set(occupied)
        return sum(w for qb, w in self.sources(spec) if qb in occ)


def qubit_index(spec: LatticeSpec, gridpoint, channel: int) -> int:
    g = spec.gridpoint_index(gridpoint)
    if not 0 <= channel < spec.q:
        raise IndexError(f"channel {channel} outside 0..{spec.q - 1}")
    return g * spec.q + int(channel)


def build_initial_conditions(spec: LatticeSpec) -> CircuitBlock:
    qubits = sorted(qubit_index(spec, g, c) for g, c in spec.initial_occupancy)
    return CircuitBlock([x(qb) for qb in qubits], "init")


def streaming_permutation(spec: LatticeSpec) -> dict[int, int]:
    """Qubit map source -> destination of one streaming step."""
    perm = {}
    for g in range(spec.n_gridpoints):
        coords = spec.coords(g)
        for c, v in enumerate(spec.velocities):
            src = g * spec.q + c
            new = [a + b for a, b in zip(coords, v)]
            if spec.periodic:
                new = [a % s for a, s in zip(new, spec.shape)]
                perm[src] = spec.gridpoint_index(new) * spec.q + c
            elif all(0 <= a < s for a, s in zip(new, spec.shape)):
                perm[src] = spec.gridpoint_index(new) * spec.q + c
            else:
                # closed edge: the particle reverses in place
                o = spec.opposite(c)
                if o is None:
                    raise ValueError(f"non-periodic lattice needs an opposite of channel {c}")
                perm[src] = g * spec.q + o
    return perm


def _cycles(perm: Mapping[int, int]) -> list[list[int]]:
    seen = set()
    out = []
    for start in sorted(perm):
        if start in seen:
            continue
        cyc = [start]
        seen.add(start)
        nxt = perm[start]
        while nxt != start:
            cyc.append(nxt)
            seen.add(nxt)
            nxt = perm[nxt]
        if len(cyc) > 1:
            out.append(cyc)
    return out


def cycle_swaps(cycle: Sequence[int]) -> tuple[list[tuple[int, int]], list[tuple[int, int]]]:
    """Two layers of disjoint swaps moving the content of cycle[i] to cycle[i+1].

    A rotation by one is the reversal of the whole cycle followed by the
    reversal of positions 1..n-1; each reversal is a single swap layer, and
    together they use n - 1 swaps.
    """
    n = len(cycle)
    first = [(cycle[i], cycle[n - 1 - i]) for i in range(n // 2)]
    second = [(cycle[1 + i], cycle[n - 1 - i]) for i in range((n - 1) // 2)]
    return first, second


def build_streaming(spec: LatticeSpec) -> CircuitBlock:
    layer1: list[CircuitOp] = []
    layer2: list[CircuitOp] = []
    for cyc in _cycles(streaming_permutation(spec)):
        a, b = cycle_swaps(cyc)
        layer1.extend(swap(i, j) for i, j in a)
        layer2.extend(swap(i, j) for i, j in b)
    return CircuitBlock(layer1 + layer2, "stream")


def build_collision(spec: LatticeSpec, model: CollisionModel) -> CircuitBlock:
    if model.is_identity():
        return CircuitBlock([], "collide")
    u = model.unitary(spec)
    ops = [
        unitary(u, [g * spec.q + c for c in range(spec.q)])
        for g in range(spec.n_gridpoints)
    ]
    return CircuitBlock(ops, "collide")


def boundary_pairs(spec: LatticeSpec) -> list[tuple[int, int]]:
    """Disjoint qubit pairs exchanged by the reflection boundary."""
    pairs = []
    used: set[int] = set()
    for (g, c), p in spec.boundary_links:
        if c > p:
            continue
        a, b = g * spec.q + c, g * spec.q + p
        if a in used or b in used:
            raise ValueError(f"boundary pairs overlap at gridpoint {g}")
        used.update((a, b))
        pairs.append((a, b))
    return pairs


def build_boundary(spec: LatticeSpec) -> CircuitBlock:
    return CircuitBlock([swap(a, b) for a, b in boundary_pairs(spec)], "boundary")


def build_time_step(spec: LatticeSpec, model: CollisionModel) -> CircuitBlock:
    """Collision, streaming, boundary: one single-lattice QLGA step."""
    block = build_collision(spec, model) + build_streaming(spec) + build_boundary(spec)
    block.label = "step"
    return block

