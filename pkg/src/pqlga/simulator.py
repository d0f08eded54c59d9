"""Dense statevector engine.

Qubit 0 is the least significant bit of the flat amplitude index, and
registers are concatenated in layout order, so a register occupying qubits
``start .. start + width - 1`` holds the value ``(index >> start) & mask``.

Every gate is applied semantically: controls are predicates on basis-state
bits, not decompositions into one- and two-qubit gates. Amplitude arrays may
carry trailing batch axes (shape ``(2**n, ...)``) so a block can be pushed
through many states, or through an identity matrix, in one pass.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

DEFAULT_MAX_QUBITS = 26
UNITARY_ATOL = 1e-10


class CapacityError(ValueError):
    """Raised when a layout needs more qubits than the configured cap."""


class Gate(str, enum.Enum):
    X = "X"
    Z = "Z"
    H = "H"
    RY = "RY"
    P = "P"
    SWAP = "SWAP"
    U = "U"


_SELF_INVERSE = {Gate.X, Gate.Z, Gate.H, Gate.SWAP}
_INV_SQRT2 = 1.0 / math.sqrt(2.0)


@dataclass(frozen=True)
class Register:
    name: str
    start: int
    width: int

    @property
    def qubits(self) -> tuple[int, ...]:
        return tuple(range(self.start, self.start + self.width))

    @property
    def mask(self) -> int:
        return (1 << self.width) - 1


class RegisterLayout:
    """Ordered, contiguous named registers.

    Zero-width registers are allowed (an absent mapping ancilla, or the marker
    of a single-lattice run) so every layout can be queried uniformly.
    """

    def __init__(self, widths: Iterable[tuple[str, int]]):
        regs = []
        start = 0
        for name, width in widths:
            if width < 0:
                raise ValueError(f"register {name!r} has negative width {width}")
            if any(r.name == name for r in regs):
                raise ValueError(f"duplicate register name {name!r}")
            regs.append(Register(name, start, int(width)))
            start += int(width)
        self._regs = tuple(regs)
        self._by_name = {r.name: r for r in regs}
        self.total_qubits = start

    def __getitem__(self, name: str) -> Register:
        try:
            return self._by_name[name]
        except KeyError:
            raise KeyError(f"layout has no register {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    def __iter__(self):
        return iter(self._regs)

    def __repr__(self) -> str:
        body = ", ".join(f"{r.name}={r.width}" for r in self._regs)
        return f"RegisterLayout({body})"

    def __eq__(self, other) -> bool:
        return isinstance(other, RegisterLayout) and self.widths() == other.widths()

    def width(self, name: str) -> int:
        reg = self._by_name.get(name)
        return 0 if reg is None else reg.width

    def qubits(self, name: str) -> tuple[int, ...]:
        return self[name].qubits

    def widths(self) -> list[tuple[str, int]]:
        return [(r.name, r.width) for r in self._regs]

    def prefix(self, last: str) -> "RegisterLayout":
        """Layout made of the registers up to and including ``last``.

        Qubit indices are unchanged, so blocks built against the full layout
        apply to states over the prefix as long as they only touch it.
        """
        out = []
        for r in self._regs:
            out.append((r.name, r.width))
            if r.name == last:
                return RegisterLayout(out)
        raise KeyError(f"layout has no register {last!r}")

    def check_capacity(self, max_qubits: int = DEFAULT_MAX_QUBITS) -> None:
        if self.total_qubits > max_qubits:
            raise CapacityError(
                f"layout needs {self.total_qubits} qubits, cap is {max_qubits}"
            )


@dataclass(frozen=True, eq=False)
class CircuitOp:
    kind: Gate
    targets: tuple[int, ...]
    controls: tuple[tuple[int, int], ...] = ()
    angle: float | None = None
    matrix: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", Gate(self.kind))
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        object.__setattr__(
            self, "controls", tuple((int(q), int(p)) for q, p in self.controls)
        )
        expected = 2 if self.kind == Gate.SWAP else None
        if self.kind == Gate.U:
            if self.matrix is None:
                raise ValueError("UnitaryBlock needs a matrix")
            m = np.asarray(self.matrix, dtype=complex)
            dim = 1 << len(self.targets)
            if m.shape != (dim, dim):
                raise ValueError(
                    f"matrix shape {m.shape} does not match {len(self.targets)} targets"
                )
            if not np.allclose(m.conj().T @ m, np.eye(dim), atol=UNITARY_ATOL, rtol=0):
                raise ValueError("UnitaryBlock matrix is not unitary")
            object.__setattr__(self, "matrix", m)
        elif expected is None and len(self.targets) != 1:
            raise ValueError(f"{self.kind.value} acts on exactly one target")
        elif expected is not None and len(self.targets) != expected:
            raise ValueError("SWAP acts on exactly two targets")
        if self.kind in (Gate.RY, Gate.P) and self.angle is None:
            raise ValueError(f"{self.kind.value} needs an angle")
        if len(set(self.targets)) != len(self.targets):
            raise ValueError("repeated target qubit")
        ctrl = [q for q, _ in self.controls]
        if len(set(ctrl)) != len(ctrl):
            raise ValueError("repeated control qubit")
        if set(ctrl) & set(self.targets):
            raise ValueError("targets and controls overlap")
        for _, pol in self.controls:
            if pol not in (0, 1):
                raise ValueError(f"control polarity must be 0 or 1, got {pol}")

    @property
    def qubits(self) -> tuple[int, ...]:
        return self.targets + tuple(q for q, _ in self.controls)

    def adjoint(self) -> "CircuitOp":
        if self.kind in _SELF_INVERSE:
            return self
        if self.kind == Gate.U:
            return CircuitOp(Gate.U, self.targets, self.controls, matrix=self.matrix.conj().T)
        return CircuitOp(self.kind, self.targets, self.controls, angle=-self.angle)

    def with_controls(self, extra: Sequence[tuple[int, int]]) -> "CircuitOp":
        if not extra:
            return self
        return CircuitOp(
            self.kind, self.targets, self.controls + tuple(extra), self.angle, self.matrix
        )

    def __repr__(self) -> str:
        s = f"{self.kind.value}{list(self.targets)}"
        if self.angle is not None:
            s += f"({self.angle:.6g})"
        if self.controls:
            s += f" ctrl={list(self.controls)}"
        return s


# convenience constructors
def x(t, controls=()):
    return CircuitOp(Gate.X, (t,), tuple(controls))


def z(t, controls=()):
    return CircuitOp(Gate.Z, (t,), tuple(controls))


def h(t, controls=()):
    return CircuitOp(Gate.H, (t,), tuple(controls))


def ry(t, angle, controls=()):
    return CircuitOp(Gate.RY, (t,), tuple(controls), angle=float(angle))


def phase(t, angle, controls=()):
    return CircuitOp(Gate.P, (t,), tuple(controls), angle=float(angle))


def swap(a, b, controls=()):
    return CircuitOp(Gate.SWAP, (a, b), tuple(controls))


def unitary(matrix, targets, controls=()):
    return CircuitOp(Gate.U, tuple(targets), tuple(controls), matrix=matrix)


@dataclass
class CircuitBlock:
    ops: list[CircuitOp] = field(default_factory=list)
    label: str = ""

    def __len__(self) -> int:
        return len(self.ops)

    def __iter__(self):
        return iter(self.ops)

    def __add__(self, other: "CircuitBlock") -> "CircuitBlock":
        label = "+".join(l for l in (self.label, other.label) if l)
        return CircuitBlock(self.ops + other.ops, label)

    def append(self, op: CircuitOp) -> None:
        self.ops.append(op)

    def extend(self, ops: Iterable[CircuitOp]) -> None:
        self.ops.extend(ops)

    def adjoint(self) -> "CircuitBlock":
        return CircuitBlock([op.adjoint() for op in reversed(self.ops)], f"{self.label}^dag")

    def controlled(self, controls: Sequence[tuple[int, int]]) -> "CircuitBlock":
        return CircuitBlock([op.with_controls(controls) for op in self.ops], self.label)

    def qubits(self) -> set[int]:
        out: set[int] = set()
        for op in self.ops:
            out.update(op.qubits)
        return out

    def count(self, kind: Gate | None = None, *, controlled: bool | None = None) -> int:
        n = 0
        for op in self.ops:
            if kind is not None and op.kind != kind:
                continue
            if controlled is not None and bool(op.controls) != controlled:
                continue
            n += 1
        return n

    def layers(self) -> int:
        """ASAP layer count: ops on disjoint qubits share a layer."""
        depth: dict[int, int] = {}
        total = 0
        for op in self.ops:
            layer = 1 + max((depth.get(q, 0) for q in op.qubits), default=0)
            for q in op.qubits:
                depth[q] = layer
            total = max(total, layer)
        return total


class StateVector:
    """Amplitudes over a named register layout."""

    def __init__(self, amplitudes: np.ndarray, layout: RegisterLayout):
        amplitudes = np.asarray(amplitudes, dtype=complex)
        if amplitudes.shape[0] != 1 << layout.total_qubits:
            raise ValueError(
                f"{amplitudes.shape[0]} amplitudes for {layout.total_qubits} qubits"
            )
        self.amplitudes = amplitudes
        self.layout = layout

    @property
    def num_qubits(self) -> int:
        return self.layout.total_qubits

    def norm_sq(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def copy(self) -> "StateVector":
        return StateVector(self.amplitudes.copy(), self.layout)

    def register_values(self, name: str) -> np.ndarray:
        reg = self.layout[name]
        idx = np.arange(self.amplitudes.shape[0])
        return (idx >> reg.start) & reg.mask

    def __repr__(self) -> str:
        return f"StateVector({self.layout!r})"


def new_state(layout: RegisterLayout, max_qubits: int = DEFAULT_MAX_QUBITS) -> StateVector:
    layout.check_capacity(max_qubits)
    amps = np.zeros(1 << layout.total_qubits, dtype=complex)
    amps[0] = 1.0
    return StateVector(amps, layout)


def basis_state(layout: RegisterLayout, values: dict[str, int] | int = 0) -> StateVector:
    """Computational basis state with the given register values."""
    if isinstance(values, dict):
        index = 0
        for name, v in values.items():
            reg = layout[name]
            if not 0 <= v <= reg.mask:
                raise ValueError(f"value {v} does not fit register {name!r}")
            index |= v << reg.start
    else:
        index = int(values)
    amps = np.zeros(1 << layout.total_qubits, dtype=complex)
    amps[index] = 1.0
    return StateVector(amps, layout)


# -- gate kernels ---------------------------------------------------------


def _check_indices(op: CircuitOp, n: int) -> None:
    for q in op.qubits:
        if not 0 <= q < n:
            raise IndexError(f"qubit {q} out of range for {n}-qubit state")


def _apply_op_array(amps: np.ndarray, n: int, op: CircuitOp) -> None:
    """Apply ``op`` in place to an amplitude array of shape ``(2**n, ...)``."""
    batch = amps.shape[1:]
    psi = amps.reshape((2,) * n + batch)
    idx: list = [slice(None)] * n
    for q, pol in op.controls:
        idx[n - 1 - q] = pol
    sub = psi[tuple(idx)]
    controlled = {q for q, _ in op.controls}
    remaining = [q for q in range(n - 1, -1, -1) if q not in controlled]
    axis = {q: i for i, q in enumerate(remaining)}

    def at(assign: dict[int, int]):
        sl: list = [slice(None)] * sub.ndim
        for q, v in assign.items():
            sl[axis[q]] = v
        return tuple(sl)

    kind = op.kind
    if kind == Gate.X:
        t = op.targets[0]
        i0, i1 = at({t: 0}), at({t: 1})
        tmp = sub[i0].copy()
        sub[i0] = sub[i1]
        sub[i1] = tmp
    elif kind == Gate.Z:
        sub[at({op.targets[0]: 1})] *= -1
    elif kind == Gate.P:
        sub[at({op.targets[0]: 1})] *= np.exp(1j * op.angle)
    elif kind == Gate.SWAP:
        a, b = op.targets
        i01, i10 = at({a: 1, b: 0}), at({a: 0, b: 1})
        tmp = sub[i01].copy()
        sub[i01] = sub[i10]
        sub[i10] = tmp
    elif kind in (Gate.H, Gate.RY):
        if kind == Gate.H:
            m00 = m01 = m10 = _INV_SQRT2
            m11 = -_INV_SQRT2
        else:
            c, s = math.cos(op.angle / 2), math.sin(op.angle / 2)
            m00, m01, m10, m11 = c, -s, s, c
        t = op.targets[0]
        i0, i1 = at({t: 0}), at({t: 1})
        a0 = sub[i0].copy()
        a1 = sub[i1].copy()
        sub[i0] = m00 * a0 + m01 * a1
        sub[i1] = m10 * a0 + m11 * a1
    elif kind == Gate.U:
        k = len(op.targets)
        # matrix row/column bit j belongs to targets[j]; moved axis 0 is the MSB
        src = [axis[t] for t in reversed(op.targets)]
        moved = np.moveaxis(sub, src, list(range(k)))
        shape = moved.shape
        res = op.matrix @ moved.reshape(1 << k, -1)
        moved[...] = res.reshape(shape)
    else:  # pragma: no cover
        raise ValueError(f"unknown gate {kind}")


def apply(state: StateVector, op: CircuitOp) -> StateVector:
    _check_indices(op, state.num_qubits)
    _apply_op_array(state.amplitudes, state.num_qubits, op)
    return state


def apply_block(state: StateVector, block: CircuitBlock | Iterable[CircuitOp]) -> StateVector:
    n = state.num_qubits
    for op in block:
        _check_indices(op, n)
        _apply_op_array(state.amplitudes, n, op)
    return state


def apply_ops_array(amps: np.ndarray, n: int, block: Iterable[CircuitOp]) -> np.ndarray:
    """Apply ops to a raw ``(2**n, ...)`` array in place (batched columns allowed)."""
    for op in block:
        _check_indices(op, n)
        _apply_op_array(amps, n, op)
    return amps


def block_matrix(block: CircuitBlock, n: int) -> np.ndarray:
    """Full ``2**n x 2**n`` unitary of a block, extracted column by column."""
    mat = np.eye(1 << n, dtype=complex)
    return apply_ops_array(mat, n, block)


# -- Fourier transforms ----------------------------------------------------


def dft_matrix(width: int, inverse: bool = False) -> np.ndarray:
    """QFT|x> = 2^{-w/2} sum_y exp(2 pi i x y / 2^w) |y>; inverse conjugates."""
    dim = 1 << width
    k = np.arange(dim)
    sign = -1.0 if inverse else 1.0
    return np.exp(sign * 2j * np.pi * np.outer(k, k) / dim) / math.sqrt(dim)


def qft_op(qubits: Sequence[int], inverse: bool = False) -> CircuitOp:
    return unitary(dft_matrix(len(qubits), inverse), qubits)


def qft_gate_ops(qubits: Sequence[int], inverse: bool = False) -> list[CircuitOp]:
    """Textbook H + controlled-phase + swap decomposition of the same QFT."""
    qs = list(qubits)
    w = len(qs)
    ops: list[CircuitOp] = []
    for j in range(w - 1, -1, -1):
        ops.append(h(qs[j]))
        for k in range(j - 1, -1, -1):
            ops.append(phase(qs[j], math.pi / (1 << (j - k)), controls=[(qs[k], 1)]))
    for i in range(w // 2):
        ops.append(swap(qs[i], qs[w - 1 - i]))
    if inverse:
        ops = [op.adjoint() for op in reversed(ops)]
    return ops


def qft_gate_count(width: int) -> int:
    """H + controlled phases + swaps in the textbook decomposition."""
    return width + width * (width - 1) // 2 + width // 2


def _register_axis_view(amps: np.ndarray, reg: Register, n: int) -> np.ndarray:
    batch = amps.shape[1:]
    return amps.reshape((1 << (n - reg.start - reg.width), 1 << reg.width, 1 << reg.start) + batch)


def apply_qft(state: StateVector, register: str, inverse: bool = False) -> StateVector:
    reg = state.layout[register]
    if reg.width == 0:
        return state
    view = _register_axis_view(state.amplitudes, reg, state.num_qubits)
    if inverse:
        view[...] = np.fft.fft(view, axis=1, norm="ortho")
    else:
        view[...] = np.fft.ifft(view, axis=1, norm="ortho")
    return state


# -- measurement -----------------------------------------------------------


def _prob_tensor(state: StateVector) -> tuple[np.ndarray, list[Register]]:
    probs = np.abs(state.amplitudes) ** 2
    if probs.ndim > 1:
        raise ValueError("measurement helpers need a single (unbatched) state")
    regs = [r for r in state.layout if r.width > 0]
    shape = tuple(1 << r.width for r in reversed(regs))
    return probs.reshape(shape if shape else (1,)), regs


def marginal_array(state: StateVector, registers: Sequence[str]) -> np.ndarray:
    """Joint marginal as an array indexed ``[v_0, v_1, ...]`` in argument order."""
    tensor, regs = _prob_tensor(state)
    names = [r.name for r in reversed(regs)]
    for name in registers:
        state.layout[name]
    keep = [names.index(nm) for nm in registers if state.layout.width(nm) > 0]
    drop = tuple(i for i in range(len(names)) if i not in keep)
    out = tensor.sum(axis=drop) if drop else tensor
    # order remaining axes to match the argument order
    kept_sorted = sorted(keep)
    perm = [kept_sorted.index(i) for i in keep]
    out = np.transpose(out, perm) if perm else np.asarray(out)
    full_shape = tuple(1 << state.layout.width(nm) for nm in registers)
    return np.asarray(out).reshape(full_shape)


def marginal(state: StateVector, register: str) -> dict[int, float]:
    """Probability table over the values of one register (nonzero entries only)."""
    arr = marginal_array(state, [register])
    return {int(v): float(p) for v, p in enumerate(arr) if p > 0}


def project(state: StateVector, register: str, value: int) -> tuple[StateVector, float]:
    """Unnormalized projection onto ``register == value`` and its probability."""
    reg = state.layout[register]
    if not 0 <= value <= reg.mask:
        raise ValueError(f"value {value} out of range for register {register!r}")
    view = _register_axis_view(state.amplitudes, reg, state.num_qubits)
    out = np.zeros_like(state.amplitudes)
    oview = _register_axis_view(out, reg, state.num_qubits)
    oview[:, value] = view[:, value]
    prob = float(np.vdot(out, out).real)
    return StateVector(out, state.layout), prob


def conditional_state(state: StateVector, register: str, value: int) -> StateVector:
    projected, prob = project(state, register, value)
    if prob <= 1e-15:
        raise ValueError(f"register {register!r} has zero probability of value {value}")
    projected.amplitudes /= math.sqrt(prob)
    return projected


def register_slice(state: StateVector, register: str, value: int) -> np.ndarray:
    """Amplitudes of the remaining registers where ``register == value``.

    The result is flattened in the same bit order with the register removed.
    """
    reg = state.layout[register]
    view = _register_axis_view(state.amplitudes, reg, state.num_qubits)
    return view[:, value].reshape(-1)


def sample(
    state: StateVector, register: str, rng: np.random.Generator
) -> tuple[int, StateVector]:
    probs = marginal_array(state, [register])
    probs = probs / probs.sum()
    value = int(rng.choice(len(probs), p=probs))
    return value, conditional_state(state, register, value)


def sample_joint(
    state: StateVector, registers: Sequence[str], rng: np.random.Generator
) -> tuple[int, ...]:
    """Draw a joint outcome for several registers (no collapse)."""
    probs = marginal_array(state, registers)
    flat = probs.reshape(-1)
    flat = flat / flat.sum()
    k = int(rng.choice(flat.size, p=flat))
    return tuple(int(v) for v in np.unravel_index(k, probs.shape))


def fidelity(a: np.ndarray, b: np.ndarray) -> float:
    return float(abs(np.vdot(a, b)) ** 2 / (np.vdot(a, a).real * np.vdot(b, b).real))
