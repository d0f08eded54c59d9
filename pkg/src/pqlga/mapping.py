"""Amplitude mappings from the accumulated QoI onto the coin qubit, and comparators."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .lattice import QoISpec
from .simulator import CircuitBlock, CircuitOp, RegisterLayout, h, ry, x

ROTATION = "rotation"
LINEAR = "linear"
_ALIASES = {
    "rotation": ROTATION,
    "weighted_rotation": ROTATION,
    "weightedrotation": ROTATION,
    "linear": LINEAR,
    "linear_comparison": LINEAR,
    "linearcomparison": LINEAR,
}


def mapping_kind(name: str) -> str:
    try:
        return _ALIASES[name.lower().replace("-", "_")]
    except KeyError:
        raise ValueError(f"unknown mapping kind {name!r}") from None


@dataclass(frozen=True)
class MappingSpec:
    kind: str = LINEAR
    alpha: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", mapping_kind(self.kind))
        if self.kind == ROTATION and self.alpha is not None and not self.alpha > 0:
            raise ValueError("rotation weight alpha must be positive")

    @classmethod
    def weighted_rotation(cls, qoi: QoISpec, alpha: float | None = None) -> "MappingSpec":
        """Rotation mapping with ``alpha`` defaulting to pi / F_max."""
        f_max = max(qoi.f_max, 1)
        if alpha is None:
            alpha = math.pi / f_max
        if not 0 < alpha <= math.pi / f_max * (1 + 1e-12):
            raise ValueError(f"alpha={alpha} must lie in (0, pi/F_max] with F_max={f_max}")
        return cls(ROTATION, float(alpha))

    @classmethod
    def linear(cls) -> "MappingSpec":
        return cls(LINEAR)

    def resolved(self, qoi: QoISpec) -> "MappingSpec":
        if self.kind == ROTATION:
            return MappingSpec.weighted_rotation(qoi, self.alpha)
        return self

    def phi(self, f: float, n_acc: int) -> float:
        """Coin-1 probability assigned to a data value ``f``."""
        if self.kind == ROTATION:
            if self.alpha is None:
                raise ValueError("rotation mapping needs a resolved alpha")
            return math.sin(self.alpha * f / 2) ** 2
        return f / (1 << n_acc)


def build_weighted_rotation(layout: RegisterLayout, mapping: MappingSpec) -> CircuitBlock:
    if mapping.alpha is None:
        raise ValueError("rotation mapping needs a resolved alpha")
    coin = layout.qubits("C")[0]
    ops = [
        ry(coin, (1 << j) * mapping.alpha, [(d, 1)])
        for j, d in enumerate(layout.qubits("D"))
    ]
    return CircuitBlock(ops, "rotation_map")


def build_comparator_less_than(
    reg_a: Sequence[int], reg_b: Sequence[int], target: int
) -> CircuitBlock:
    """Flip ``target`` iff value(a) < value(b), both little-endian.

    The XOR of ``b`` into ``a`` marks the differing bits; a < b exactly when
    the most significant differing bit has a=0, b=1, i.e. after the XOR the
    bit is 1 while ``b`` is 1 there and every higher XOR bit is 0. Those
    prefix patterns are disjoint, so one multi-controlled X per bit suffices.
    The XOR is undone afterwards, leaving ``a`` untouched.
    """
    a, b = list(reg_a), list(reg_b)
    if len(a) != len(b):
        raise ValueError(f"comparator width mismatch: {len(a)} vs {len(b)}")
    w = len(a)
    xor = [x(a[i], [(b[i], 1)]) for i in range(w)]
    ops: list[CircuitOp] = list(xor)
    for i in range(w):
        ctrls = [(a[i], 1), (b[i], 1)] + [(a[j], 0) for j in range(i + 1, w)]
        ops.append(x(target, ctrls))
    ops.extend(reversed(xor))
    return CircuitBlock(ops, "less_than")


def build_constant_comparator(reg: Sequence[int], constant: int, target: int) -> CircuitBlock:
    """Flip ``target`` iff value(reg) < constant, for 0 <= constant <= 2^width.

    value < c holds exactly when, at some bit i where c has a 1, the register
    has a 0 and agrees with c on all higher bits. These prefixes are disjoint.
    """
    r = list(reg)
    w = len(r)
    if not 0 <= constant <= 1 << w:
        raise ValueError(f"constant {constant} outside 0..{1 << w}")
    if constant == 1 << w:
        return CircuitBlock([x(target)], f"lt_{constant}")
    ops = []
    for i in range(w - 1, -1, -1):
        if constant >> i & 1:
            ctrls = [(r[i], 0)] + [(r[j], constant >> j & 1) for j in range(i + 1, w)]
            ops.append(x(target, ctrls))
    return CircuitBlock(ops, f"lt_{constant}")


def build_linear_comparison(layout: RegisterLayout) -> CircuitBlock:
    am = layout.qubits("AM")
    data = layout.qubits("D")
    if len(am) != len(data):
        raise ValueError("linear comparison needs an AM register as wide as D")
    coin = layout.qubits("C")[0]
    hs = [h(q) for q in am]
    block = CircuitBlock(list(hs), "linear_map")
    block.extend(build_comparator_less_than(am, data, coin).ops)
    block.extend(hs)
    return block


def build_amplitude_mapping(layout: RegisterLayout, mapping: MappingSpec) -> CircuitBlock:
    if mapping.kind == ROTATION:
        return build_weighted_rotation(layout, mapping)
    return build_linear_comparison(layout)
