"""Run configuration: a small line-oriented ``[section]`` / ``key = value`` format.

Example::

    [experiment]
    name = smoke

    [lattice]
    preset = d1q2          # or: velocities = 1,0; 0,1; -1,0; 0,-1
    shape = 4

    [configuration]        # repeat once per candidate lattice
    occupancy = 0:0, 2:1   # gridpoint:channel
    bounce_back = 3        # gridpoints whose opposite channels swap
    links = 1:0>1, 1:1>0   # explicit gridpoint:channel>partner entries

    [collision]
    kind = hpp             # identity | hpp | rotation | custom
    theta = 0.7853981634

    [qoi]
    region = 0, 1          # row-major indices, or x/y coordinates in 2D
    channels = 0, 1
    weights = 1, 1         # defaults to channel masses
    acc_steps = 1, 2

    [pipeline]
    n_steps = 2
    encoding = compact
    mapping = linear
    e = 4
    seed = 7

``#`` starts a comment. Every error names the offending line.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .lattice import CollisionModel, LatticeSpec, QoISpec
from .mapping import MappingSpec, mapping_kind
from .parallel import ENCODINGS, ConfigurationSet
from .search import DEFAULT_BUDGET_C, DEFAULT_LAMBDA, PipelineSpec, validate_lambda
from .simulator import DEFAULT_MAX_QUBITS

PRESETS = {
    "d1q2": ((1,), (-1,)),
    "d1q3": ((1,), (-1,), (0,)),
    "d2q4": ((1, 0), (0, 1), (-1, 0), (0, -1)),
    "d2q5": ((1, 0), (0, 1), (-1, 0), (0, -1), (0, 0)),
}

SECTIONS = {
    "experiment": {"name"},
    "lattice": {"preset", "shape", "velocities", "rest_weight", "periodic"},
    "configuration": {"occupancy", "bounce_back", "links"},
    "collision": {"kind", "theta", "matrix"},
    "qoi": {"region", "channels", "weights", "acc_steps"},
    "pipeline": {
        "n_steps", "encoding", "mapping", "alpha", "e", "lambda", "budget_c",
        "repetitions", "seed", "overlap",
    },
}


class ConfigError(ValueError):
    """Invalid configuration, reported with its line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


@dataclass
class _Entry:
    value: str
    line: int


@dataclass
class _Section:
    name: str
    line: int
    entries: dict[str, _Entry] = field(default_factory=dict)

    def get(self, key: str) -> _Entry | None:
        return self.entries.get(key)


def _tokenize(text: str) -> list[_Section]:
    sections: list[_Section] = []
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {raw.strip()!r}", lineno)
            name = line[1:-1].strip().lower()
            if name not in SECTIONS:
                raise ConfigError(f"unknown section [{name}]", lineno)
            if name != "configuration" and any(s.name == name for s in sections):
                raise ConfigError(f"section [{name}] appears twice", lineno)
            current = _Section(name, lineno)
            sections.append(current)
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        if current is None:
            raise ConfigError("key outside of any section", lineno)
        key, value = (p.strip() for p in line.split("=", 1))
        key = key.lower()
        if key not in SECTIONS[current.name]:
            raise ConfigError(f"unknown key {key!r} in [{current.name}]", lineno)
        if key in current.entries:
            raise ConfigError(f"duplicate key {key!r} in [{current.name}]", lineno)
        current.entries[key] = _Entry(value, lineno)
    return sections


def _ints(entry: _Entry, what: str) -> list[int]:
    if not entry.value:
        return []
    try:
        return [int(tok) for tok in entry.value.replace(",", " ").split()]
    except ValueError:
        raise ConfigError(f"{what} must be a list of integers, got {entry.value!r}", entry.line) from None


def _int(entry: _Entry, what: str) -> int:
    try:
        return int(entry.value)
    except ValueError:
        raise ConfigError(f"{what} must be an integer, got {entry.value!r}", entry.line) from None


def _float(entry: _Entry, what: str) -> float:
    text = entry.value.lower().replace("pi", repr(math.pi))
    try:
        # plain numbers, optionally written as a/b or k*pi
        if "/" in text:
            num, den = text.split("/", 1)
            return _product(num) / _product(den)
        return _product(text)
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"{what} must be a number, got {entry.value!r}", entry.line) from None


def _product(text: str) -> float:
    out = 1.0
    for part in text.split("*"):
        out *= float(part)
    return out


def _bool(entry: _Entry, what: str) -> bool:
    v = entry.value.lower()
    if v in ("true", "yes", "1", "on"):
        return True
    if v in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"{what} must be true or false, got {entry.value!r}", entry.line)


@dataclass
class RunConfig:
    name: str
    base: LatticeSpec
    lattices: list[LatticeSpec]
    encoding: str
    collision: CollisionModel
    qoi: QoISpec
    n_steps: int
    mapping: MappingSpec
    e: int
    lam: float = DEFAULT_LAMBDA
    budget_c: float = DEFAULT_BUDGET_C
    repetitions: int = 1
    seed: int = 0
    use_overlap: bool = True

    def configset(self) -> ConfigurationSet:
        return ConfigurationSet(tuple(self.lattices), self.encoding)

    def pipeline(self, max_qubits: int = DEFAULT_MAX_QUBITS) -> PipelineSpec:
        return PipelineSpec(
            self.configset(),
            self.collision,
            self.n_steps,
            self.qoi,
            self.mapping,
            self.e,
            self.lam,
            self.budget_c,
            self.use_overlap,
            max_qubits,
        )


def _gridpoint(token: str, base: LatticeSpec, line: int) -> int:
    try:
        if "/" in token:
            coords = tuple(int(c) for c in token.split("/"))
            return base.gridpoint_index(coords)
        return base.gridpoint_index(int(token))
    except ValueError:
        raise ConfigError(f"bad gridpoint {token!r}", line) from None
    except IndexError:
        raise ConfigError(f"gridpoint {token} outside shape {base.shape}", line) from None


def _channel(token: str, base: LatticeSpec, line: int) -> int:
    try:
        c = int(token)
    except ValueError:
        raise ConfigError(f"bad channel {token!r}", line) from None
    if not 0 <= c < base.q:
        raise ConfigError(f"unknown channel index {c} (lattice has channels 0..{base.q - 1})", line)
    return c


def _pairs(entry: _Entry, base: LatticeSpec) -> set[tuple[int, int]]:
    out = set()
    for tok in entry.value.replace(",", " ").split():
        if ":" not in tok:
            raise ConfigError(f"occupancy entries look like gridpoint:channel, got {tok!r}", entry.line)
        g, c = tok.split(":", 1)
        out.add((_gridpoint(g, base, entry.line), _channel(c, base, entry.line)))
    return out


def _links(section: _Section, base: LatticeSpec) -> dict[tuple[int, int], int]:
    links: dict[tuple[int, int], int] = {}
    bb = section.get("bounce_back")
    if bb is not None:
        for tok in bb.value.replace(",", " ").split():
            g = _gridpoint(tok, base, bb.line)
            for c in range(base.q):
                o = base.opposite(c)
                if o is not None and not base.is_rest(c):
                    links[(g, c)] = o
    ln = section.get("links")
    if ln is not None:
        for tok in ln.value.replace(",", " ").split():
            try:
                left, p = tok.split(">", 1)
                g, c = left.split(":", 1)
            except ValueError:
                raise ConfigError(f"link entries look like gridpoint:channel>partner, got {tok!r}", ln.line) from None
            key = (_gridpoint(g, base, ln.line), _channel(c, base, ln.line))
            links[key] = _channel(p, base, ln.line)
    return links


def _parse_lattice(sec: _Section | None) -> LatticeSpec:
    if sec is None:
        raise ConfigError("missing [lattice] section")
    preset, vel_e = sec.get("preset"), sec.get("velocities")
    if (preset is None) == (vel_e is None):
        raise ConfigError("[lattice] needs exactly one of preset or velocities", sec.line)
    if preset is not None:
        key = preset.value.lower()
        if key not in PRESETS:
            raise ConfigError(f"unknown preset {preset.value!r}; choose from {sorted(PRESETS)}", preset.line)
        velocities = PRESETS[key]
    else:
        try:
            velocities = tuple(
                tuple(int(c) for c in part.replace(",", " ").split())
                for part in vel_e.value.split(";")
            )
        except ValueError:
            raise ConfigError("velocities must be integer vectors separated by ';'", vel_e.line) from None
    shape_e = sec.get("shape")
    if shape_e is None:
        raise ConfigError("[lattice] needs a shape", sec.line)
    shape = _ints(shape_e, "shape")
    kw = {}
    if sec.get("rest_weight") is not None:
        kw["rest_weight"] = _int(sec.get("rest_weight"), "rest_weight")
    if sec.get("periodic") is not None:
        kw["periodic"] = _bool(sec.get("periodic"), "periodic")
    try:
        return LatticeSpec(tuple(shape), velocities, **kw)
    except (ValueError, IndexError) as err:
        raise ConfigError(str(err), sec.line) from None


def _parse_collision(sec: _Section | None, base: LatticeSpec) -> CollisionModel:
    if sec is None:
        return CollisionModel.identity()
    kind_e = sec.get("kind")
    kind = "identity" if kind_e is None else kind_e.value.lower()
    line = kind_e.line if kind_e else sec.line
    try:
        if kind == "rotation":
            theta = sec.get("theta")
            if theta is None:
                raise ConfigError("rotation collision needs theta", line)
            model = CollisionModel.rotation(_float(theta, "theta"))
        elif kind == "custom":
            m = sec.get("matrix")
            if m is None:
                raise ConfigError("custom collision needs a matrix (rows separated by ';')", line)
            rows = [[complex(v) for v in r.replace(",", " ").split()] for r in m.value.split(";")]
            model = CollisionModel.custom(np.array(rows))
        else:
            model = CollisionModel(kind)
        model.unitary(base)
    except ConfigError:
        raise
    except ValueError as err:
        raise ConfigError(str(err), line) from None
    return model


def _parse_qoi(sec: _Section | None, base: LatticeSpec) -> QoISpec:
    if sec is None:
        raise ConfigError("missing [qoi] section")
    region_e = sec.get("region")
    if region_e is None:
        raise ConfigError("[qoi] needs a region", sec.line)
    region = [_gridpoint(tok, base, region_e.line) for tok in region_e.value.replace(",", " ").split()]
    if not region:
        raise ConfigError("region must not be empty", region_e.line)
    ch_e = sec.get("channels")
    channels = (
        list(range(base.q))
        if ch_e is None
        else [_channel(tok, base, ch_e.line) for tok in ch_e.value.replace(",", " ").split()]
    )
    w_e = sec.get("weights")
    weights = None if w_e is None else _ints(w_e, "weights")
    acc_e = sec.get("acc_steps")
    acc = [1] if acc_e is None else _ints(acc_e, "acc_steps")
    try:
        return QoISpec.for_lattice(base, region, channels, acc, weights)
    except (ValueError, IndexError) as err:
        raise ConfigError(str(err), (w_e or acc_e or sec).line) from None


def parse_config(text: str) -> RunConfig:
    sections = _tokenize(text)
    single = {s.name: s for s in sections if s.name != "configuration"}
    base = _parse_lattice(single.get("lattice"))

    confs = [s for s in sections if s.name == "configuration"]
    if not confs:
        raise ConfigError("at least one [configuration] section is required")
    lattices = []
    for sec in confs:
        occ = _pairs(sec.get("occupancy"), base) if sec.get("occupancy") else set()
        links = _links(sec, base)
        try:
            lattices.append(base.with_conditions(occ, links))
        except (ValueError, IndexError) as err:
            raise ConfigError(str(err), sec.line) from None

    collision = _parse_collision(single.get("collision"), base)
    qoi = _parse_qoi(single.get("qoi"), base)

    pipe = single.get("pipeline") or _Section("pipeline", 0)
    n_steps = _int(pipe.get("n_steps"), "n_steps") if pipe.get("n_steps") else max(qoi.acc_steps)
    if n_steps < 0:
        raise ConfigError("n_steps must be non-negative", pipe.get("n_steps").line)
    for t in qoi.acc_steps:
        if t > n_steps:
            line = single["qoi"].get("acc_steps").line
            raise ConfigError(f"accumulation step {t} exceeds n_steps={n_steps}", line)

    enc_e = pipe.get("encoding")
    encoding = "compact" if enc_e is None else enc_e.value.lower().replace("-", "")
    if encoding not in ENCODINGS:
        raise ConfigError(f"unknown marker encoding {enc_e.value!r}", enc_e.line)

    map_e = pipe.get("mapping")
    try:
        kind = mapping_kind("linear" if map_e is None else map_e.value)
    except ValueError as err:
        raise ConfigError(str(err), map_e.line) from None
    alpha_e = pipe.get("alpha")
    try:
        if kind == "rotation":
            mapping = MappingSpec.weighted_rotation(qoi, _float(alpha_e, "alpha") if alpha_e else None)
        else:
            mapping = MappingSpec.linear()
    except ValueError as err:
        raise ConfigError(str(err), (alpha_e or map_e).line) from None

    e = _int(pipe.get("e"), "e") if pipe.get("e") else 4
    if e < 1:
        raise ConfigError(f"e must be >= 1, got {e}", pipe.get("e").line)
    lam = _float(pipe.get("lambda"), "lambda") if pipe.get("lambda") else DEFAULT_LAMBDA
    try:
        validate_lambda(lam)
    except ValueError as err:
        raise ConfigError(str(err), pipe.get("lambda").line) from None
    budget_c = _float(pipe.get("budget_c"), "budget_c") if pipe.get("budget_c") else DEFAULT_BUDGET_C
    if not budget_c > 0:
        raise ConfigError("budget_c must be positive", pipe.get("budget_c").line)
    reps = _int(pipe.get("repetitions"), "repetitions") if pipe.get("repetitions") else 1
    if reps < 1 or reps % 2 == 0:
        raise ConfigError(f"repetitions must be a positive odd integer, got {reps}", pipe.get("repetitions").line)
    seed = _int(pipe.get("seed"), "seed") if pipe.get("seed") else 0
    overlap = _bool(pipe.get("overlap"), "overlap") if pipe.get("overlap") else True

    exp = single.get("experiment")
    name = exp.get("name").value if exp and exp.get("name") else "experiment"
    return RunConfig(
        name, base, lattices, encoding, collision, qoi, n_steps, mapping, e,
        lam, budget_c, reps, seed, overlap,
    )


def load_config(path: str) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
