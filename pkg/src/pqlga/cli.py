"""Command line entry point.

Each subcommand writes its CSV table to ``--out`` (stdout by default). Human
readable summaries go to stdout when ``--out`` is a file and to stderr
otherwise, so the CSV stream stays clean.

Exit codes: 0 success, 2 validation error, 3 capacity error, 4 numerical error.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from typing import Sequence

import numpy as np

from .accumulate import accumulated_state_check, build_evolution_block
from .config import ConfigError, RunConfig, load_config
from .oracle import (
    classical_lga_enumerate,
    classical_query_baseline,
    compute_gap,
    estimate,
    exact_expectation,
    repeated_median_minfind,
)
from .parallel import build_marker_prep
from .resources import resource_report
from .search import prepare_search_state
from .simulator import DEFAULT_MAX_QUBITS, CapacityError, apply_block, new_state

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_CAPACITY = 3
EXIT_NUMERICAL = 4


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        # round-off residue of exact zeros would otherwise print as 1e-31
        return format(0.0 if abs(value) < 1e-15 else value, ".12g")
    return str(value)


def to_csv(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def cmd_simulate(cfg: RunConfig, max_qubits: int = DEFAULT_MAX_QUBITS) -> tuple[str, str]:
    pipe = cfg.pipeline(max_qubits)
    layout = pipe.layout(check=False).prefix("D")
    state = new_state(layout, max_qubits)
    cs = pipe.configset
    apply_block(state, build_marker_prep(cs))
    apply_block(state, build_evolution_block(cs, pipe.collision, pipe.qoi, layout, pipe.n_steps, pipe.use_overlap))
    table = accumulated_state_check(state, cs, pipe.qoi)
    rows = [(j, f, p) for j in sorted(table) for f, p in sorted(table[j].items())]
    summary = f"{cfg.name}: {cs.size} configuration(s), {layout.total_qubits} qubits simulated"
    return to_csv(["marker", "f_value", "probability"], rows), summary


def cmd_estimate(cfg: RunConfig, max_qubits: int = DEFAULT_MAX_QUBITS) -> tuple[str, str]:
    pipe = cfg.pipeline(max_qubits)
    pipe.layout()
    res = estimate(pipe)
    rows = []
    for j in sorted(res.distributions):
        phi = res.true_phi[j]
        eps = res.epsilon_bound(phi)
        for y, p in enumerate(res.distributions[j]):
            est = res.phi_hat(y)
            rows.append((j, y, est, p, phi, abs(est - phi) <= eps + 1e-12))
    lines = [
        f"marker {j}: true phi {fmt(res.true_phi[j])}, mass within bound {fmt(res.mass_within_bound(j))}"
        for j in sorted(res.distributions)
    ]
    header = ["marker", "y", "phi_hat", "probability", "true_phi", "within_bound"]
    return to_csv(header, rows), "\n".join(lines)


def cmd_minfind(cfg: RunConfig, seed: int, max_qubits: int = DEFAULT_MAX_QUBITS) -> tuple[str, str]:
    pipe = cfg.pipeline(max_qubits)
    pipe.layout()
    state = prepare_search_state(pipe)
    rng = np.random.default_rng(seed)
    result = repeated_median_minfind(state, cfg.repetitions, rng, lam=pipe.lam, budget_c=pipe.budget_c)
    rows = [(r.round, r.tau, r.marker, r.y, r.phi_hat, r.iterations, r.improved) for r in result.rounds]
    phis = exact_expectation(pipe)
    argmin = int(np.argmin(phis))
    n = pipe.configset.size
    summary = "\n".join(
        [
            f"best_marker={result.best_marker}",
            f"best_estimate={fmt(result.best_estimate)}",
            f"grover_iterations_total={result.grover_iterations_total}",
            f"oracle_queries_total={result.oracle_queries_total}",
            f"classical_baseline={fmt(classical_query_baseline(n, 1))}",
            f"exact_argmin={argmin}",
            f"agrees_with_exact={int(result.best_marker == argmin)}",
            f"degenerate={int(result.degenerate)}",
        ]
    )
    header = ["round", "tau", "marker", "y", "phi_hat", "iterations", "improved"]
    return to_csv(header, rows), summary


def cmd_resources(cfg: RunConfig) -> tuple[str, str]:
    report = resource_report(cfg.pipeline())
    return to_csv(["section", "name", "value"], report.rows()), report.summary()


def cmd_oracle(cfg: RunConfig, max_qubits: int = DEFAULT_MAX_QUBITS) -> tuple[str, str]:
    pipe = cfg.pipeline(max_qubits)
    pipe.layout()
    phis = exact_expectation(pipe)
    rows = [("exact", j, "phi", p) for j, p in enumerate(phis)]
    for j, lat in enumerate(cfg.lattices):
        dist = classical_lga_enumerate(lat, cfg.collision, cfg.n_steps, cfg.qoi)
        rows += [("enumeration", j, f, p) for f, p in dist.items()]
    summary = ""
    if len(phis) >= 2:
        gap = compute_gap(phis, pipe.e)
        rows += [
            ("gap", gap.best, "delta", gap.delta),
            ("gap", gap.best, "degenerate", gap.degenerate),
            ("gap", gap.best, "bound_exceeds_half_gap", gap.bound_exceeds_half_gap),
            ("gap", gap.best, "resolvable", gap.resolvable),
        ]
        summary = f"argmin {gap.best}, gap {fmt(gap.delta)}, resolvable={gap.resolvable}"
    return to_csv(["section", "marker", "key", "value"], rows), summary


COMMANDS = ("simulate", "estimate", "minfind", "resources", "oracle")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pqlga", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, metavar="PATH", help="run configuration file")
    parser.add_argument("--seed", type=int, default=None, help="override the configured seed")
    parser.add_argument("--out", metavar="PATH", default=None, help="CSV destination (default stdout)")
    parser.add_argument(
        "--max-qubits", type=int, default=DEFAULT_MAX_QUBITS, help="simulation capacity cap"
    )
    return parser


def run(argv: Sequence[str] | None = None, stdout=None, stderr=None) -> int:
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        seed = cfg.seed if args.seed is None else args.seed
        if args.command == "simulate":
            table, summary = cmd_simulate(cfg, args.max_qubits)
        elif args.command == "estimate":
            table, summary = cmd_estimate(cfg, args.max_qubits)
        elif args.command == "minfind":
            table, summary = cmd_minfind(cfg, seed, args.max_qubits)
        elif args.command == "resources":
            table, summary = cmd_resources(cfg)
        else:
            table, summary = cmd_oracle(cfg, args.max_qubits)
    except CapacityError as err:
        print(f"error: {err}", file=stderr)
        return EXIT_CAPACITY
    except (ConfigError, OSError) as err:
        print(f"error: {err}", file=stderr)
        return EXIT_VALIDATION
    except (FloatingPointError, ArithmeticError, np.linalg.LinAlgError) as err:
        print(f"numerical error: {err}", file=stderr)
        return EXIT_NUMERICAL
    except (ValueError, IndexError) as err:
        print(f"error: {err}", file=stderr)
        return EXIT_VALIDATION

    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(table)
        if summary:
            print(summary, file=stdout)
    else:
        stdout.write(table)
        if summary:
            print(summary, file=stderr)
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
