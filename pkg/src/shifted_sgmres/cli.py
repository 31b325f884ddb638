"""Command-line driver and benchmark harness.

Two subcommands::

    shifted-sgmres run   --gen bidiag1:1000 --shifts 0,0.4,2 --alg fad_sgmres_dr_sh --e 3 --out results/
    shifted-sgmres bench --gen bidiag1:1000 --gen bidiag2:1000 \\
                         --alg ad_sgmres_sh --alg fad_sgmres_sh --alg fad_sgmres_dr_sh,e=3 \\
                         --repeats 5 --out grid.csv

Options can also come from a flat ``key = value`` file (``--config``);
flags given on the command line take precedence.
"""

import argparse
import csv
from dataclasses import dataclass, field, replace
import json
import logging
from pathlib import Path
import statistics
import sys

from .exceptions import InputError, SolverError
from .preconditioners import PreconditionerSpec
from .solver import ALGORITHMS, SolverConfig, solve
from .sparse_core import (ProblemInstance, SparseMatrix, gen_rhs, generate,
                          identity, load_matrix_market)

__all__ = ["RunConfig", "run", "bench", "write_history_csv", "write_grid_csv", "main"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NOT_CONVERGED = 3

DIVERGED = "†"

log = logging.getLogger(__name__)


def parse_shifts(text):
    try:
        return [complex(tok.strip().replace("i", "j")) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise InputError(f"cannot parse shift list '{text}'") from None


@dataclass
class RunConfig:
    """Everything needed for one solve; validated by :meth:`validate`."""

    matrix: str | None = None
    gen: str | None = None
    rhs: str = "seeded_random"
    seed: int = 0
    shifts: list = field(default_factory=lambda: [0.0, 0.4, 2.0])
    alg: str = "fad_sgmres_dr_sh"
    m: int = 10
    e: int | None = None
    nu: float = 0.9
    tol: float = 1e-6
    max_mv: int = 10000
    prec: str | None = None
    out: str | None = None
    repeats: int = 1
    reflect: complex | None = None

    def validate(self):
        if (self.matrix is None) == (self.gen is None):
            raise InputError("give exactly one of --matrix or --gen")
        if self.alg not in ALGORITHMS:
            raise InputError(f"unknown algorithm '{self.alg}' (choose from {', '.join(ALGORITHMS)})")
        if self.rhs not in ("ones", "seeded_random"):
            raise InputError(f"unknown rhs mode '{self.rhs}'")
        if self.repeats < 1:
            raise InputError("repeats must be >= 1")
        self.solver_config().validate()

    @property
    def effective_e(self):
        if self.alg != "fad_sgmres_dr_sh":
            return 0
        return 3 if self.e is None else self.e

    @property
    def effective_prec(self):
        if self.prec is not None:
            return self.prec
        return "identity" if self.alg == "ad_sgmres_sh" else "igmres:10"

    @property
    def source_label(self):
        return self.gen if self.gen is not None else Path(self.matrix).stem

    @property
    def label(self):
        parts = [self.alg]
        if self.alg == "fad_sgmres_dr_sh":
            parts.append(f"e={self.effective_e}")
        if self.alg != "ad_sgmres_sh":
            parts.append(self.effective_prec)
        return ",".join(parts)

    def solver_config(self):
        return SolverConfig(m=self.m, e=self.effective_e, nu=self.nu, tol=self.tol,
                            max_mv=self.max_mv,
                            preconditioner=PreconditionerSpec.parse(self.effective_prec),
                            rhs_mode=self.rhs, rng_seed=self.seed)

    def load_matrix(self):
        if self.gen is not None:
            A = generate(self.gen, seed=self.seed)
        else:
            try:
                A = load_matrix_market(self.matrix)
            except OSError as exc:
                raise InputError(f"cannot read matrix file: {exc}") from None
        if self.reflect is not None:
            A = _reflect(A, self.reflect)
        return A

    def build_problem(self, matrix=None):
        A = self.load_matrix() if matrix is None else matrix
        b = gen_rhs(A.n, self.rhs, self.seed)
        return ProblemInstance(A, b, self.shifts)


def _reflect(A, c):
    """``c I - A``, e.g. to build a base matrix from a Dirac-type operator."""
    S = (identity(A.n).to_scipy() * complex(c) - A.to_scipy()).tocsr()
    S.sum_duplicates()
    S.sort_indices()
    return SparseMatrix(A.n, S.indptr, S.indices, S.data)


_INT_KEYS = {"seed", "m", "e", "max_mv", "repeats"}
_FLOAT_KEYS = {"nu", "tol"}


def _coerce(key, value):
    if key in _INT_KEYS:
        return int(value)
    if key in _FLOAT_KEYS:
        return float(value)
    if key == "shifts":
        return parse_shifts(value)
    if key == "reflect":
        return complex(value.replace("i", "j"))
    return value


def read_config_file(path):
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    values = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read config file: {exc}") from None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise InputError(f"{path}:{lineno}: expected key = value")
        key = key.strip().replace("-", "_")
        if key not in RunConfig.__dataclass_fields__:
            raise InputError(f"{path}:{lineno}: unknown key '{key}'")
        try:
            values[key] = _coerce(key, value.strip())
        except ValueError:
            raise InputError(f"{path}:{lineno}: bad value for '{key}'") from None
    return values


def write_history_csv(report, stream):
    w = csv.writer(stream, lineterminator="\r\n")
    w.writerow(["shift_index", "alpha_real", "alpha_imag", "outer_mv", "rel_residual"])
    for j, (alpha, st) in enumerate(zip(report.shifts, report.states)):
        for mv, rel in st.history:
            w.writerow([j, repr(float(alpha.real)), repr(float(alpha.imag)), mv, repr(float(rel))])


def run(config):
    """Solve one configuration; returns ``(exit_status, report)``.

    With ``config.out`` set, writes ``summary.json`` and ``history.csv``
    into that directory. ``report`` is None if the configuration failed.
    """
    try:
        config.validate()
        problem = config.build_problem()
        report = solve(problem, config.solver_config(), config.alg)
    except SolverError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG, None
    if config.out is not None:
        out = Path(config.out)
        out.mkdir(parents=True, exist_ok=True)
        summary = report.as_dict()
        summary["source"] = config.source_label
        summary["n"] = problem.matrix.n
        summary["nnz"] = problem.matrix.nnz
        with open(out / "summary.json", "w", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=2, ensure_ascii=False)
        with open(out / "history.csv", "w", encoding="utf-8", newline="") as fh:
            write_history_csv(report, fh)
    return (EXIT_OK if report.converged else EXIT_NOT_CONVERGED), report


def _format_cell(mvs, times, diverged):
    if diverged:
        return DIVERGED
    med = statistics.median(mvs)
    med = int(med) if float(med).is_integer() else med
    cell = f"{med}"
    if len(mvs) > 1:
        cell += f" [{min(mvs)}-{max(mvs)}]"
    return cell + f" ({statistics.median(times):.2f}s)"


def bench(configs, repeats=None):
    """Run a suite and return a grid of results.

    Each config is repeated over ``repeats`` consecutive rhs seeds starting
    at ``config.seed``. Returns ``(columns, rows)`` where ``rows`` maps a
    matrix label to ``{column label: cell text}``. A run that exhausts its
    matvec budget yields the dagger marker; a failing run records its error
    and the suite carries on.
    """
    columns, rows = [], {}
    matrices = {}
    for cfg in configs:
        reps = repeats or cfg.repeats
        col = cfg.label
        if col not in columns:
            columns.append(col)
        row = rows.setdefault(cfg.source_label, {})
        mvs, times, diverged = [], [], False
        try:
            cfg.validate()
            key = (cfg.matrix, cfg.gen, cfg.reflect)
            if key not in matrices:
                matrices[key] = cfg.load_matrix()
            for r in range(reps):
                sub = replace(cfg, seed=cfg.seed + r)
                report = solve(sub.build_problem(matrices[key]), sub.solver_config(), sub.alg)
                mvs.append(report.outer_mv)
                times.append(report.wall_time)
                diverged |= not report.converged
            row[col] = _format_cell(mvs, times, diverged)
        except SolverError as exc:
            row[col] = f"error: {exc}"
    return columns, rows


def write_grid_csv(columns, rows, stream):
    w = csv.writer(stream, lineterminator="\r\n")
    w.writerow(["matrix"] + columns)
    for name, cells in rows.items():
        w.writerow([name] + [cells.get(c, "") for c in columns])


def _add_common(p):
    p.add_argument("--config", help="key = value file with defaults")
    p.add_argument("--shifts", help="comma separated, e.g. 0,0.4,2 or 0.1+0.2j")
    p.add_argument("--m", type=int)
    p.add_argument("--e", type=int)
    p.add_argument("--nu", type=float)
    p.add_argument("--tol", type=float)
    p.add_argument("--max-mv", dest="max_mv", type=int)
    p.add_argument("--prec", help="identity | igmres:<steps> | ilu0")
    p.add_argument("--rhs", choices=["ones", "seeded_random"])
    p.add_argument("--seed", type=int)
    p.add_argument("--repeats", type=int)
    p.add_argument("--reflect", help="replace A by cI - A")
    p.add_argument("--out")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(prog="shifted-sgmres",
                                     description="Simpler GMRES solvers for shifted linear systems")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="solve one problem")
    p_run.add_argument("--matrix", help="Matrix Market file")
    p_run.add_argument("--gen", help="generator, e.g. bidiag1:1000")
    p_run.add_argument("--alg", help=" | ".join(ALGORITHMS))
    _add_common(p_run)
    p_bench = sub.add_parser("bench", help="run a solver x matrix grid")
    p_bench.add_argument("--matrix", action="append", default=[])
    p_bench.add_argument("--gen", action="append", default=[])
    p_bench.add_argument("--alg", action="append", default=[],
                         help="algorithm[,e=..][,prec=..][,m=..][,nu=..]; repeatable")
    _add_common(p_bench)
    return parser


def _merge(args, keys):
    values = read_config_file(args.config) if args.config else {}
    for key in keys:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = _coerce(key, v) if isinstance(v, str) else v
    return values


_COMMON = ("shifts", "m", "e", "nu", "tol", "max_mv", "prec", "rhs", "seed", "repeats",
           "reflect", "out")


def _parse_alg_token(token):
    name, *opts = token.split(",")
    values = {"alg": name.strip()}
    for opt in opts:
        key, sep, value = opt.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or key not in ("e", "prec", "m", "nu", "tol", "max_mv"):
            raise InputError(f"bad algorithm option '{opt}' in '{token}'")
        values[key] = _coerce(key, value.strip())
    return values


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        if args.command == "run":
            values = _merge(args, _COMMON + ("matrix", "gen", "alg"))
            cfg = RunConfig(**values)
            status, report = run(cfg)
            if report is not None:
                for alpha, st in zip(report.shifts, report.states):
                    mark = "converged" if st.converged else "NOT converged"
                    print(f"alpha={alpha:g}: {mark}, mv={st.mv_at_convergence}, "
                          f"rel_res={st.true_residual:.3e}")
                print(f"outer mv={report.outer_mv}, wall={report.wall_time:.3f}s")
            return status

        base = _merge(args, _COMMON)
        out = base.pop("out", None)
        sources = [{"matrix": p} for p in args.matrix] + [{"gen": g} for g in args.gen]
        if not sources or not args.alg:
            raise InputError("bench needs at least one --matrix/--gen and one --alg")
        configs = [RunConfig(**{**base, **src, **_parse_alg_token(tok)})
                   for src in sources for tok in args.alg]
        columns, rows = bench(configs)
        if out:
            with open(out, "w", encoding="utf-8", newline="") as fh:
                write_grid_csv(columns, rows, fh)
        write_grid_csv(columns, rows, sys.stdout)
        return EXIT_OK
    except (InputError, TypeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
