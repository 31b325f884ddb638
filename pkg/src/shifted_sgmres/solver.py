"""Restarted Simpler GMRES for a family of shifted systems.

All systems ``(A + alpha_j I) x_j = b`` share one basis per cycle. The
system with the largest residual norm drives the basis (the *seed*); the
others (*add* systems) are projected so that their residuals are
orthogonal to ``span(A W)``. Optionally the basis is restarted with the
harmonic Ritz vectors of smallest modulus (deflated restarting), which
saves ``e`` matrix-vector products per later cycle.

The seed operator is always ``A + delta I`` with ``delta`` the seed's
shift; ``A`` itself is never modified.
"""

from dataclasses import dataclass, field
import logging
import time

import numpy as np

from .counters import CostCounters
from .dense import harmonic_pairs, lu_solve, qr_factor, upper_tri_solve
from .exceptions import (ConvergenceError, InputError, RankDeficientError,
                         SingularMatrixError, SingularTriangularError)
from .krylov import SimplerBasis, extend
from .preconditioners import Preconditioner, PreconditionerSpec, ilu0_factor
from .sparse_core import ProblemInstance, shifted_spmv

__all__ = [
    "ALGORITHMS",
    "SolverConfig",
    "ShiftState",
    "DeflationData",
    "CycleRecord",
    "SolveReport",
    "ShiftedSolver",
    "normalize_shifts",
    "select_seed",
    "solve_seed_small",
    "solve_add_small",
    "update_add_residual",
    "deflate",
    "solve",
]

log = logging.getLogger(__name__)

ALGORITHMS = ("ad_sgmres_sh", "fad_sgmres_sh", "fad_sgmres_dr_sh")


@dataclass
class SolverConfig:
    """Parameters of the outer iteration.

    ``tol`` is relative to ``||b||``. ``audit`` makes every cycle compare
    recursive and true residuals (extra products, not counted as outer mv).
    """

    m: int = 10
    e: int = 0
    nu: float = 0.9
    tol: float = 1e-6
    max_mv: int = 10000
    preconditioner: PreconditionerSpec = field(default_factory=PreconditionerSpec)
    rhs_mode: str = "seeded_random"
    rng_seed: int = 0
    audit: bool = False

    def validate(self):
        if self.m < 1:
            raise InputError("m must be >= 1")
        if not 0 <= self.e < self.m:
            raise InputError(f"need 0 <= e < m, got e={self.e}, m={self.m}")
        if not 0.0 <= self.nu <= 1.0:
            raise InputError("nu must lie in [0, 1]")
        if not self.tol > 0:
            raise InputError("tol must be positive")
        if self.max_mv < self.m:
            raise InputError("max_mv must be at least m")
        if not isinstance(self.preconditioner, PreconditionerSpec):
            raise InputError("preconditioner must be a PreconditionerSpec")


@dataclass
class ShiftState:
    """Iterate and recursively updated residual of one shifted system."""

    alpha: complex
    x: np.ndarray
    r: np.ndarray
    converged: bool = False
    mv_at_convergence: int | None = None
    true_residual: float | None = None
    history: list = field(default_factory=list)
    stalled_cycles: list = field(default_factory=list)
    replacements: int = 0

    @property
    def r_norm(self):
        return float(np.linalg.norm(self.r))


@dataclass
class DeflationData:
    """Compressed harmonic Ritz space kept across a restart.

    Satisfies ``(A + offset I) W = V U`` with ``V`` orthonormal, ``U``
    upper triangular and ``C = V^H W``.
    """

    W: np.ndarray
    V: np.ndarray
    U: np.ndarray
    C: np.ndarray
    lambdas: np.ndarray
    seed: int
    offset: complex

    @property
    def e(self):
        return self.W.shape[1]


@dataclass
class CycleRecord:
    index: int
    seed: int
    offset: complex
    deflated: bool
    start_size: int
    size: int
    outer_mv: int = 0
    prec_applications: int = 0
    dot_products: int = 0
    vector_updates: int = 0
    gevp_solves: int = 0
    early_exit: bool = False
    breakdown: bool = False
    stalled: list = field(default_factory=list)
    xi: list = field(default_factory=list)
    residual_gap: float | None = None

    def as_dict(self):
        d = dict(self.__dict__)
        d["offset"] = [self.offset.real, self.offset.imag]
        d["xi"] = [[z.real, z.imag] for z in self.xi]
        return d


@dataclass
class SolveReport:
    algorithm: str
    config: SolverConfig
    shifts: list
    states: list
    cycles: list
    counters: CostCounters
    wall_time: float
    b_norm: float

    @property
    def converged(self):
        return all(s.converged for s in self.states)

    @property
    def outer_mv(self):
        return self.counters.outer_mv

    @property
    def solutions(self):
        return [s.x for s in self.states]

    def as_dict(self):
        per_shift = []
        for a, s in zip(self.shifts, self.states):
            per_shift.append({
                "alpha": [a.real, a.imag],
                "converged": s.converged,
                "mv": s.mv_at_convergence,
                "final_rel_residual": s.true_residual,
                "stalled_cycles": s.stalled_cycles,
                "residual_replacements": s.replacements,
                "history": [[mv, rel] for mv, rel in s.history],
            })
        cfg = dict(self.config.__dict__)
        cfg["preconditioner"] = str(self.config.preconditioner)
        return {
            "algorithm": self.algorithm,
            "config": cfg,
            "converged": self.converged,
            "outer_mv": self.counters.outer_mv,
            "shifts": per_shift,
            "counters": self.counters.as_dict(),
            "cycles": [c.as_dict() for c in self.cycles],
            "wall_time": self.wall_time,
        }


# -- building blocks ----------------------------------------------------------

def normalize_shifts(shifts, seed_index):
    """Return ``(delta, [alpha_j - delta])`` with ``delta`` the seed's shift."""
    delta = complex(shifts[seed_index])
    return delta, [complex(a) - delta for a in shifts]


def select_seed(states):
    """Pick the non-converged system with the largest residual norm.

    Ties go to the lowest index. Returns ``(seed, permutation)`` where the
    permutation lists the seed first and the rest in their original order,
    or ``None`` if every system has converged.
    """
    best, best_norm = None, -1.0
    for i, s in enumerate(states):
        if s.converged:
            continue
        nrm = s.r_norm
        if nrm > best_norm:
            best, best_norm = i, nrm
    if best is None:
        return None
    perm = [best] + [i for i in range(len(states)) if i != best]
    return best, perm


def solve_seed_small(basis):
    """Coefficients of the seed update: ``U_k y = xi``."""
    return upper_tri_solve(basis.Uk, basis.xik)


def solve_add_small(basis, alpha, rhs_small):
    """Coefficients of an add-system update: ``(U_k + alpha C_k) y = rhs``."""
    y, _ = lu_solve(basis.Uk + alpha * basis.Ck, rhs_small)
    return y


def update_add_residual(basis, alpha, y, r0):
    """``r0 - V (U y) - alpha W y``; uses stored factors only."""
    r = r0 - basis.Vk @ (basis.Uk @ y)
    if alpha != 0:
        r -= alpha * (basis.Wk @ y)
    return r


def deflate(basis, e, seed=0, offset=0.0):
    """Compress a full basis to its ``e`` smallest harmonic Ritz directions.

    With ``G`` the harmonic Ritz vectors, ``G = P L`` and ``U P = Phat U_e``
    (two thin QR factorisations) give ``W_e = W P``, ``V_e = V Phat`` and
    ``A W_e = V_e U_e``.
    """
    if basis.k != basis.m:
        raise InputError("deflation needs a full basis")
    U, C = basis.Uk, basis.Ck
    G, lambdas = harmonic_pairs(U, C, e)
    P, _ = qr_factor(G)
    Phat, Ue = qr_factor(U @ P)
    We = basis.Wk @ P
    Ve = basis.Vk @ Phat
    Ce = Phat.conj().T @ C @ P
    ortho = np.linalg.norm(Phat.conj().T @ Phat - np.eye(e))
    if ortho > 1e-10:
        raise RankDeficientError(e)
    return DeflationData(We, Ve, Ue, Ce, lambdas, seed, complex(offset))


# -- driver -------------------------------------------------------------------

class ShiftedSolver:
    """Drives the outer cycles for one problem instance.

    ``monitor``, if given, is called as ``monitor(event, payload)`` with
    events ``"extend"`` (the basis after a new column), ``"deflate"``
    (``(basis, DeflationData)``) and ``"cycle"`` (the :class:`CycleRecord`).
    During a cycle ``seed`` and ``offset`` hold the seed index and shift.
    """

    def __init__(self, problem, config, algorithm="fad_sgmres_dr_sh", monitor=None):
        if algorithm not in ALGORITHMS:
            raise InputError(f"unknown algorithm '{algorithm}'")
        if not isinstance(problem, ProblemInstance):
            raise InputError("problem must be a ProblemInstance")
        config.validate()
        self.problem = problem
        self.config = config
        self.algorithm = algorithm
        self.monitor = monitor
        self.prec_spec = (PreconditionerSpec("identity") if algorithm == "ad_sgmres_sh"
                          else config.preconditioner)
        self.e = config.e if algorithm == "fad_sgmres_dr_sh" else 0
        self.counters = CostCounters()
        self.A = problem.matrix
        self.b = problem.rhs
        self.b_norm = float(np.linalg.norm(self.b))
        self.cycles = []
        self._ilu_cache = {}
        # seed and seed shift of the cycle in progress, for monitors
        self.seed = None
        self.offset = None
        self.states = []
        guesses = problem.initial_guesses or [None] * len(problem.shifts)
        for alpha, x0 in zip(problem.shifts, guesses):
            if x0 is None:
                x, r = np.zeros_like(self.b), self.b.copy()
            else:
                x = x0.copy()
                r = self.b - shifted_spmv(self.A, alpha, x, self.counters, "check_mv")
            st = ShiftState(alpha, x, r)
            st.history.append((0, st.r_norm / self.b_norm))
            self.states.append(st)

    def _notify(self, event, payload):
        if self.monitor is not None:
            self.monitor(event, payload)

    def _preconditioner(self, delta):
        factors = None
        if self.prec_spec.kind == "ilu0":
            factors = self._ilu_cache.get(delta)
            if factors is None:
                factors = self._ilu_cache[delta] = ilu0_factor(self.A, delta)
        return Preconditioner(self.prec_spec, self.A, delta, self.counters, factors)

    def true_residual(self, state):
        r = self.b - shifted_spmv(self.A, state.alpha, state.x, self.counters, "check_mv")
        return r

    def run_cycle(self, seed, deflation=None):
        """One cycle with ``seed`` driving the basis; returns ``(record, basis)``."""
        cfg = self.config
        delta, _ = normalize_shifts([s.alpha for s in self.states], seed)
        self.seed, self.offset = seed, delta
        before = self.counters.snapshot()
        seed_state = self.states[seed]
        if deflation is not None:
            basis = SimplerBasis.from_deflation(seed_state.r, cfg.m, deflation)
        else:
            basis = SimplerBasis.empty(seed_state.r, cfg.m)
        record = CycleRecord(len(self.cycles) + 1, seed, delta, deflation is not None,
                             basis.k, basis.k)
        prec = self._preconditioner(delta)
        threshold = cfg.tol * self.b_norm

        while basis.k < cfg.m:
            if basis.r_norm <= threshold:
                record.early_exit = True
                break
            if self.counters.outer_mv >= cfg.max_mv:
                break
            if not extend(basis, self.A, prec, cfg.nu, delta, self.counters):
                record.breakdown = True
                break
            self._notify("extend", basis)

        # a singular leading block can only come from a near-breakdown column
        try:
            y = solve_seed_small(basis)
        except SingularTriangularError as exc:
            basis.k = exc.index - 1
            basis.r = seed_state.r - basis.Vk @ basis.xik
            record.breakdown = True
            y = solve_seed_small(basis)
        k = basis.k
        record.size = k
        record.xi = basis.xik.tolist()

        active = [i for i, s in enumerate(self.states) if not s.converged]
        if k > 0:
            seed_state.x = seed_state.x + basis.Wk @ y
            seed_state.r = basis.r.copy()
            self.counters.vector_updates += 1
            e0 = basis.e_frozen
            for j in active:
                if j == seed:
                    continue
                st = self.states[j]
                alpha = st.alpha - delta
                rhs = np.zeros(k, dtype=np.complex128)
                rhs[e0:] = basis.Vk[:, e0:].conj().T @ st.r
                self.counters.dot_products += k - e0
                try:
                    yj = solve_add_small(basis, alpha, rhs)
                except SingularMatrixError:
                    st.stalled_cycles.append(record.index)
                    record.stalled.append(j)
                    log.warning("cycle %d: add system %d stalled (singular projected matrix)",
                                record.index, j)
                    continue
                st.r = update_add_residual(basis, alpha, yj, st.r)
                st.x = st.x + basis.Wk @ yj
                self.counters.vector_updates += 2

        if cfg.audit:
            gap = 0.0
            for j in active:
                st = self.states[j]
                r_true = self.b - shifted_spmv(self.A, st.alpha, st.x)
                gap = max(gap, float(np.linalg.norm(st.r - r_true)) / self.b_norm)
            record.residual_gap = gap

        mv_now = self.counters.outer_mv
        for j in active:
            st = self.states[j]
            rel = st.r_norm / self.b_norm
            st.history.append((mv_now, rel))
            if rel <= cfg.tol:
                r_true = self.true_residual(st)
                true_rel = float(np.linalg.norm(r_true)) / self.b_norm
                if true_rel <= cfg.tol:
                    st.converged = True
                    st.mv_at_convergence = mv_now
                    st.true_residual = true_rel
                else:
                    st.r = r_true
                    st.replacements += 1

        delta_counts = self.counters - before
        record.outer_mv = delta_counts.outer_mv
        record.prec_applications = delta_counts.prec_applications
        record.dot_products = delta_counts.dot_products
        record.vector_updates = delta_counts.vector_updates
        self.cycles.append(record)
        return record, basis

    def solve(self):
        t0 = time.perf_counter()
        cfg = self.config
        deflation = None
        while True:
            pick = select_seed(self.states)
            if pick is None or self.counters.outer_mv >= cfg.max_mv:
                break
            seed, _ = pick
            if deflation is not None and deflation.seed != seed:
                deflation = None
            record, basis = self.run_cycle(seed, deflation)
            deflation = None
            if self.e > 0 and basis.k == cfg.m:
                nxt = select_seed(self.states)
                if nxt is not None and nxt[0] == seed and self.counters.outer_mv < cfg.max_mv:
                    try:
                        deflation = deflate(basis, self.e, seed, record.offset)
                        self.counters.gevp_solves += 1
                        record.gevp_solves = 1
                        self._notify("deflate", (basis, deflation))
                    except (ConvergenceError, RankDeficientError,
                            SingularTriangularError) as exc:
                        log.warning("cycle %d: deflation skipped (%s)", record.index, exc)
            self._notify("cycle", record)

        for st in self.states:
            if st.true_residual is None:
                r_true = self.true_residual(st)
                st.true_residual = float(np.linalg.norm(r_true)) / self.b_norm
        return SolveReport(self.algorithm, cfg, list(self.problem.shifts), self.states,
                           self.cycles, self.counters, time.perf_counter() - t0, self.b_norm)


def solve(problem, config=None, algorithm="fad_sgmres_dr_sh", monitor=None):
    """Solve every shifted system of ``problem``; see :class:`ShiftedSolver`."""
    if config is None:
        config = SolverConfig()
    return ShiftedSolver(problem, config, algorithm, monitor).solve()
