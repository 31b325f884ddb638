"""Flexible right preconditioners returning ``w ~ A^{-1} z``.

The outer solver calls :meth:`Preconditioner.apply` once per basis step.
Preconditioners act on the current seed operator ``A + shift*I`` and may
change from one application to the next (inner GMRES is not a fixed
linear map), which is why the outer method keeps the directions ``W``.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse
from scipy.sparse.linalg import spsolve_triangular

from .dense import BREAKDOWN_TOL, _givens, upper_tri_solve
from .exceptions import FactorizationError, InputError
from .sparse_core import shifted_spmv

__all__ = [
    "PreconditionerSpec",
    "Preconditioner",
    "Ilu0Factors",
    "apply",
    "inner_gmres",
    "ilu0_factor",
]

KINDS = ("identity", "inner_gmres", "ilu0")


@dataclass(frozen=True)
class PreconditionerSpec:
    kind: str = "identity"
    inner_steps: int = 10

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputError(f"unknown preconditioner kind '{self.kind}'")
        if self.inner_steps < 1:
            raise InputError("inner_steps must be >= 1")

    @classmethod
    def parse(cls, token):
        """Parse ``identity``, ``ilu0`` or ``igmres:<steps>``."""
        token = token.strip().lower()
        if token in ("identity", "none"):
            return cls("identity")
        if token == "ilu0":
            return cls("ilu0")
        if token == "igmres":
            return cls("inner_gmres")
        name, colon, steps = token.partition(":")
        if name == "igmres" and colon:
            try:
                return cls("inner_gmres", int(steps))
            except ValueError:
                raise InputError(f"bad inner step count in '{token}'") from None
        raise InputError(f"unknown preconditioner token '{token}'")

    def __str__(self):
        if self.kind == "inner_gmres":
            return f"igmres:{self.inner_steps}"
        return self.kind


def inner_gmres(A, z, steps, shift=0.0, counters=None):
    """Run ``steps`` unrestarted GMRES iterations on ``(A + shift I) w = z``.

    Zero initial guess, modified Gram-Schmidt Arnoldi and Givens rotations
    on the Hessenberg matrix. Stops early only on a lucky breakdown, in
    which case the returned ``w`` solves the system exactly. Products with
    ``A`` are recorded in ``counters.inner_mv``.
    """
    if steps < 1:
        raise InputError("inner GMRES needs at least one step")
    z = np.asarray(z, dtype=np.complex128)
    beta = np.linalg.norm(z)
    if beta == 0.0:
        return np.zeros_like(z)
    n = len(z)
    V = np.empty((n, steps + 1), dtype=np.complex128)
    R = np.zeros((steps + 1, steps), dtype=np.complex128)
    rot = []
    g = np.zeros(steps + 1, dtype=np.complex128)
    g[0] = beta
    V[:, 0] = z / beta
    done = 0
    for j in range(steps):
        w = shifted_spmv(A, shift, V[:, j], counters, "inner_mv")
        wnorm = np.linalg.norm(w)
        for i in range(j + 1):
            R[i, j] = np.vdot(V[:, i], w)
            w -= R[i, j] * V[:, i]
        h = np.linalg.norm(w)
        breakdown = h <= BREAKDOWN_TOL * wnorm
        if not breakdown:
            V[:, j + 1] = w / h
        R[j + 1, j] = h
        for i, (c, s) in enumerate(rot):
            a, b = R[i, j], R[i + 1, j]
            R[i, j] = c * a + s * b
            R[i + 1, j] = -np.conj(s) * a + c * b
        c, s = _givens(R[j, j], R[j + 1, j])
        rot.append((c, s))
        R[j, j] = c * R[j, j] + s * R[j + 1, j]
        R[j + 1, j] = 0.0
        g[j + 1] = -np.conj(s) * g[j]
        g[j] = c * g[j]
        done = j + 1
        if breakdown:
            break
    y = upper_tri_solve(R[:done, :done], g[:done])
    return V[:, :done] @ y


@dataclass(frozen=True, eq=False)
class Ilu0Factors:
    """ILU(0) factors on the sparsity pattern of ``A + shift I``.

    ``L`` holds the strictly lower part (unit diagonal implied), ``U`` the
    upper part including the diagonal; both are scipy CSR matrices.
    """

    L: scipy.sparse.csr_matrix
    U: scipy.sparse.csr_matrix
    shift: complex = 0.0

    def solve(self, z):
        y = spsolve_triangular(self.L, z, lower=True, unit_diagonal=True)
        return spsolve_triangular(self.U, y, lower=False)


def ilu0_factor(A, shift=0.0):
    """Zero-fill incomplete LU (IKJ ordering) of ``A + shift I``.

    Raises
    ------
    FactorizationError
        If a row has no stored diagonal or its pivot is below
        ``1e-14 * max|row|``. ``row`` is 0-based.
    """
    n = A.n
    rp, ci = A.row_offsets, A.col_indices
    vals = np.array(A.values, dtype=np.complex128)
    diag_pos = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        hit = np.flatnonzero(ci[rp[i]:rp[i + 1]] == i)
        if len(hit) == 0:
            raise FactorizationError(i, f"ILU(0): row {i} has no stored diagonal entry")
        diag_pos[i] = rp[i] + hit[0]
    if shift != 0:
        vals[diag_pos] += shift

    col_lists = [ci[rp[i]:rp[i + 1]].tolist() for i in range(n)]
    for i in range(n):
        start, stop = rp[i], rp[i + 1]
        cols = col_lists[i]
        pos = {c: start + t for t, c in enumerate(cols)}
        rowmax = np.abs(vals[start:stop]).max()
        for t, k in enumerate(cols):
            if k >= i:
                break
            p = start + t
            vals[p] /= vals[diag_pos[k]]
            lik = vals[p]
            for q in range(diag_pos[k] + 1, rp[k + 1]):
                j = ci[q]
                hit = pos.get(j)
                if hit is not None:
                    vals[hit] -= lik * vals[q]
        if abs(vals[diag_pos[i]]) <= BREAKDOWN_TOL * rowmax:
            raise FactorizationError(i)

    lower = ci < np.repeat(np.arange(n), np.diff(rp))
    L = scipy.sparse.csr_matrix((np.where(lower, vals, 0), ci, rp), shape=(n, n))
    U = scipy.sparse.csr_matrix((np.where(lower, 0, vals), ci, rp), shape=(n, n))
    L.eliminate_zeros()
    U.eliminate_zeros()
    return Ilu0Factors(L.tocsr(), U.tocsr(), complex(shift))


class Preconditioner:
    """A preconditioner bound to one seed operator ``A + shift I``."""

    def __init__(self, spec, A, shift=0.0, counters=None, factors=None):
        self.spec = spec
        self.A = A
        self.shift = complex(shift)
        self.counters = counters
        self.factors = factors
        if spec.kind == "ilu0" and factors is None:
            self.factors = ilu0_factor(A, shift)

    def apply(self, z):
        if self.counters is not None:
            self.counters.prec_applications += 1
        kind = self.spec.kind
        if kind == "identity":
            return np.array(z, dtype=np.complex128)
        if kind == "inner_gmres":
            return inner_gmres(self.A, z, self.spec.inner_steps, self.shift, self.counters)
        return self.factors.solve(np.asarray(z, dtype=np.complex128))


def apply(spec, A, z, shift=0.0, counters=None, factors=None):
    """One-shot ``w = M^{-1} z`` for the preconditioner described by ``spec``."""
    z = np.asarray(z)
    if z.shape != (A.n,):
        raise InputError(f"vector of shape {z.shape} does not match dimension {A.n}")
    return Preconditioner(spec, A, shift, counters, factors).apply(z)
