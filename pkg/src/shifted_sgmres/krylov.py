"""Adaptive Simpler GMRES basis extension with flexible preconditioning.

One call to :func:`extend` adds a column to the relation ``A W = V U``,
where ``V`` is orthonormal and ``U`` upper triangular, and updates the
seed residual ``r <- r - v_k xi_k``. The projected matrix ``C = V^H W``
is kept up to date as well because the add systems and the harmonic Ritz
extraction both need it.
"""

from dataclasses import dataclass, field

import numpy as np

from .dense import BREAKDOWN_TOL
from .sparse_core import shifted_spmv

__all__ = ["SimplerBasis", "next_direction", "extend", "REORTH_THRESHOLD"]

REORTH_THRESHOLD = 0.7


@dataclass
class SimplerBasis:
    """State of one cycle of the outer iteration.

    Arrays are allocated at full size ``m``; only the leading ``k`` columns
    (and the leading ``k x k`` block of ``U`` and ``C``) are meaningful.
    The first ``e_frozen`` columns come from a deflated restart and their
    ``xi`` entries are exactly zero.
    """

    n: int
    m: int
    W: np.ndarray
    V: np.ndarray
    U: np.ndarray
    C: np.ndarray
    xi: np.ndarray
    r: np.ndarray
    k: int = 0
    e_frozen: int = 0
    res_norms: list = field(default_factory=list)

    @classmethod
    def empty(cls, r0, m):
        """Fresh basis seeded with residual ``r0``."""
        n = len(r0)
        z = np.zeros
        return cls(n, m, z((n, m), complex), z((n, m), complex), z((m, m), complex),
                   z((m, m), complex), z(m, complex), np.array(r0, dtype=np.complex128),
                   res_norms=[float(np.linalg.norm(r0))])

    @classmethod
    def from_deflation(cls, r0, m, data):
        """Basis whose first ``e`` columns are the deflation space in ``data``."""
        basis = cls.empty(r0, m)
        e = data.e
        basis.W[:, :e] = data.W
        basis.V[:, :e] = data.V
        basis.U[:e, :e] = data.U
        basis.C[:e, :e] = data.C
        basis.k = basis.e_frozen = e
        return basis

    # views on the meaningful part
    @property
    def Wk(self):
        return self.W[:, :self.k]

    @property
    def Vk(self):
        return self.V[:, :self.k]

    @property
    def Uk(self):
        return self.U[:self.k, :self.k]

    @property
    def Ck(self):
        return self.C[:self.k, :self.k]

    @property
    def xik(self):
        return self.xi[:self.k]

    @property
    def r_norm(self):
        return self.res_norms[-1]

    @property
    def r_prev_norm(self):
        return self.res_norms[-2] if len(self.res_norms) > 1 else None


def next_direction(basis, nu):
    """Choose the next unpreconditioned direction ``z``.

    The normalised seed residual is used on the first step of a cycle and
    whenever the last step reduced the residual by at least the factor
    ``nu``; otherwise the latest basis vector ``v`` is reused. Returns
    ``None`` when the residual is exactly zero.
    """
    rnorm = basis.r_norm
    if rnorm == 0.0:
        return None
    if basis.k == basis.e_frozen or rnorm <= nu * basis.r_prev_norm:
        return basis.r / rnorm
    return basis.V[:, basis.k - 1].copy()


def extend(basis, A, prec, nu, shift=0.0, counters=None):
    """Add one column to ``basis`` for the operator ``A + shift I``.

    Returns ``True`` if a column was added and ``False`` on a lucky
    breakdown (or an exactly zero residual), in which case the basis is
    left unchanged and the cycle should stop at the current size.
    """
    if basis.k >= basis.m:
        raise ValueError("basis is already full")
    z = next_direction(basis, nu)
    if z is None:
        return False
    k = basis.k
    V = basis.V
    w = prec.apply(z)
    v = shifted_spmv(A, shift, w, counters)
    before = np.linalg.norm(v)

    u = np.zeros(k + 1, dtype=np.complex128)
    for i in range(k):
        u[i] = np.vdot(V[:, i], v)
        v -= u[i] * V[:, i]
    after = np.linalg.norm(v)
    passes = 1
    if k and after < REORTH_THRESHOLD * before:
        for i in range(k):
            c = np.vdot(V[:, i], v)
            u[i] += c
            v -= c * V[:, i]
        after = np.linalg.norm(v)
        passes = 2
    if after <= BREAKDOWN_TOL * before or after == 0.0:
        if counters is not None:
            counters.dot_products += passes * k + 2
            counters.vector_updates += passes * k
        return False
    u[k] = after
    v /= after

    xi = np.vdot(v, basis.r)
    basis.r -= xi * v

    basis.W[:, k] = w
    V[:, k] = v
    basis.U[:k + 1, k] = u
    basis.xi[k] = xi
    basis.C[:k + 1, k] = V[:, :k + 1].conj().T @ w
    basis.C[k, :k] = v.conj() @ basis.W[:, :k]
    basis.k = k + 1
    basis.res_norms.append(float(np.linalg.norm(basis.r)))

    if counters is not None:
        # MGS, two norms, xi, new row/column of C
        counters.dot_products += passes * k + 2 + 1 + (2 * k + 1)
        counters.vector_updates += passes * k + 2
    return True
