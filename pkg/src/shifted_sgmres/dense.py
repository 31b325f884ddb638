"""Small dense complex kernels (sizes up to a few dozen).

Matrices are plain 2-D ``complex128`` numpy arrays. The routines are
written out rather than delegated to LAPACK so that failure modes can be
reported with the offending index, and so that the eigensolver used for
harmonic Ritz extraction is fully deterministic.
"""

import numpy as np

from .exceptions import (ConvergenceError, InputError, RankDeficientError,
                         SingularMatrixError, SingularTriangularError)

__all__ = [
    "BREAKDOWN_TOL",
    "upper_tri_solve",
    "lu_solve",
    "qr_factor",
    "hessenberg",
    "eig_small",
    "harmonic_pairs",
]

BREAKDOWN_TOL = 1e-14
EIG_MAX_SIZE = 64

_EPS = np.finfo(float).eps


def _as_square(M, name="matrix"):
    M = np.asarray(M, dtype=np.complex128)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InputError(f"{name} must be square, got shape {M.shape}")
    return M


def upper_tri_solve(U, rhs, tol=BREAKDOWN_TOL):
    """Solve ``U y = rhs`` for upper triangular ``U`` by back substitution.

    Raises
    ------
    SingularTriangularError
        If some ``|U[i, i]| < tol * max_j |U[j, j]|``; the index is 1-based.
    """
    U = _as_square(U, "U")
    b = np.asarray(rhs, dtype=np.complex128)
    k = U.shape[0]
    if b.shape != (k,):
        raise InputError(f"rhs of shape {b.shape} does not match {k}x{k} system")
    if k == 0:
        return b.copy()
    d = np.abs(np.diag(U))
    cutoff = tol * d.max()
    for i in range(k):
        if d[i] <= cutoff or d[i] == 0.0:
            raise SingularTriangularError(i + 1, U[i, i])
    y = np.empty(k, dtype=np.complex128)
    for i in range(k - 1, -1, -1):
        y[i] = (b[i] - U[i, i + 1:] @ y[i + 1:]) / U[i, i]
    return y


def lu_solve(M, rhs, tol=BREAKDOWN_TOL):
    """Solve ``M y = rhs`` by LU with partial pivoting.

    Returns
    -------
    y : ndarray
    rpg : float
        Reciprocal pivot growth ``max|M| / max|U|``; values far below 1
        flag an unreliable solve.
    """
    M = _as_square(M, "M")
    b = np.asarray(rhs, dtype=np.complex128)
    k = M.shape[0]
    if b.shape != (k,):
        raise InputError(f"rhs of shape {b.shape} does not match {k}x{k} system")
    if k == 0:
        return b.copy(), 1.0
    LU = M.copy()
    perm = np.arange(k)
    scale = np.abs(M).max()
    if scale == 0.0:
        raise SingularMatrixError(1)
    for j in range(k):
        p = j + int(np.argmax(np.abs(LU[j:, j])))
        if abs(LU[p, j]) <= tol * scale:
            raise SingularMatrixError(j + 1)
        if p != j:
            LU[[j, p]] = LU[[p, j]]
            perm[[j, p]] = perm[[p, j]]
        LU[j + 1:, j] /= LU[j, j]
        LU[j + 1:, j + 1:] -= np.outer(LU[j + 1:, j], LU[j, j + 1:])
    # forward (unit lower), then backward
    z = b[perm].copy()
    for i in range(1, k):
        z[i] -= LU[i, :i] @ z[:i]
    y = np.empty(k, dtype=np.complex128)
    for i in range(k - 1, -1, -1):
        y[i] = (z[i] - LU[i, i + 1:] @ y[i + 1:]) / LU[i, i]
    rpg = scale / np.abs(np.triu(LU)).max()
    return y, float(rpg)


def _householder(x):
    """Return unit ``v`` and ``beta`` with ``(I - 2 v v^H) x = beta e_1``."""
    v = x.astype(np.complex128, copy=True)
    nx = np.linalg.norm(x)
    if nx == 0.0:
        return None, 0.0
    phase = x[0] / abs(x[0]) if x[0] != 0 else 1.0
    beta = -phase * nx
    v[0] -= beta
    nv = np.linalg.norm(v)
    if nv == 0.0:
        return None, x[0]
    return v / nv, beta


def qr_factor(M, tol=BREAKDOWN_TOL):
    """Thin QR of a tall ``k x e`` matrix via Householder reflections.

    The diagonal of ``R`` is made real and nonnegative, which fixes the
    factorisation uniquely for full-rank input.

    Raises
    ------
    RankDeficientError
        If ``|R[i, i]| < tol * max column norm`` (1-based index).
    """
    A = np.array(M, dtype=np.complex128)
    if A.ndim != 2:
        raise InputError("qr_factor expects a 2-D array")
    k, e = A.shape
    if e > k:
        raise InputError(f"qr_factor needs rows >= cols, got {k}x{e}")
    colmax = np.linalg.norm(A, axis=0).max() if e else 0.0
    reflectors = []
    for j in range(e):
        v, beta = _householder(A[j:, j])
        if v is not None:
            A[j:, j:] -= 2.0 * np.outer(v, v.conj() @ A[j:, j:])
        reflectors.append(v)
        A[j, j] = beta
        A[j + 1:, j] = 0.0
    R = np.triu(A[:e, :e])
    Q = np.zeros((k, e), dtype=np.complex128)
    Q[:e, :e] = np.eye(e)
    for j in range(e - 1, -1, -1):
        v = reflectors[j]
        if v is not None:
            Q[j:, :] -= 2.0 * np.outer(v, v.conj() @ Q[j:, :])
    d = np.diag(R).copy()
    for i in range(e):
        if colmax == 0.0 or abs(d[i]) <= tol * colmax:
            raise RankDeficientError(i + 1)
    phase = d / np.abs(d)
    Q *= phase[np.newaxis, :]
    R = phase.conj()[:, np.newaxis] * R
    R[np.diag_indices(e)] = np.abs(d)
    return Q, R


def hessenberg(M):
    """Reduce ``M`` to upper Hessenberg form ``H = Q^H M Q``; returns ``(H, Q)``."""
    H = _as_square(M).copy()
    k = H.shape[0]
    Q = np.eye(k, dtype=np.complex128)
    for j in range(k - 2):
        v, _ = _householder(H[j + 1:, j])
        if v is None:
            continue
        H[j + 1:, :] -= 2.0 * np.outer(v, v.conj() @ H[j + 1:, :])
        H[:, j + 1:] -= 2.0 * np.outer(H[:, j + 1:] @ v, v.conj())
        Q[:, j + 1:] -= 2.0 * np.outer(Q[:, j + 1:] @ v, v.conj())
        H[j + 2:, j] = 0.0
    return H, Q


def _givens(x, y):
    """``c`` real, ``s`` complex with ``[[c, s], [-conj(s), c]] @ [x, y] = [r, 0]``."""
    ax = abs(x)
    if y == 0:
        return 1.0, 0.0
    if ax == 0.0:
        return 0.0, 1.0
    nrm = np.hypot(ax, abs(y))
    return ax / nrm, (x / ax) * np.conj(y) / nrm


def _schur(H, Z, max_sweeps):
    """Complex Schur form of a Hessenberg matrix by single-shift QR.

    ``H`` and ``Z`` are updated in place so that on return ``H`` is upper
    triangular and ``Z_in H_in Z_in^H = Z H Z^H``.
    """
    k = H.shape[0]
    hi = k - 1
    its = 0
    total = 0
    while hi > 0:
        # locate the start of the active unreduced block
        lo = hi
        while lo > 0:
            scale = abs(H[lo - 1, lo - 1]) + abs(H[lo, lo])
            if scale == 0.0:
                scale = np.abs(H[:hi + 1, :hi + 1]).sum()
            if abs(H[lo, lo - 1]) <= _EPS * scale:
                H[lo, lo - 1] = 0.0
                break
            lo -= 1
        if lo == hi:
            hi -= 1
            its = 0
            continue
        if total >= max_sweeps:
            raise ConvergenceError(f"QR iteration did not converge in {max_sweeps} sweeps")
        its += 1
        total += 1

        if its % 10 == 0:
            # exceptional shift to break cycles
            mu = H[hi, hi] + 0.75 * abs(H[hi, hi - 1])
        else:
            a, b = H[hi - 1, hi - 1], H[hi - 1, hi]
            c, d = H[hi, hi - 1], H[hi, hi]
            half = 0.5 * (a - d)
            disc = np.sqrt(half * half + b * c)
            mu1, mu2 = d - half + disc, d - half - disc
            # Wilkinson: eigenvalue of the trailing 2x2 closest to d
            mu = mu1 if abs(mu1 - d) <= abs(mu2 - d) else mu2

        x, y = H[lo, lo] - mu, H[lo + 1, lo]
        for j in range(lo, hi):
            if j > lo:
                x, y = H[j, j - 1], H[j + 1, j - 1]
            c, s = _givens(x, y)
            cstart = j - 1 if j > lo else lo
            rj = H[j, cstart:].copy()
            rj1 = H[j + 1, cstart:]
            H[j, cstart:] = c * rj + s * rj1
            H[j + 1, cstart:] = -np.conj(s) * rj + c * rj1
            if j > lo:
                H[j + 1, j - 1] = 0.0
            rend = min(j + 3, hi + 1)
            cj = H[:rend, j].copy()
            cj1 = H[:rend, j + 1]
            H[:rend, j] = c * cj + np.conj(s) * cj1
            H[:rend, j + 1] = -s * cj + c * cj1
            zj = Z[:, j].copy()
            zj1 = Z[:, j + 1]
            Z[:, j] = c * zj + np.conj(s) * zj1
            Z[:, j + 1] = -s * zj + c * zj1
    return np.triu(H)


def _triangular_eigvecs(T):
    """Eigenvectors of upper triangular ``T`` (columns, unnormalised)."""
    k = T.shape[0]
    X = np.zeros((k, k), dtype=np.complex128)
    small = _EPS * max(np.abs(T).max(), np.finfo(float).tiny)
    for i in range(k):
        X[i, i] = 1.0
        lam = T[i, i]
        for r in range(i - 1, -1, -1):
            denom = T[r, r] - lam
            if abs(denom) < small:
                denom = small
            X[r, i] = -(T[r, r + 1:i + 1] @ X[r + 1:i + 1, i]) / denom
    return X


def eig_small(M, max_size=EIG_MAX_SIZE):
    """All eigenpairs of a small dense complex matrix.

    Hessenberg reduction, single-shift complex QR to triangular Schur form,
    then eigenvectors by back substitution on the Schur factor.

    Returns
    -------
    lambdas : ndarray, shape (k,)
    vectors : ndarray, shape (k, k)
        Column ``i`` is a unit 2-norm eigenvector for ``lambdas[i]``.
    """
    M = _as_square(M)
    k = M.shape[0]
    if k < 1:
        raise InputError("eig_small needs a non-empty matrix")
    if k > max_size:
        raise InputError(f"eig_small limited to k <= {max_size}, got {k}")
    H, Z = hessenberg(M)
    T = _schur(H, Z, max_sweeps=30 * k * k)
    X = Z @ _triangular_eigvecs(T)
    X /= np.linalg.norm(X, axis=0)[np.newaxis, :]
    return np.diag(T).copy(), X


def harmonic_pairs(U, C, e):
    """The ``e`` harmonic Ritz pairs of smallest modulus.

    Solves ``U g = lam C g`` by forming ``B = U^{-1} C`` (``U`` upper
    triangular and nonsingular) whose eigenvalues are ``mu = 1/lam``. The
    ``e`` pairs of largest ``|mu|`` are kept; ``mu = 0`` means an infinite
    ``lam`` and is never selected.

    Returns
    -------
    G : ndarray, shape (m, e)
        Unit-norm eigenvectors as columns.
    lambdas : ndarray, shape (e,)
        Sorted by ascending modulus, ties by ascending argument.
    """
    U = _as_square(U, "U")
    C = _as_square(C, "C")
    m = U.shape[0]
    if C.shape != U.shape:
        raise InputError("U and C must have the same shape")
    if not 1 <= e < m:
        raise InputError(f"need 1 <= e < m, got e={e}, m={m}")
    B = np.empty((m, m), dtype=np.complex128)
    for j in range(m):
        B[:, j] = upper_tri_solve(U, C[:, j])
    mu, X = eig_small(B)
    amu = np.abs(mu)
    ok = amu > _EPS * max(amu.max(), np.finfo(float).tiny)
    candidates = np.flatnonzero(ok)
    if len(candidates) < e:
        raise ConvergenceError(f"only {len(candidates)} finite harmonic Ritz values, need {e}")
    lam = np.full(m, np.inf, dtype=np.complex128)
    lam[candidates] = 1.0 / mu[candidates]
    order = sorted(candidates, key=lambda i: (abs(lam[i]), np.angle(lam[i])))[:e]
    return X[:, order].copy(), lam[order].copy()
