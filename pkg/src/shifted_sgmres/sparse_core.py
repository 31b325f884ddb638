"""Complex CSR matrices, matrix-vector products and test problems.

Everything is stored in complex double precision; real input is promoted.
Indices are 0-based internally. Matrix Market's 1-based indices are
converted when a file is read or written.
"""

from dataclasses import dataclass, field
import io

import numpy as np
import scipy.sparse

from .exceptions import InputError, MatrixMarketError

__all__ = [
    "SparseMatrix",
    "ProblemInstance",
    "spmv",
    "shifted_spmv",
    "read_matrix_market",
    "write_matrix_market",
    "load_matrix_market",
    "gen_bidiag",
    "gen_rhs",
    "gen_random_sparse",
    "identity",
    "from_dense",
    "generate",
]


@dataclass(frozen=True, eq=False)
class SparseMatrix:
    """Square complex matrix in compressed-row form.

    Instances are immutable; the index and value arrays are made read-only
    on construction so a matrix can be shared between threads.
    """

    n: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray
    _csr: scipy.sparse.csr_matrix = field(init=False, repr=False)

    def __post_init__(self):
        n = int(self.n)
        rp = np.ascontiguousarray(self.row_offsets, dtype=np.int64)
        ci = np.ascontiguousarray(self.col_indices, dtype=np.int64)
        va = np.ascontiguousarray(self.values, dtype=np.complex128)
        if n < 0:
            raise InputError("matrix dimension must be non-negative")
        if rp.shape != (n + 1,):
            raise InputError(f"row_offsets must have length n+1 = {n + 1}")
        if rp[0] != 0 or rp[-1] != len(va) or len(ci) != len(va):
            raise InputError("row_offsets inconsistent with the stored entries")
        if np.any(np.diff(rp) < 0):
            raise InputError("row_offsets must be non-decreasing")
        if len(ci) and (ci.min() < 0 or ci.max() >= n):
            raise InputError("column index out of range")
        # strictly increasing columns inside every row
        if len(ci) > 1:
            step = np.diff(ci)
            row_start = np.zeros(len(ci), dtype=bool)
            row_start[rp[1:-1][rp[1:-1] < len(ci)]] = True
            if np.any((step <= 0) & ~row_start[1:]):
                raise InputError("column indices must be strictly increasing within a row")
        for arr in (rp, ci, va):
            arr.flags.writeable = False
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "row_offsets", rp)
        object.__setattr__(self, "col_indices", ci)
        object.__setattr__(self, "values", va)
        object.__setattr__(self, "_csr", scipy.sparse.csr_matrix((va, ci, rp), shape=(n, n)))

    @property
    def nnz(self):
        return len(self.values)

    @property
    def shape(self):
        return (self.n, self.n)

    def diagonal(self):
        return self._csr.diagonal()

    def norm(self):
        """Frobenius norm."""
        return float(np.linalg.norm(self.values))

    def to_dense(self):
        return self._csr.toarray()

    def to_scipy(self):
        """A scipy CSR view sharing this matrix's arrays."""
        return self._csr

    def rows(self):
        """Yield ``(i, cols, vals)`` for every row."""
        rp = self.row_offsets
        for i in range(self.n):
            yield i, self.col_indices[rp[i]:rp[i + 1]], self.values[rp[i]:rp[i + 1]]


@dataclass
class ProblemInstance:
    """The shifted family ``(A + alpha_j I) x_j = b``, ``j = 1..s``."""

    matrix: SparseMatrix
    rhs: np.ndarray
    shifts: list
    initial_guesses: list | None = None

    def __post_init__(self):
        self.rhs = np.asarray(self.rhs, dtype=np.complex128)
        self.shifts = [complex(a) for a in self.shifts]
        if self.rhs.shape != (self.matrix.n,):
            raise InputError(f"rhs has length {self.rhs.shape}, expected {self.matrix.n}")
        if not self.shifts:
            raise InputError("at least one shift is required")
        if not np.any(self.rhs):
            raise InputError("rhs must be non-zero")
        if self.initial_guesses is not None:
            if len(self.initial_guesses) != len(self.shifts):
                raise InputError("need one initial guess per shift")
            self.initial_guesses = [np.asarray(x, dtype=np.complex128) for x in self.initial_guesses]
            for x in self.initial_guesses:
                if x.shape != self.rhs.shape:
                    raise InputError("initial guess has the wrong length")


def _check_vector(A, x):
    x = np.asarray(x)
    if x.shape != (A.n,):
        raise InputError(f"vector of shape {x.shape} does not match matrix dimension {A.n}")
    return x


def spmv(A, x, counters=None, kind="outer_mv"):
    """Return ``A @ x``.

    If ``counters`` is given, its ``kind`` field is incremented by one.
    """
    x = _check_vector(A, x)
    y = A._csr @ x.astype(np.complex128, copy=False)
    if counters is not None:
        setattr(counters, kind, getattr(counters, kind) + 1)
    return y


def shifted_spmv(A, alpha, x, counters=None, kind="outer_mv"):
    """Return ``(A + alpha I) @ x``, counted as a single matvec."""
    y = spmv(A, x, counters, kind)
    if alpha != 0:
        y += alpha * x
    return y


# -- Matrix Market -----------------------------------------------------------

_FIELDS = ("real", "complex", "integer", "pattern")
_SYMMETRIES = ("general", "symmetric", "hermitian", "skew-symmetric")


def _coo_to_csr(n, rows, cols, vals):
    """Assemble CSR from COO triplets; duplicates are summed."""
    coo = scipy.sparse.coo_matrix((vals, (rows, cols)), shape=(n, n), dtype=np.complex128)
    csr = coo.tocsr()
    csr.sum_duplicates()
    csr.sort_indices()
    return SparseMatrix(n, csr.indptr, csr.indices, csr.data)


def read_matrix_market(stream):
    """Parse a coordinate-format Matrix Market matrix from a text stream.

    Symmetric, Hermitian and skew-symmetric storage is unfolded into the full
    matrix, ``pattern`` entries become 1 and duplicated ``(i, j)`` entries
    are summed. Explicit zeros that survive summation are kept.
    """
    lines = iter(enumerate(stream, start=1))
    try:
        lineno, header = next(lines)
    except StopIteration:
        raise MatrixMarketError("empty input", 1) from None
    tokens = header.strip().lower().split()
    if len(tokens) != 5 or tokens[0] != "%%matrixmarket":
        raise MatrixMarketError("expected '%%MatrixMarket matrix coordinate <field> <symmetry>'", lineno)
    _, obj, fmt, fld, sym = tokens
    if obj != "matrix" or fmt != "coordinate":
        raise MatrixMarketError(f"unsupported object/format '{obj} {fmt}'", lineno)
    if fld not in _FIELDS:
        raise MatrixMarketError(f"unknown field qualifier '{fld}'", lineno)
    if sym not in _SYMMETRIES:
        raise MatrixMarketError(f"unknown symmetry qualifier '{sym}'", lineno)
    if fld == "pattern" and sym in ("hermitian", "skew-symmetric"):
        raise MatrixMarketError(f"pattern matrices cannot be {sym}", lineno)
    if fld != "complex" and sym == "hermitian":
        raise MatrixMarketError("hermitian symmetry requires complex entries", lineno)

    size = None
    for lineno, line in lines:
        s = line.strip()
        if not s or s.startswith("%"):
            continue
        parts = s.split()
        if len(parts) != 3:
            raise MatrixMarketError("size line must hold 'rows cols entries'", lineno)
        try:
            nrows, ncols, nnz = (int(p) for p in parts)
        except ValueError:
            raise MatrixMarketError("size line must hold integers", lineno) from None
        if nrows != ncols:
            raise MatrixMarketError(f"matrix is not square ({nrows} x {ncols})", lineno)
        if nrows < 0 or nnz < 0:
            raise MatrixMarketError("negative size", lineno)
        size = (nrows, nnz)
        break
    if size is None:
        raise MatrixMarketError("missing size line", lineno)
    n, nnz = size

    width = {"pattern": 2, "real": 3, "integer": 3, "complex": 4}[fld]
    rows = np.empty(nnz, dtype=np.int64)
    cols = np.empty(nnz, dtype=np.int64)
    vals = np.empty(nnz, dtype=np.complex128)
    count = 0
    for lineno, line in lines:
        s = line.strip()
        if not s or s.startswith("%"):
            continue
        if count == nnz:
            raise MatrixMarketError(f"more than the declared {nnz} entries", lineno)
        parts = s.split()
        if len(parts) != width:
            raise MatrixMarketError(f"expected {width} fields, found {len(parts)}", lineno)
        try:
            i, j = int(parts[0]), int(parts[1])
            if fld == "pattern":
                v = 1.0
            elif fld == "complex":
                v = complex(float(parts[2]), float(parts[3]))
            elif fld == "integer":
                v = float(int(parts[2]))
            else:
                v = float(parts[2])
        except ValueError:
            raise MatrixMarketError("cannot parse entry", lineno) from None
        if not (1 <= i <= n and 1 <= j <= n):
            raise MatrixMarketError(f"index ({i}, {j}) out of range for n = {n}", lineno)
        if sym != "general" and j > i:
            raise MatrixMarketError(f"entry ({i}, {j}) above the diagonal in {sym} storage", lineno)
        if sym == "skew-symmetric" and i == j:
            raise MatrixMarketError("diagonal entry in skew-symmetric storage", lineno)
        rows[count], cols[count], vals[count] = i - 1, j - 1, v
        count += 1
    if count < nnz:
        raise MatrixMarketError(f"truncated entry list: {count} of {nnz} entries", lineno + 1)

    if sym != "general":
        off = rows != cols
        mirror = vals[off]
        if sym == "hermitian":
            mirror = mirror.conj()
        elif sym == "skew-symmetric":
            mirror = -mirror
        rows, cols, vals = (np.concatenate([rows, cols[off]]),
                            np.concatenate([cols, rows[off]]),
                            np.concatenate([vals, mirror]))
    return _coo_to_csr(n, rows, cols, vals)


def load_matrix_market(path):
    with open(path, encoding="utf-8") as fh:
        return read_matrix_market(fh)


def write_matrix_market(A, stream=None):
    """Write ``A`` as ``matrix coordinate complex general``.

    Returns the text when ``stream`` is None. Intended for round-trip tests
    and small fixtures, not for general export.
    """
    out = io.StringIO() if stream is None else stream
    out.write("%%MatrixMarket matrix coordinate complex general\n")
    out.write(f"{A.n} {A.n} {A.nnz}\n")
    for i, cols, vals in A.rows():
        for j, v in zip(cols, vals):
            out.write(f"{i + 1} {j + 1} {float(v.real)!r} {float(v.imag)!r}\n")
    if stream is None:
        return out.getvalue()
    return None


# -- generators --------------------------------------------------------------

def from_dense(M):
    M = np.asarray(M, dtype=np.complex128)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InputError("dense input must be square")
    csr = scipy.sparse.csr_matrix(M)
    csr.eliminate_zeros()
    csr.sort_indices()
    return SparseMatrix(M.shape[0], csr.indptr, csr.indices, csr.data)


def identity(n):
    return SparseMatrix(n, np.arange(n + 1), np.arange(n), np.ones(n))


def gen_bidiag(n, variant):
    """Upper bidiagonal test matrix with unit superdiagonal.

    ``bidiag1`` has diagonal ``0.1, 1, 2, ..., n-1``; ``bidiag2`` has
    diagonal ``1, 2, ..., n``.
    """
    if n < 2:
        raise InputError("bidiagonal generator needs n >= 2")
    if variant == "bidiag1":
        diag = np.arange(n, dtype=float)
        diag[0] = 0.1
    elif variant == "bidiag2":
        diag = np.arange(1, n + 1, dtype=float)
    else:
        raise InputError(f"unknown bidiagonal variant '{variant}'")
    counts = np.full(n, 2)
    counts[-1] = 1
    row_offsets = np.concatenate([[0], np.cumsum(counts)])
    cols = np.empty(2 * n - 1, dtype=np.int64)
    vals = np.empty(2 * n - 1, dtype=np.complex128)
    cols[0::2] = np.arange(n)
    cols[1::2] = np.arange(1, n)
    vals[0::2] = diag
    vals[1::2] = 1.0
    return SparseMatrix(n, row_offsets, cols, vals)


def gen_rhs(n, mode="seeded_random", seed=0):
    """Right-hand side: all ones, or reproducible standard normal entries."""
    if n < 1:
        raise InputError("rhs length must be positive")
    if mode == "ones":
        return np.ones(n, dtype=np.complex128)
    if mode == "seeded_random":
        rng = np.random.default_rng(seed)
        return rng.standard_normal(n).astype(np.complex128)
    raise InputError(f"unknown rhs mode '{mode}'")


def gen_random_sparse(n, nnz_per_row=5, seed=0, diag_shift=None, complex_values=True):
    """Random sparse complex matrix made nonsingular by a diagonal shift.

    Each row gets about ``nnz_per_row`` off-diagonal entries with standard
    normal parts. The diagonal is shifted by ``diag_shift`` (default: an
    estimate of the largest off-diagonal row sum, which makes the matrix
    diagonally dominant in expectation but not strictly).
    """
    rng = np.random.default_rng(seed)
    rows, cols, vals = [], [], []
    for i in range(n):
        k = min(n - 1, max(0, rng.poisson(nnz_per_row - 1)))
        others = rng.choice(np.delete(np.arange(n), i), size=k, replace=False) if k else []
        c = np.concatenate([[i], np.asarray(others, dtype=np.int64)])
        v = rng.standard_normal(len(c))
        if complex_values:
            v = v + 1j * rng.standard_normal(len(c))
        rows.extend([i] * len(c))
        cols.extend(c.tolist())
        vals.extend(v.tolist())
    rows, cols, vals = np.array(rows), np.array(cols), np.array(vals, dtype=np.complex128)
    if diag_shift is None:
        diag_shift = 1.5 * np.sqrt(nnz_per_row) * (1.0 + complex_values)
    vals[rows == cols] += diag_shift
    return _coo_to_csr(n, rows, cols, vals)


def generate(spec, seed=0):
    """Build a matrix from a generator token such as ``bidiag1:1000``.

    Known names: ``bidiag1``, ``bidiag2``, ``identity``, ``random``.
    """
    name, _, size = spec.partition(":")
    try:
        n = int(size) if size else 1000
    except ValueError:
        raise InputError(f"bad generator size in '{spec}'") from None
    if name in ("bidiag1", "bidiag2"):
        return gen_bidiag(n, name)
    if name == "identity":
        if n < 1:
            raise InputError("identity size must be positive")
        return identity(n)
    if name == "random":
        return gen_random_sparse(n, seed=seed)
    raise InputError(f"unknown generator '{name}'")
