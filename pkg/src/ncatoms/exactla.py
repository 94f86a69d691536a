"""Exact linear algebra over F_p[i] and over the Gaussian rationals.

F_p[i] with p = 3 (mod 4) is a field (x^2 + 1 is irreducible), and it is
the working stand-in for "generic complex numbers": random points of F_p[i]
avoid any fixed nonzero polynomial with probability >= 1 - deg/p.

Matrices over F_p[i] are stored as a pair of integer arrays (real part,
imaginary part).  For p < 2**31 the arrays are int64 and matrix products go
through float64 BLAS on 16-bit limbs, which is exact because every partial
sum stays below 2**53.  Larger primes fall back to object arrays of Python
ints (slow but exact).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np
import sympy

from .errors import BadDenominator, SingularMatrix
from .scalar import ONE, ZERO, Scalar

DEFAULT_PRIME = 2**31 - 1
_INT64_LIMIT = 2**31
_LIMB = 16
_LIMB_MASK = (1 << _LIMB) - 1


@lru_cache(maxsize=None)
def _check_prime(p: int) -> int:
    if p % 4 != 3:
        raise ValueError(f"prime must be 3 mod 4 so that F_p[i] is a field, got {p}")
    if not sympy.isprime(p):
        raise ValueError(f"{p} is not prime")
    return p


@dataclass(frozen=True)
class FpiField:
    """The field F_p[i]; only carries the prime and its array dtype."""

    p: int = DEFAULT_PRIME

    def __post_init__(self):
        _check_prime(self.p)

    @property
    def dtype(self):
        return np.int64 if self.p < _INT64_LIMIT else object

    def embed(self, s: Scalar) -> "FpiElement":
        return embed_scalar(s, self)

    def element(self, a: int, b: int = 0) -> "FpiElement":
        return FpiElement(a % self.p, b % self.p, self.p)


@dataclass(frozen=True, slots=True)
class FpiElement:
    a: int
    b: int
    p: int

    def __add__(self, o: "FpiElement"):
        return FpiElement((self.a + o.a) % self.p, (self.b + o.b) % self.p, self.p)

    def __sub__(self, o: "FpiElement"):
        return FpiElement((self.a - o.a) % self.p, (self.b - o.b) % self.p, self.p)

    def __neg__(self):
        return FpiElement(-self.a % self.p, -self.b % self.p, self.p)

    def __mul__(self, o: "FpiElement"):
        p = self.p
        return FpiElement((self.a * o.a - self.b * o.b) % p, (self.a * o.b + self.b * o.a) % p, p)

    def inverse(self) -> "FpiElement":
        p = self.p
        n = (self.a * self.a + self.b * self.b) % p
        if n == 0:
            raise ZeroDivisionError("inverse of zero in F_p[i]")
        ninv = pow(n, p - 2, p)
        return FpiElement(self.a * ninv % p, -self.b * ninv % p, p)

    def __truediv__(self, o: "FpiElement"):
        return self * o.inverse()

    def __bool__(self):
        return bool(self.a) or bool(self.b)


def embed_scalar(s: Scalar, field: FpiField | None = None) -> FpiElement:
    """Reduce a Gaussian rational modulo p."""
    field = field or FpiField()
    p = field.p

    def red(q: Fraction) -> int:
        if q.denominator % p == 0:
            raise BadDenominator(f"denominator of {q} is divisible by p={p}")
        return q.numerator * pow(q.denominator, p - 2, p) % p

    return FpiElement(red(s.re), red(s.im), p)


# ---------------------------------------------------------------------------
# array kernels


def _matmul_real(A: np.ndarray, B: np.ndarray, p: int) -> np.ndarray:
    if A.dtype == object:
        return (A @ B) % p
    n, m = A.shape[0], B.shape[1]
    a = np.vstack([(A >> _LIMB), (A & _LIMB_MASK)]).astype(np.float64)
    b = np.hstack([(B >> _LIMB), (B & _LIMB_MASK)]).astype(np.float64)
    c = (a @ b).astype(np.int64)
    c11, c10 = c[:n, :m], c[:n, m:]
    c01, c00 = c[n:, :m], c[n:, m:]
    high = (c11 % p) * ((1 << 2 * _LIMB) % p)
    mid = ((c10 + c01) % p) * (1 << _LIMB)
    return (high + mid + c00) % p


def _cmatmul(ar, ai, br, bi, p):
    # Karatsuba: three real products
    t1 = _matmul_real(ar, br, p)
    t2 = _matmul_real(ai, bi, p)
    t3 = _matmul_real((ar + ai) % p, (br + bi) % p, p)
    return (t1 - t2) % p, (t3 - t1 - t2) % p


def _cmul(ar, ai, br, bi, p):
    """Elementwise (broadcasting) product in F_p[i]."""
    if p < _INT64_LIMIT:
        # residues < 2**31: products < 2**62, sums of two stay below 2**63
        return (ar * br - ai * bi) % p, (ar * bi + ai * br) % p
    re = (ar * br % p - ai * bi % p) % p
    im = (ar * bi % p + ai * br % p) % p
    return re, im


def _cinv_scalar(a: int, b: int, p: int) -> tuple[int, int]:
    n = (a * a + b * b) % p
    ninv = pow(n, p - 2, p)
    return a * ninv % p, (-b * ninv) % p


def _eliminate(re: np.ndarray, im: np.ndarray, p: int, ncols: int, full: bool):
    """In-place row reduction; returns pivot columns.

    ``full`` clears entries above pivots too (Gauss-Jordan); otherwise only
    the rows below are touched, which is all rank needs.
    """
    rows = re.shape[0]
    pivots: list[int] = []
    r = 0
    for c in range(ncols):
        if r >= rows:
            break
        col_nz = np.flatnonzero((re[r:, c] != 0) | (im[r:, c] != 0))
        if col_nz.size == 0:
            continue
        k = r + int(col_nz[0])
        if k != r:
            re[[r, k]] = re[[k, r]]
            im[[r, k]] = im[[k, r]]
        ir, ii = _cinv_scalar(int(re[r, c]), int(im[r, c]), p)
        start = 0 if full else c
        pr, pi_ = _cmul(re[r, start:], im[r, start:], ir, ii, p)
        re[r, start:] = pr
        im[r, start:] = pi_
        targets = np.arange(rows) if full else np.arange(r + 1, rows)
        if full:
            targets = targets[targets != r]
        if targets.size:
            fr = re[targets, c].copy()
            fi = im[targets, c].copy()
            sel = np.flatnonzero((fr != 0) | (fi != 0))
            if sel.size:
                t = targets[sel]
                fr, fi = fr[sel], fi[sel]
                sr, si = _cmul(fr[:, None], fi[:, None], pr[None, :], pi_[None, :], p)
                re[t, start:] = (re[t, start:] - sr) % p
                im[t, start:] = (im[t, start:] - si) % p
        pivots.append(c)
        r += 1
    return pivots


# below this size plain elimination beats the recursive block method
_BLOCK_CUTOFF = 64


def _sub(a, b, p):
    return (a - b) % p


def _rank_rec(re: np.ndarray, im: np.ndarray, p: int) -> int:
    """Exact rank by recursive Schur complements.

    If the leading half block is invertible, ``rank M = b + rank(S)`` with
    ``S`` the Schur complement, computed with fast products.  Otherwise the
    whole block is row reduced directly, so the answer is always exact.
    """
    r, c = re.shape
    if min(r, c) <= _BLOCK_CUTOFF or re.dtype == object:
        return len(_eliminate(re.copy(), im.copy(), p, c, full=False))
    b = min(r, c) // 2
    inv = _inv_rec(re[:b, :b], im[:b, :b], p)
    if inv is None:
        return len(_eliminate(re.copy(), im.copy(), p, c, full=False))
    air, aii = inv
    tr, ti = _cmatmul(air, aii, re[:b, b:], im[:b, b:], p)
    cr, ci = _cmatmul(re[b:, :b], im[b:, :b], tr, ti, p)
    return b + _rank_rec(_sub(re[b:, b:], cr, p), _sub(im[b:, b:], ci, p), p)


def _gauss_jordan_inverse(re: np.ndarray, im: np.ndarray, p: int):
    n = re.shape[0]
    eye = np.eye(n, dtype=re.dtype)
    zero = np.zeros((n, n), dtype=re.dtype)
    if re.dtype == object:
        eye = eye.astype(object)
        zero[...] = 0
        eye = np.array([[int(x) for x in row] for row in eye], dtype=object)
    R = np.hstack([re, eye])
    I = np.hstack([im, zero])
    piv = _eliminate(R, I, p, n, full=True)
    if len(piv) < n:
        return None
    return R[:, n:].copy(), I[:, n:].copy()


def _inv_rec(re: np.ndarray, im: np.ndarray, p: int):
    """Inverse via 2x2 block formulas, or None if the matrix is singular."""
    n = re.shape[0]
    if n <= _BLOCK_CUTOFF or re.dtype == object:
        return _gauss_jordan_inverse(re, im, p)
    b = n // 2
    a11 = _inv_rec(re[:b, :b], im[:b, :b], p)
    if a11 is None:
        return _gauss_jordan_inverse(re, im, p)
    xr, xi = a11
    a12 = re[:b, b:], im[:b, b:]
    a21 = re[b:, :b], im[b:, :b]
    # T = A11^-1 A12, W = A21 A11^-1
    tr, ti = _cmatmul(xr, xi, *a12, p)
    wr, wi = _cmatmul(*a21, xr, xi, p)
    cr, ci = _cmatmul(*a21, tr, ti, p)
    s = _inv_rec(_sub(re[b:, b:], cr, p), _sub(im[b:, b:], ci, p), p)
    if s is None:
        return None
    sr, si = s
    x12r, x12i = _cmatmul(tr, ti, sr, si, p)
    x21r, x21i = _cmatmul(sr, si, wr, wi, p)
    cr, ci = _cmatmul(x12r, x12i, wr, wi, p)
    out_r = np.empty_like(re)
    out_i = np.empty_like(im)
    out_r[:b, :b] = (xr + cr) % p
    out_i[:b, :b] = (xi + ci) % p
    out_r[:b, b:] = (-x12r) % p
    out_i[:b, b:] = (-x12i) % p
    out_r[b:, :b] = (-x21r) % p
    out_i[b:, :b] = (-x21i) % p
    out_r[b:, b:] = sr
    out_i[b:, b:] = si
    return out_r, out_i


class FpiMatrix:
    """Dense matrix over F_p[i]; treat instances as immutable."""

    __slots__ = ("re", "im", "field")

    def __init__(self, re: np.ndarray, im: np.ndarray, field: FpiField):
        if re.shape != im.shape or re.ndim != 2:
            raise ValueError("real and imaginary parts must be 2-d arrays of equal shape")
        self.re = re
        self.im = im
        self.field = field

    # construction
    @classmethod
    def zeros(cls, rows: int, cols: int | None = None, field: FpiField | None = None):
        field = field or FpiField()
        cols = rows if cols is None else cols
        z = np.zeros((rows, cols), dtype=field.dtype)
        if field.dtype == object:
            z[...] = 0
        return cls(z, z.copy(), field)

    @classmethod
    def identity(cls, m: int, field: FpiField | None = None):
        out = cls.zeros(m, m, field)
        np.fill_diagonal(out.re, 1)
        return out

    @classmethod
    def from_scalars(cls, rows: Sequence[Sequence[Scalar]], field: FpiField | None = None):
        field = field or FpiField()
        n = len(rows)
        m = len(rows[0]) if n else 0
        out = cls.zeros(n, m, field)
        for i, row in enumerate(rows):
            if len(row) != m:
                raise ValueError("ragged matrix")
            for j, s in enumerate(row):
                e = embed_scalar(Scalar.coerce(s), field)
                out.re[i, j] = e.a
                out.im[i, j] = e.b
        return out

    @classmethod
    def block(cls, blocks: Sequence[Sequence["FpiMatrix"]]):
        field = blocks[0][0].field
        re = np.block([[b.re for b in row] for row in blocks])
        im = np.block([[b.im for b in row] for row in blocks])
        return cls(re, im, field)

    @classmethod
    def block_diag(cls, mats: Sequence["FpiMatrix"]):
        field = mats[0].field
        n = sum(m.rows for m in mats)
        k = sum(m.cols for m in mats)
        out = cls.zeros(n, k, field)
        r = c = 0
        for m in mats:
            out.re[r : r + m.rows, c : c + m.cols] = m.re
            out.im[r : r + m.rows, c : c + m.cols] = m.im
            r += m.rows
            c += m.cols
        return out

    # shape
    @property
    def shape(self) -> tuple[int, int]:
        return self.re.shape

    @property
    def rows(self) -> int:
        return self.re.shape[0]

    @property
    def cols(self) -> int:
        return self.re.shape[1]

    @property
    def p(self) -> int:
        return self.field.p

    def _compatible(self, other: "FpiMatrix"):
        if not isinstance(other, FpiMatrix):
            raise TypeError(f"expected FpiMatrix, got {type(other).__name__}")
        if other.field.p != self.field.p:
            raise ValueError("matrices over different primes")

    # arithmetic
    def __add__(self, other: "FpiMatrix"):
        self._compatible(other)
        return FpiMatrix((self.re + other.re) % self.p, (self.im + other.im) % self.p, self.field)

    def __sub__(self, other: "FpiMatrix"):
        self._compatible(other)
        return FpiMatrix((self.re - other.re) % self.p, (self.im - other.im) % self.p, self.field)

    def __neg__(self):
        return FpiMatrix(-self.re % self.p, -self.im % self.p, self.field)

    def __matmul__(self, other: "FpiMatrix"):
        self._compatible(other)
        if self.cols != other.rows:
            raise ValueError(f"shape mismatch {self.shape} @ {other.shape}")
        re, im = _cmatmul(self.re, self.im, other.re, other.im, self.p)
        return FpiMatrix(re, im, self.field)

    def scale(self, s) -> "FpiMatrix":
        e = s if isinstance(s, FpiElement) else embed_scalar(Scalar.coerce(s), self.field)
        re, im = _cmul(self.re, self.im, e.a, e.b, self.p)
        return FpiMatrix(re, im, self.field)

    def identity_like(self) -> "FpiMatrix":
        return FpiMatrix.identity(self.rows, self.field)

    def transpose(self) -> "FpiMatrix":
        return FpiMatrix(self.re.T.copy(), self.im.T.copy(), self.field)

    def kron_left(self, coeffs: Sequence[Sequence[Scalar]]) -> "FpiMatrix":
        """``C (x) self`` for a scalar coefficient matrix C (block (i,j) = c_ij * self)."""
        C = FpiMatrix.from_scalars(coeffs, self.field)
        p = self.p
        rr = np.kron(C.re, self.re) % p
        ii = np.kron(C.im, self.im) % p
        ri = np.kron(C.re, self.im) % p
        ir = np.kron(C.im, self.re) % p
        return FpiMatrix((rr - ii) % p, (ri + ir) % p, self.field)

    def trace(self) -> FpiElement:
        return FpiElement(int(np.trace(self.re)) % self.p, int(np.trace(self.im)) % self.p, self.p)

    def __getitem__(self, idx) -> FpiElement:
        i, j = idx
        return FpiElement(int(self.re[i, j]), int(self.im[i, j]), self.p)

    def submatrix(self, rows: slice, cols: slice) -> "FpiMatrix":
        return FpiMatrix(self.re[rows, cols].copy(), self.im[rows, cols].copy(), self.field)

    def __eq__(self, other):
        if not isinstance(other, FpiMatrix):
            return NotImplemented
        return (
            self.p == other.p
            and self.shape == other.shape
            and bool(np.all(self.re == other.re))
            and bool(np.all(self.im == other.im))
        )

    __hash__ = None

    def is_zero(self) -> bool:
        return not (np.any(self.re) or np.any(self.im))

    # linear algebra
    def rank(self) -> int:
        return _rank_rec(self.re, self.im, self.p)

    def det(self) -> FpiElement:
        if self.rows != self.cols:
            raise ValueError("determinant of a non-square matrix")
        re, im = self.re.copy(), self.im.copy()
        p = self.p
        acc = FpiElement(1, 0, p)
        n = self.rows
        for c in range(n):
            nz = np.flatnonzero((re[c:, c] != 0) | (im[c:, c] != 0))
            if nz.size == 0:
                return FpiElement(0, 0, p)
            k = c + int(nz[0])
            if k != c:
                re[[c, k]] = re[[k, c]]
                im[[c, k]] = im[[k, c]]
                acc = -acc
            piv = FpiElement(int(re[c, c]), int(im[c, c]), p)
            acc = acc * piv
            ir, ii = _cinv_scalar(piv.a, piv.b, p)
            pr, pim = _cmul(re[c, c:], im[c, c:], ir, ii, p)
            fr, fi = re[c + 1 :, c].copy(), im[c + 1 :, c].copy()
            sr, si = _cmul(fr[:, None], fi[:, None], pr[None, :], pim[None, :], p)
            re[c + 1 :, c:] = (re[c + 1 :, c:] - sr) % p
            im[c + 1 :, c:] = (im[c + 1 :, c:] - si) % p
        return acc

    def inverse(self) -> "FpiMatrix":
        n = self.rows
        if n != self.cols:
            raise SingularMatrix("non-square matrix has no inverse")
        inv = _inv_rec(self.re, self.im, self.p)
        if inv is None:
            raise SingularMatrix(f"matrix of size {n} is singular")
        return FpiMatrix(inv[0], inv[1], self.field)

    def __repr__(self):
        return f"FpiMatrix(shape={self.shape}, p={self.p})"


# ---------------------------------------------------------------------------
# exact Gaussian-rational backend (small cross-checks only)


class QiMatrix:
    """Dense matrix of :class:`Scalar` entries; exact but slow."""

    __slots__ = ("entries",)

    def __init__(self, entries: Sequence[Sequence]):
        rows = [tuple(Scalar.coerce(x) for x in row) for row in entries]
        if rows and any(len(r) != len(rows[0]) for r in rows):
            raise ValueError("ragged matrix")
        self.entries = tuple(rows)

    @classmethod
    def identity(cls, m: int):
        return cls([[ONE if i == j else ZERO for j in range(m)] for i in range(m)])

    @classmethod
    def zeros(cls, rows: int, cols: int | None = None):
        cols = rows if cols is None else cols
        return cls([[ZERO] * cols for _ in range(rows)])

    @classmethod
    def diag(cls, values: Sequence):
        vals = [Scalar.coerce(v) for v in values]
        n = len(vals)
        return cls([[vals[i] if i == j else ZERO for j in range(n)] for i in range(n)])

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.entries), len(self.entries[0]) if self.entries else 0)

    @property
    def rows(self) -> int:
        return self.shape[0]

    @property
    def cols(self) -> int:
        return self.shape[1]

    def __getitem__(self, idx) -> Scalar:
        i, j = idx
        return self.entries[i][j]

    def __add__(self, other: "QiMatrix"):
        return QiMatrix([[a + b for a, b in zip(r, s)] for r, s in zip(self.entries, other.entries)])

    def __sub__(self, other: "QiMatrix"):
        return QiMatrix([[a - b for a, b in zip(r, s)] for r, s in zip(self.entries, other.entries)])

    def __neg__(self):
        return QiMatrix([[-a for a in r] for r in self.entries])

    def __matmul__(self, other: "QiMatrix"):
        if self.cols != other.rows:
            raise ValueError(f"shape mismatch {self.shape} @ {other.shape}")
        cols = list(zip(*other.entries))
        out = []
        for r in self.entries:
            row = []
            for c in cols:
                acc = ZERO
                for a, b in zip(r, c):
                    if a and b:
                        acc = acc + a * b
                row.append(acc)
            out.append(row)
        return QiMatrix(out)

    def scale(self, s) -> "QiMatrix":
        s = Scalar.coerce(s)
        return QiMatrix([[s * a for a in r] for r in self.entries])

    def identity_like(self) -> "QiMatrix":
        return QiMatrix.identity(self.rows)

    def transpose(self) -> "QiMatrix":
        return QiMatrix(list(zip(*self.entries)))

    def conjugate_transpose(self) -> "QiMatrix":
        return QiMatrix([[a.conjugate() for a in col] for col in zip(*self.entries)])

    def __eq__(self, other):
        if not isinstance(other, QiMatrix):
            return NotImplemented
        return self.entries == other.entries

    __hash__ = None

    def _reduce(self, augment: "QiMatrix | None" = None):
        n = self.cols
        rows = [list(r) + (list(augment.entries[i]) if augment else []) for i, r in enumerate(self.entries)]
        piv = 0
        pivots = []
        for c in range(n):
            k = next((i for i in range(piv, len(rows)) if rows[i][c]), None)
            if k is None:
                continue
            rows[piv], rows[k] = rows[k], rows[piv]
            inv = rows[piv][c].inverse()
            rows[piv] = [inv * x for x in rows[piv]]
            for i in range(len(rows)):
                if i != piv and rows[i][c]:
                    f = rows[i][c]
                    rows[i] = [x - f * y for x, y in zip(rows[i], rows[piv])]
            pivots.append(c)
            piv += 1
        return rows, pivots

    def rank(self) -> int:
        return len(self._reduce()[1])

    def inverse(self) -> "QiMatrix":
        n = self.rows
        if n != self.cols:
            raise SingularMatrix("non-square matrix has no inverse")
        rows, piv = self._reduce(QiMatrix.identity(n))
        if len(piv) < n:
            raise SingularMatrix(f"matrix of size {n} has rank {len(piv)}")
        return QiMatrix([r[n:] for r in rows])

    def det(self) -> Scalar:
        rows = [list(r) for r in self.entries]
        n = len(rows)
        acc = ONE
        for c in range(n):
            k = next((i for i in range(c, n) if rows[i][c]), None)
            if k is None:
                return ZERO
            if k != c:
                rows[c], rows[k] = rows[k], rows[c]
                acc = -acc
            acc = acc * rows[c][c]
            inv = rows[c][c].inverse()
            for i in range(c + 1, n):
                if rows[i][c]:
                    f = rows[i][c] * inv
                    rows[i] = [x - f * y for x, y in zip(rows[i], rows[c])]
        return acc

    def to_fpi(self, field: FpiField | None = None) -> FpiMatrix:
        return FpiMatrix.from_scalars(self.entries, field)

    def __repr__(self):
        return "QiMatrix(" + repr([[str(x) for x in r] for r in self.entries]) + ")"


# ---------------------------------------------------------------------------
# module-level API


def rank(M) -> int:
    return M.rank()


def invert(M):
    return M.inverse()


def random_matrix(m: int, rng: np.random.Generator, field: FpiField | None = None, cols: int | None = None) -> FpiMatrix:
    """Matrix with i.i.d. uniform entries of F_p[i]."""
    if m < 1:
        raise ValueError("m must be >= 1")
    field = field or FpiField()
    cols = m if cols is None else cols
    p = field.p
    if field.dtype == object:
        re = np.array([[int(x) for x in row] for row in _big_uniform(rng, p, (m, cols))], dtype=object)
        im = np.array([[int(x) for x in row] for row in _big_uniform(rng, p, (m, cols))], dtype=object)
    else:
        re = rng.integers(0, p, size=(m, cols), dtype=np.int64)
        im = rng.integers(0, p, size=(m, cols), dtype=np.int64)
    return FpiMatrix(re, im, field)


def _big_uniform(rng: np.random.Generator, p: int, shape):
    nbytes = (p.bit_length() + 7) // 8 + 8
    out = np.empty(shape, dtype=object)
    for idx in np.ndindex(*shape):
        out[idx] = int.from_bytes(rng.bytes(nbytes), "little") % p
    return out


def random_invertible(
    m: int, rng: np.random.Generator, field: FpiField | None = None, max_tries: int = 64
) -> tuple[FpiMatrix, FpiMatrix, int]:
    """Rejection-sample an invertible matrix.

    Returns ``(M, M^-1, retries)``; the inverse is a by-product of the
    invertibility test, so callers that need it get it for free.
    """
    for tries in range(max_tries):
        M = random_matrix(m, rng, field)
        try:
            return M, M.inverse(), tries
        except SingularMatrix:
            continue
    raise SingularMatrix(f"no invertible sample in {max_tries} tries (p too small?)")
