"""Exact scalars and row reduction over the rationals and Gaussian rationals.

Rationals are plain :class:`fractions.Fraction`.  Matrices are 2-D numpy
arrays of ``dtype=object`` so that ``@`` and elementwise arithmetic stay exact.
Row reduction works on sparse ``{column: value}`` rows internally; systems
coming out of the prolongation and precontact solvers are very sparse.
"""

from __future__ import annotations

from fractions import Fraction
from numbers import Rational

import numpy as np

__all__ = [
    "Gaussian",
    "Echelon",
    "as_exact",
    "exact_matrix",
    "kernel_basis",
    "parse_rational",
    "rank",
    "rational_str",
    "solve",
]


class Gaussian:
    """Element ``re + im*i`` of Q(i) with Fraction parts."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = Fraction(re)
        self.im = Fraction(im)

    @staticmethod
    def _coerce(other):
        if isinstance(other, Gaussian):
            return other
        if isinstance(other, (int, Rational)):
            return Gaussian(other)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return Gaussian(self.re + other.re, self.im + other.im)

    __radd__ = __add__

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return Gaussian(self.re - other.re, self.im - other.im)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return other - self

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return Gaussian(self.re * other.re - self.im * other.im,
                        self.re * other.im + self.im * other.re)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        norm = other.re * other.re + other.im * other.im
        if norm == 0:
            raise ZeroDivisionError("Gaussian division by zero")
        return Gaussian((self.re * other.re + self.im * other.im) / norm,
                        (self.im * other.re - self.re * other.im) / norm)

    def __rtruediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return other / self

    def __neg__(self):
        return Gaussian(-self.re, -self.im)

    def __pos__(self):
        return self

    def conjugate(self):
        return Gaussian(self.re, -self.im)

    def __eq__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return False
        return self.re == other.re and self.im == other.im

    def __hash__(self):
        if self.im == 0:
            return hash(self.re)
        return hash((self.re, self.im))

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def __repr__(self):
        if self.im == 0:
            return f"Gaussian({self.re})"
        return f"Gaussian({self.re}, {self.im})"

    def __str__(self):
        if self.im == 0:
            return rational_str(self.re)
        sign = "+" if self.im > 0 else "-"
        return f"{rational_str(self.re)}{sign}{rational_str(abs(self.im))}i"


def parse_rational(text) -> Fraction:
    """Parse ``"p"`` or ``"p/q"``; decimals and floats are rejected."""
    if isinstance(text, bool):
        raise ValueError(f"not a rational: {text!r}")
    if isinstance(text, int):
        return Fraction(text)
    if not isinstance(text, str):
        raise ValueError(f"coefficient must be an integer or a 'p/q' string, got {text!r}")
    s = text.strip()
    num, _, den = s.partition("/")
    try:
        p = int(num)
        q = int(den) if den else 1
    except ValueError:
        raise ValueError(f"not an exact rational string: {text!r}") from None
    if q == 0:
        raise ValueError(f"zero denominator in {text!r}")
    return Fraction(p, q)


def rational_str(x) -> str:
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def as_exact(x):
    if isinstance(x, (Fraction, Gaussian)):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, str):
        return parse_rational(x)
    if isinstance(x, Rational):
        return Fraction(x)
    raise TypeError(f"refusing to convert inexact value {x!r} to an exact scalar")


def exact_matrix(rows) -> np.ndarray:
    """Build an object array of exact scalars from nested sequences."""
    arr = np.array(rows, dtype=object)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1) if arr.size else arr.reshape(0, 0)
    out = np.empty(arr.shape, dtype=object)
    for idx, v in np.ndenumerate(arr):
        out[idx] = as_exact(v)
    return out


class Echelon:
    """Incrementally maintained reduced row echelon form of sparse rows.

    Rows are dicts ``{column: nonzero value}``.  The pivot of a row is its
    smallest column index.  ``rows`` maps pivot column to a row whose pivot
    entry is 1 and which has zeros in every other pivot column.
    """

    def __init__(self, ncols: int):
        self.ncols = ncols
        self.rows: dict[int, dict] = {}

    def reduce(self, row: dict) -> dict:
        row = {c: v for c, v in row.items() if v}
        if not self.rows:
            return row
        pivots = self.rows
        # stored rows vanish on every other pivot column, so one pass suffices
        for c in [c for c in row if c in pivots]:
            factor = row.pop(c)
            for cc, vv in pivots[c].items():
                if cc == c:
                    continue
                nv = row.get(cc, 0) - factor * vv
                if nv:
                    row[cc] = nv
                else:
                    row.pop(cc, None)
        return row

    def add(self, row: dict) -> bool:
        """Add a row; returns True when it enlarged the row space."""
        row = self.reduce(dict(row))
        if not row:
            return False
        p = min(row)
        inv = 1 / row[p]
        row = {c: v * inv for c, v in row.items()}
        for r in self.rows.values():
            f = r.get(p)
            if f:
                for c, v in row.items():
                    nv = r.get(c, 0) - f * v
                    if nv:
                        r[c] = nv
                    else:
                        r.pop(c, None)
        self.rows[p] = row
        return True

    @property
    def rank(self) -> int:
        return len(self.rows)

    def pivots(self) -> list[int]:
        return sorted(self.rows)

    def free_columns(self) -> list[int]:
        return [c for c in range(self.ncols) if c not in self.rows]

    def kernel(self) -> list[dict]:
        """Reduced echelon kernel basis as sparse vectors, ordered by free column."""
        basis = []
        for f in self.free_columns():
            v = {f: Fraction(1)}
            for p, r in self.rows.items():
                x = r.get(f)
                if x:
                    v[p] = -x
            basis.append(v)
        return basis


def _dense_rows(M):
    M = np.asarray(M, dtype=object)
    if M.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    return M, [{j: as_exact(v) for j, v in enumerate(row) if v} for row in M]


def _echelon(M) -> tuple[np.ndarray, Echelon]:
    M, rows = _dense_rows(M)
    ech = Echelon(M.shape[1])
    for r in rows:
        ech.add(r)
    return M, ech


def kernel_basis(M) -> list[np.ndarray]:
    """Reduced echelon basis of the null space, as exact column vectors."""
    M, ech = _echelon(M)
    n = M.shape[1]
    out = []
    for v in ech.kernel():
        col = np.full((n, 1), Fraction(0), dtype=object)
        for c, x in v.items():
            col[c, 0] = x
        out.append(col)
    return out


def rank(M) -> int:
    return _echelon(M)[1].rank


def solve(M, b):
    """One exact solution of ``M x = b`` (free variables set to zero), or None."""
    M, rows = _dense_rows(M)
    b = [as_exact(x) for x in np.asarray(b, dtype=object).ravel()]
    n = M.shape[1]
    ech = Echelon(n + 1)
    for r, rhs in zip(rows, b):
        if rhs:
            r = dict(r)
            r[n] = rhs
        ech.add(r)
    if n in ech.rows:
        return None
    x = np.full(n, Fraction(0), dtype=object)
    for p, r in ech.rows.items():
        x[p] = r.get(n, Fraction(0))
    return x
