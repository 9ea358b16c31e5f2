"""Sparse multivariate polynomials with exact rational coefficients.

A :class:`Poly` maps exponent tuples to nonzero Fractions.  Polynomial maps
are plain lists of ``Poly``; they can be composed, differentiated and
compiled into vectorised numpy evaluators for the numerical side.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .linalg import as_exact, parse_rational, rational_str

__all__ = [
    "Poly",
    "PolyEvaluator",
    "PolynomialVectorField",
    "compose",
    "evaluate_map",
    "jacobian",
    "map_evaluator",
]


class Poly:
    __slots__ = ("nvars", "terms")

    def __init__(self, nvars: int, terms=None):
        self.nvars = nvars
        self.terms: dict[tuple, Fraction] = {}
        if terms:
            for e, c in terms.items():
                c = as_exact(c)
                if c:
                    self.terms[tuple(e)] = c

    @classmethod
    def const(cls, nvars, c):
        c = as_exact(c)
        return cls(nvars, {(0,) * nvars: c} if c else None)

    @classmethod
    def var(cls, nvars, i, c=1):
        e = [0] * nvars
        e[i] = 1
        return cls(nvars, {tuple(e): c})

    @classmethod
    def monomial(cls, exps, c=1):
        return cls(len(exps), {tuple(exps): c})

    @classmethod
    def _raw(cls, nvars, terms):
        p = cls.__new__(cls)
        p.nvars = nvars
        p.terms = terms
        return p

    def copy(self):
        return Poly._raw(self.nvars, dict(self.terms))

    def is_zero(self):
        return not self.terms

    def __bool__(self):
        return bool(self.terms)

    def __eq__(self, other):
        if isinstance(other, Poly):
            return self.terms == other.terms
        if other == 0:
            return not self.terms
        return self.terms == Poly.const(self.nvars, other).terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def _coerce(self, other):
        if isinstance(other, Poly):
            if other.nvars != self.nvars:
                raise ValueError("polynomials live in different rings")
            return other
        return Poly.const(self.nvars, other)

    def __add__(self, other):
        other = self._coerce(other)
        out = dict(self.terms)
        for e, c in other.terms.items():
            v = out.get(e, 0) + c
            if v:
                out[e] = v
            else:
                out.pop(e, None)
        return Poly._raw(self.nvars, out)

    __radd__ = __add__

    def __neg__(self):
        return Poly._raw(self.nvars, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, Poly):
            c = as_exact(other)
            if not c:
                return Poly(self.nvars)
            return Poly._raw(self.nvars, {e: v * c for e, v in self.terms.items()})
        other = self._coerce(other)
        out: dict = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                v = out.get(e, 0) + c1 * c2
                if v:
                    out[e] = v
                else:
                    out.pop(e, None)
        return Poly._raw(self.nvars, out)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        out = Poly.const(self.nvars, 1)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def diff(self, i: int) -> "Poly":
        out = {}
        for e, c in self.terms.items():
            if e[i]:
                ne = list(e)
                ne[i] -= 1
                out[tuple(ne)] = c * e[i]
        return Poly._raw(self.nvars, out)

    def degree(self, weights=None) -> int:
        """Largest (weighted) degree of a term; -1 for the zero polynomial."""
        if not self.terms:
            return -1
        if weights is None:
            return max(sum(e) for e in self.terms)
        return max(sum(w * a for w, a in zip(weights, e)) for e in self.terms)

    def weighted_parts(self, weights) -> dict[int, "Poly"]:
        parts: dict[int, dict] = {}
        for e, c in self.terms.items():
            d = sum(w * a for w, a in zip(weights, e))
            parts.setdefault(d, {})[e] = c
        return {d: Poly._raw(self.nvars, t) for d, t in sorted(parts.items())}

    def is_weighted_homogeneous(self, weights, degree) -> bool:
        return all(sum(w * a for w, a in zip(weights, e)) == degree for e in self.terms)

    def __call__(self, point):
        """Evaluate at a point; exact on exact input."""
        if len(point) != self.nvars:
            raise ValueError(f"expected {self.nvars} coordinates, got {len(point)}")
        total = 0
        for e, c in self.terms.items():
            term = c
            for x, a in zip(point, e):
                if a:
                    term = term * x ** a
            total = total + term
        return total

    def restrict(self, keep: list[int], fixed=None) -> "Poly":
        """Polynomial in the variables ``keep``; other variables set to ``fixed`` (default 0)."""
        fixed = fixed or {}
        out: dict = {}
        for e, c in self.terms.items():
            coeff = c
            ok = True
            for i, a in enumerate(e):
                if a and i not in keep:
                    if i in fixed:
                        coeff = coeff * Fraction(fixed[i]) ** a
                    else:
                        ok = False
                        break
            if not ok or not coeff:
                continue
            ne = tuple(e[i] for i in keep)
            v = out.get(ne, 0) + coeff
            if v:
                out[ne] = v
            else:
                out.pop(ne, None)
        return Poly._raw(len(keep), out)

    def embed(self, nvars: int, positions: list[int]) -> "Poly":
        """Rename variable ``i`` to ``positions[i]`` in a ring with ``nvars`` variables."""
        out = {}
        for e, c in self.terms.items():
            ne = [0] * nvars
            for i, a in enumerate(e):
                ne[positions[i]] += a
            out[tuple(ne)] = c
        return Poly._raw(nvars, out)

    def substitute(self, values: list["Poly"]) -> "Poly":
        return compose([self], values)[0]

    def to_terms(self):
        """Serialisable form: sorted list of ``[exponents, "p/q"]``."""
        return [[list(e), rational_str(c)] for e, c in sorted(self.terms.items())]

    def __repr__(self):
        if not self.terms:
            return "0"
        parts = []
        for e, c in sorted(self.terms.items(), reverse=True):
            mono = "*".join(f"x{i + 1}" + (f"^{a}" if a > 1 else "") for i, a in enumerate(e) if a)
            parts.append(f"{c}" + (f"*{mono}" if mono else ""))
        return " + ".join(parts)


def compose(polys: list[Poly], values: list[Poly]) -> list[Poly]:
    """Substitute ``values[i]`` for variable ``i`` in every polynomial."""
    if not polys:
        return []
    nvars = polys[0].nvars
    if len(values) != nvars:
        raise ValueError("substitution needs one value per variable")
    target = values[0].nvars if values else 0
    powers: dict[tuple, Poly] = {}

    def power(i, a):
        key = (i, a)
        if key not in powers:
            powers[key] = values[i] if a == 1 else power(i, a - 1) * values[i]
        return powers[key]

    out = []
    for p in polys:
        acc = Poly(target)
        for e, c in p.terms.items():
            term = Poly.const(target, c)
            for i, a in enumerate(e):
                if a:
                    term = term * power(i, a)
            acc = acc + term
        out.append(acc)
    return out


def jacobian(polys: list[Poly]) -> list[list[Poly]]:
    """``J[i][j] = d polys[i] / d x_j``."""
    return [[p.diff(j) for j in range(p.nvars)] for p in polys]


def evaluate_map(polys: list[Poly], point):
    return [p(point) for p in polys]


class PolyEvaluator:
    """Vectorised float evaluation of a list of polynomials sharing a ring.

    ``ev(x)`` accepts shape ``(nvars,)`` or ``(batch, nvars)`` and returns
    ``(len(polys),)`` or ``(batch, len(polys))``.
    """

    def __init__(self, polys: list[Poly], nvars: int | None = None):
        self.nvars = polys[0].nvars if polys else (nvars or 0)
        monos = sorted({e for p in polys for e in p.terms})
        self.size = len(polys)
        self.exponents = np.array(monos, dtype=np.int64).reshape(len(monos), self.nvars)
        index = {e: k for k, e in enumerate(monos)}
        self.coeffs = np.zeros((len(monos), len(polys)))
        for j, p in enumerate(polys):
            for e, c in p.terms.items():
                self.coeffs[index[e], j] = float(c)
        self.max_power = int(self.exponents.max()) if len(monos) else 0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        xb = np.atleast_2d(x)
        if not len(self.exponents):
            out = np.zeros((xb.shape[0], self.size))
        else:
            # power table avoids repeated float pow
            pw = np.ones((self.max_power + 1,) + xb.shape)
            for k in range(1, self.max_power + 1):
                pw[k] = pw[k - 1] * xb
            mono = np.ones((len(self.exponents), xb.shape[0]))
            for v in range(self.nvars):
                col = self.exponents[:, v]
                if col.any():
                    mono *= pw[col, :, v]
            out = mono.T @ self.coeffs
        return out[0] if single else out


def map_evaluator(polys: list[Poly]) -> PolyEvaluator:
    return PolyEvaluator(polys)


class PolynomialVectorField:
    """Vector field with polynomial coefficients.

    ``frame`` is ``"coordinate"`` (coefficients of the partial derivatives
    in exponential coordinates) or ``"left"`` (coefficients of the
    left-invariant frame).  Bracket and evaluation work in the coordinate
    frame; conversions live in :mod:`carnot.vector_fields`.
    """

    __slots__ = ("coeffs", "frame")

    def __init__(self, coeffs, frame="coordinate"):
        if frame not in ("coordinate", "left"):
            raise ValueError(f"unknown frame {frame!r}")
        coeffs = list(coeffs)
        if not coeffs:
            raise ValueError("a vector field needs at least one coefficient")
        n = coeffs[0].nvars
        if any(c.nvars != n for c in coeffs) or len(coeffs) != n:
            raise ValueError("need n coefficients, each a polynomial in n variables")
        self.coeffs = coeffs
        self.frame = frame

    @property
    def n(self):
        return len(self.coeffs)

    @classmethod
    def zero(cls, n, frame="coordinate"):
        return cls([Poly(n) for _ in range(n)], frame)

    @classmethod
    def partial(cls, n, i, coeff=None):
        """``coeff * d/dx_i`` (coefficient defaults to 1)."""
        cs = [Poly(n) for _ in range(n)]
        cs[i] = coeff if coeff is not None else Poly.const(n, 1)
        return cls(cs)

    def _check(self, other):
        if self.frame != other.frame or self.n != other.n:
            raise ValueError("vector fields must share dimension and frame")

    def __add__(self, other):
        self._check(other)
        return PolynomialVectorField([a + b for a, b in zip(self.coeffs, other.coeffs)], self.frame)

    def __sub__(self, other):
        self._check(other)
        return PolynomialVectorField([a - b for a, b in zip(self.coeffs, other.coeffs)], self.frame)

    def __neg__(self):
        return PolynomialVectorField([-a for a in self.coeffs], self.frame)

    def scale(self, c):
        """Multiply by a scalar or a polynomial."""
        return PolynomialVectorField([a * c for a in self.coeffs], self.frame)

    def __eq__(self, other):
        if not isinstance(other, PolynomialVectorField):
            return NotImplemented
        return self.frame == other.frame and all(a == b for a, b in zip(self.coeffs, other.coeffs))

    def __hash__(self):
        return hash((self.frame, tuple(self.coeffs)))

    def is_zero(self):
        return all(c.is_zero() for c in self.coeffs)

    def apply(self, f: Poly) -> Poly:
        """Directional derivative ``V f`` (coordinate frame only)."""
        self._require_coordinate()
        out = Poly(self.n)
        for i, c in enumerate(self.coeffs):
            if c:
                d = f.diff(i)
                if d:
                    out = out + c * d
        return out

    def _require_coordinate(self):
        if self.frame != "coordinate":
            raise ValueError("operation needs the coordinate frame; convert first")

    def bracket(self, other: "PolynomialVectorField") -> "PolynomialVectorField":
        """Commutator ``[self, other]`` in the coordinate frame."""
        self._require_coordinate()
        other._require_coordinate()
        return PolynomialVectorField(
            [self.apply(w) - other.apply(v) for v, w in zip(self.coeffs, other.coeffs)])

    def __call__(self, point):
        return [c(point) for c in self.coeffs]

    def evaluator(self) -> PolyEvaluator:
        self._require_coordinate()
        return PolyEvaluator(self.coeffs)

    def to_list(self):
        """Serialisable form: ``[exponents, "p/q", frame index]`` (1-based index)."""
        out = []
        for i, c in enumerate(self.coeffs):
            for e, v in sorted(c.terms.items()):
                out.append([list(e), rational_str(v), i + 1])
        return out

    def to_dict(self):
        return {"frame": self.frame, "n": self.n, "terms": self.to_list()}

    @classmethod
    def from_dict(cls, data):
        n = int(data["n"])
        cs = [dict() for _ in range(n)]
        for exps, c, idx in data["terms"]:
            if len(exps) != n or not 1 <= int(idx) <= n:
                raise ValueError("malformed vector field term")
            key = tuple(int(a) for a in exps)
            cs[int(idx) - 1][key] = cs[int(idx) - 1].get(key, 0) + parse_rational(c)
        return cls([Poly(n, t) for t in cs], data.get("frame", "coordinate"))

    def __repr__(self):
        parts = [f"({c})*{'d' if self.frame == 'coordinate' else 'X'}{i + 1}"
                 for i, c in enumerate(self.coeffs) if c]
        return " + ".join(parts) if parts else "0"
