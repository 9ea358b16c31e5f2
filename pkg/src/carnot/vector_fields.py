"""Polynomial vector fields on a Carnot group: frames, degrees, precontact fields.

A field ``p_i x^a d/dx_i`` has homogeneous degree ``wdeg(x^a) - w(i)``
where ``w(i)`` is the layer of coordinate ``i``; the same bookkeeping holds
in the left-invariant frame.  A field is precontact when its bracket with
every horizontal left-invariant field stays horizontal.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .algebra import StratifiedLieAlgebra
from .group import carnot_group
from .linalg import Echelon
from .poly import Poly, PolynomialVectorField, compose

__all__ = [
    "HomogeneousPart",
    "PrecontactReport",
    "frame_expand",
    "from_left",
    "grading_field",
    "homogeneous_parts",
    "in_span",
    "is_homogeneous",
    "is_precontact",
    "left_field",
    "linear_field",
    "monomials",
    "precontact_space",
    "right_field",
    "to_coordinate",
    "vf_bracket",
]


@dataclass
class HomogeneousPart:
    degree: int
    field: PolynomialVectorField


@dataclass
class PrecontactReport:
    is_precontact: bool
    horizontal_index: int | None = None
    vertical_index: int | None = None
    coefficient: Poly | None = None

    def __bool__(self):
        return self.is_precontact


def monomials(weights, degree):
    """Exponent tuples of the given weighted degree, in lexicographic order."""
    n = len(weights)
    if degree < 0:
        return []
    out = []

    def rec(i, remaining, acc):
        if i == n:
            if remaining == 0:
                out.append(tuple(acc))
            return
        for a in range(remaining // weights[i] + 1):
            acc.append(a)
            rec(i + 1, remaining - a * weights[i], acc)
            acc.pop()

    rec(0, degree, [])
    return sorted(out, reverse=True)


def to_coordinate(A: StratifiedLieAlgebra, V: PolynomialVectorField) -> PolynomialVectorField:
    if V.frame == "coordinate":
        return V
    F = carnot_group(A).frame_polys("left")
    n = A.n
    out = [Poly(n) for _ in range(n)]
    for i, q in enumerate(V.coeffs):
        if q:
            for j in range(n):
                if F[i][j]:
                    out[j] = out[j] + q * F[i][j]
    return PolynomialVectorField(out)


def frame_expand(A: StratifiedLieAlgebra, V: PolynomialVectorField) -> PolynomialVectorField:
    """Coefficients of ``V`` on the left-invariant frame."""
    if V.frame == "left":
        return V
    Li = carnot_group(A).frame_matrix_inverse()
    n = A.n
    out = []
    for i in range(n):
        acc = Poly(n)
        for j, v in enumerate(V.coeffs):
            if v and Li[i][j]:
                acc = acc + Li[i][j] * v
        out.append(acc)
    return PolynomialVectorField(out, "left")


def from_left(A, coeffs) -> PolynomialVectorField:
    return to_coordinate(A, PolynomialVectorField(coeffs, "left"))


def vf_bracket(A, V, W) -> PolynomialVectorField:
    """Commutator in the coordinate frame."""
    return to_coordinate(A, V).bracket(to_coordinate(A, W))


def homogeneous_parts(A: StratifiedLieAlgebra, V: PolynomialVectorField) -> list[HomogeneousPart]:
    w = A.weights
    buckets: dict[int, list[dict]] = {}
    for i, c in enumerate(V.coeffs):
        for e, v in c.terms.items():
            d = sum(a * b for a, b in zip(w, e)) - w[i]
            buckets.setdefault(d, [dict() for _ in range(A.n)])[i][e] = v
    return [HomogeneousPart(d, PolynomialVectorField([Poly(A.n, t) for t in parts], V.frame))
            for d, parts in sorted(buckets.items())]


def is_homogeneous(A: StratifiedLieAlgebra, V: PolynomialVectorField, degree: int) -> bool:
    """Formal check of ``(delta_s)_* V_p = s^-degree V_{delta_s p}`` with ``s`` a variable."""
    V = to_coordinate(A, V)
    n = A.n
    s = Poly.var(n + 1, n)
    scaled = [Poly.var(n + 1, j) * s ** w for j, w in enumerate(A.weights)]
    for i, c in enumerate(V.coeffs):
        rhs = compose([c], scaled)[0]  # v_i(delta_s x)
        shift = A.weights[i] + degree
        if shift < 0:
            lhs_terms = c.embed(n + 1, list(range(n)))
            if rhs * s ** (-shift) != lhs_terms:
                return False
        elif c.embed(n + 1, list(range(n))) * s ** shift != rhs:
            return False
    return True


def right_field(A, i) -> PolynomialVectorField:
    return carnot_group(A).invariant_frame("right")[i]


def left_field(A, i) -> PolynomialVectorField:
    return carnot_group(A).invariant_frame("left")[i]


def grading_field(A) -> PolynomialVectorField:
    """``sum_i w(i) x_i d/dx_i``; its flow at time t is the dilation by ``e^t``."""
    n = A.n
    return PolynomialVectorField([Poly.var(n, i, w) for i, w in enumerate(A.weights)])


def linear_field(D) -> PolynomialVectorField:
    """``x -> D x``; for a derivation D its flow is the automorphism ``exp(tD)``."""
    n = len(D)
    return PolynomialVectorField(
        [sum((Poly.var(n, j, D[i][j]) for j in range(n) if D[i][j]), Poly(n)) for i in range(n)])


def is_precontact(A: StratifiedLieAlgebra, V: PolynomialVectorField) -> PrecontactReport:
    """Exact test: ``[X_j, V]`` has no vertical left-frame component for horizontal ``X_j``."""
    d1 = A.layer_dims[0]
    left = carnot_group(A).invariant_frame("left")
    Vc = to_coordinate(A, V)
    for j in range(d1):
        br = frame_expand(A, left[j].bracket(Vc))
        for i in range(d1, A.n):
            if br.coeffs[i]:
                return PrecontactReport(False, j + 1, i + 1, br.coeffs[i])
    return PrecontactReport(True)


def precontact_space(A: StratifiedLieAlgebra, k: int) -> list[PolynomialVectorField]:
    """Basis of homogeneous degree-``k`` precontact fields, in the left frame.

    Writes ``V = sum_i p_i X_i`` with ``p_i`` homogeneous of weighted degree
    ``k + w(i)``.  For horizontal ``X_j``,
    ``[X_j, m X_i] = X_j(m) X_i + m sum_l c_ji^l X_l``, so horizontality is a
    linear condition on the coefficients of the ``p_i``.  The basis is the
    reduced echelon kernel basis of that system.
    """
    if k < -A.step:
        return []
    n = A.n
    w = A.weights
    d1 = A.layer_dims[0]
    F = carnot_group(A).frame_polys("left")
    unknowns = [(i, e) for i in range(n) for e in monomials(w, k + w[i])]
    if not unknowns:
        return []
    rows: dict[tuple, dict[int, Fraction]] = {}

    def add(key, u, val):
        row = rows.setdefault(key, {})
        v = row.get(u, 0) + val
        if v:
            row[u] = v
        else:
            row.pop(u, None)

    deriv_cache = {}
    for u, (i, e) in enumerate(unknowns):
        m = Poly(n, {e: 1})
        for j in range(d1):
            if i >= d1:
                key = (j, e)
                if key not in deriv_cache:
                    acc = Poly(n)
                    for r in range(n):
                        if F[j][r]:
                            acc = acc + F[j][r] * m.diff(r)
                    deriv_cache[key] = acc
                for mono, val in deriv_cache[key].terms.items():
                    add((j, i, mono), u, val)
            for l in range(d1, n):
                c = A.c(j, i, l)
                if c:
                    add((j, l, e), u, c)
    ech = Echelon(len(unknowns))
    for key in sorted(rows):
        if rows[key]:
            ech.add(rows[key])
    basis = []
    for vec in ech.kernel():
        coeffs = [dict() for _ in range(n)]
        for u, val in vec.items():
            i, e = unknowns[u]
            coeffs[i][e] = val
        basis.append(PolynomialVectorField([Poly(n, t) for t in coeffs], "left"))
    return basis


def in_span(A, fields, V) -> bool:
    """Exact membership of ``V`` in the span of ``fields`` (coordinate comparison)."""
    cols = [to_coordinate(A, f) for f in fields]
    target = to_coordinate(A, V)
    keys = sorted({(i, e) for f in cols + [target] for i, c in enumerate(f.coeffs) for e in c.terms})
    index = {key: r for r, key in enumerate(keys)}
    m = len(cols)
    ech = Echelon(m + 1)
    rows = [dict() for _ in keys]
    for col, f in enumerate(cols + [target]):
        for i, c in enumerate(f.coeffs):
            for e, v in c.terms.items():
                rows[index[(i, e)]][col] = v
    for r in rows:
        ech.add(r)
    return m not in ech.rows
