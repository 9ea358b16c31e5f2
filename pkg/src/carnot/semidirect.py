"""The doubling ``h = g^ab x| g`` and the lifted flows living on it.

``h`` has basis ``Y_i`` (an abelian copy of ``g``) and ``Z_i`` (a copy of
``g``) with

    [Y_i, Y_j] = 0,   [Y_i, Z_j] = sum_k c_ij^k Y_k,   [Z_i, Z_j] = sum_k c_ij^k Z_k.

To keep the basis adapted, the doubled algebra orders each layer as the
``Y``'s of that layer followed by the ``Z``'s of that layer; ``y_index`` and
``z_index`` translate.  Group elements of ``H`` are pairs ``(Y, z)`` with
``Y`` in ``g^ab`` and ``z`` in ``G`` (exponential coordinates), multiplied by
``(Y, z)(Y', z') = (Y + Ad(z) Y', z z')``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .algebra import StratifiedLieAlgebra
from .group import carnot_group, is_exact
from .linalg import as_exact, rank
from .poly import Poly, PolynomialVectorField, compose
from .prolongation import DEFAULT_BUDGET, DEFAULT_CAP, classify_rigidity
from .vector_fields import is_precontact, precontact_space

__all__ = [
    "DoubledAlgebra",
    "TransferReport",
    "double",
    "example_field",
    "first_layer_block",
    "from_exponential",
    "h_inverse",
    "h_multiply",
    "lifted_is_precontact",
    "rigidity_transfer_check",
    "singular_ratio",
    "tau_B",
    "tau_differential",
    "tau_flow",
    "tau_flow_map",
    "tau_lift",
    "to_exponential",
]


class DoubledAlgebra:
    def __init__(self, base: StratifiedLieAlgebra):
        self.base = base
        n = base.n
        self.n = n
        y_index = [0] * n
        z_index = [0] * n
        pos = 0
        for j in range(1, base.step + 1):
            idx = list(base.layer_indices(j))
            for i in idx:
                y_index[i] = pos
                pos += 1
            for i in idx:
                z_index[i] = pos
                pos += 1
        self.y_index = tuple(y_index)
        self.z_index = tuple(z_index)
        labels = [""] * (2 * n)
        for i in range(n):
            labels[y_index[i]] = f"Y_{i + 1}"
            labels[z_index[i]] = f"Z_{i + 1}"
        self.labels = tuple(labels)
        brackets = []
        for (i, j, k, c) in base.triples():
            i, j, k = i - 1, j - 1, k - 1
            brackets.append((z_index[i] + 1, z_index[j] + 1, z_index[k] + 1, c))
            brackets.append((y_index[i] + 1, z_index[j] + 1, y_index[k] + 1, c))
            brackets.append((z_index[i] + 1, y_index[j] + 1, y_index[k] + 1, c))
        name = f"double({base.name})" if base.name else None
        self.doubled = StratifiedLieAlgebra(tuple(2 * d for d in base.layer_dims), brackets, name=name)

    def __repr__(self):
        return f"DoubledAlgebra({self.base!r})"

    # -- coordinate helpers --------------------------------------------------
    def split(self, x):
        """h-vector -> (Y-part, Z-part) as base-indexed lists."""
        return [x[i] for i in self.y_index], [x[i] for i in self.z_index]

    def join(self, Y, Z):
        zero = Fraction(0) if is_exact(list(Y) + list(Z)) else 0.0
        out = [zero] * (2 * self.n)
        for i in range(self.n):
            out[self.y_index[i]] = Y[i]
            out[self.z_index[i]] = Z[i]
        if not isinstance(zero, Fraction):
            return np.asarray(out, dtype=float)
        return out

    def block_permutation(self) -> list[int]:
        """Indices of h in (Y_1..Y_n, Z_1..Z_n) order."""
        return list(self.y_index) + list(self.z_index)

    def to_dict(self):
        return {"base": self.base.to_dict(), "doubled": self.doubled.to_dict(),
                "labels": list(self.labels)}


def double(A: StratifiedLieAlgebra) -> DoubledAlgebra:
    D = A._cache.get("double")
    if D is None:
        D = A._cache["double"] = DoubledAlgebra(A)
    return D


# -- group model -----------------------------------------------------------------
def h_multiply(D: DoubledAlgebra, a, b):
    (Y, z), (Y2, z2) = a, b
    n = D.n
    if any(len(v) != n for v in (Y, z, Y2, z2)):
        raise ValueError(f"components must have {n} coordinates")
    G = carnot_group(D.base)
    Ad = G.adjoint(z)
    if is_exact(list(Y) + list(z) + list(Y2) + list(z2)):
        Y2 = [as_exact(v) for v in Y2]
        moved = [sum((Ad[i, j] * Y2[j] for j in range(n)), Fraction(0)) for i in range(n)]
        return [as_exact(y) + m for y, m in zip(Y, moved)], G.multiply(list(z), list(z2))
    moved = np.asarray(Ad, dtype=float) @ np.asarray(Y2, dtype=float)
    return np.asarray(Y, dtype=float) + moved, G.multiply(np.asarray(z, float), np.asarray(z2, float))


def h_inverse(D: DoubledAlgebra, a):
    Y, z = a
    G = carnot_group(D.base)
    zi = G.inverse(z)
    Ad_inv = G.adjoint(zi)  # Ad(z)^-1 = Ad(z^-1)
    if is_exact(list(Y) + list(z)):
        Y = [as_exact(v) for v in Y]
        return [-sum((Ad_inv[i, j] * Y[j] for j in range(D.n)), Fraction(0)) for i in range(D.n)], zi
    return -(np.asarray(Ad_inv, dtype=float) @ np.asarray(Y, dtype=float)), zi


def to_exponential(D: DoubledAlgebra, a):
    """``(Y, z) -> log(exp(Y) exp(Z-copy of log z))`` in h coordinates."""
    Y, z = a
    H = carnot_group(D.doubled)
    zero = [Fraction(0)] * D.n if is_exact(list(Y) + list(z)) else [0.0] * D.n
    first = D.join(list(Y), zero)
    second = D.join(zero, list(z))
    if is_exact(list(Y) + list(z)):
        return H.bch([as_exact(v) for v in first], [as_exact(v) for v in second])
    return H.multiply_batch(first, second)


def from_exponential(D: DoubledAlgebra, x):
    """Inverse of :func:`to_exponential`; ``Y`` is an ideal, so ``z`` is the Z-part."""
    H = carnot_group(D.doubled)
    _, z = D.split(list(x))
    zero = [Fraction(0)] * D.n if is_exact(list(x)) else [0.0] * D.n
    negz = D.join(zero, [-v for v in z])
    if is_exact(list(x)):
        y = H.bch([as_exact(v) for v in x], negz)
    else:
        y = H.multiply_batch(np.asarray(x, dtype=float), negz)
    Y, _ = D.split(list(y))
    return (Y, z) if is_exact(list(x)) else (np.asarray(Y, dtype=float), np.asarray(z, dtype=float))


# -- lifted fields -----------------------------------------------------------------
def _left_coeffs(D: DoubledAlgebra, V: PolynomialVectorField) -> list[Poly]:
    if V.frame != "left":
        raise ValueError("tau_lift expects a field in the left-invariant frame; use frame_expand first")
    if V.n != D.n:
        raise ValueError("field lives on a different group")
    return list(V.coeffs)


def tau_lift(D: DoubledAlgebra, V: PolynomialVectorField) -> PolynomialVectorField:
    """``tau(V) = sum_i (v_i o pi) Y_i`` in the left frame of ``H`` (h exponential coordinates)."""
    coeffs = _left_coeffs(D, V)
    N = 2 * D.n
    out = [Poly(N) for _ in range(N)]
    for i, v in enumerate(coeffs):
        out[D.y_index[i]] = v.embed(N, list(D.z_index))
    return PolynomialVectorField(out, "left")


def _W(coeffs, z):
    exact = is_exact(list(z))
    pt = [as_exact(v) for v in z] if exact else [float(v) for v in z]
    return [c(pt) for c in coeffs]


def tau_flow(D: DoubledAlgebra, V: PolynomialVectorField, t, a):
    """Closed-form flow ``(Y + t Ad(z) W(z), z)``; global in time."""
    coeffs = _left_coeffs(D, V)
    Y, z = a
    G = carnot_group(D.base)
    W = _W(coeffs, z)
    Ad = G.adjoint(z)
    n = D.n
    if is_exact(list(Y) + list(z)) and isinstance(t, (int, Fraction)):
        t = Fraction(t)
        AW = [sum((Ad[i, j] * W[j] for j in range(n)), Fraction(0)) for i in range(n)]
        return [as_exact(y) + t * w for y, w in zip(Y, AW)], [as_exact(v) for v in z]
    AW = np.asarray(Ad, dtype=float) @ np.asarray(W, dtype=float)
    return np.asarray(Y, dtype=float) + float(t) * AW, np.asarray(z, dtype=float)


def tau_flow_map(D: DoubledAlgebra, V: PolynomialVectorField, t) -> list[Poly]:
    """``Exp(t tau(V))`` as a polynomial self-map of h in exponential coordinates."""
    coeffs = _left_coeffs(D, V)
    t = as_exact(t)
    n, N = D.n, 2 * D.n
    H = carnot_group(D.doubled)
    x = [Poly.var(N, i) for i in range(N)]
    zero = [Poly(N)] * n
    _, z = D.split(x)
    y = H.bch(x, _join_polys(D, zero, [-v for v in z]))
    Y, _ = D.split(y)
    W = compose(coeffs, z)
    Adz = _adjoint_of(D.base, z)
    Ynew = [Y[i] + sum((Adz[i][j] * W[j] for j in range(n)), Poly(N)) * t for i in range(n)]
    return H.bch(_join_polys(D, Ynew, zero), _join_polys(D, zero, z))


def _join_polys(D, Y, Z):
    N = 2 * D.n
    out = [Poly(N)] * N
    for i in range(D.n):
        out[D.y_index[i]] = Y[i]
        out[D.z_index[i]] = Z[i]
    return out


def _adjoint_of(A, z):
    """``exp(ad z)`` for a vector of polynomials."""
    n = A.n
    N = z[0].nvars
    ad = [[A.bracket(z, A.basis_vector(j))[i] for j in range(n)] for i in range(n)]
    result = [[Poly.const(N, int(i == j)) for j in range(n)] for i in range(n)]
    term = [row[:] for row in result]
    for k in range(1, A.step):
        term = [[sum((term[i][r] * ad[r][j] for r in range(n)), Poly(N)) * Fraction(1, k)
                 for j in range(n)] for i in range(n)]
        result = [[a + b for a, b in zip(r1, r2)] for r1, r2 in zip(result, term)]
    return result


def tau_B(D: DoubledAlgebra, V: PolynomialVectorField) -> list[list[Poly]]:
    """``B(z)`` with column ``j`` equal to ``[X_j, W(z)] + (X_j W)(z)`` (polynomials in z)."""
    key = ("tau_B", V)
    if key in D.base._cache:
        return D.base._cache[key]
    coeffs = _left_coeffs(D, V)
    A = D.base
    n = A.n
    left = carnot_group(A).invariant_frame("left")
    B = [[Poly(n) for _ in range(n)] for _ in range(n)]
    for j in range(n):
        adW = A.bracket(A.basis_vector(j), coeffs)
        for i in range(n):
            B[i][j] = adW[i] + left[j].apply(coeffs[i])
    D.base._cache[key] = B
    return B


def tau_differential(D: DoubledAlgebra, V: PolynomialVectorField, t, a, order="h"):
    """Linearised differential of ``Exp(t tau(V))`` at ``(Y, z)``.

    In (Y-block, Z-block) order it is ``[[I, t B(z)], [0, I]]``.  With
    ``order="h"`` (default) rows and columns follow the basis of
    ``D.doubled``; ``order="blocks"`` returns the block layout.
    """
    B = tau_B(D, V)
    Y, z = a
    n = D.n
    exact = is_exact(list(Y) + list(z)) and isinstance(t, (int, Fraction))
    if exact:
        pt = [as_exact(v) for v in z]
        M = np.full((2 * n, 2 * n), Fraction(0), dtype=object)
        for i in range(2 * n):
            M[i, i] = Fraction(1)
        t = Fraction(t)
    else:
        pt = [float(v) for v in z]
        M = np.eye(2 * n)
        t = float(t)
    for i in range(n):
        for j in range(n):
            if B[i][j]:
                M[i, n + j] = t * B[i][j](pt)
    if order == "blocks":
        return M
    perm = D.block_permutation()
    inv = np.argsort(perm)
    return M[np.ix_(inv, inv)]


def first_layer_block(D: DoubledAlgebra, M) -> np.ndarray:
    """Restriction of an h-ordered differential to ``h_-1``."""
    idx = list(D.doubled.layer_indices(1))
    return np.asarray(M, dtype=float)[np.ix_(idx, idx)]


def singular_ratio(M) -> float:
    s = np.linalg.svd(np.asarray(M, dtype=float), compute_uv=False)
    return float(s[0] / s[-1])


def example_field(A: StratifiedLieAlgebra, degree: int = 1) -> PolynomialVectorField:
    """First basis element of the degree-``degree`` precontact space."""
    basis = precontact_space(A, degree)
    if not basis:
        raise ValueError(f"no precontact fields of degree {degree}")
    return basis[0]


# -- rigidity transfer -------------------------------------------------------------
@dataclass
class TransferReport:
    base_verdict: object
    double_verdict: object
    iota_checks: list

    @property
    def consistent(self) -> bool:
        return all(c["rank_h"] == c["rank_g"] for c in self.iota_checks)

    def to_dict(self):
        return {"base": self.base_verdict.to_dict(), "double": self.double_verdict.to_dict(),
                "iota_consistent": self.consistent, "iota_checks": self.iota_checks}


def rigidity_transfer_check(A: StratifiedLieAlgebra, cap: int = DEFAULT_CAP, budget: int = DEFAULT_BUDGET,
                            seed: int = 0, samples: int = 8, strict: bool = True) -> TransferReport:
    """Classify ``A`` and its double, and compare ``rank ad_h(Y)`` with ``rank ad_g(iota Y)``.

    With ``strict`` the base must be rigid; otherwise nonrigid bases are
    accepted and the double is searched for a rank-one witness as usual.
    """
    base = classify_rigidity(A, cap, budget, seed)
    if strict and base.verdict != "rigid":
        raise ValueError(f"base algebra is not known to be rigid ({base.label()})")
    D = double(A)
    dbl = classify_rigidity(D.doubled, cap, budget, seed)
    rng = np.random.default_rng(seed)
    checks = []
    for _ in range(samples):
        Y = [Fraction(int(v)) for v in rng.integers(-3, 4, size=A.n)]
        x = D.join(Y, [Fraction(0)] * A.n)
        rh = rank(D.doubled.ad_matrix(x))
        rg = rank(A.ad_matrix(Y))
        checks.append({"Y": [str(v) for v in Y], "rank_h": rh, "rank_g": rg})
    return TransferReport(base, dbl, checks)


def lifted_is_precontact(D: DoubledAlgebra, V: PolynomialVectorField):
    return is_precontact(D.doubled, tau_lift(D, V))

