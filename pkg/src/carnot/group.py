"""Group operations in exponential coordinates of the first kind.

``exp(x_1 X_1 + ... + x_n X_n)`` is identified with its coordinate vector,
so ``log`` and ``exp`` are the identity on coordinates.  The group law is the
Baker-Campbell-Hausdorff polynomial, built once per algebra from Dynkin's
commutator series truncated at the step; exact inputs give exact outputs.

Metric quantities use the Nagel-Stein-Wainger pseudonorm
``P(X) = (sum_k |pi_k X|^(2 l!/k))^(1/(2 l!))`` for the standard inner
product on the adapted basis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .algebra import StratifiedLieAlgebra
from .linalg import Gaussian, as_exact, rank
from .poly import Poly, PolyEvaluator, PolynomialVectorField, compose, jacobian

__all__ = [
    "CarnotGroup",
    "ContactReport",
    "automorphism_characterizations",
    "carnot_group",
    "dynkin_words",
    "is_automorphism",
    "is_exact",
    "linear_map",
    "translation_map",
]


def is_exact(values) -> bool:
    return all(isinstance(v, (Fraction, int, Gaussian)) and not isinstance(v, bool)
               for v in values)


@lru_cache(maxsize=None)
def dynkin_words(step: int) -> tuple:
    """Words in X (0) and Y (1) with their Dynkin coefficients, length 2..step.

    The coefficient of the right-nested bracket of a word of length N is
    the sum over splittings of the word into blocks ``X^r Y^s`` of
    ``(-1)^(k-1) / (k N prod r_i! s_i!)``.
    """
    out = []
    for N in range(2, step + 1):
        for code in range(2 ** N):
            word = tuple((code >> (N - 1 - b)) & 1 for b in range(N))
            if word[-1] == word[-2]:
                continue  # innermost bracket [a, a] vanishes
            total = Fraction(0)
            for k, weight in _splittings(word):
                total += Fraction((-1) ** (k - 1), k * N) * weight
            if total:
                out.append((word, total))
    return tuple(out)


def _splittings(word):
    """Yield ``(number of blocks, prod 1/(r! s!))`` over block decompositions."""
    n = len(word)

    def rec(pos):
        if pos == n:
            yield 0, Fraction(1)
            return
        end = pos
        # a block is X^r Y^s: extend while the word does not go Y -> X
        while end < n:
            if end > pos and word[end - 1] == 1 and word[end] == 0:
                break
            end += 1
            block = word[pos:end]
            r = block.count(0)
            s = block.count(1)
            w = Fraction(1, math.factorial(r) * math.factorial(s))
            for k, rest in rec(end):
                yield k + 1, w * rest

    yield from rec(0)


@dataclass
class ContactReport:
    is_contact: bool
    witness: dict | None = None
    singular_points: list = field(default_factory=list)

    def to_dict(self):
        return {"is_contact": self.is_contact, "witness": self.witness,
                "singular_points": self.singular_points}


def translation_map(group: "CarnotGroup", q) -> list[Poly]:
    """Left translation ``x -> q x`` as a polynomial map."""
    n = group.n
    q = [as_exact(v) for v in q]
    fixed = {i: q[i] for i in range(n)}
    return [m.restrict(list(range(n, 2 * n)), fixed) for m in group.law]


def linear_map(M) -> list[Poly]:
    """``x -> M x`` as a polynomial map (M exact)."""
    M = np.asarray(M, dtype=object)
    n = M.shape[1]
    return [sum((Poly.var(n, j, as_exact(M[i, j])) for j in range(n) if M[i, j]), Poly(n))
            for i in range(M.shape[0])]


def _matmul(A, B):
    """Product of nested lists; entries may be Polys."""
    rows, inner, cols = len(A), len(B), len(B[0])
    out = []
    for i in range(rows):
        row = []
        for j in range(cols):
            acc = None
            for k in range(inner):
                a, b = A[i][k], B[k][j]
                if not a or not b:
                    continue
                t = a * b
                acc = t if acc is None else acc + t
            row.append(acc)
        out.append(row)
    return out


class CarnotGroup:
    """Group layer of a stratified algebra: law, adjoint, frames, pseudometric."""

    def __init__(self, algebra: StratifiedLieAlgebra):
        self.algebra = algebra
        self.n = algebra.n
        self.step = algebra.step
        self.weights = algebra.weights
        self._law = None
        self._law_eval = None
        self._frames = {}

    # -- BCH ---------------------------------------------------------------
    def bch(self, X, Y):
        """``log(exp X exp Y)`` via Dynkin's series; generic over the entry ring."""
        A = self.algebra
        if len(X) != self.n or len(Y) != self.n:
            raise ValueError(f"bch expects vectors of length {self.n}")
        out = [x + y for x, y in zip(X, Y)]
        memo = {}

        def nested(word):
            if word in memo:
                return memo[word]
            if len(word) == 1:
                v = X if word[0] == 0 else Y
            else:
                v = A.bracket(X if word[0] == 0 else Y, nested(word[1:]))
            memo[word] = v
            return v

        for word, coeff in dynkin_words(self.step):
            term = nested(word)
            out = [o + t * coeff if t else o for o, t in zip(out, term)]
        return out

    @property
    def law(self) -> list[Poly]:
        """BCH as ``n`` polynomials in ``2n`` variables (x then y)."""
        if self._law is None:
            n = self.n
            X = [Poly.var(2 * n, i) for i in range(n)]
            Y = [Poly.var(2 * n, n + i) for i in range(n)]
            self._law = self.bch(X, Y)
        return self._law

    def multiply(self, p, q):
        """Group product; exact on exact input, vectorised over a leading batch axis on floats."""
        if len(p) != self.n or len(q) != self.n:
            raise ValueError(f"group elements have {self.n} coordinates")
        if is_exact(p) and is_exact(q):
            pt = [as_exact(v) for v in p] + [as_exact(v) for v in q]
            return [m(pt) for m in self.law]
        return self.multiply_batch(np.asarray(p, dtype=float), np.asarray(q, dtype=float))

    def multiply_batch(self, P, Q):
        """Float product on arrays of shape ``(n,)`` or ``(batch, n)``; broadcasts."""
        if self._law_eval is None:
            self._law_eval = PolyEvaluator(self.law)
        P = np.asarray(P, dtype=float)
        Q = np.asarray(Q, dtype=float)
        single = P.ndim == 1 and Q.ndim == 1
        P2, Q2 = np.broadcast_arrays(np.atleast_2d(P), np.atleast_2d(Q))
        out = self._law_eval(np.concatenate([P2, Q2], axis=1))
        return out[0] if single else out

    def inverse(self, p):
        return [-v for v in p] if is_exact(p) else -np.asarray(p, dtype=float)

    def identity(self):
        return [Fraction(0)] * self.n

    def dilate(self, p, s):
        if is_exact(p) and isinstance(s, (int, Fraction)):
            return [v * Fraction(s) ** w for v, w in zip(p, self.weights)]
        scale = np.array([float(s) ** w for w in self.weights])
        return np.asarray(p, dtype=float) * scale

    # -- adjoint -----------------------------------------------------------
    def adjoint(self, z) -> np.ndarray:
        """``Ad(z) = exp(ad(log z))``, a finite sum by nilpotency."""
        A = self.algebra
        exact = is_exact(z)
        if exact:
            ad = A.ad_matrix([as_exact(v) for v in z])
            result = np.empty((self.n, self.n), dtype=object)
            result[...] = Fraction(0)
            for i in range(self.n):
                result[i, i] = Fraction(1)
        else:
            ad = A.ad_matrix([float(v) for v in z]).astype(float)
            result = np.eye(self.n)
        term = result.copy()
        for k in range(1, self.step):
            term = term.dot(ad)
            term = term * (Fraction(1, k) if exact else 1.0 / k)
            result = result + term
        return result

    def adjoint_polys(self, nvars=None, offset=0) -> list[list[Poly]]:
        """``Ad(z)`` with polynomial entries in the variables ``z``.

        ``z_i`` is variable ``offset + i`` of a ring with ``nvars`` variables.
        """
        nvars = nvars or self.n
        key = ("adjoint_polys", nvars, offset)
        if key not in self._frames:
            z = [Poly.var(nvars, offset + i) for i in range(self.n)]
            ad = self.algebra.ad_matrix(z).tolist()
            one = Poly.const(nvars, 1)
            result = [[one if i == j else Poly(nvars) for j in range(self.n)] for i in range(self.n)]
            term = [row[:] for row in result]
            for k in range(1, self.step):
                term = _matmul(term, ad)
                term = [[(t * Fraction(1, k)) if t is not None else Poly(nvars) for t in row]
                        for row in term]
                result = [[a + b for a, b in zip(r1, r2)] for r1, r2 in zip(result, term)]
            self._frames[key] = result
        return self._frames[key]

    # -- invariant frames -------------------------------------------------
    def frame_polys(self, side="left") -> list[list[Poly]]:
        """``F[i][j]``: coefficient of ``d/dx_j`` in the i-th left (or right) invariant field."""
        if side not in ("left", "right"):
            raise ValueError("side must be 'left' or 'right'")
        if side not in self._frames:
            n = self.n
            if side == "left":
                keep = list(range(n))
                F = [[m.diff(n + i).restrict(keep) for m in self.law] for i in range(n)]
            else:
                keep = list(range(n, 2 * n))
                F = [[-m.diff(i).restrict(keep) for m in self.law] for i in range(n)]
            self._frames[side] = F
        return self._frames[side]

    def invariant_frame(self, side="left") -> list[PolynomialVectorField]:
        """Left fields agree with ``X_i`` at e; right fields agree with ``-X_i``."""
        return [PolynomialVectorField(row) for row in self.frame_polys(side)]

    def frame_matrix(self) -> list[list[Poly]]:
        """``L(x)`` whose column ``i`` is the left field ``X_i`` at ``x``."""
        F = self.frame_polys("left")
        return [[F[i][j] for i in range(self.n)] for j in range(self.n)]

    def frame_matrix_inverse(self) -> list[list[Poly]]:
        """Polynomial inverse of :meth:`frame_matrix` (unipotent, Neumann series)."""
        if "left_inverse" not in self._frames:
            n = self.n
            L = self.frame_matrix()
            one = Poly.const(n, 1)
            N = [[(L[i][j] - one) if i == j else L[i][j] for j in range(n)] for i in range(n)]
            negN = [[-e for e in row] for row in N]
            result = [[one if i == j else Poly(n) for j in range(n)] for i in range(n)]
            term = [row[:] for row in result]
            for _ in range(self.step):
                term = [[t if t is not None else Poly(n) for t in row] for row in _matmul(term, negN)]
                if all(t.is_zero() for row in term for t in row):
                    break
                result = [[a + b for a, b in zip(r1, r2)] for r1, r2 in zip(result, term)]
            self._frames["left_inverse"] = result
        return self._frames["left_inverse"]

    def frame_evaluators(self):
        """Float evaluators for ``L(x)`` and ``L(x)^-1`` flattened row-major."""
        if "evaluators" not in self._frames:
            L = self.frame_matrix()
            Li = self.frame_matrix_inverse()
            self._frames["evaluators"] = (
                PolyEvaluator([e for row in L for e in row]),
                PolyEvaluator([e for row in Li for e in row]))
        return self._frames["evaluators"]

    # -- pseudometric ------------------------------------------------------
    def nsw_norm(self, X) -> float:
        """NSW pseudonorm; squared layer norms are summed exactly on exact input."""
        ell = self.step
        L = math.factorial(ell)
        if is_exact(X):
            total = Fraction(0)
            for k in range(1, ell + 1):
                sq = sum((Fraction(X[i]) ** 2 for i in self.algebra.layer_indices(k)), Fraction(0))
                total += sq ** (L // k)
            if total == 0:
                return 0.0
            return math.exp((math.log(total.numerator) - math.log(total.denominator)) / (2 * L))
        return float(self.nsw_norm_batch(np.asarray(X, dtype=float)))

    def nsw_norm_batch(self, X):
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        Xb = np.atleast_2d(X)
        L = math.factorial(self.step)
        radii = []
        for k in range(1, self.step + 1):
            idx = list(self.algebra.layer_indices(k))
            block = np.abs(Xb[:, idx])
            top = block.max(axis=1)
            unit = np.where(top > 0, top, 1.0)
            # scaled so that huge coordinates do not overflow when squared
            norm = top * np.sqrt(np.sum((block / unit[:, None]) ** 2, axis=1))
            radii.append(norm ** (1.0 / k))
        R = np.stack(radii, axis=1)
        M = R.max(axis=1)
        safe = np.where(M > 0, M, 1.0)
        out = M * np.sum((R / safe[:, None]) ** (2 * L), axis=1) ** (1.0 / (2 * L))
        out = np.where(M > 0, out, 0.0)
        return out[0] if single else out

    def nsw_distance(self, p, q) -> float:
        """``P(log(q^-1 p))``."""
        if is_exact(p) and is_exact(q):
            return self.nsw_norm(self.multiply(self.inverse(q), p))
        return float(self.nsw_distance_batch(p, q))

    def nsw_distance_batch(self, P, Q):
        P = np.asarray(P, dtype=float)
        Q = np.asarray(Q, dtype=float)
        return self.nsw_norm_batch(self.multiply_batch(-Q, P))

    # -- contact maps and Pansu differential --------------------------------
    def linearized_differential(self, f: list[Poly]) -> list[list[Poly]]:
        """Symbolic ``L(f(x))^-1 Jf(x) L(x)`` for a polynomial self-map ``f``."""
        n = self.n
        if len(f) != n or any(p.nvars != n for p in f):
            raise ValueError(f"expected {n} polynomials in {n} variables")
        Li = self.frame_matrix_inverse()
        flat = compose([e for row in Li for e in row], f)
        Li_f = [flat[i * n:(i + 1) * n] for i in range(n)]
        J = jacobian(f)
        M = _matmul(_matmul(Li_f, J), self.frame_matrix())
        return [[e if e is not None else Poly(n) for e in row] for row in M]

    def is_contact_map(self, f: list[Poly], samplepoints=()) -> ContactReport:
        """Symbolic test that the differential keeps layer 1 inside layer 1."""
        n = self.n
        d1 = self.algebra.layer_dims[0]
        singular = []
        J = jacobian(f)
        for pt in samplepoints:
            pt = [as_exact(v) for v in pt]
            Jp = np.array([[e(pt) for e in row] for row in J], dtype=object)
            if rank(Jp) < n:
                singular.append([str(v) for v in pt])
        D = self.linearized_differential(f)
        for i in range(d1, n):
            for j in range(d1):
                entry = D[i][j]
                if entry.is_zero():
                    continue
                candidates = [list(map(as_exact, p)) for p in samplepoints]
                candidates += [[Fraction(k + 1 + (i * 7 + j * 3 + t) % 5) for t in range(n)]
                               for k in range(8)]
                for pt in candidates:
                    val = entry(pt)
                    if val:
                        return ContactReport(False, {"row": i + 1, "col": j + 1,
                                                     "point": [str(v) for v in pt],
                                                     "value": str(val)}, singular)
                return ContactReport(False, {"row": i + 1, "col": j + 1, "point": None,
                                             "value": repr(entry)}, singular)
        return ContactReport(True, None, singular)

    def pansu_differential(self, f: list[Poly], p) -> np.ndarray:
        """Block-diagonal part of the linearised differential at ``p``."""
        report = self.is_contact_map(f)
        if not report.is_contact:
            raise ValueError(f"map is not contact: {report.witness}")
        D = self.linearized_differential(f)
        exact = is_exact(p)
        pt = [as_exact(v) for v in p] if exact else [float(v) for v in p]
        out = np.empty((self.n, self.n), dtype=object if exact else float)
        for i in range(self.n):
            for j in range(self.n):
                same = self.weights[i] == self.weights[j]
                out[i, j] = D[i][j](pt) if same else (Fraction(0) if exact else 0.0)
                if exact and not isinstance(out[i, j], Fraction):
                    out[i, j] = Fraction(out[i, j])
        return out

    def linearized_from_jacobian(self, J, p, fp):
        """Numeric ``L(f(p))^-1 J L(p)`` from a coordinate Jacobian."""
        Lev, Liev = self.frame_evaluators()
        n = self.n
        Lp = Lev(np.asarray(p, dtype=float)).reshape(n, n)
        Lif = Liev(np.asarray(fp, dtype=float)).reshape(n, n)
        return Lif @ np.asarray(J, dtype=float) @ Lp


def automorphism_characterizations(algebra: StratifiedLieAlgebra, M) -> dict:
    """For a Lie algebra automorphism ``M``: contact / keeps g_-1 / keeps every layer / commutes with delta_2."""
    A = algebra
    M = np.asarray(M, dtype=object)
    n = A.n
    d1 = A.layer_dims[0]
    keeps_first = all(M[i, j] == 0 for i in range(d1, n) for j in range(d1))
    keeps_layers = all(M[i, j] == 0 for i in range(n) for j in range(n) if A.weights[i] != A.weights[j])
    delta = A.dilation_matrix(2)
    commutes = bool(np.all(M.dot(delta) == delta.dot(M)))
    contact = carnot_group(A).is_contact_map(linear_map(M)).is_contact
    return {"contact": contact, "preserves_first_layer": keeps_first,
            "preserves_layers": keeps_layers, "commutes_with_dilations": commutes}


def is_automorphism(algebra: StratifiedLieAlgebra, M) -> bool:
    M = np.asarray(M, dtype=object)
    A = algebra
    for i in range(A.n):
        for j in range(i + 1, A.n):
            lhs = M.dot(np.array(A.bracket(A.basis_vector(i), A.basis_vector(j)), dtype=object))
            rhs = A.bracket(list(M[:, i]), list(M[:, j]))
            if any(a != b for a, b in zip(lhs, rhs)):
                return False
    return True


def carnot_group(algebra: StratifiedLieAlgebra) -> CarnotGroup:
    """Cached :class:`CarnotGroup` for an algebra instance."""
    g = algebra._cache.get("group")
    if g is None:
        g = algebra._cache["group"] = CarnotGroup(algebra)
    return g
