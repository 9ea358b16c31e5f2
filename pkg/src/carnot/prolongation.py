"""Tanaka prolongation, strata-preserving derivations and rigidity.

An element ``u`` of ``g_k`` (``k >= 0``) is stored by its values on the
basis of ``g_-``: ``u(X_b)`` lies in ``g_{k - w(b)}`` and is kept as a tuple
of coordinates, either in a layer of ``g`` (negative degree) or in the
stored basis of an earlier prolongation layer.  Every ``g_k``, including
``g_0``, is the kernel of the full Leibniz system on all basis pairs, so the
bases are deterministic reduced-echelon kernel bases.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy.optimize import minimize

from .algebra import StratifiedLieAlgebra
from .linalg import Echelon, Gaussian, parse_rational, rank, rational_str

__all__ = [
    "GradedMap",
    "ProlongationResult",
    "RankOneResult",
    "RigidityVerdict",
    "cached_prolong",
    "classify_rigidity",
    "derivation_matrix",
    "grading_derivation",
    "prol_bracket",
    "prolong",
    "rank_one_search",
    "strata_derivations",
]

DEFAULT_CAP = 6
DEFAULT_BUDGET = 64


@dataclass(frozen=True)
class GradedMap:
    """Degree-``k`` element; ``cols[b]`` are the coordinates of ``u(X_b)``."""

    degree: int
    cols: tuple

    def blocks(self, A: StratifiedLieAlgebra) -> list[np.ndarray]:
        """Block ``j-1`` is the matrix of ``g_{-j} -> g_{k-j}`` (columns = layer-j basis)."""
        out = []
        for j in range(1, A.step + 1):
            idx = list(A.layer_indices(j))
            rows = len(self.cols[idx[0]])
            M = np.empty((rows, len(idx)), dtype=object)
            for c, b in enumerate(idx):
                for r in range(rows):
                    M[r, c] = self.cols[b][r]
            out.append(M)
        return out

    def flat(self) -> tuple:
        return tuple(x for col in self.cols for x in col)

    def is_zero(self) -> bool:
        return not any(self.flat())

    def to_dict(self):
        return {"degree": self.degree,
                "cols": [[rational_str(x) for x in col] for col in self.cols]}

    @classmethod
    def from_dict(cls, data):
        return cls(int(data["degree"]),
                   tuple(tuple(parse_rational(x) for x in col) for col in data["cols"]))


class ProlongationResult:
    """Computed layers ``g_0 .. g_top`` together with the bracket machinery."""

    def __init__(self, algebra: StratifiedLieAlgebra, cap: int):
        self.algebra = algebra
        self.cap = cap
        self.layers: dict[int, list[GradedMap]] = {}
        self._free: dict[int, list[int]] = {}
        self._basis_br: dict = {}
        self.status = "cap_reached"
        self.m: int | None = None

    # -- shape bookkeeping ---------------------------------------------------
    @property
    def top(self) -> int:
        return max(self.layers) if self.layers else -1

    def dim(self, degree: int) -> int:
        A = self.algebra
        if degree < 0:
            j = -degree
            return A.layer_dims[j - 1] if j <= A.step else 0
        if degree not in self.layers:
            if self.status == "finite" and degree > self.top:
                return 0
            raise ValueError(f"layer g_{degree} has not been computed")
        return len(self.layers[degree])

    @property
    def dims(self) -> dict[int, int]:
        A = self.algebra
        d = {-j: A.layer_dims[j - 1] for j in range(A.step, 0, -1)}
        d.update({k: len(v) for k, v in sorted(self.layers.items())})
        return d

    @property
    def total_dimension(self) -> int:
        return sum(self.dims.values())

    def label(self) -> str:
        return f"finite({self.m})" if self.status == "finite" else "cap_reached"

    # -- elements and coordinates -------------------------------------------
    def element(self, degree: int, coords) -> GradedMap:
        """The combination ``sum_r coords[r] * basis_r`` of ``g_degree``."""
        basis = self.layers.get(degree, [])
        n = self.algebra.n
        cols = []
        for b in range(n):
            width = self.dim(degree - self.algebra.weights[b])
            col = [Fraction(0)] * width
            for c, e in zip(coords, basis):
                if c:
                    for r, v in enumerate(e.cols[b]):
                        col[r] += c * v
            cols.append(tuple(col))
        return GradedMap(degree, tuple(cols))

    def coords(self, u: GradedMap) -> tuple:
        """Coordinates of ``u`` in the stored basis; raises if ``u`` is not in ``g_k``."""
        k = u.degree
        flat = u.flat()
        coords = tuple(flat[f] for f in self._free[k])
        if self.element(k, coords).flat() != flat:
            raise ValueError(f"map is not an element of g_{k}")
        return coords

    def _table(self, m: int, s: int, b: int) -> tuple:
        """Coordinates of ``[e_s, X_b]`` in degree ``m - w(b)``, ``e_s`` the s-th basis vector of degree m."""
        A = self.algebra
        if m >= 0:
            return self.layers[m][s].cols[b]
        target = m - A.weights[b]
        width = self.dim(target)
        if width == 0:
            return ()
        i = A.offsets[-m - 1] + s
        off = A.offsets[-target - 1]
        out = [Fraction(0)] * width
        for k, c in A.structure(i, b).items():
            out[k - off] = c
        return tuple(out)

    def br(self, k: int, u, m: int, z) -> tuple:
        """Bracket of homogeneous coordinate vectors of degrees ``k`` and ``m``."""
        width = self.dim(k + m)
        out = [Fraction(0)] * width
        if width == 0:
            return ()
        A = self.algebra
        if k < 0 and m < 0:
            off = A.offsets[-m - 1]
            for s, zs in enumerate(z):
                if zs:
                    for r, ur in enumerate(u):
                        if ur:
                            col = self._table(k, r, off + s)
                            for t, v in enumerate(col):
                                out[t] += ur * zs * v
            return tuple(out)
        if k < 0:
            return tuple(-x for x in self.br(m, z, k, u))
        if m < 0:
            off = A.offsets[-m - 1]
            for r, ur in enumerate(u):
                if ur:
                    for s, zs in enumerate(z):
                        if zs:
                            for t, v in enumerate(self.layers[k][r].cols[off + s]):
                                out[t] += ur * zs * v
            return tuple(out)
        for r, ur in enumerate(u):
            if ur:
                for s, zs in enumerate(z):
                    if zs:
                        for t, v in enumerate(self._bracket_basis(k, r, m, s)):
                            out[t] += ur * zs * v
        return tuple(out)

    def _bracket_basis(self, k, r, m, s) -> tuple:
        key = (k, r, m, s)
        if key not in self._basis_br:
            U = self.layers[k][r]
            Z = self.layers[m][s]
            cols = []
            for b, w in enumerate(self.algebra.weights):
                # [[U, Z], X] = [U, [Z, X]] - [Z, [U, X]]
                t1 = self.br(k, self._unit(k, r), m - w, Z.cols[b])
                t2 = self.br(m, self._unit(m, s), k - w, U.cols[b])
                cols.append(tuple(a - c for a, c in zip(t1, t2)))
            d = k + m
            self._basis_br[key] = self.coords(GradedMap(d, tuple(cols))) if self.dim(d) else ()
        return self._basis_br[key]

    def _unit(self, k, r) -> tuple:
        return tuple(Fraction(int(i == r)) for i in range(self.dim(k)))

    # -- checks ----------------------------------------------------------------
    def leibniz_defect(self, u: GradedMap):
        """First basis pair ``(a, b)`` (1-based) where Leibniz fails, else None."""
        A = self.algebra
        k = u.degree
        n = A.n
        for a in range(n):
            for b in range(a + 1, n):
                t = k - A.weights[a] - A.weights[b]
                if self.dim(t) == 0:
                    continue
                lhs = [Fraction(0)] * self.dim(t)
                for c, coef in A.structure(a, b).items():
                    for r, v in enumerate(u.cols[c]):
                        lhs[r] += coef * v
                wa, wb = A.weights[a], A.weights[b]
                rhs1 = self.br(k - wa, u.cols[a], -wb, _unit_layer(A, b))
                rhs2 = self.br(-wa, _unit_layer(A, a), k - wb, u.cols[b])
                if tuple(lhs) != tuple(x + y for x, y in zip(rhs1, rhs2)):
                    return (a + 1, b + 1)
        return None

    def restriction_rank(self, k: int) -> int:
        """Rank of ``u -> u|g_{-1}`` on ``g_k``; equals ``dim g_k`` exactly when (P2) holds."""
        idx = list(self.algebra.layer_indices(1))
        rows = [[x for b in idx for x in e.cols[b]] for e in self.layers[k]]
        return rank(np.array(rows, dtype=object)) if rows else 0

    # -- serialization -----------------------------------------------------------
    def to_dict(self, with_basis=True):
        out = {"algebra_hash": self.algebra.cache_key(), "cap": self.cap,
               "status": self.label(), "dims": {str(k): v for k, v in self.dims.items()}}
        if with_basis:
            out["layers"] = {str(k): [e.to_dict()["cols"] for e in v]
                             for k, v in sorted(self.layers.items())}
        return out

    @classmethod
    def from_dict(cls, algebra, data):
        if data.get("algebra_hash") != algebra.cache_key():
            raise ValueError("cached prolongation belongs to a different algebra")
        P = cls(algebra, int(data["cap"]))
        for k, elems in sorted(((int(k), v) for k, v in data["layers"].items())):
            P.layers[k] = [GradedMap.from_dict({"degree": k, "cols": c}) for c in elems]
            P._free[k] = _free_columns(P.layers[k])
        status = data["status"]
        if status.startswith("finite"):
            P.status = "finite"
            P.m = int(status[len("finite("):-1])
        return P


def _unit_layer(A, b) -> tuple:
    """Coordinates of ``X_b`` inside its own layer."""
    j = A.weights[b]
    return tuple(Fraction(int(i == b)) for i in A.layer_indices(j))


def _free_columns(basis) -> list[int]:
    # reduced echelon kernel basis: each vector has a 1 at its own free column
    free = []
    for i, e in enumerate(basis):
        flat = e.flat()
        free.append(next(c for c, v in enumerate(flat)
                         if v == 1 and all(o.flat()[c] == 0 for j, o in enumerate(basis) if j != i)))
    return free


def _solve_degree(P: ProlongationResult, k: int) -> list[GradedMap]:
    A = P.algebra
    n = A.n
    w = A.weights
    layout = []  # unknown -> (source b, target coordinate s)
    start = []
    for b in range(n):
        start.append(len(layout))
        layout.extend((b, s) for s in range(P.dim(k - w[b])))
    nunk = len(layout)
    if nunk == 0:
        return []
    ech = Echelon(nunk)
    for a in range(n):
        for b in range(a + 1, n):
            t = k - w[a] - w[b]
            width = P.dim(t) if t >= -A.step else 0
            if width == 0:
                continue
            rows = [dict() for _ in range(width)]

            def put(r, u, v):
                nv = rows[r].get(u, 0) + v
                if nv:
                    rows[r][u] = nv
                else:
                    rows[r].pop(u, None)

            # u([X_a, X_b])
            for c, coef in A.structure(a, b).items():
                for r in range(width):
                    put(r, start[c] + r, coef)
            # - [u(X_a), X_b]
            for s in range(P.dim(k - w[a])):
                for r, v in enumerate(P._table(k - w[a], s, b)):
                    if v:
                        put(r, start[a] + s, -v)
            # - [X_a, u(X_b)] = + [u(X_b), X_a]
            for s in range(P.dim(k - w[b])):
                for r, v in enumerate(P._table(k - w[b], s, a)):
                    if v:
                        put(r, start[b] + s, v)
            for row in rows:
                if row:
                    ech.add(row)
    basis = []
    for vec in ech.kernel():
        cols = []
        for b in range(n):
            width = P.dim(k - w[b])
            cols.append(tuple(vec.get(start[b] + s, Fraction(0)) for s in range(width)))
        basis.append(GradedMap(k, tuple(cols)))
    return basis


def prolong(A: StratifiedLieAlgebra, cap: int = DEFAULT_CAP) -> ProlongationResult:
    """Compute ``g_0, g_1, ...`` until a layer vanishes or ``cap`` is reached."""
    if cap < 1:
        raise ValueError("cap must be at least 1")
    P = ProlongationResult(A, cap)
    for k in range(cap + 1):
        basis = _solve_degree(P, k)
        P.layers[k] = basis
        P._free[k] = _free_columns(basis)
        if not basis:
            P.status = "finite"
            P.m = k - 1
            break
    return P


def strata_derivations(A: StratifiedLieAlgebra) -> list[GradedMap]:
    """Basis of ``Der^delta(g)``: block-diagonal derivations, as degree-0 maps."""
    P = ProlongationResult(A, 0)
    return _solve_degree(P, 0)


def derivation_matrix(A: StratifiedLieAlgebra, u: GradedMap) -> np.ndarray:
    """Full ``n x n`` matrix of a degree-0 map."""
    if u.degree != 0:
        raise ValueError("only degree-0 maps are endomorphisms of g")
    M = np.full((A.n, A.n), Fraction(0), dtype=object)
    for b, col in enumerate(u.cols):
        off = A.offsets[A.weights[b] - 1]
        for r, v in enumerate(col):
            M[off + r, b] = v
    return M


def grading_derivation(A: StratifiedLieAlgebra) -> GradedMap:
    """Acts on ``g_{-j}`` by ``-j``, so that ``[E, u] = k u`` for ``u`` in ``g_k``."""
    cols = tuple(tuple(Fraction(-A.weights[b] * int(i == b)) for i in A.layer_indices(A.weights[b]))
                 for b in range(A.n))
    return GradedMap(0, cols)


def prol_bracket(P: ProlongationResult, u: GradedMap, v: GradedMap) -> GradedMap:
    """``[u, v]`` in ``g_{k+l}``, determined by its action on ``g_-``."""
    d = u.degree + v.degree
    if d > P.top and P.status != "finite":
        raise ValueError(f"g_{d} has not been computed (cap {P.cap})")
    if P.dim(d) == 0:
        return P.element(d, ())
    coords = P.br(u.degree, P.coords(u), v.degree, P.coords(v))
    return P.element(d, coords)


# -- caching ---------------------------------------------------------------------
def cache_dir(explicit=None) -> Path | None:
    path = explicit or os.environ.get("CARNOT_CACHE_DIR")
    return Path(path) if path else None


def cached_prolong(A: StratifiedLieAlgebra, cap: int = DEFAULT_CAP, directory=None) -> ProlongationResult:
    """:func:`prolong` with an on-disk JSON cache keyed by the algebra hash and cap."""
    root = cache_dir(directory)
    if root is None:
        return prolong(A, cap)
    path = root / f"prolong-{A.cache_key()[:32]}-cap{cap}.json"
    if path.exists():
        try:
            return ProlongationResult.from_dict(A, json.loads(path.read_text()))
        except (ValueError, KeyError, json.JSONDecodeError):
            pass
    P = prolong(A, cap)
    root.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=root, suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        fh.write(json.dumps(P.to_dict(), sort_keys=True))
    os.replace(tmp, path)  # last writer wins
    return P


# -- rigidity ----------------------------------------------------------------------
GAMMA_GRID = (Gaussian(1), Gaussian(-1), Gaussian(0, 1), Gaussian(0, -1),
              Gaussian(1, 1), Gaussian(1, -1), Gaussian(2), Gaussian(Fraction(1, 2)))


@dataclass
class RankOneResult:
    witness: list | None
    rank: int | None = None
    grid_tried: int = 0
    restarts: int = 0
    best_residual: float | None = None

    @property
    def found(self) -> bool:
        return self.witness is not None

    def to_dict(self):
        return {"found": self.found,
                "witness": None if self.witness is None else [str(x) for x in self.witness],
                "rank": self.rank, "grid_tried": self.grid_tried, "restarts": self.restarts,
                "best_residual": self.best_residual}


def ad_rank(A: StratifiedLieAlgebra, X) -> int:
    return rank(A.ad_matrix(list(X)))


def _verify(A, X):
    if not any(X):
        return None
    r = ad_rank(A, X)
    return r if r <= 1 else None


def _simple(v: complex, den: int) -> Gaussian:
    return Gaussian(Fraction(float(v.real)).limit_denominator(den),
                    Fraction(float(v.imag)).limit_denominator(den))


def _snap(residual, z: np.ndarray, tol: float):
    """Pin coordinates of an approximate minimiser to small Gaussian rationals.

    The rank <= 1 locus is often a positive-dimensional variety, so rounding
    every coordinate at once falls off it.  Instead coordinates are pinned
    one at a time (smallest first, trying 0 and then rationals of growing
    height) and the unpinned ones are re-optimised after each pin.
    """
    d = len(z)
    i = int(np.argmax(np.abs(z)))
    z = z / z[i]
    pinned = {i: Gaussian(1)}

    def refit(fixed):
        free = [t for t in range(d) if t not in fixed]
        base = np.array([complex(fixed[t]) if t in fixed else 0j for t in range(d)])

        def f(v):
            w = base.copy()
            w[free] = v[:len(free)] + 1j * v[len(free):]
            return residual(np.concatenate([w.real, w.imag]))

        if not free:
            return f(np.zeros(0)), base
        x0 = np.concatenate([z[free].real, z[free].imag])
        res = minimize(f, x0, method="BFGS", options={"gtol": 1e-13, "maxiter": 500})
        w = base.copy()
        w[free] = res.x[:len(free)] + 1j * res.x[len(free):]
        return float(res.fun), w

    for j in sorted((t for t in range(d) if t != i), key=lambda t: abs(z[t])):
        for cand in [Gaussian(0)] + [_simple(z[j], den) for den in (1, 2, 4, 12, 60, 840, 10 ** 6)]:
            trial = dict(pinned)
            trial[j] = cand
            val, w = refit(trial)
            if val < tol:
                pinned, z = trial, w
                break
        else:
            return None
    return [pinned[t] for t in range(d)]


def rank_one_search(A: StratifiedLieAlgebra, budget: int = DEFAULT_BUDGET, seed: int = 0) -> RankOneResult:
    """Look for ``0 != X`` in ``g_-1 (x) C`` with ``rank(ad X) <= 1``, verified exactly."""
    d1 = A.layer_dims[0]
    n = A.n
    result = RankOneResult(None)

    def embed(coeffs):
        X = [Gaussian(0)] * n
        for i, c in enumerate(coeffs):
            X[i] = c
        return X

    candidates = []
    for i in range(d1):
        candidates.append(embed([Gaussian(int(t == i)) for t in range(d1)]))
    for i in range(d1):
        for j in range(i + 1, d1):
            for g in GAMMA_GRID:
                c = [Gaussian(0)] * d1
                c[i] = Gaussian(1)
                c[j] = g
                candidates.append(embed(c))
    for X in candidates:
        result.grid_tried += 1
        r = _verify(A, X)
        if r is not None:
            result.witness, result.rank = X, r
            return result

    mats = [A.ad_matrix(A.basis_vector(i)).astype(float) for i in range(d1)]
    stack = np.stack(mats)

    def residual(v):
        z = v[:d1] + 1j * v[d1:]
        nz = np.vdot(z, z).real
        M = np.tensordot(z, stack, axes=1)
        G = M.conj().T @ M
        fro2 = np.trace(G).real
        # sum of |2x2 minors|^2 = ((sum s^2)^2 - sum s^4) / 2
        return max(fro2 ** 2 - np.sum(np.abs(G) ** 2), 0.0) / (2 * nz ** 2)

    rng = np.random.default_rng(seed)
    best = np.inf
    for _ in range(budget):
        result.restarts += 1
        x0 = rng.standard_normal(2 * d1)
        res = minimize(residual, x0, method="BFGS", options={"gtol": 1e-12, "maxiter": 500})
        best = min(best, float(res.fun))
        if res.fun < 1e-10:
            snapped = _snap(residual, res.x[:d1] + 1j * res.x[d1:], 1e-16)
            if snapped is None:
                continue
            X = embed(snapped)
            r = _verify(A, X)
            if r is not None:
                result.witness, result.rank = X, r
                break
    result.best_residual = best
    return result


@dataclass
class RigidityVerdict:
    verdict: str  # "rigid" | "nonrigid" | "inconclusive"
    m: int | None = None
    witness: list | None = None
    dims: dict = field(default_factory=dict)
    prolongation_status: str = ""
    search: RankOneResult | None = None

    def label(self) -> str:
        if self.verdict == "rigid":
            return f"rigid({self.m})"
        if self.verdict == "nonrigid":
            return "nonrigid(" + ", ".join(str(x) for x in self.witness) + ")"
        return "inconclusive"

    def to_dict(self):
        return {"verdict": self.verdict, "label": self.label(), "m": self.m,
                "witness": None if self.witness is None else [str(x) for x in self.witness],
                "dims": {str(k): v for k, v in self.dims.items()},
                "prolongation_status": self.prolongation_status,
                "search": None if self.search is None else self.search.to_dict()}


def classify_rigidity(A: StratifiedLieAlgebra, cap: int = DEFAULT_CAP, budget: int = DEFAULT_BUDGET,
                      seed: int = 0, prolongation: ProlongationResult | None = None) -> RigidityVerdict:
    P = prolongation or prolong(A, cap)
    if P.status == "finite":
        return RigidityVerdict("rigid", m=P.m, dims=P.dims, prolongation_status=P.label())
    search = rank_one_search(A, budget, seed)
    if search.found:
        return RigidityVerdict("nonrigid", witness=search.witness, dims=P.dims,
                               prolongation_status=P.label(), search=search)
    return RigidityVerdict("inconclusive", dims=P.dims, prolongation_status=P.label(), search=search)


def result_digest(P: ProlongationResult) -> str:
    return hashlib.sha256(json.dumps(P.to_dict(), sort_keys=True).encode()).hexdigest()
