"""Stratified nilpotent Lie algebras given by structure constants.

The adapted basis is the standard basis ``X_1, ..., X_n``: the first ``d_1``
vectors span layer 1, the next ``d_2`` span layer 2, and so on.  Brackets are
stored as ``[X_i, X_j] = sum_k c_ij^k X_k`` for ``i < j`` (0-based internally,
1-based in files and reports).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations

import numpy as np

from .linalg import Echelon, as_exact, kernel_basis, parse_rational, rational_str
from .poly import Poly

__all__ = [
    "AlgebraFileError",
    "StratifiedLieAlgebra",
    "ValidationReport",
    "catalog",
    "catalog_names",
    "filiform",
    "free2step",
    "heisenberg",
    "load_algebra",
    "loads_algebra",
    "upper_triangular_nilradical",
]


class AlgebraFileError(ValueError):
    """Malformed algebra file; ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


@dataclass
class ValidationReport:
    passed: bool
    violations: list = field(default_factory=list)

    def to_dict(self):
        return {"passed": self.passed,
                "violations": [{"rule": r, "witness": list(w)} for r, w in self.violations]}


def _zero_like(*vecs):
    for v in vecs:
        for x in v:
            if isinstance(x, Poly):
                return Poly(x.nvars)
    return Fraction(0)


class StratifiedLieAlgebra:
    """Structure constants plus layer dimensions.

    ``brackets`` is an iterable of ``(i, j, k, c)`` with 1-based indices,
    meaning that ``c`` is added to ``c_ij^k``.  Entries with ``i > j`` are
    folded in with a sign change.  Inconsistent input (nonzero ``[X_i, X_i]``)
    is kept as a recorded violation rather than rejected, so that
    :meth:`validate` can report it.
    """

    def __init__(self, layer_dims, brackets=(), name=None):
        self.layer_dims = tuple(int(d) for d in layer_dims)
        if not self.layer_dims:
            raise ValueError("layer_dims must be nonempty")
        self.n = sum(self.layer_dims)
        self.step = len(self.layer_dims)
        self.name = name
        self.weights = tuple(j + 1 for j, d in enumerate(self.layer_dims) for _ in range(d))
        self.offsets = tuple(sum(self.layer_dims[:j]) for j in range(self.step + 1))
        self._input_violations = []
        table: dict[tuple[int, int], dict[int, Fraction]] = {}
        for (i, j, k, c) in brackets:
            i, j, k = int(i) - 1, int(j) - 1, int(k) - 1
            c = as_exact(c)
            for idx in (i, j, k):
                if not 0 <= idx < self.n:
                    raise ValueError(f"basis index {idx + 1} out of range 1..{self.n}")
            if i == j:
                if c:
                    self._input_violations.append(("antisymmetry", (i + 1, j + 1, k + 1)))
                continue
            if i > j:
                i, j, c = j, i, -c
            row = table.setdefault((i, j), {})
            v = row.get(k, 0) + c
            if v:
                row[k] = v
            else:
                row.pop(k, None)
        self.table = {key: row for key, row in sorted(table.items()) if row}
        # ordered-pair expansion used by bracket()
        self._terms = []
        for (i, j), row in self.table.items():
            for k, c in sorted(row.items()):
                self._terms.append((i, j, k, c))
                self._terms.append((j, i, k, -c))
        self._pairs = {}
        for (i, j), row in self.table.items():
            self._pairs[(i, j)] = dict(row)
            self._pairs[(j, i)] = {k: -c for k, c in row.items()}
        self._cache = {}

    # -- basic structure -------------------------------------------------
    def layer(self, i: int) -> int:
        """Layer (1-based) of the 0-based basis index ``i``."""
        return self.weights[i]

    def layer_indices(self, j: int) -> range:
        return range(self.offsets[j - 1], self.offsets[j])

    @property
    def homogeneous_dimension(self) -> int:
        return sum(w for w in self.weights)

    def c(self, i, j, k) -> Fraction:
        if i == j:
            return Fraction(0)
        if i < j:
            return self.table.get((i, j), {}).get(k, Fraction(0))
        return -self.table.get((j, i), {}).get(k, Fraction(0))

    def structure(self, i, j) -> dict:
        """``{k: c_ij^k}`` for the ordered pair of 0-based indices."""
        return self._pairs.get((i, j), {})

    def triples(self):
        """Sorted 1-based ``(i, j, k, c)`` with ``i < j``."""
        return [(i + 1, j + 1, k + 1, c) for (i, j), row in self.table.items()
                for k, c in sorted(row.items())]

    def basis_vector(self, i, scale=1):
        v = [Fraction(0)] * self.n
        v[i] = as_exact(scale)
        return v

    def zero(self):
        return [Fraction(0)] * self.n

    def __repr__(self):
        label = self.name or "StratifiedLieAlgebra"
        return f"<{label} layer_dims={self.layer_dims}>"

    # -- operations ------------------------------------------------------
    def bracket(self, X, Y):
        """Bilinear bracket; entries may be Fractions, floats, Gaussians or Polys."""
        if len(X) != self.n or len(Y) != self.n:
            raise ValueError(f"bracket expects vectors of length {self.n}")
        zero = _zero_like(X, Y)
        out = [zero] * self.n
        for i, j, k, c in self._terms:
            xi = X[i]
            if not xi:
                continue
            yj = Y[j]
            if not yj:
                continue
            out[k] = out[k] + (xi * yj) * c
        return out

    def ad_matrix(self, X) -> np.ndarray:
        """Matrix of ``ad X`` on the standard basis (column j is ``[X, X_j]``)."""
        M = np.empty((self.n, self.n), dtype=object)
        zero = _zero_like(X)
        M[...] = zero
        for i, j, k, c in self._terms:
            if X[i]:
                M[k, j] = M[k, j] + X[i] * c
        return M

    def project(self, X, j):
        """Component of ``X`` in layer ``j`` (same length, other entries zeroed)."""
        zero = _zero_like(X)
        idx = set(self.layer_indices(j))
        return [x if i in idx else zero for i, x in enumerate(X)]

    def dilation_matrix(self, s) -> np.ndarray:
        """Diagonal matrix of the dilation scaling layer ``j`` by ``s**j``.

        ``s = 0`` is accepted and gives the (non-invertible) endomorphism.
        """
        try:
            s = as_exact(s)
        except TypeError:
            s = float(s)
        D = np.empty((self.n, self.n), dtype=object)
        D[...] = Fraction(0) if isinstance(s, Fraction) else 0.0
        for i, w in enumerate(self.weights):
            D[i, i] = s ** w
        return D

    def dilate(self, X, s):
        return [x * s ** w for x, w in zip(X, self.weights)]

    def centre(self):
        """Basis of the centre, from the kernel of the stacked adjoint map."""
        rows = []
        for j in range(self.n):
            for k in range(self.n):
                rows.append([self.c(i, j, k) for i in range(self.n)])
        return [list(v[:, 0]) for v in kernel_basis(np.array(rows, dtype=object))]

    def validate(self) -> ValidationReport:
        violations = list(self._input_violations)
        n, ell = self.n, self.step
        if n < 3:
            violations.append(("dimension", (n,)))
        for j, d in enumerate(self.layer_dims, start=1):
            if d < 1:
                violations.append(("layer_dims", (j,)))
        for (i, j), row in self.table.items():
            for k, c in row.items():
                if self.weights[k] != self.weights[i] + self.weights[j]:
                    violations.append(("grading", (i + 1, j + 1, k + 1)))
        basis = [self.basis_vector(i) for i in range(n)]
        for a, b, c in combinations(range(n), 3):
            Xa, Xb, Xc = basis[a], basis[b], basis[c]
            t1 = self.bracket(self.bracket(Xa, Xb), Xc)
            t2 = self.bracket(self.bracket(Xb, Xc), Xa)
            t3 = self.bracket(self.bracket(Xc, Xa), Xb)
            if any(x + y + z for x, y, z in zip(t1, t2, t3)):
                violations.append(("jacobi", (a + 1, b + 1, c + 1)))
        for j in range(1, ell):
            ech = Echelon(n)
            for a in self.layer_indices(j):
                for b in self.layer_indices(1):
                    v = self.bracket(basis[a], basis[b])
                    ech.add({k: x for k, x in enumerate(v) if x})
            target = set(self.layer_indices(j + 1))
            # rank and containment: the span must equal layer j+1 exactly
            if ech.rank != self.layer_dims[j] or any(
                    any(k not in target for k in r) for r in ech.rows.values()):
                violations.append(("generation", (j,)))
        return ValidationReport(passed=not violations, violations=violations)

    # -- serialisation ---------------------------------------------------
    def to_dict(self):
        return {
            "layer_dims": list(self.layer_dims),
            "brackets": [{"i": i, "j": j, "k": k, "c": rational_str(c)}
                         for i, j, k, c in self.triples()],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def cache_key(self) -> str:
        """sha256 of the canonical (sorted, reduced) triple list."""
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()

    def __eq__(self, other):
        if not isinstance(other, StratifiedLieAlgebra):
            return NotImplemented
        return self.layer_dims == other.layer_dims and self.table == other.table

    def __hash__(self):
        return hash(self.cache_key())

    @classmethod
    def from_dict(cls, data, name=None, _lines=None):
        if not isinstance(data, dict):
            raise AlgebraFileError("top level must be a JSON object", 1)
        for key in ("layer_dims", "brackets"):
            if key not in data:
                raise AlgebraFileError(f"missing key {key!r}", 1)
        dims = data["layer_dims"]
        if not isinstance(dims, list) or not dims or not all(
                isinstance(d, int) and not isinstance(d, bool) and d >= 1 for d in dims):
            raise AlgebraFileError("layer_dims must be a nonempty list of positive integers",
                                   (_lines or {}).get("layer_dims"))
        n = sum(dims)
        triples = []
        if not isinstance(data["brackets"], list):
            raise AlgebraFileError("brackets must be a list", (_lines or {}).get("brackets"))
        for idx, entry in enumerate(data["brackets"]):
            line = (_lines or {}).get(("bracket", idx))
            if not isinstance(entry, dict) or set(entry) != {"i", "j", "k", "c"}:
                raise AlgebraFileError(
                    f"bracket entry {idx} must have exactly the keys i, j, k, c", line)
            ijk = []
            for key in ("i", "j", "k"):
                v = entry[key]
                if not isinstance(v, int) or isinstance(v, bool) or not 1 <= v <= n:
                    raise AlgebraFileError(
                        f"bracket entry {idx}: {key} must be an integer in 1..{n}", line)
                ijk.append(v)
            try:
                c = parse_rational(entry["c"])
            except ValueError as exc:
                raise AlgebraFileError(f"bracket entry {idx}: {exc}", line) from None
            triples.append((*ijk, c))
        return cls(dims, triples, name=name)


def _bracket_entry_lines(text: str) -> dict:
    """Line numbers of top-level keys and of each object in the brackets array."""
    lines = {}
    depth = 0
    in_str = False
    esc = False
    line = 1
    key_buf = None
    last_key = None
    brackets_depth = None
    entry = 0
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "\n":
            line += 1
        if in_str:
            if esc:
                esc = False
            elif ch == "\\":
                esc = True
            elif ch == '"':
                in_str = False
                if depth == 1 and key_buf is not None:
                    last_key = key_buf
                    lines.setdefault(last_key, line)
                key_buf = None
            elif key_buf is not None:
                key_buf += ch
        elif ch == '"':
            in_str = True
            key_buf = "" if depth == 1 else None
        elif ch in "[{":
            depth += 1
            if ch == "[" and depth == 2 and last_key == "brackets":
                brackets_depth = depth
            elif ch == "{" and brackets_depth is not None and depth == brackets_depth + 1:
                lines[("bracket", entry)] = line
                entry += 1
        elif ch in "]}":
            if ch == "]" and depth == brackets_depth:
                brackets_depth = None
            depth -= 1
        i += 1
    return lines


def load_algebra(path) -> StratifiedLieAlgebra:
    with open(path) as fh:
        text = fh.read()
    return loads_algebra(text, name=str(path))


def loads_algebra(text: str, name=None) -> StratifiedLieAlgebra:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise AlgebraFileError(f"invalid JSON: {exc.msg}", exc.lineno) from None
    return StratifiedLieAlgebra.from_dict(data, name=name, _lines=_bracket_entry_lines(text))


# -- catalog ---------------------------------------------------------------

def heisenberg(n: int = 1) -> StratifiedLieAlgebra:
    """H_n: ``[X_i, X_{n+i}] = X_{2n+1}`` for ``i = 1..n``."""
    if n < 1:
        raise ValueError("heisenberg(n) needs n >= 1")
    br = [(i, n + i, 2 * n + 1, 1) for i in range(1, n + 1)]
    return StratifiedLieAlgebra((2 * n, 1), br, name=f"heisenberg({n})")


def free2step(m: int = 3) -> StratifiedLieAlgebra:
    """Free 2-step nilpotent algebra on ``m`` generators.

    Layer 2 is ordered lexicographically: ``[X_a, X_b]`` for ``a < b`` is
    ``X_{m+1}, X_{m+2}, ...`` in the order (1,2), (1,3), ..., (m-1,m).
    """
    if m < 2:
        raise ValueError("free2step(m) needs m >= 2")
    pairs = list(combinations(range(1, m + 1), 2))
    br = [(a, b, m + 1 + idx, 1) for idx, (a, b) in enumerate(pairs)]
    return StratifiedLieAlgebra((m, len(pairs)), br, name=f"free2step({m})")


def filiform(n: int = 4) -> StratifiedLieAlgebra:
    """Model filiform algebra of dimension ``n``: ``[X_1, X_j] = X_{j+1}`` for ``2 <= j < n``."""
    if n < 3:
        raise ValueError("filiform(n) needs n >= 3")
    br = [(1, j, j + 1, 1) for j in range(2, n)]
    return StratifiedLieAlgebra((2,) + (1,) * (n - 2), br, name=f"filiform({n})")


def upper_triangular_nilradical(m: int = 4) -> StratifiedLieAlgebra:
    """Strictly upper triangular ``m x m`` matrices.

    Basis ``E_{ab}`` (``a < b``) ordered by superdiagonal ``b - a`` and then
    by ``a``; layer ``k`` is the ``k``-th superdiagonal.
    """
    if m < 3:
        raise ValueError("upper_triangular_nilradical(m) needs m >= 3")
    entries = [(a, a + k) for k in range(1, m) for a in range(m - k)]
    index = {e: i + 1 for i, e in enumerate(entries)}
    br = []
    for (a, b), (c, d) in combinations(entries, 2):
        # [E_ab, E_cd] = delta_bc E_ad - delta_da E_cb
        if b == c:
            br.append((index[(a, b)], index[(c, d)], index[(a, d)], 1))
        if d == a:
            br.append((index[(a, b)], index[(c, d)], index[(c, b)], -1))
    dims = tuple(m - k for k in range(1, m))
    return StratifiedLieAlgebra(dims, br, name=f"upper_triangular_nilradical({m})")


_CATALOG = {
    "heisenberg": (heisenberg, 1, 6),
    "free2step": (free2step, 2, 6),
    "filiform": (filiform, 3, 10),
    "upper_triangular_nilradical": (upper_triangular_nilradical, 3, 6),
}


def catalog_names():
    return sorted(_CATALOG)


def catalog(name: str, *params) -> StratifiedLieAlgebra:
    try:
        builder, lo, hi = _CATALOG[name]
    except KeyError:
        raise ValueError(f"unknown catalog algebra {name!r}; "
                         f"choose from {', '.join(catalog_names())}") from None
    if len(params) > 1:
        raise ValueError(f"{name} takes one parameter")
    if params:
        p = int(params[0])
        if not lo <= p <= hi:
            raise ValueError(f"{name}({p}) outside supported range {lo}..{hi}")
        return builder(p)
    return builder()
