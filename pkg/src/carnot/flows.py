"""Flow integration and metric probes on Carnot groups.

All distances are the NSW pseudodistance ``rho(p, q) = P(log(q^-1 p))``;
spheres and annuli are taken with respect to it.  The integrator is classic
RK4 with step-doubling error control.  Randomised probes take an explicit
seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .algebra import StratifiedLieAlgebra
from .group import carnot_group
from .poly import Poly, PolyEvaluator, PolynomialVectorField, jacobian
from .vector_fields import homogeneous_parts, to_coordinate

__all__ = [
    "AnnulusSpec",
    "DistortionReport",
    "FlowTrace",
    "conjugation_identity_check",
    "distortion",
    "escape_time",
    "flow_differential",
    "homo_norm_probe",
    "integrate_flow",
    "rk4_fixed",
    "sample_sphere",
    "trajectory_limit_probe",
]

BLOWUP_NORM = 1e12
MIN_STEP = 1e-14


def _rhs(A, V):
    """Float right-hand side ``x -> V(x)`` accepting ``(n,)`` or ``(B, n)``."""
    if callable(V) and not isinstance(V, PolynomialVectorField):
        return V
    Vc = to_coordinate(A, V)
    return PolyEvaluator(list(Vc.coeffs), A.n)


def _rk4_step(f, y, h):
    k1 = f(y)
    k2 = f(y + 0.5 * h * k1)
    k3 = f(y + 0.5 * h * k2)
    k4 = f(y + h * k3)
    return y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def rk4_fixed(f, y0, T, nsteps):
    """Fixed-step RK4; ``y0`` may carry a leading batch axis."""
    y = np.asarray(y0, dtype=float).copy()
    h = T / nsteps
    for _ in range(nsteps):
        y = _rk4_step(f, y, h)
    return y


@dataclass
class FlowTrace:
    start: np.ndarray
    times: np.ndarray
    points: np.ndarray
    status: str  # "ok" | "blowup"
    t_end: float
    tol: float
    steps: int = 0
    rejected: int = 0
    field: PolynomialVectorField | None = None

    @property
    def end(self) -> np.ndarray:
        return self.points[-1]

    @property
    def blew_up(self) -> bool:
        return self.status == "blowup"

    def to_dict(self):
        return {"status": self.status, "t_end": self.t_end, "tol": self.tol, "steps": self.steps,
                "rejected": self.rejected, "start": self.start.tolist(), "end": self.end.tolist()}


def _adaptive(f, y0, T, tol, max_step=None, h0=None):
    y = np.asarray(y0, dtype=float).copy()
    direction = 1.0 if T >= 0 else -1.0
    span = abs(T)
    t = 0.0
    times, points = [0.0], [y.copy()]
    if span == 0:
        return np.array(times), np.array(points), "ok", 0.0, 0, 0
    h = min(h0 or span / 16, span)
    if max_step:
        h = min(h, max_step)
    steps = rejected = 0
    while t < span:
        h = min(h, span - t)
        full = _rk4_step(f, y, direction * h)
        half = _rk4_step(f, y, direction * h / 2)
        two = _rk4_step(f, half, direction * h / 2)
        diff = two - full
        scale = 1.0 + np.max(np.abs(y))
        err = np.max(np.abs(diff)) / 15.0
        allowed = tol * h * scale
        if not np.all(np.isfinite(two)):
            err = np.inf
        if err <= allowed:
            y = two + diff / 15.0
            t += h
            steps += 1
            times.append(direction * t)
            points.append(y.copy())
            if np.max(np.abs(y)) > BLOWUP_NORM:
                return np.array(times), np.array(points), "blowup", direction * t, steps, rejected
            factor = 2.0 if err == 0 else min(2.0, 0.9 * (allowed / err) ** 0.2)
            h *= max(factor, 0.2)
        else:
            rejected += 1
            factor = 0.9 * (allowed / err) ** 0.2 if np.isfinite(err) else 0.25
            h *= min(max(factor, 0.1), 0.5)
        if max_step:
            h = min(h, max_step)
        if h < MIN_STEP * (1.0 + t):
            return np.array(times), np.array(points), "blowup", direction * t, steps, rejected
    return np.array(times), np.array(points), "ok", direction * t, steps, rejected


def integrate_flow(A: StratifiedLieAlgebra, V, p, T: float, tol: float = 1e-10,
                   max_step: float | None = None) -> FlowTrace:
    """Adaptive RK4 for ``Exp(tV)(p)``, ``0 <= t <= T`` (or ``T <= t <= 0``).

    Blow-up (coordinates beyond 1e12 or the step collapsing below 1e-14) is
    reported as ``status == "blowup"`` with ``t_end`` the last reliable time.
    """
    f = _rhs(A, V)
    start = np.asarray(p, dtype=float)
    times, points, status, t_end, steps, rejected = _adaptive(f, start, T, tol, max_step)
    return FlowTrace(start, times, points, status, t_end, tol, steps, rejected,
                     V if isinstance(V, PolynomialVectorField) else None)


def flow_point(A, V, p, T, tol=1e-10):
    tr = integrate_flow(A, V, p, T, tol)
    if tr.blew_up:
        raise FloatingPointError(f"flow blew up near t = {tr.t_end}")
    return tr.end


def flow_differential(A: StratifiedLieAlgebra, V, p, T: float, tol: float = 1e-10):
    """``(f(p), Jf(p), L(f(p))^-1 Jf(p) L(p))`` for ``f = Exp(TV)`` via the variational equations."""
    n = A.n
    Vc = to_coordinate(A, V)
    fv = PolyEvaluator(list(Vc.coeffs), n)
    J = jacobian(list(Vc.coeffs))
    jv = PolyEvaluator([e for row in J for e in row], n)

    def rhs(y):
        x = y[:n]
        M = y[n:].reshape(n, n)
        dM = jv(x).reshape(n, n) @ M
        return np.concatenate([fv(x), dM.ravel()])

    y0 = np.concatenate([np.asarray(p, dtype=float), np.eye(n).ravel()])
    _, points, status, t_end, _, _ = _adaptive(rhs, y0, T, tol)
    if status != "ok":
        raise FloatingPointError(f"flow blew up near t = {t_end}")
    y = points[-1]
    fp = y[:n]
    Jp = y[n:].reshape(n, n)
    return fp, Jp, carnot_group(A).linearized_from_jacobian(Jp, p, fp)


# -- sampling and distortion ---------------------------------------------------------
def sample_sphere(A: StratifiedLieAlgebra, N: int, radius: float = 1.0, rng=None,
                  axes: bool = False) -> np.ndarray:
    """``N`` Lie-algebra vectors with ``P(X) = radius``.

    Each layer gets an isotropic Gaussian direction; the vector is then moved
    onto the sphere with the dilation, using ``P(delta_s X) = s P(X)``.  With
    ``axes`` the first ``2n`` samples (when ``N >= 2n``) are the points
    ``+-X_i`` on the sphere.
    """
    rng = np.random.default_rng(rng)
    G = carnot_group(A)
    X = rng.standard_normal((N, A.n))
    if axes and N >= 2 * A.n:
        X[:2 * A.n] = np.concatenate([np.eye(A.n), -np.eye(A.n)])
    P = G.nsw_norm_batch(X)
    scale = radius / P
    w = np.array(A.weights, dtype=float)
    return X * scale[:, None] ** w[None, :]


def _as_batch_map(A, f):
    if isinstance(f, (list, tuple)) and f and isinstance(f[0], Poly):
        ev = PolyEvaluator(list(f), A.n)
        return ev
    return f


@dataclass
class DistortionReport:
    map_id: str
    p: list
    s: float
    samples: int
    sup: float
    inf: float
    seed: int
    qs_samples: list = field(default_factory=list)

    @property
    def H(self) -> float:
        return self.sup / self.inf

    def to_dict(self):
        return {"map": self.map_id, "p": [float(v) for v in self.p], "s": self.s,
                "samples": self.samples, "sup": self.sup, "inf": self.inf, "H": self.H,
                "seed": self.seed, "quasisymmetry": self.qs_samples}


def distortion(A: StratifiedLieAlgebra, f, p, s: float, N: int = 1024, seed: int = 0,
               map_id: str = "f") -> DistortionReport:
    """Empirical ``H(f, p, s)`` over ``N`` points of the NSW sphere of radius ``s`` about ``p``.

    ``f`` is a list of polynomials or a callable on arrays of shape ``(B, n)``.
    The first ``2n`` directions are the coordinate axes, the rest Gaussian.
    Also records three-point samples ``(t, eta)`` comparing spheres of radius
    ``s`` and ``s t^-1`` for ``t`` in {2, 4}.
    """
    G = carnot_group(A)
    fmap = _as_batch_map(A, f)
    rng = np.random.default_rng(seed)
    p = np.asarray(p, dtype=float)
    X = sample_sphere(A, N, s, rng, axes=True)
    pts = G.multiply_batch(p[None, :], X)
    fp = np.asarray(fmap(p[None, :]), dtype=float)
    fx = np.asarray(fmap(pts), dtype=float)
    if not np.all(np.isfinite(fx)):
        raise FloatingPointError("map undefined at a sample point")
    d = G.nsw_distance_batch(fx, np.broadcast_to(fp, fx.shape))
    qs = []
    for t in (2.0, 4.0):
        Xi = sample_sphere(A, N, s / t, rng)
        fy = np.asarray(fmap(G.multiply_batch(p[None, :], Xi)), dtype=float)
        dy = G.nsw_distance_batch(fy, np.broadcast_to(fp, fy.shape))
        qs.append({"t": t, "eta": float(np.max(d) / np.min(dy))})
    return DistortionReport(map_id, p.tolist(), float(s), N, float(np.max(d)), float(np.min(d)),
                            seed, qs)


# -- the dilation-conjugation identity ------------------------------------------------
def conjugation_identity_check(A: StratifiedLieAlgebra, V: PolynomialVectorField, s: float, t: float,
                               p, tol: float = 1e-6, integrator_tol: float = 1e-12) -> dict:
    """Compare ``delta_s Exp(t s^d V) delta_1/s (p)`` with ``Exp(t sum_j s^(d-j) V^j)(p)``."""
    G = carnot_group(A)
    parts = homogeneous_parts(A, to_coordinate(A, V))
    if not parts:
        return {"residual": 0.0, "bound": tol, "passed": True, "skipped": False}
    d = max(part.degree for part in parts)
    p = np.asarray(p, dtype=float)
    lhs_tr = integrate_flow(A, V, G.dilate(p, 1.0 / s), t * s ** d, integrator_tol)
    W = PolynomialVectorField.zero(A.n)
    for part in parts:
        W = W + to_coordinate(A, part.field).scale(_exact_power(s, d - part.degree))
    rhs_tr = integrate_flow(A, W, p, t, integrator_tol)
    if lhs_tr.blew_up or rhs_tr.blew_up:
        return {"residual": None, "bound": None, "passed": None, "skipped": True}
    lhs = G.dilate(lhs_tr.end, s)
    rhs = rhs_tr.end
    residual = float(G.nsw_distance_batch(lhs, rhs))
    bound = tol * (1.0 + float(G.nsw_norm_batch(p)))
    return {"residual": residual, "bound": bound, "passed": residual <= bound, "skipped": False,
            "degree": d}


def _exact_power(s, k):
    try:
        return Fraction(s) ** k
    except (TypeError, ValueError):
        return s ** k


# -- escape times ------------------------------------------------------------------------
@dataclass(frozen=True)
class AnnulusSpec:
    r: float
    R: float

    def __post_init__(self):
        if not 0 < self.r < self.R:
            raise ValueError("annulus needs 0 < r < R")

    def contains(self, rho) -> bool:
        return self.r <= rho <= self.R

    def scaled(self, s):
        return AnnulusSpec(self.r * s, self.R * s)


def escape_time(A: StratifiedLieAlgebra, V, p, annulus: AnnulusSpec, Tmax: float,
                tol: float = 1e-11, resolution: float = 1e-9, samples: int = 4000) -> dict:
    """Last time ``t <= Tmax`` with ``Exp(tV)(p)`` in the annulus.

    The trajectory is sampled densely (step at most ``Tmax / samples``);
    the last inside-to-outside crossing is refined by bisection to
    ``resolution``.  If the trajectory is still inside at ``Tmax`` the result
    is flagged as a lower bound.
    """
    G = carnot_group(A)
    f = _rhs(A, V)
    p = np.asarray(p, dtype=float)

    def rho(x):
        return float(G.nsw_norm_batch(x))

    if not annulus.contains(rho(p)):
        raise ValueError("starting point is not in the annulus")
    times, points, status, t_end, _, _ = _adaptive(f, p, Tmax, tol, max_step=Tmax / samples)
    rhos = G.nsw_norm_batch(points)
    inside = (rhos >= annulus.r) & (rhos <= annulus.R)
    last = int(np.nonzero(inside)[0][-1])
    if last == len(times) - 1:
        if status == "ok":
            return {"t": float(times[last]), "lower_bound": True, "blowup": False}
        return {"t": float(times[last]), "lower_bound": True, "blowup": True}
    lo, hi = 0.0, float(times[last + 1] - times[last])
    x0 = points[last]
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        _, pts, st, _, _, _ = _adaptive(f, x0, mid, tol * 1e-2, h0=mid)
        if st == "ok" and annulus.contains(rho(pts[-1])):
            lo = mid
        else:
            hi = mid
    return {"t": float(times[last] + lo), "lower_bound": False, "blowup": status == "blowup"}


# -- homogeneous-norm probe ----------------------------------------------------------------
def homo_norm_probe(A: StratifiedLieAlgebra, samples: int = 10000, seed: int = 0) -> dict:
    """Max of ``rho(delta_s p, p) / |s - 1|^(1/step)`` over ``rho(p, e) = 1``, ``s`` in (0, 2)."""
    G = carnot_group(A)
    rng = np.random.default_rng(seed)
    X = sample_sphere(A, samples, 1.0, rng)
    s = rng.uniform(0.0, 2.0, samples)
    s = np.where(s == 1.0, 0.5, s)
    w = np.array(A.weights, dtype=float)
    Xs = X * s[:, None] ** w[None, :]
    ratios = G.nsw_distance_batch(Xs, X) / np.abs(s - 1.0) ** (1.0 / A.step)
    i = int(np.argmax(ratios))
    return {"C": float(ratios[i]), "argmax_s": float(s[i]), "samples": samples, "seed": seed,
            "finite": bool(np.all(np.isfinite(ratios)))}


def near_one_ratio(A: StratifiedLieAlgebra, points: int = 200, seed: int = 0) -> float:
    """Max ratio over ``s`` on a grid in [0.99, 1.01] (excluding 1)."""
    G = carnot_group(A)
    X = sample_sphere(A, points, 1.0, np.random.default_rng(seed))
    w = np.array(A.weights, dtype=float)
    best = 0.0
    for s in np.linspace(0.99, 1.01, 21):
        if s == 1.0:
            continue
        r = G.nsw_distance_batch(X * s ** w[None, :], X) / abs(s - 1.0) ** (1.0 / A.step)
        best = max(best, float(np.max(r)))
    return best


# -- trajectories ---------------------------------------------------------------------------
def trajectory_limit_probe(A: StratifiedLieAlgebra, V, p, Thorizon: float = 100.0,
                           points: int = 12, tol: float = 1e-10) -> dict:
    """``rho(Exp(+-tV)(p), e)`` on a log time grid, stopping at blow-up."""
    G = carnot_group(A)
    f = _rhs(A, V)
    grid = np.logspace(-2, math.log10(Thorizon), points)
    out = {}
    for sign, name in ((1.0, "forward"), (-1.0, "backward")):
        x = np.asarray(p, dtype=float)
        t_prev = 0.0
        rows = []
        blowup = None
        for t in grid:
            _, pts, st, t_end, _, _ = _adaptive(f, x, sign * (t - t_prev), tol)
            if st != "ok":
                blowup = float(sign * t_prev + t_end)
                break
            x = pts[-1]
            t_prev = t
            rows.append([float(sign * t), float(G.nsw_norm_batch(x))])
        tail = [r[1] for r in rows[-4:]]
        out[name] = {"samples": rows, "blowup": blowup,
                     "decreasing_tail": len(tail) > 1 and all(a >= b for a, b in zip(tail, tail[1:]))}
    return out
