"""Contact flows that are not quasiconformal: the lifted flow on a doubled nilradical.

The base is the strictly upper triangular 4x4 algebra (rigid, with a nonzero
first prolongation).  ``V`` is the first basis field of degree-1 precontact
fields on it, and ``tau(V)`` is its lift to the double, whose flow is global.
Along the ray ``p_m = delta_{2^m} p_0`` the first-layer block of the Pansu
differential of the time-1 map grows without bound.  For contrast the same
sweep is run for an affine field (right-invariant plus a strata derivation),
whose time-1 map has a constant Pansu differential.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .algebra import upper_triangular_nilradical
from .flows import distortion, flow_differential
from .group import carnot_group
from .linalg import rational_str
from .prolongation import derivation_matrix, strata_derivations
from .semidirect import (double, example_field, first_layer_block, from_exponential, singular_ratio,
                         tau_differential, tau_flow_map, to_exponential)
from .vector_fields import linear_field, right_field

__all__ = ["BASE_Y", "BASE_Z", "affine_field", "demo_example", "demo_setup"]

# p_0 = (Y_0, z_0); every first-layer coordinate is nonzero
BASE_Y = tuple(Fraction(v) for v in ("1/2", "-1/3", "1/4", "1/5", "-1/6", "1/7"))
BASE_Z = tuple(Fraction(v) for v in ("1/2", "1/3", "-1/4", "1/5", "1/6", "-1/7"))


def demo_setup(m: int = 4):
    A = upper_triangular_nilradical(m)
    D = double(A)
    V = example_field(A)
    return A, D, V


def base_point(D):
    """``p_0`` in exponential coordinates of the double."""
    return to_exponential(D, (list(BASE_Y), list(BASE_Z)))


def affine_field(D):
    """``X_1`` right-invariant on ``H`` plus ``x -> Mx`` for the first strata derivation ``M`` of h."""
    h = D.doubled
    M = derivation_matrix(h, strata_derivations(h)[0])
    return right_field(h, 0) + linear_field(M.tolist())


def demo_example(m_max: int = 8, samples: int = 512, seed: int = 0, scales=(0.5, 1.0),
                 tol: float = 1e-11) -> dict:
    A, D, V = demo_setup()
    h = D.doubled
    H = carnot_group(h)
    fmap = tau_flow_map(D, V, 1)
    W = affine_field(D)
    p0 = base_point(D)
    rows = []
    for m in range(m_max + 1):
        pm = H.dilate(p0, 2 ** m)
        Y, z = from_exponential(D, pm)
        M = tau_differential(D, V, 1, (Y, z))
        ratio = singular_ratio(first_layer_block(D, M))
        pts = np.array([float(v) for v in pm])
        dist = {}
        for s in scales:
            rep = distortion(h, fmap, pts, s, samples, seed, map_id="tau_flow(1)")
            dist[f"H_s={s}"] = rep.H
        _, _, Dlin = flow_differential(h, W, pts, 1.0, tol)
        aff = singular_ratio(first_layer_block(D, Dlin))
        rows.append({"m": m, "base_point": [rational_str(v) for v in pm], "pansu_ratio": ratio,
                     **dist, "affine_ratio": aff})
    ratios = [r["pansu_ratio"] for r in rows]
    aff = [r["affine_ratio"] for r in rows]
    checks = [
        {"name": "ratio_strictly_increasing",
         "status": all(a < b for a, b in zip(ratios, ratios[1:])), "data": ratios},
        {"name": "ratio_exceeds_1e3_at_m_max", "status": ratios[-1] > 1e3, "data": ratios[-1]},
        {"name": "affine_within_factor_2",
         "status": all(0.5 * aff[0] <= a <= 2 * aff[0] for a in aff), "data": aff},
    ]
    return {"algebra": h.name, "field": V.to_dict(), "p0": {"Y": [rational_str(v) for v in BASE_Y],
                                                             "z": [rational_str(v) for v in BASE_Z]},
            "samples": samples, "seed": seed, "table": rows, "checks": checks}
