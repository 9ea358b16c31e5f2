import math
from fractions import Fraction

import numpy as np
import pytest

from carnot.algebra import heisenberg, upper_triangular_nilradical
from carnot.flows import (AnnulusSpec, conjugation_identity_check, distortion, escape_time, flow_differential,
                          homo_norm_probe, integrate_flow, near_one_ratio, rk4_fixed, sample_sphere,
                          trajectory_limit_probe)
from carnot.group import carnot_group, linear_map, translation_map
from carnot.poly import Poly, PolynomialVectorField
from carnot.vector_fields import grading_field, is_homogeneous, right_field

H1 = heisenberg(1)


def _x(i, n=3):
    return Poly.var(n, i)


def _field(*coeffs):
    return PolynomialVectorField([c if isinstance(c, Poly) else Poly.const(3, c) for c in coeffs])


def test_grading_flow_is_dilation():
    A = upper_triangular_nilradical(4)
    p = np.linspace(-1, 1, 6)
    end = integrate_flow(A, grading_field(A), p, 0.7, tol=1e-12).end
    np.testing.assert_allclose(end, carnot_group(A).dilate(p, math.exp(0.7)), rtol=1e-10)


def test_rk4_is_fourth_order():
    A = upper_triangular_nilradical(4)
    E = grading_field(A)
    f = PolynomialVectorField(E.coeffs).evaluator()
    p = np.array([0.3, -0.2, 0.5, 0.1, 0.4, -0.7])
    exact = carnot_group(A).dilate(p, math.exp(1.0))
    errs = [np.max(np.abs(rk4_fixed(f, p, 1.0, n) - exact)) for n in (10, 20, 40)]
    assert errs[0] / errs[1] >= 8 and errs[1] / errs[2] >= 8


def test_backward_and_forward_flows_invert():
    V = right_field(H1, 0) + _field(0, _x(2), 0)
    p = np.array([0.2, -0.4, 0.9])
    fwd = integrate_flow(H1, V, p, 1.3, tol=1e-12).end
    back = integrate_flow(H1, V, fwd, -1.3, tol=1e-12).end
    np.testing.assert_allclose(back, p, atol=1e-9)


def test_blowup_is_reported():
    V = _field(_x(0) * _x(0), 0, 0)
    tr = integrate_flow(H1, V, [1.0, 0.0, 0.0], 2.0)
    assert tr.blew_up
    assert tr.t_end == pytest.approx(1.0, abs=1e-3)
    assert tr.t_end < 1.0


def test_flow_differential_against_finite_differences():
    V = _field(_x(2), _x(0) * _x(0), _x(1))
    p = np.array([0.1, 0.2, -0.3])
    fp, J, _ = flow_differential(H1, V, p, 0.8, tol=1e-12)
    eps = 1e-6
    for j in range(3):
        e = np.zeros(3)
        e[j] = eps
        col = (integrate_flow(H1, V, p + e, 0.8, 1e-12).end - integrate_flow(H1, V, p - e, 0.8, 1e-12).end)
        np.testing.assert_allclose(J[:, j], col / (2 * eps), atol=1e-6)
    np.testing.assert_allclose(fp, integrate_flow(H1, V, p, 0.8, 1e-12).end, atol=1e-10)


BATTERY = {
    "right1+grading": lambda: right_field(H1, 0) + grading_field(H1),
    "right3+x1d2": lambda: right_field(H1, 2) + _field(0, _x(0), 0),
    "right2+x3d1": lambda: right_field(H1, 1) + _field(_x(2), 0, 0),
    "grading+x1^2d3": lambda: grading_field(H1) + _field(0, 0, _x(0) * _x(0)),
}


@pytest.mark.parametrize("name", sorted(BATTERY))
@pytest.mark.parametrize("s", [0.5, 2.0, 3.0])
def test_conjugation_identity(name, s):
    V = BATTERY[name]()
    rep = conjugation_identity_check(H1, V, s, 0.7, [0.3, -0.2, 0.4])
    assert not rep["skipped"]
    assert rep["passed"], rep


@pytest.mark.parametrize("V,j", [(lambda: right_field(H1, 0), -1), (lambda: right_field(H1, 2), -2),
                                 (lambda: _field(_x(2), 0, 0), 1)])
def test_escape_time_scaling(V, j):
    V = V()
    assert is_homogeneous(H1, V, j)
    G = carnot_group(H1)
    p0 = np.array([0.6, -0.3, 0.2])
    ann = AnnulusSpec(0.5, 2.0)
    T0 = escape_time(H1, V, p0, ann, 20.0)
    assert not T0["lower_bound"]
    for k in (-2, -1, 1, 2, 3):
        s = 2.0 ** k
        Tk = escape_time(H1, V, G.dilate(p0, s), ann.scaled(s), 20.0 * s ** (-j))
        assert abs(Tk["t"] - s ** (-j) * T0["t"]) <= 1e-2 * T0["t"]


def test_escape_time_rejects_outside_start():
    with pytest.raises(ValueError):
        escape_time(H1, right_field(H1, 0), [5.0, 0, 0], AnnulusSpec(0.5, 2.0), 1.0)
    with pytest.raises(ValueError):
        AnnulusSpec(2.0, 1.0)


def test_escape_lower_bound_for_trapped_orbit():
    rot = _field(-_x(1), _x(0), 0)
    res = escape_time(H1, rot, [1.0, 0.0, 0.0], AnnulusSpec(0.5, 2.0), 5.0)
    assert res["lower_bound"] and res["t"] == pytest.approx(5.0)


def test_sample_sphere_radius():
    for A in (H1, upper_triangular_nilradical(4)):
        X = sample_sphere(A, 200, 0.7, 0, axes=True)
        np.testing.assert_allclose(carnot_group(A).nsw_norm_batch(X), 0.7, rtol=1e-12)
        assert X[0, 0] > 0 and np.count_nonzero(X[0]) == 1


def test_distortion_of_isometries_and_dilations():
    G = carnot_group(H1)
    p = [0.2, 0.1, -0.5]
    tr = translation_map(G, [1, Fraction(1, 2), 3])
    assert distortion(H1, tr, p, 0.5, 256).H == pytest.approx(1.0, abs=1e-9)
    dil = linear_map(H1.dilation_matrix(2))
    rep = distortion(H1, dil, p, 0.5, 256)
    assert rep.H == pytest.approx(1.0, abs=1e-9)
    assert rep.sup == pytest.approx(1.0, rel=1e-9)


def test_distortion_detects_anisotropy():
    M = np.diag([Fraction(4), Fraction(1), Fraction(4)]).astype(object)
    rep = distortion(H1, linear_map(M), [0, 0, 0], 1.0, 256)
    assert rep.H == pytest.approx(4.0, rel=1e-6)
    assert rep.to_dict()["quasisymmetry"][0]["t"] == 2.0


def test_homo_norm_probe_is_stable():
    a = homo_norm_probe(H1, 4000, seed=0)
    b = homo_norm_probe(H1, 4000, seed=1)
    assert a["finite"] and b["finite"]
    assert abs(a["C"] - b["C"]) <= 0.05 * max(a["C"], b["C"])
    assert near_one_ratio(H1) < a["C"] * 2


def test_trajectory_probe_reports_blowup():
    V = _field(_x(0) * _x(0), 0, 0)
    out = trajectory_limit_probe(H1, V, [1.0, 0.0, 0.0], Thorizon=10.0)
    assert out["forward"]["blowup"] == pytest.approx(1.0, abs=1e-2)
    assert out["backward"]["blowup"] is None
    assert out["backward"]["decreasing_tail"]


def test_escape_time_straight_line():
    # Exp(t X_1 right) moves exp(X_1) to exp((1 - t) X_1); last inside (1/2, 2) at t = 3
    res = escape_time(H1, right_field(H1, 0), [1.0, 0.0, 0.0], AnnulusSpec(0.5, 2.0), 10.0)
    assert res["t"] == pytest.approx(3.0, abs=1e-8) and not res["lower_bound"]


def test_homo_norm_first_layer_ratio():
    # on a first-layer point the ratio is |s - 1|^(1 - 1/step) <= 1
    G = carnot_group(H1)
    x = np.array([1.0, 0.0, 0.0])
    for s in (0.2, 0.9, 1.5):
        assert G.nsw_distance_batch(x * s, x) == pytest.approx(abs(s - 1))
