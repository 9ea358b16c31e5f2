from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from carnot.algebra import filiform, free2step, heisenberg, upper_triangular_nilradical
from carnot.group import (automorphism_characterizations, carnot_group, dynkin_words, is_automorphism,
                          linear_map, translation_map)
from carnot.poly import Poly, compose, jacobian
from conftest import random_rational, rational_vectors


# -- matrix oracle: strictly upper triangular matrices, exp/log as finite sums

def _entries(m):
    return [(a, a + k) for k in range(1, m) for a in range(m - k)]


def _to_matrix(x, m):
    M = np.zeros((m, m), dtype=object)
    M[...] = Fraction(0)
    for v, (a, b) in zip(x, _entries(m)):
        M[a, b] = Fraction(v)
    return M


def _from_matrix(M, m):
    return [M[a, b] for a, b in _entries(m)]


def _expm(X, m):
    out = np.eye(m, dtype=int).astype(object) + X * 0
    term = out.copy()
    for k in range(1, m):
        term = term.dot(X) * Fraction(1, k)
        out = out + term
    return out


def _logm(G, m):
    N = G - np.eye(m, dtype=int).astype(object)
    out = N * 0
    term = np.eye(m, dtype=int).astype(object)
    for k in range(1, m):
        term = term.dot(N)
        out = out + term * Fraction((-1) ** (k + 1), k)
    return out


@pytest.mark.parametrize("m", [3, 4, 5])
def test_group_law_matches_matrix_exponential(m):
    A = upper_triangular_nilradical(m)
    G = carnot_group(A)
    rng = np.random.default_rng(m)
    for _ in range(25):
        x, y = random_rational(rng, A.n), random_rational(rng, A.n)
        expected = _from_matrix(_logm(_expm(_to_matrix(x, m), m).dot(_expm(_to_matrix(y, m), m)), m), m)
        assert G.multiply(x, y) == expected


def test_bch_third_order_coefficients():
    # free nilpotent step 3 on two generators: X1, X2 | X3=[X1,X2] | X4=[X1,X3], X5=[X2,X3]
    from carnot.algebra import StratifiedLieAlgebra
    A = StratifiedLieAlgebra((2, 1, 2), [(1, 2, 3, 1), (1, 3, 4, 1), (2, 3, 5, 1)])
    assert A.validate().passed
    G = carnot_group(A)
    Z = G.bch([1, 0, 0, 0, 0], [0, 1, 0, 0, 0])
    # X + Y + [X,Y]/2 + [X,[X,Y]]/12 + [Y,[Y,X]]/12
    assert Z == [1, 1, Fraction(1, 2), Fraction(1, 12), Fraction(-1, 12)]


def test_dynkin_series_low_order():
    words = dict(dynkin_words(3))
    # antisymmetry lets [X,Y] appear through both XY and YX
    assert words[(0, 1)] - words[(1, 0)] == Fraction(1, 2)
    assert all(len(w) > 1 and w[-1] != w[-2] for w in words)


@pytest.mark.parametrize("make", [lambda: heisenberg(2), lambda: filiform(5), lambda: free2step(3),
                                  lambda: upper_triangular_nilradical(4)])
def test_associativity_inverse_identity(make):
    A = make()
    G = carnot_group(A)
    rng = np.random.default_rng(7)
    for _ in range(20):
        p, q, r = (random_rational(rng, A.n) for _ in range(3))
        assert G.multiply(G.multiply(p, q), r) == G.multiply(p, G.multiply(q, r))
        assert G.multiply(p, G.inverse(p)) == G.identity()
        assert G.multiply(p, G.identity()) == p


@given(rational_vectors(5), rational_vectors(5), st.fractions(min_value=-4, max_value=4))
def test_dilations_are_group_automorphisms(p, q, s):
    G = carnot_group(filiform(5))
    assert G.dilate(G.multiply(p, q), s) == G.multiply(G.dilate(p, s), G.dilate(q, s))


def test_float_product_agrees_with_exact():
    A = upper_triangular_nilradical(4)
    G = carnot_group(A)
    rng = np.random.default_rng(3)
    P = [random_rational(rng, A.n) for _ in range(10)]
    Q = [random_rational(rng, A.n) for _ in range(10)]
    exact = np.array([[float(v) for v in G.multiply(p, q)] for p, q in zip(P, Q)])
    approx = G.multiply_batch(np.array(P, dtype=float), np.array(Q, dtype=float))
    np.testing.assert_allclose(approx, exact, rtol=1e-13, atol=1e-13)


@pytest.mark.parametrize("make", [lambda: heisenberg(1), lambda: filiform(4),
                                  lambda: upper_triangular_nilradical(4)])
@pytest.mark.parametrize("side", ["left", "right"])
def test_invariant_frames_reproduce_structure_constants(make, side):
    A = make()
    F = carnot_group(A).invariant_frame(side)
    for i in range(A.n):
        for j in range(A.n):
            expected = sum((F[k].scale(c) for k, c in A.structure(i, j).items()),
                           type(F[0]).zero(A.n))
            assert F[i].bracket(F[j]) == expected


def test_left_and_right_frames_commute():
    A = upper_triangular_nilradical(4)
    G = carnot_group(A)
    for Lf in G.invariant_frame("left"):
        for R in G.invariant_frame("right"):
            assert Lf.bracket(R).is_zero()


def test_left_frame_is_left_invariant():
    A = filiform(4)
    G = carnot_group(A)
    q = [Fraction(1, 2), -2, Fraction(3, 4), 5]
    tau = translation_map(G, q)
    J = jacobian(tau)
    L = G.frame_matrix()
    L_at_tau = [compose(row, tau) for row in L]
    for i in range(A.n):
        for j in range(A.n):
            pushed = sum((J[i][k] * L[k][j] for k in range(A.n)), Poly(A.n))
            assert pushed == L_at_tau[i][j]


def test_frame_inverse_is_exact():
    G = carnot_group(upper_triangular_nilradical(4))
    L, Li = G.frame_matrix(), G.frame_matrix_inverse()
    n = G.n
    for i in range(n):
        for j in range(n):
            e = sum((Li[i][k] * L[k][j] for k in range(n)), Poly(n))
            assert e == Poly.const(n, 1 if i == j else 0)


def test_adjoint_is_conjugation():
    A = upper_triangular_nilradical(4)
    G = carnot_group(A)
    rng = np.random.default_rng(11)
    for _ in range(5):
        z, y = random_rational(rng, A.n), random_rational(rng, A.n)
        lhs = G.multiply(G.multiply(z, y), G.inverse(z))
        rhs = list(G.adjoint(z).dot(np.array(y, dtype=object)))
        assert lhs == rhs


def test_translations_and_dilations_are_contact():
    A = upper_triangular_nilradical(4)
    G = carnot_group(A)
    q = [1, -1, 2, Fraction(1, 3), 0, 5]
    assert G.is_contact_map(translation_map(G, q)).is_contact
    assert G.is_contact_map(linear_map(A.dilation_matrix(3))).is_contact
    P = G.pansu_differential(translation_map(G, q), [1, 2, 3, 4, 5, 6])
    assert (P == np.eye(6, dtype=int)).all()


def test_non_contact_map_has_witness():
    A = heisenberg(1)
    G = carnot_group(A)
    M = np.array([[1, 0, 0], [0, 1, 0], [1, 0, 1]], dtype=object)
    rep = G.is_contact_map(linear_map(M), samplepoints=[[0, 0, 0]])
    assert not rep.is_contact
    assert rep.witness["row"] == 3 and rep.witness["col"] == 1
    with pytest.raises(ValueError):
        G.pansu_differential(linear_map(M), [0, 0, 0])


def test_singular_points_are_reported():
    A = heisenberg(1)
    G = carnot_group(A)
    x = [Poly.var(3, i) for i in range(3)]
    f = [x[0] * x[0], x[1], x[2]]
    rep = G.is_contact_map(f, samplepoints=[[0, 1, 1], [1, 1, 1]])
    assert rep.singular_points == [["0", "1", "1"]]


def test_automorphism_characterizations_agree_for_strata_preserving():
    A = heisenberg(1)
    shear = np.array([[1, 2, 0], [0, 1, 0], [0, 0, 1]], dtype=object)
    assert is_automorphism(A, shear)
    assert all(automorphism_characterizations(A, shear).values())
    G = carnot_group(A)
    Ad = G.adjoint([1, 0, 0])
    assert is_automorphism(A, Ad)
    assert not any(automorphism_characterizations(A, Ad).values())
    assert not is_automorphism(A, np.array([[2, 0, 0], [0, 1, 0], [0, 0, 1]], dtype=object))


@given(rational_vectors(6))
def test_nsw_norm_homogeneous_and_symmetric(x):
    G = carnot_group(upper_triangular_nilradical(4))
    n = G.nsw_norm(x)
    assert G.nsw_norm(G.inverse(x)) == pytest.approx(n, rel=1e-12)
    assert G.nsw_norm(G.dilate(x, 3)) == pytest.approx(3 * n, rel=1e-12, abs=1e-300)
    assert G.nsw_norm_batch(np.array([float(v) for v in x])) == pytest.approx(n, rel=1e-12, abs=1e-300)


def test_nsw_distance_left_invariant():
    G = carnot_group(heisenberg(1))
    p, q, g = [1, 2, 3], [Fraction(1, 2), -1, 0], [4, -3, 7]
    assert G.nsw_distance(G.multiply(g, p), G.multiply(g, q)) == pytest.approx(G.nsw_distance(p, q))
    assert G.nsw_distance(p, p) == 0.0


def test_nsw_norm_pinned_values():
    G = carnot_group(heisenberg(1))
    assert G.nsw_norm([0, 0, 1]) == 1.0
    assert G.nsw_norm([Fraction(-5, 2), 0, 0]) == pytest.approx(2.5)
    # (|x|^4 + z^2)^(1/4) on H_1
    assert G.nsw_norm([1, 2, 3]) == pytest.approx((25 + 9) ** 0.25)
    assert G.nsw_norm_batch(np.array([1e200, 0.0, 0.0])) == pytest.approx(1e200)
