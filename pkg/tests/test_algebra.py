import json
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from carnot.algebra import (AlgebraFileError, StratifiedLieAlgebra, catalog, catalog_names, filiform,
                            free2step, heisenberg, loads_algebra, upper_triangular_nilradical)
from conftest import rational_vectors


def test_catalog_algebras_validate(algebra):
    report = algebra.validate()
    assert report.passed, report.violations


@pytest.mark.parametrize("name,param,dims", [
    ("heisenberg", 2, (4, 1)),
    ("free2step", 4, (4, 6)),
    ("filiform", 5, (2, 1, 1, 1)),
    ("upper_triangular_nilradical", 5, (4, 3, 2, 1)),
])
def test_catalog_layer_dims(name, param, dims):
    A = catalog(name, param)
    assert A.layer_dims == dims
    assert A.validate().passed


def test_catalog_rejects_bad_requests():
    assert catalog_names() == ["filiform", "free2step", "heisenberg", "upper_triangular_nilradical"]
    with pytest.raises(ValueError):
        catalog("nope", 1)
    with pytest.raises(ValueError):
        catalog("heisenberg", 0)
    with pytest.raises(ValueError):
        catalog("filiform", 2)


def test_nilradical_brackets_are_matrix_commutators():
    A = upper_triangular_nilradical(4)
    # basis order: E12 E23 E34 | E13 E24 | E14
    assert A.structure(0, 1) == {3: 1}
    assert A.structure(1, 0) == {3: -1}
    assert A.structure(1, 2) == {4: 1}
    assert A.structure(0, 4) == {5: 1}
    assert A.structure(3, 2) == {5: 1}
    assert A.structure(0, 2) == {}


def test_jacobi_violation_is_reported():
    # [X1,X2]=X3, [X1,X3]=X4 and [X2,X3]=X4 are fine; adding [X2,X4] breaks grading, not Jacobi
    bad = StratifiedLieAlgebra((2, 1, 1), [(1, 2, 3, 1), (1, 3, 4, 1), (2, 3, 4, 1), (2, 4, 4, 1)])
    rules = {r for r, _ in bad.validate().violations}
    assert "grading" in rules
    # a genuine Jacobi failure on a 2-step shape
    jac = StratifiedLieAlgebra((3, 1, 1), [(1, 2, 4, 1), (2, 3, 4, 1), (1, 4, 5, 1), (3, 4, 5, 1)])
    rules = {r for r, _ in jac.validate().violations}
    assert "jacobi" in rules


def test_generation_and_dimension_violations():
    # layer 2 not generated by layer 1
    A = StratifiedLieAlgebra((2, 2), [(1, 2, 3, 1)])
    assert ("generation", (1,)) in A.validate().violations
    small = StratifiedLieAlgebra((2,), [])
    assert ("dimension", (2,)) in small.validate().violations


def test_self_bracket_recorded_as_antisymmetry():
    A = StratifiedLieAlgebra((2, 1), [(1, 2, 3, 1), (1, 1, 3, 1)])
    assert ("antisymmetry", (1, 1, 3)) in A.validate().violations


def test_reversed_entries_fold_with_sign():
    A = StratifiedLieAlgebra((2, 1), [(2, 1, 3, -1)])
    assert A == heisenberg(1)
    assert A.cache_key() == heisenberg(1).cache_key()


@given(st.permutations(range(9)))
def test_cache_key_ignores_entry_order(perm):
    A = upper_triangular_nilradical(4)
    entries = A.to_dict()["brackets"]
    entries = [entries[p] for p in perm if p < len(entries)] + [entries[p] for p in range(9, len(entries))]
    B = loads_algebra(json.dumps({"layer_dims": [3, 2, 1], "brackets": entries}))
    assert B.cache_key() == A.cache_key()


def test_json_round_trip(algebra):
    B = loads_algebra(algebra.to_json())
    assert B == algebra
    assert B.cache_key() == algebra.cache_key()


@given(rational_vectors(6), rational_vectors(6))
def test_bracket_is_antisymmetric_and_graded(X, Y):
    A = upper_triangular_nilradical(4)
    XY, YX = A.bracket(X, Y), A.bracket(Y, X)
    assert all(a == -b for a, b in zip(XY, YX))
    Z = A.bracket(A.project(X, 1), A.project(Y, 1))
    assert A.project(Z, 2) == Z


@given(rational_vectors(5), rational_vectors(5), st.fractions(min_value=-3, max_value=3))
def test_dilations_are_automorphisms(X, Y, s):
    A = filiform(5)
    lhs = A.dilate(A.bracket(X, Y), s)
    rhs = A.bracket(A.dilate(X, s), A.dilate(Y, s))
    assert lhs == rhs


def test_centre_of_free2step_is_second_layer():
    A = free2step(3)
    assert len(A.centre()) == 3
    assert A.homogeneous_dimension == 3 + 2 * 3


@pytest.mark.parametrize("text,line,fragment", [
    ('{"layer_dims": [2, 1],\n "brackets": [\n  {"i": 1, "j": 2, "k": 3, "c": 0.5}\n ]}', 3, "c"),
    ('{"layer_dims": [2, 1],\n "brackets": [\n  {"i": 1, "j": 2, "k": 3, "c": "1"},\n'
     '  {"i": 1, "j": 9, "k": 3, "c": "1"}\n ]}', 4, "j must be"),
    ('{"layer_dims": [2, 1],\n "brackets": [\n  {"i": 1, "j": 2, "k": 3}\n ]}', 3, "keys"),
    ('{"layer_dims": [2, 0], "brackets": []}', 1, "positive"),
    ('{"layer_dims": [2, 1],\n "brackets": [,]}', 2, "invalid JSON"),
])
def test_malformed_files_report_line(text, line, fragment):
    with pytest.raises(AlgebraFileError) as exc:
        loads_algebra(text)
    assert exc.value.line == line
    assert fragment in str(exc.value)
    assert str(exc.value).startswith(f"line {line}:")


def test_string_rationals_are_exact():
    A = loads_algebra('{"layer_dims": [2, 1], "brackets": [{"i": 1, "j": 2, "k": 3, "c": "2/4"}]}')
    assert A.c(0, 1, 2) == Fraction(1, 2)
