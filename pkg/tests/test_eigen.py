import math

import numpy as np
import pytest

from varbound.eigen import cholesky_upper, generalized_eigs, upper_bounds
from varbound.elements import build_bundle
from varbound.errors import BasisDependenceError, DomainError
from varbound.potential import BasisSpec, Channel, Potential, parse_potential
from varbound.reference import integrate_radial

rng = np.random.default_rng(7)


@pytest.mark.parametrize("route", ["cholesky", "lowdin"])
def test_small_examples(route):
    for n in (1, 3, 6):
        np.testing.assert_allclose(generalized_eigs(np.eye(n), np.eye(n), route), np.ones(n))
    np.testing.assert_allclose(generalized_eigs([[2, 0], [0, 8]], [[1, 0], [0, 4]], route), [2, 2])
    np.testing.assert_allclose(
        generalized_eigs([[1, 1], [1, 3]], np.eye(2), route), [2 - math.sqrt(2), 2 + math.sqrt(2)]
    )


def test_shape_and_value_errors():
    with pytest.raises(DomainError):
        generalized_eigs(np.eye(2), np.eye(3))
    with pytest.raises(DomainError):
        generalized_eigs([[np.nan]], [[1.0]])
    with pytest.raises(ValueError):
        generalized_eigs(np.eye(2), np.eye(2), route="qr")


def test_dependent_basis_reports_pivot():
    n = np.array([[1.0, 1.0], [1.0, 1.0]])
    with pytest.raises(BasisDependenceError) as info:
        cholesky_upper(n)
    assert info.value.pivot_index == 1
    assert info.value.pivot <= 0


def test_pivot_ratio_guard():
    n = np.array([[1.0, 1.0], [1.0, 1.0 + 1e-15]])
    with pytest.raises(BasisDependenceError):
        generalized_eigs(np.eye(2), n)


def _random_pair(n):
    a = rng.standard_normal((n, n))
    h = (a + a.T) / 2
    b = rng.standard_normal((n, n))
    return h, b @ b.T + n * np.eye(n)


def test_route_equivalence_random():
    for n in range(1, 12):
        h, s = _random_pair(n)
        chol = generalized_eigs(h, s, "cholesky")
        low = generalized_eigs(h, s, "lowdin")
        scale = max(1.0, np.abs(chol).max())
        assert np.abs(chol - low).max() <= 1e-10 * scale


@pytest.mark.parametrize(
    "text, basis",
    [("r^2 + 0.5/r^2.5", BasisSpec(5, 1.5, 1.5, 0.9)), ("-1/r + r + 2*r^2", BasisSpec(4, 2.0, 1.0, 0.8))],
)
def test_route_equivalence_on_bundles(text, basis):
    potential = parse_potential(text)
    bundle = build_bundle(potential, basis, Channel())
    # the property is stated for well-conditioned bundles only
    assert upper_bounds(potential, basis).conditioning >= 1e-3
    h = bundle.prenormalized_kinetic / basis.scale**2
    for term in potential.terms:
        h = h + term.coefficient * basis.scale**term.exponent * bundle.prenormalized_powers[term.exponent]
    chol = generalized_eigs(h, bundle.prenormalized_norm, "cholesky")
    low = generalized_eigs(h, bundle.prenormalized_norm, "lowdin")
    np.testing.assert_allclose(chol, low, rtol=1e-10)


def test_ordering_and_permutation_invariance():
    for n in (2, 5, 9):
        h, s = _random_pair(n)
        base = generalized_eigs(h, s)
        assert np.all(np.diff(base) >= 0)
        perm = rng.permutation(n)
        moved = generalized_eigs(h[np.ix_(perm, perm)], s[np.ix_(perm, perm)])
        np.testing.assert_allclose(moved, base, rtol=1e-12, atol=1e-12 * np.abs(base).max())


def test_upper_bound_examples():
    osc = upper_bounds(parse_potential("r^2"), BasisSpec(1, 2, 1, 1))
    assert abs(osc[0] - 3.0) <= 1e-12
    spiked = upper_bounds(parse_potential("r^2 + 1/r^2"), BasisSpec(1, 2, math.sqrt(5), 1))
    assert spiked[0] == pytest.approx(2 + math.sqrt(5), abs=1e-12)
    t = 1 + abs(1 - math.sqrt(41))
    ten = upper_bounds(parse_potential("r^2 + 10/r^2"), BasisSpec(1, 2, t, 1))
    assert ten[0] == pytest.approx(2 + math.sqrt(41), abs=1e-12)
    assert len(ten) == 1 and ten.conditioning == 1.0


def test_double_and_extended_agree_when_well_conditioned():
    potential = parse_potential("r^2 + 0.1/r^1.5")
    basis = BasisSpec(6, 2.0, 1.5, 1.0)
    ext = upper_bounds(potential, basis, precision="extended")
    dbl = upper_bounds(potential, basis, precision="double")
    np.testing.assert_allclose(ext.eigenvalues, dbl.eigenvalues, rtol=1e-10)


NESTED = [
    (parse_potential("r^2 + 1/r^2.5"), BasisSpec(1, 1.2, 1.5, 0.8), Channel()),
    (parse_potential("-1/r + 0.5*r + r^2"), BasisSpec(1, 2.0, 1.0, 0.9), Channel()),
    (parse_potential("-0.5*r^2 + r^4"), BasisSpec(1, 2.0, 1.0, 1.0), Channel()),
]


@pytest.mark.parametrize("potential, basis, channel", NESTED)
def test_nested_basis_monotonicity(potential, basis, channel):
    p, t, s = basis.params
    prev = None
    for n in range(1, 11):
        values = upper_bounds(potential, BasisSpec(n, p, t, s), channel).eigenvalues
        if prev is not None:
            for k, v in enumerate(prev):
                assert values[k] <= v + 1e-10
        prev = values


def test_upper_bound_property_random_safe_potentials():
    local = np.random.default_rng(11)
    for _ in range(10):
        alpha = float(local.uniform(0.3, 2.9))
        lam = float(local.uniform(0.01, 5.0))
        l = int(local.integers(0, 3))
        potential = Potential.from_pairs([(1.0, 2.0), (lam, -alpha)])
        channel = Channel(3, l)
        basis = BasisSpec(6, 2.0, float(max(1.0, alpha - 1.0) + 0.5 + 2 * l), 1.0)
        bounds = upper_bounds(potential, basis, channel)
        for k in range(3):
            oracle = integrate_radial(potential, channel, k)
            assert bounds[k] >= oracle - 1e-7, (alpha, lam, l, k)


def test_upper_bound_property_on_exact_fixtures():
    cases = [
        ("r^2 + 2/r^2", Channel(), BasisSpec(4, 2.0, 3.0, 1.0), [5.0, 9.0, 13.0]),
        ("r^2", Channel(3, 1), BasisSpec(5, 2.0, 3.0, 1.0), [5.0, 9.0, 13.0]),
        ("r^2 + 0.140625/r^6", Channel(), BasisSpec(8, 0.7, 7.0, 0.05), [4.0]),
    ]
    for text, channel, basis, exact in cases:
        bounds = upper_bounds(parse_potential(text), basis, channel)
        for k, e in enumerate(exact):
            assert bounds[k] >= e - 1e-7
