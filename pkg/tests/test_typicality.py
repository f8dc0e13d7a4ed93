import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from povmsim import linalg as la
from povmsim.errors import BudgetExceeded
from povmsim.typicality import (
    Pmf,
    conditional_bound,
    conditional_typical_projector,
    is_typical,
    projector_bounds,
    typical_fraction,
    typical_projector,
)

from conftest import KET0, PLUS, dens


def binom_pmf(n, k, p1):
    lg = math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)
    return math.exp(lg + k * math.log(p1) + (n - k) * math.log1p(-p1))


def binomial_typical_mass(p1, n, delta):
    """Strong-typicality mass for a binary pmf via counts of the letter 1."""
    p0 = 1 - p1
    total = 0.0
    for k in range(n + 1):
        f1, f0 = k / n, 1 - k / n
        if abs(f1 - p1) <= delta * p1 + 1e-12 and abs(f0 - p0) <= delta * p0 + 1e-12:
            total += binom_pmf(n, k, p1)
    return total


def binomial_entropy_mass(p1, n, delta):
    """Mass of the entropy window for s^{(x)n}, s = diag(1 - p1, p1)."""
    p0 = 1 - p1
    h = -p0 * math.log2(p0) - p1 * math.log2(p1)
    total = 0.0
    for k in range(n + 1):
        rate = -(k * math.log2(p1) + (n - k) * math.log2(p0)) / n
        if abs(rate - h) <= delta + 1e-12:
            total += binom_pmf(n, k, p1)
    return total


class TestClassical:
    def test_exact_frequencies(self):
        assert is_typical([0, 1, 0, 1], Pmf([0.5, 0.5]), 0.1)

    def test_zero_probability_letter(self):
        assert not is_typical([0, 0, 1], Pmf([1.0, 0.0]), 0.5)

    def test_unknown_letter(self):
        assert not is_typical([0, 2], Pmf([0.5, 0.5]), 0.5)

    def test_labelled_alphabet(self):
        p = Pmf([0.5, 0.5], ("a", "b"))
        assert is_typical("abba", p, 0.01)

    def test_delta_must_be_positive(self):
        with pytest.raises(ValueError):
            is_typical([0], Pmf([1.0]), 0.0)

    @pytest.mark.parametrize("n", range(1, 15))
    def test_fraction_matches_binomial_oracle(self, n):
        assert typical_fraction(Pmf([0.75, 0.25]), n, 0.2) == pytest.approx(binomial_typical_mass(0.25, n, 0.2), abs=1e-12)

    def test_fraction_tends_to_one(self):
        # at n <= 14 the count lattice dominates; the limit shows up later
        masses = [binomial_typical_mass(0.25, n, 0.2) for n in (40, 200, 1000, 4000)]
        assert all(b > a for a, b in zip(masses, masses[1:]))
        assert masses[-1] > 0.99

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.integers(0, 2), min_size=1, max_size=12), st.floats(0.05, 0.9))
    def test_monotone_in_delta(self, seq, delta):
        p = Pmf([0.5, 0.3, 0.2])
        if is_typical(seq, p, delta):
            assert is_typical(seq, p, delta * 1.5)


class TestTypicalProjector:
    def test_flat_spectrum(self):
        tp = typical_projector(np.eye(2) / 2, 3, 0.1)
        assert tp.rank() == 8
        assert_allclose(tp.matrix(), np.eye(8), atol=1e-12)

    def test_pure(self):
        tp = typical_projector(PLUS, 3, 0.2)
        assert_allclose(tp.matrix(), la.tensor_power(PLUS, 3), atol=1e-12)

    @pytest.mark.parametrize("seed", range(3))
    def test_idempotent_and_commuting(self, seed):
        s = dens(2, seed)
        pi = typical_projector(s, 4, 0.3).matrix()
        s4 = la.tensor_power(s, 4)
        assert np.max(np.abs(pi @ pi - pi)) < 1e-9
        assert np.max(np.abs(pi @ s4 - s4 @ pi)) < 1e-9
        vals = la.eigvalsh(pi)
        assert np.all(np.minimum(np.abs(vals), np.abs(vals - 1)) < 1e-9)

    @pytest.mark.parametrize("n", range(1, 13))
    def test_mass_matches_enumeration(self, n):
        s = np.diag([0.75, 0.25])
        tp = typical_projector(s, n, 0.25)
        got = projector_bounds(tp).captured_mass
        assert got == pytest.approx(binomial_entropy_mass(0.25, n, 0.25), abs=1e-12)
        if n <= 6:
            pi = tp.matrix()
            assert np.trace(pi @ la.tensor_power(s, n) @ pi).real == pytest.approx(got, abs=1e-12)

    def test_mass_trend(self):
        s = np.diag([0.75, 0.25])
        m = {n: projector_bounds(typical_projector(s, n, 0.25)).captured_mass for n in (3, 8, 12)}
        assert m[3] < m[8] and m[3] < m[12]
        far = [binomial_entropy_mass(0.25, n, 0.25) for n in (50, 200, 1000)]
        assert far[0] < far[1] < far[2] and far[2] > 0.99

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.floats(0.05, 0.5))
    def test_monotone_in_delta(self, seed, delta):
        s = dens(2, seed)
        a = typical_projector(s, 5, delta).mask
        b = typical_projector(s, 5, delta + 0.1).mask
        assert np.all(b[a])

    def test_budget(self):
        with la.memory_budget(1000):
            with pytest.raises(BudgetExceeded):
                typical_projector(np.eye(2) / 2, 6)


class TestBounds:
    def test_flat(self):
        rep = projector_bounds(typical_projector(np.eye(2) / 2, 3, 0.1))
        assert rep.trace == 8 and rep.trace_bound >= 8
        assert rep.holds

    def test_pure(self):
        assert projector_bounds(typical_projector(KET0, 4)).trace == 1

    def test_diag_n10(self):
        rep = projector_bounds(typical_projector(np.diag([0.75, 0.25]), 10, 0.2))
        assert rep.trace <= rep.trace_bound
        assert rep.max_eigenvalue <= rep.eigenvalue_bound
        assert rep.holds

    @pytest.mark.parametrize("seed", range(4))
    def test_dense_eigenvalue_check(self, seed):
        s = dens(2, 20 + seed)
        tp = typical_projector(s, 4, 0.3)
        pi = tp.matrix()
        top = la.eigvalsh(pi @ la.tensor_power(s, 4) @ pi, "jacobi")[0]
        rep = projector_bounds(tp)
        assert top == pytest.approx(rep.max_eigenvalue, abs=1e-12)
        assert rep.holds


class TestConditional:
    states = {0: KET0, 1: PLUS}

    def test_atypical_is_zero(self):
        cp = conditional_typical_projector(self.states, (0, 0, 0, 0), 0.2, Pmf([0.5, 0.5]), classical_delta=0.1)
        assert not cp.classical_typical
        assert_allclose(cp.matrix(), np.zeros((16, 16)))

    def test_maximally_mixed(self):
        cp = conditional_typical_projector({0: np.eye(2) / 2, 1: np.eye(2) / 2}, (0, 1, 1), 0.1)
        assert_allclose(cp.matrix(), np.eye(8), atol=1e-12)

    @pytest.mark.parametrize("x", [(0, 1, 2, 0), (2, 2, 1, 0), (1, 0, 2, 1)])
    def test_operator_inequality(self, x):
        states = {a: dens(2, 60 + a) for a in range(3)}
        pmf = Pmf([0.4, 0.3, 0.3])
        cp = conditional_typical_projector(states, x, 0.3, pmf)
        pi = cp.matrix()
        sx = la.kron_all([states[a] for a in x])
        assert np.max(np.abs(pi @ sx - sx @ pi)) < 1e-9
        assert np.max(np.abs(pi @ pi - pi)) < 1e-9
        # eigenvalues of pi s pi lie below the ceiling times pi
        ceiling = conditional_bound(cp)
        gap = la.eigvalsh(ceiling * pi - pi @ sx @ pi, "jacobi")
        assert gap[-1] >= -1e-12

    def test_empirical_centre(self):
        cp = conditional_typical_projector({0: np.diag([0.75, 0.25]), 1: KET0}, (0, 1), 0.2)
        assert cp.centre == pytest.approx(0.8112781244591328 / 2)
