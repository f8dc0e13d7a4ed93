import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from povmsim import linalg as la
from povmsim import qstates as qs
from povmsim.errors import AverageMismatch, DimensionMismatch, LabelMismatch, NotADensityOperator, NotIsometry
from povmsim.sampling import random_povm, random_unitary

from conftest import KET0, KET1, MINUS, PLUS, dens


def rpovm(d, k, seed):
    return qs.Povm(tuple(range(k)), tuple(random_povm(d, k, np.random.default_rng(seed))))


def channel_oracle(s, povm):
    """Blocks tr_A[(I (x) lam_y) |phi><phi|] from the dense purification."""
    ps = qs.canonical_purification(s)
    d = ps.dim_sys
    big = ps.density()
    return {y: la.partial_trace(np.kron(np.eye(ps.dim_ref), e) @ big, [ps.dim_ref, d], [0]) for y, e in povm.items()}


class TestDensity:
    def test_accepts_state(self):
        assert qs.is_density(PLUS)

    @pytest.mark.parametrize(
        "bad",
        [np.diag([0.5, 0.4]), np.diag([1.2, -0.2]), np.array([[0.5, 1.0], [0.0, 0.5]])],
        ids=["trace", "negative", "non-hermitian"],
    )
    def test_rejects(self, bad):
        assert not qs.is_density(bad)

    def test_error_type(self):
        with pytest.raises(NotADensityOperator, match="trace"):
            qs.check_density(0.9 * KET0)


class TestValidatePovm:
    def test_projective(self):
        assert qs.validate_povm(qs.Povm((0, 1), (KET0, KET1))).passed

    def test_overcomplete(self):
        rep = qs.validate_povm(qs.Povm((0, 1), (0.6 * np.eye(2), 0.6 * np.eye(2))))
        assert not rep.passed
        assert rep.completeness_error == pytest.approx(0.2)

    def test_not_positive(self):
        rep = qs.validate_povm(qs.Povm((0, 1), (np.diag([1.1, 0.0]), np.diag([-0.1, 1.0]))))
        assert not rep.passed and rep.min_eigenvalue == pytest.approx(-0.1)

    def test_non_hermitian_fails(self):
        rep = qs.validate_povm(qs.Povm((0,), (np.array([[1.0, 0.1], [0.0, 1.0]]),)))
        assert not rep.passed

    @pytest.mark.parametrize("d,k", [(2, 2), (2, 5), (3, 4)])
    def test_random(self, d, k):
        assert qs.validate_povm(rpovm(d, k, d * 10 + k)).passed

    def test_duplicate_labels(self):
        with pytest.raises(LabelMismatch):
            qs.Povm((0, 0), (KET0, KET1))

    def test_tensor_power_labels(self):
        p = qs.Povm.computational(2).tensor_power(2)
        assert p.labels == ((0, 0), (0, 1), (1, 0), (1, 1))
        assert_allclose(p[(1, 0)], np.diag([0, 0, 1, 0]))


class TestPurification:
    def test_pure(self):
        ps = qs.canonical_purification(KET0)
        assert_allclose(ps.vector(), [1, 0, 0, 0], atol=1e-15)

    def test_maximally_mixed(self):
        ps = qs.canonical_purification(np.eye(2) / 2)
        assert_allclose(ps.vector(), np.array([1, 0, 0, 1]) / np.sqrt(2), atol=1e-15)

    @pytest.mark.parametrize("d", [2, 3, 4])
    @pytest.mark.parametrize("seed", range(3))
    def test_marginals(self, d, seed):
        rho = dens(d, seed * 7 + d)
        ps = qs.canonical_purification(rho)
        sys_marg = la.partial_trace(ps.density(), [d, d], [1])
        ref_marg = la.partial_trace(ps.density(), [d, d], [0])
        assert np.max(np.abs(sys_marg - rho)) < 1e-9
        assert_allclose(ps.system_marginal(), sys_marg, atol=1e-12)
        # reference side carries the conjugated state
        assert_allclose(ref_marg, rho.conj(), atol=1e-12)

    def test_jacobi_route_agrees(self):
        rho = dens(3, 5)
        a = qs.canonical_purification(rho).amplitudes
        b = qs.canonical_purification(rho, "jacobi").amplitudes
        assert_allclose(a, b, atol=1e-10)

    @pytest.mark.parametrize("seed", range(5))
    def test_overlap_is_fidelity_trace(self, seed):
        s, r = dens(3, seed), dens(3, 100 + seed)
        ov = qs.canonical_purification(s).overlap(qs.canonical_purification(r))
        assert ov == pytest.approx(qs.fidelity_overlap(s, r), abs=1e-10)


class TestIsometry:
    def test_identity(self):
        ps = qs.canonical_purification(dens(2, 3))
        assert_allclose(qs.apply_reference_isometry(ps, np.eye(2)).amplitudes, ps.amplitudes)

    @pytest.mark.parametrize("seed", range(4))
    def test_unitary_keeps_system_marginal(self, seed):
        rho = dens(3, seed)
        ps = qs.canonical_purification(rho)
        v = random_unitary(3, np.random.default_rng(seed))
        assert_allclose(qs.apply_reference_isometry(ps, v).system_marginal(), rho, atol=1e-10)

    def test_rejects_non_isometry(self):
        ps = qs.canonical_purification(dens(2, 1))
        with pytest.raises(NotIsometry):
            qs.apply_reference_isometry(ps, np.diag([1.0, 0.5]))

    @pytest.mark.parametrize("dz", [2, 3, 5])
    def test_measured_distance_invariance(self, dz):
        r = np.random.default_rng(dz)
        rho = dens(2, dz)
        lam, theta = rpovm(2, 3, dz), rpovm(2, 3, dz + 1)
        v = random_unitary(dz, r)[:, :2]
        ps = qs.canonical_purification(rho)
        left = qs.measured_purification_distance(ps, lam, theta)
        right = qs.measured_purification_distance(qs.apply_reference_isometry(ps, v), lam, theta)
        assert left == pytest.approx(right, abs=1e-9)
        assert left == pytest.approx(qs.sandwiched_distance(rho, lam, theta), abs=1e-9)


class TestMeasurement:
    def test_uniform_outcomes(self):
        assert_allclose(qs.outcome_probabilities(qs.Povm.computational(2), np.eye(2) / 2), [0.5, 0.5])

    def test_hadamard_basis_on_diagonal(self):
        p = qs.outcome_probabilities(qs.Povm((0, 1), (PLUS, MINUS)), np.diag([0.75, 0.25]))
        assert_allclose(p, [np.trace(PLUS @ np.diag([0.75, 0.25])).real] * 2)
        assert_allclose(p, [0.5, 0.5])

    @settings(max_examples=40, deadline=None)
    @given(st.integers(2, 4), st.integers(1, 5), st.integers(0, 2**31 - 1))
    def test_normalized(self, d, k, seed):
        p = qs.outcome_probabilities(rpovm(d, k, seed), dens(d, seed))
        assert np.all(p >= -1e-12)
        assert p.sum() == pytest.approx(1.0, abs=1e-10)

    def test_channel_blocks(self):
        cq = qs.measurement_channel(qs.Povm.computational(2), np.diag([0.3, 0.7]))
        assert cq.blocks[0][0, 0] == pytest.approx(0.3)

    def test_reference_state_diagonal(self):
        p = 0.3
        cq = qs.reference_measurement_state(np.diag([p, 1 - p]), qs.Povm.computational(2))
        assert_allclose(cq.blocks[0], np.diag([p, 0]), atol=1e-15)
        assert_allclose(cq.blocks[1], np.diag([0, 1 - p]), atol=1e-15)

    def test_reference_state_trivial(self):
        s = dens(3, 4)
        cq = qs.reference_measurement_state(s, qs.Povm(("I",), (np.eye(3),)))
        assert_allclose(cq.blocks["I"], s.conj(), atol=1e-12)

    @pytest.mark.parametrize("d,k", [(2, 2), (2, 3), (3, 3)])
    def test_reference_state_matches_channel_oracle(self, d, k):
        s, povm = dens(d, k), rpovm(d, k, d + k)
        got = qs.reference_measurement_state(s, povm)
        want = channel_oracle(s, povm)
        via = qs.measure_system(qs.canonical_purification(s), povm)
        for y in povm.labels:
            assert_allclose(got.blocks[y], want[y], atol=1e-10)
            assert_allclose(via.blocks[y], want[y], atol=1e-10)


class TestPostprocess:
    def cq(self):
        return qs.reference_measurement_state(dens(2, 9), rpovm(2, 3, 9))

    def test_identity(self):
        cq = self.cq()
        out = qs.classical_postprocess(cq, qs.ClassicalChannel.identity(cq.labels))
        assert out.distance(cq) == 0.0

    def test_constant(self):
        cq = self.cq()
        ch = qs.ClassicalChannel(cq.labels, ("a", "b"), np.tile([1.0, 0.0], (3, 1)))
        out = qs.classical_postprocess(cq, ch)
        assert out.labels == ("a",)
        assert_allclose(out.blocks["a"], sum(cq.blocks.values()))

    def test_monolithic_oracle(self):
        # (id (x) E^P) o (id (x) E^lam) against the dense channel of the merged POVM
        s, lam = dens(2, 12), rpovm(2, 3, 12)
        probs = np.array([[0.9, 0.1], [0.2, 0.8], [0.5, 0.5]])
        ch = qs.ClassicalChannel(lam.labels, ("u", "v"), probs)
        merged = qs.Povm(("u", "v"), tuple(sum(probs[i, j] * lam.elements[i] for i in range(3)) for j in range(2)))
        got = qs.classical_postprocess(qs.measure_system(qs.canonical_purification(s), lam), ch)
        want = channel_oracle(s, merged)
        for y in ("u", "v"):
            assert_allclose(got.blocks[y], want[y], atol=1e-12)

    def test_label_mismatch(self):
        with pytest.raises(LabelMismatch):
            qs.classical_postprocess(self.cq(), qs.ClassicalChannel.identity((0, 1)))


class TestCqState:
    def test_distance_missing_labels(self):
        a = qs.CqState({0: np.eye(2) / 2})
        b = qs.CqState({1: np.eye(2) / 2})
        assert a.distance(b) == pytest.approx(2.0)

    def test_kron_labels(self):
        a = qs.CqState({0: np.eye(1)})
        assert a.kron(a).labels == ((0, 0),)

    def test_tensor_power(self):
        cq = qs.reference_measurement_state(np.diag([0.75, 0.25]), qs.Povm.computational(2))
        two = qs.cq_tensor_power(cq, 2)
        assert two.trace() == pytest.approx(1.0)
        assert_allclose(two.blocks[(0, 1)], np.kron(cq.blocks[0], cq.blocks[1]))

    def test_dimension_check(self):
        with pytest.raises(DimensionMismatch):
            qs.CqState({0: np.eye(2), 1: np.eye(3)})


class TestEntropy:
    def test_identical_states(self):
        e = qs.Ensemble((0, 1), (PLUS, PLUS), [0.3, 0.7])
        assert qs.holevo_information(e) == pytest.approx(0.0, abs=1e-12)

    def test_orthogonal(self):
        assert qs.holevo_information(qs.Ensemble((0, 1), (KET0, KET1), [0.5, 0.5])) == pytest.approx(1.0)

    def test_zero_plus(self):
        # closed form: the average [[3/4, 1/4], [1/4, 1/4]] has eigenvalues (1 +- 1/sqrt 2)/2
        lam = (1 + 1 / math.sqrt(2)) / 2
        oracle = -lam * math.log2(lam) - (1 - lam) * math.log2(1 - lam)
        got = qs.holevo_information(qs.Ensemble((0, 1), (KET0, PLUS), [0.5, 0.5]))
        assert got == pytest.approx(oracle, abs=1e-12)
        assert got == pytest.approx(qs.binary_entropy(math.cos(math.pi / 8) ** 2), abs=1e-12)
        assert got == pytest.approx(0.600876, abs=1e-6)

    def test_binary(self):
        assert qs.binary_entropy(0.75) == pytest.approx(0.8112781244591328)
        assert qs.binary_entropy(1.0) == 0.0

    @settings(max_examples=30, deadline=None)
    @given(st.integers(2, 4), st.integers(0, 2**31 - 1))
    def test_entropy_range(self, d, seed):
        h = qs.von_neumann_entropy(dens(d, seed))
        assert -1e-12 <= h <= math.log2(d) + 1e-12


class TestDistances:
    def test_equal(self):
        s = dens(2, 1)
        exact, _ = qs.purification_distance(s, s)
        assert exact == pytest.approx(0.0, abs=1e-7)

    def test_orthogonal(self):
        exact, bound = qs.purification_distance(KET0, KET1)
        assert exact == pytest.approx(2.0)
        assert bound == pytest.approx(2 * math.sqrt(2) * 2**0.25)
        assert bound == pytest.approx(3.364, abs=1e-3)

    @settings(max_examples=60, deadline=None)
    @given(st.sampled_from([2, 3]), st.integers(0, 2**31 - 1))
    def test_bound_holds(self, d, seed):
        exact, bound = qs.purification_distance(dens(d, seed), dens(d, seed + 1))
        assert exact <= bound + 1e-9

    def test_same_povm(self):
        rho, lam = dens(2, 3), rpovm(2, 3, 3)
        e = qs.Ensemble((0,), (rho,), [1.0])
        assert qs.ensemble_simulation_distance(rho, lam, lam, e) == 0.0

    def test_single_member(self):
        rho, lam, theta = dens(2, 4), rpovm(2, 3, 4), rpovm(2, 3, 5)
        e = qs.Ensemble((0,), (rho,), [1.0])
        want = np.abs(qs.outcome_probabilities(lam, rho) - qs.outcome_probabilities(theta, rho)).sum()
        assert qs.ensemble_simulation_distance(rho, lam, theta, e) == pytest.approx(want)

    @pytest.mark.parametrize("seed", range(6))
    def test_ensemble_below_sandwich(self, seed):
        rho = dens(3, seed)
        lam, theta, nu = rpovm(3, 3, seed), rpovm(3, 3, seed + 50), rpovm(3, 4, seed + 90)
        r = la.op_sqrt(rho)
        pk = [float(np.trace(rho @ v).real) for v in nu.elements]
        sk = [r @ v @ r / p for v, p in zip(nu.elements, pk)]
        e = qs.Ensemble(tuple(range(4)), tuple(sk), np.array(pk) / sum(pk))
        got = qs.ensemble_simulation_distance(rho, lam, theta, e)
        assert got <= qs.sandwiched_distance(rho, lam, theta) + 1e-12

    def test_average_mismatch(self):
        e = qs.Ensemble((0,), (KET0,), [1.0])
        lam = qs.Povm.computational(2)
        with pytest.raises(AverageMismatch):
            qs.ensemble_simulation_distance(np.eye(2) / 2, lam, lam, e)


class TestJson:
    def test_povm_round_trip(self):
        p = rpovm(3, 4, 2)
        back = qs.povm_from_json(json.loads(json.dumps(qs.povm_to_json(p))))
        assert back.labels == p.labels
        for a, b in zip(p.elements, back.elements):
            assert np.max(np.abs(a - b)) < 1e-12

    def test_ensemble_round_trip(self):
        e = qs.Ensemble(("a", "b"), (dens(2, 1), dens(2, 2)), [0.25, 0.75])
        back = qs.ensemble_from_json(json.loads(json.dumps(qs.ensemble_to_json(e))))
        assert_allclose(back.pmf, e.pmf)
        assert np.max(np.abs(back.average() - e.average())) < 1e-12
