"""
Tests for the distillation and formation maps, their certification and the
monotonicity checks.
"""

import numpy as np
import pytest

from data.result_data_storage import SeppMethod, Verdict
from data.state_data_storage import DimProfile, HermitianOp, IsotropicParams, MultiState, bipartite
from measures import global_robustness
from protocols import MapConstructionError, apply_map, build_distill_map, build_formation_map, \
    check_er_monotonicity, check_lr_monotonicity, choi_matrix, compose, find_mixing_state, formation_dimension, \
    reversibility_demo, sepp_composition_bound, trace_norm_sepp_radius, twirl, verify_cptp, verify_sepp
from sep_geometry import is_ppt
from states import haar_unitary, isotropic, isotropic_fidelity, max_entangled, maximally_mixed, random_separable, \
    random_state


def _random_povm(dim: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    unitary = haar_unitary(dim, seed)
    return (unitary * rng.uniform(0.0, 1.0, dim)) @ unitary.conj().T


class TestDistillMap:
    def test_max_entangled_is_kept(self, phi2):
        channel = build_distill_map(phi2.matrix, 2)
        np.testing.assert_allclose(apply_map(channel, phi2).matrix, phi2.matrix, atol=1e-12)

    @pytest.mark.parametrize('seed', range(5))
    def test_separable_inputs_stay_below_threshold(self, phi2, seed):
        channel = build_distill_map(phi2.matrix, 2)
        rho, _ = random_separable(bipartite(2, 2), 3, seed)
        assert isotropic_fidelity(apply_map(channel, rho), 2) <= 0.5 + 1e-12

    def test_constant_povm_gives_constant_fidelity(self):
        channel = build_distill_map(np.eye(9) / 3, 3)
        output = apply_map(channel, random_state(bipartite(3, 3), 2, 1))
        np.testing.assert_allclose(isotropic_fidelity(output, 3), 1.0 / 3, atol=1e-12)

    def test_rejects_povm_outside_unit_interval(self, phi2):
        with pytest.raises(MapConstructionError):
            build_distill_map(2 * phi2.matrix, 2)

    def test_needs_input_profile_for_other_spaces(self):
        with pytest.raises(MapConstructionError):
            build_distill_map(np.eye(6) / 2, 2)
        channel = build_distill_map(np.eye(6) / 2, 2, bipartite(2, 3))
        assert channel.in_profile.dims == (2, 3)

    def test_rejects_mismatched_input(self, phi2):
        channel = build_distill_map(phi2.matrix, 2)
        with pytest.raises(MapConstructionError):
            apply_map(channel, max_entangled(3))


class TestCptp:
    @pytest.mark.parametrize('seed', range(3))
    def test_distill_maps_are_cptp(self, seed):
        channel = build_distill_map(_random_povm(4, seed), 2)
        assert verify_cptp(channel).is_cptp

    def test_identity_choi_matrix(self, phi2):
        choi = choi_matrix(lambda matrix: matrix, 2).matrix
        np.testing.assert_allclose(choi, 2 * phi2.matrix, atol=1e-12)
        assert verify_cptp(lambda matrix: matrix, 2).is_cptp

    def test_transpose_is_not_completely_positive(self):
        report = verify_cptp(lambda matrix: matrix.T, 2)
        assert report.trace_preserving
        assert not report.completely_positive
        np.testing.assert_allclose(report.min_choi_eigenvalue, -1.0, atol=1e-12)

    def test_trace_increasing_map(self):
        report = verify_cptp(lambda matrix: 2 * matrix, 2)
        assert not report.trace_preserving


class TestTwirl:
    @pytest.mark.parametrize('K', [2, 3])
    def test_fixed_points(self, K):
        np.testing.assert_allclose(twirl(max_entangled(K), K).matrix, max_entangled(K).matrix, atol=1e-12)
        mixed = maximally_mixed(bipartite(K, K))
        np.testing.assert_allclose(twirl(mixed, K).matrix, mixed.matrix, atol=1e-12)

    @pytest.mark.parametrize('seed', range(20))
    def test_preserves_fidelity(self, seed):
        rho = random_state(bipartite(2, 2), 1 + seed % 4, seed)
        np.testing.assert_allclose(isotropic_fidelity(twirl(rho, 2), 2), isotropic_fidelity(rho, 2), atol=1e-12)

    def test_rejects_other_spaces(self):
        with pytest.raises(MapConstructionError):
            twirl(random_state(bipartite(2, 3), 2, 0), 2)


class TestFormationMap:
    def test_bell_state_target(self, phi2, phi_minus):
        channel = build_formation_map(phi2, 2, phi_minus)
        np.testing.assert_allclose(apply_map(channel, max_entangled(2)).matrix, phi2.matrix, atol=1e-12)
        output = apply_map(channel, maximally_mixed(bipartite(2, 2)))
        np.testing.assert_allclose(output.matrix, (phi2.matrix + 3 * phi_minus.matrix) / 4, atol=1e-12)

    def test_rejects_entangled_mixture(self, phi2):
        with pytest.raises(MapConstructionError):
            build_formation_map(phi2, 2, phi2)

    def test_rejects_mismatched_spaces(self, phi2):
        with pytest.raises(MapConstructionError):
            build_formation_map(phi2, 2, maximally_mixed(bipartite(2, 3)))

    @pytest.mark.parametrize('name, rho', [
        ('bell', max_entangled(2)),
        ('isotropic', isotropic(IsotropicParams(2, 0.9))),
    ])
    def test_mixing_state_certifies_the_map(self, settings, name, rho):
        K = formation_dimension(global_robustness(rho, 1e-6, settings).upper)
        assert K == 2
        pi, certificate = find_mixing_state(rho, K, 1e-6, settings)
        mixture = MultiState.from_matrix((rho.matrix + (K - 1) * pi.matrix) / K, rho.profile)
        assert is_ppt(mixture)[0]
        channel = build_formation_map(rho, K, pi, certificate)
        assert verify_cptp(channel).is_cptp
        sepp = verify_sepp(channel, 1e-6, settings)
        assert sepp.method is SeppMethod.CLOSED_FORM_ISOTROPIC
        assert sepp.epsilon <= 1.0 / (K - 1) + 1e-6
        assert sepp.epsilon_lower <= sepp.epsilon

    def test_mixing_state_needs_large_enough_K(self, phi3, settings):
        with pytest.raises(MapConstructionError):
            find_mixing_state(phi3, 2, 1e-6, settings)

    @pytest.mark.parametrize('robustness, K', [(0.0, 1), (1.0, 2), (1.0 + 1e-9, 2), (1.5, 4), (3.0, 4), (7.0, 8)])
    def test_formation_dimension(self, robustness, K):
        assert formation_dimension(robustness) == K


class TestSepp:
    def test_threshold_distill_map_preserves_separability(self, phi2, settings):
        certificate = verify_sepp(build_distill_map(phi2.matrix, 2), 1e-6, settings)
        assert certificate.epsilon == 0.0

    def test_permissive_distill_map(self, settings):
        product = np.zeros((4, 4))
        product[0, 0] = 1.0
        certificate = verify_sepp(build_distill_map(product, 2), 1e-6, settings)
        np.testing.assert_allclose(certificate.epsilon, 1.0, atol=1e-5)
        np.testing.assert_allclose(certificate.epsilon_lower, 1.0, atol=1e-6)

    def test_composition_bound(self):
        assert sepp_composition_bound(0.0, 0.0) == 0.0
        assert sepp_composition_bound(1.0, 1.0) == 3.0
        with pytest.raises(ValueError):
            sepp_composition_bound(-1.0, 0.0)

    def test_composed_map_respects_bound(self, phi2, phi_minus, settings):
        first = build_distill_map(phi2.matrix, 2)
        second = build_formation_map(phi2, 2, phi_minus)
        composed = compose(first, second)
        assert composed.family == 'composed'
        epsilon_first = verify_sepp(first, 1e-6, settings).epsilon
        epsilon_second = verify_sepp(second, 1e-6, settings).epsilon
        certificate = verify_sepp(composed, 1e-6, settings)
        assert certificate.method is SeppMethod.SAMPLED
        assert certificate.epsilon <= sepp_composition_bound(epsilon_first, epsilon_second) + 1e-5

    @pytest.mark.slow
    @pytest.mark.parametrize('seed', range(20))
    def test_seeded_compositions_respect_bound(self, phi2, phi_minus, settings, seed):
        first = build_distill_map(_random_povm(4, seed), 2)
        second = build_formation_map(phi2, 2, phi_minus)
        epsilon_first = verify_sepp(first, 1e-6, settings, seed).epsilon
        epsilon_second = verify_sepp(second, 1e-6, settings, seed).epsilon
        certificate = verify_sepp(compose(first, second), 1e-6, settings, seed)
        assert certificate.epsilon <= sepp_composition_bound(epsilon_first, epsilon_second) + 1e-5

    def test_trace_norm_radius_of_threshold_map(self, phi2, settings):
        radius = trace_norm_sepp_radius(build_distill_map(phi2.matrix, 2), 1e-6, settings)
        assert radius.upper <= 1e-4


class TestMonotonicity:
    def test_identity_map(self, phi2, settings):
        report = check_lr_monotonicity(lambda rho: rho, phi2, epsilon=0.0, settings=settings)
        assert report.verdict is not Verdict.VIOLATED
        assert abs(report.margin) <= 1e-4

    def test_function_needs_epsilon(self, phi2, settings):
        with pytest.raises(ValueError):
            check_lr_monotonicity(lambda rho: rho, phi2, settings=settings)

    def test_distill_map_on_bell_state(self, phi2, settings):
        report = check_lr_monotonicity(build_distill_map(phi2.matrix, 2), phi2, settings=settings)
        assert report.epsilon == 0.0
        assert report.verdict is not Verdict.VIOLATED

    def test_formation_map_on_maximally_mixed_input(self, phi2, phi_minus, settings):
        channel = build_formation_map(phi2, 2, phi_minus)
        report = check_lr_monotonicity(channel, maximally_mixed(bipartite(2, 2)), epsilon=1.0, settings=settings)
        assert report.verdict is Verdict.HOLDS
        assert report.margin >= 1.0 - np.log2(1.5) - 1e-4

    def test_relative_entropy_under_distill_map(self, phi2, settings):
        rho = random_state(bipartite(2, 2), 2, 17)
        report = check_er_monotonicity(build_distill_map(phi2.matrix, 2), rho, settings=settings)
        assert report.verdict is not Verdict.VIOLATED

    @pytest.mark.slow
    @pytest.mark.parametrize('check', [check_lr_monotonicity, check_er_monotonicity])
    def test_seeded_pairs(self, phi2, phi_minus, settings, check):
        verdicts = []
        for seed in range(100):
            if seed % 2:
                channel = build_formation_map(phi2, 2, phi_minus)
            else:
                channel = build_distill_map(_random_povm(4, seed), 2)
            rho = random_state(bipartite(2, 2), 1 + seed % 4, 500 + seed)
            verdicts.append(check(channel, rho, settings=settings, seed=seed).verdict)
        assert Verdict.VIOLATED not in verdicts
        assert verdicts.count(Verdict.INCONCLUSIVE) <= 5


class TestReversibilityDemo:
    def test_bell_state(self, phi2, settings):
        row = reversibility_demo(phi2, 1, 1e-6, settings).rows[0]
        assert row.K_form == 2
        np.testing.assert_allclose(row.form_rate.upper, 1.0)
        np.testing.assert_allclose(row.distill_rate.lower, 1.0)
        assert row.er_rate.contains(1.0, 1e-3)
        assert row.form_epsilon <= 1.0 + 1e-6
        assert row.form_error <= 1e-9

    def test_separable_state(self, classical_pair, settings):
        row = reversibility_demo(classical_pair, 1, 1e-6, settings).rows[0]
        assert row.K_form == 1
        assert row.form_rate.upper == 0.0
        assert row.distill_rate.upper == 0.0

    def test_rejects_multipartite_states(self, settings):
        rho = maximally_mixed(DimProfile((2, 2, 2)))
        with pytest.raises(ValueError):
            reversibility_demo(rho, 1, 1e-6, settings)

    @pytest.mark.slow
    def test_gap_does_not_grow_with_copies(self, settings):
        rho = isotropic(IsotropicParams(2, 0.9))
        rows = reversibility_demo(rho, 2, 1e-6, settings).rows
        assert rows[1].gap <= rows[0].gap + 0.05


def test_hermitian_povm_wrapper(phi2):
    channel = build_distill_map(HermitianOp(phi2.matrix), 2)
    assert channel.family == 'distill'
    assert channel.K == 2
