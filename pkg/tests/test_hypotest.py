"""
Tests for the singlet fractions and the finite-n Stein functional.
"""

from dataclasses import replace

import numpy as np
import pytest

from data.state_data_storage import IsotropicParams, bipartite
from hypotest import fsep, fsep_bounded, fsep_relaxed, sfne_eval, singlet_fraction, stein_functional, \
    unbounded_distillation_probe
from states import isotropic, max_entangled, random_separable, random_state
from tensor_core import tensor_power


class TestSingletFraction:
    @pytest.mark.parametrize('K', [2, 3, 4])
    def test_separable_state_gives_one_over_K(self, classical_pair, settings, K):
        bracket = fsep(classical_pair, K, 1e-6, settings)
        np.testing.assert_allclose(bracket.lower, 1.0 / K, atol=1e-6)
        np.testing.assert_allclose(bracket.upper, 1.0 / K, atol=1e-6)

    @pytest.mark.parametrize('K', [2, 3])
    def test_max_entangled_gives_one(self, settings, K):
        bracket = fsep(max_entangled(K), K, 1e-6, settings)
        np.testing.assert_allclose(bracket.lower, 1.0, atol=1e-6)
        np.testing.assert_allclose(bracket.upper, 1.0, atol=1e-9)

    @pytest.mark.parametrize('seed', range(10))
    @pytest.mark.parametrize('K', [2, 4])
    def test_brackets_close_on_two_qubits(self, settings, seed, K):
        rho = random_state(bipartite(2, 2), 1 + seed % 4, seed)
        bracket = fsep(rho, K, 1e-6, settings, seed)
        assert 1.0 / K - 1e-9 <= bracket.lower <= bracket.upper <= 1.0
        assert bracket.gap <= 1e-4

    def test_isotropic_family_is_non_decreasing(self, settings):
        fidelities = [0.0, 0.25, 0.5, 0.75, 1.0]
        brackets = [fsep(isotropic(IsotropicParams(2, f)), 2, 1e-6, settings) for f in fidelities]
        for fidelity, bracket in zip(fidelities, brackets):
            assert bracket.upper >= max(0.5, fidelity) - 1e-6
        for smaller, larger in zip(brackets, brackets[1:]):
            assert smaller.lower <= larger.upper + 1e-6
        np.testing.assert_allclose(brackets[2].upper, 0.5, atol=1e-4)

    @pytest.mark.slow
    @pytest.mark.parametrize('seed', range(50))
    @pytest.mark.parametrize('K', [2, 4])
    def test_primal_and_dual_agree_on_two_qubits(self, settings, seed, K):
        rho = random_state(bipartite(2, 2), 1 + seed % 4, 1000 + seed)
        assert fsep(rho, K, 1e-6, settings, seed).gap <= 1e-5

    def test_rejects_small_K(self, phi2, settings):
        with pytest.raises(ValueError):
            fsep(phi2, 1, 1e-6, settings)

    def test_cost_above_one(self, phi2, settings):
        bracket = singlet_fraction(phi2, 1.5, 1e-6, settings)
        assert bracket.lower == bracket.upper == 1.0

    def test_lower_certificate_is_a_povm_element(self, phi2, settings):
        bracket = fsep(phi2, 2, 1e-6, settings)
        povm = bracket.lower_certificate.primal['A']
        values = np.linalg.eigvalsh((povm + povm.conj().T) / 2)
        assert values[0] >= -1e-6
        assert values[-1] <= 1 + 1e-6


class TestRelaxedSingletFractions:
    def test_zero_relaxation_is_plain(self, phi2, settings):
        relaxed = fsep_relaxed(phi2, 2, 0.0, 1e-6, settings)
        plain = fsep(phi2, 2, 1e-6, settings)
        assert relaxed.lower == plain.lower
        assert relaxed.upper == plain.upper

    @pytest.mark.parametrize('seed', range(3))
    def test_bounded_below_relaxed(self, settings, seed):
        rho = random_state(bipartite(2, 2), 2, 300 + seed)
        bounded = fsep_bounded(rho, 4, 0.2, 1e-6, settings, seed)
        relaxed = fsep_relaxed(rho, 4, 0.2, 1e-6, settings, seed)
        plain = fsep(rho, 4, 1e-6, settings, seed)
        assert bounded.lower <= relaxed.upper + 1e-6
        assert bounded.lower <= 1.2 * plain.upper + 1e-6

    @pytest.mark.parametrize('n', [1, 2])
    @pytest.mark.parametrize('y', [0.5, 1.0, 2.0])
    def test_relaxed_value_stays_away_from_zero(self, phi2, settings, n, y):
        bracket = fsep_relaxed(tensor_power(phi2, n), 2.0 ** (n * y), 0.5, 1e-6, settings)
        assert bracket.lower >= 0.5 - 1e-9

    @pytest.mark.parametrize('n', [1, 2])
    @pytest.mark.parametrize('y', [1.0, 2.0])
    def test_bounded_value_within_relaxation_factor(self, phi2, settings, n, y):
        copies, K = tensor_power(phi2, n), 2.0 ** (n * y)
        bounded = fsep_bounded(copies, K, 0.5, 1e-6, settings)
        plain = fsep(copies, K, 1e-6, settings)
        assert bounded.lower <= 1.5 * plain.upper + 1e-6

    @pytest.mark.slow
    @pytest.mark.parametrize('y', [0.5, 1.0, 2.0])
    def test_relaxed_value_stays_away_from_zero_three_copies(self, phi2, settings, y):
        bracket = fsep_relaxed(tensor_power(phi2, 3), 2.0 ** (3 * y), 0.5, 1e-6, settings)
        assert bracket.lower >= 0.5 - 1e-9

    def test_rejects_negative_relaxation(self, phi2, settings):
        with pytest.raises(ValueError):
            fsep_relaxed(phi2, 2, -0.1, 1e-6, settings)


class TestSteinFunctional:
    def test_bell_state_at_rate_one(self, phi2, settings):
        bracket = stein_functional(phi2, 1, 1.0, 1e-6, settings)
        assert bracket.lower >= 0.0
        assert bracket.upper <= 1e-6

    def test_bell_state_at_rate_zero(self, phi2, settings):
        bracket = stein_functional(phi2, 1, 0.0, 1e-6, settings)
        assert bracket.contains(0.5, 1e-5)

    @pytest.mark.parametrize('n', [1, 2])
    def test_separable_state_vanishes(self, classical_pair, settings, n):
        bracket = stein_functional(classical_pair, n, 0.0, 1e-6, settings)
        assert bracket.upper <= 1e-6

    def test_non_increasing_in_rate(self, phi2, settings):
        rates = np.linspace(0.0, 2.0, 21)
        brackets = [stein_functional(phi2, 1, y, 1e-6, settings) for y in rates]
        for smaller, larger in zip(brackets, brackets[1:]):
            assert larger.lower <= smaller.upper + 1e-6

    @pytest.mark.slow
    @pytest.mark.parametrize('n', [2, 3])
    def test_non_increasing_in_rate_for_copies(self, phi2, settings, n):
        rates = np.linspace(0.0, 2.0, 21)
        brackets = [stein_functional(phi2, n, y, 1e-6, settings) for y in rates]
        for smaller, larger in zip(brackets, brackets[1:]):
            assert larger.lower <= smaller.upper + 1e-6

    @pytest.mark.slow
    def test_three_copies_cross_one_half(self, phi2, settings):
        assert stein_functional(phi2, 3, 0.5, 1e-6, settings).lower > 0.5
        assert stein_functional(phi2, 3, 1.5, 1e-6, settings).upper < 0.5

    def test_random_separable_state(self, settings):
        rho, _ = random_separable(bipartite(2, 2), 2, 4)
        bracket = stein_functional(rho, 1, 0.0, 1e-6, settings)
        assert bracket.lower <= 1e-6


class TestSingletFractionRewrite:
    @pytest.mark.slow
    def test_bell_state(self, phi2, settings):
        bracket, b = sfne_eval(phi2, 1, 1.0, 1e-6, settings)
        assert bracket.upper <= 1.0
        assert bracket.contains(1.0, 1e-5)
        assert bracket.gap <= 1e-5
        assert b <= 1.0 + 1e-9

    @pytest.mark.parametrize('y', [0.5, 1.0])
    def test_bell_state_bracket_closes(self, phi2, settings, y):
        coarse = replace(settings, hypothesis_testing=replace(settings.hypothesis_testing, b_grid_points=4))
        bracket, _ = sfne_eval(phi2, 1, y, 1e-6, coarse)
        assert bracket.upper - bracket.lower <= 1e-5
        np.testing.assert_allclose(bracket.upper, 1.0, atol=1e-5)

    def test_matches_singlet_fraction_of_the_copies(self, settings):
        rho = isotropic(IsotropicParams(2, 0.8))
        coarse = replace(settings, hypothesis_testing=replace(settings.hypothesis_testing, b_grid_points=4))
        bracket, b = sfne_eval(rho, 1, 1.5, 1e-6, coarse)
        direct = fsep(rho, 2.0 ** 1.5, 1e-6, settings)
        assert bracket.gap <= 1e-4
        np.testing.assert_allclose(bracket.lower, direct.lower, atol=1e-4)
        assert b <= 1.5 + 1e-9

    def test_coarse_grid_brackets_the_singlet_fraction(self, phi2, settings):
        coarse = replace(settings, hypothesis_testing=replace(settings.hypothesis_testing, b_grid_points=8))
        bracket, b = sfne_eval(phi2, 1, 1.5, 1e-6, coarse)
        direct = fsep(phi2, 2.0 ** 1.5, 1e-6, settings)
        assert bracket.lower <= direct.upper + 1e-6
        assert direct.lower <= bracket.upper + 1e-6
        assert b <= 1.5 + 1e-9


class TestDistillationProbe:
    def test_bell_state(self, phi2, settings):
        probe = unbounded_distillation_probe(phi2, 1, 1.0, 0.5, 1e-6, settings)
        assert probe.relaxed.lower == probe.relaxed.upper == 1.0
        assert probe.floor.upper <= 1e-6
        assert not probe.penalty_dominates

    def test_penalty_dominates_beyond_rate(self, phi2, settings):
        probe = unbounded_distillation_probe(phi2, 1, 2.0, 0.5, 1e-6, settings)
        assert probe.penalty_dominates
        assert probe.relaxed.lower >= 0.5 - 1e-9
        assert probe.relaxed.upper + 1e-6 >= probe.floor.lower

    def test_rejects_zero_relaxation(self, phi2, settings):
        with pytest.raises(ValueError):
            unbounded_distillation_probe(phi2, 1, 1.0, 0.0, 1e-6, settings)
