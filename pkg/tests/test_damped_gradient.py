import numpy as np
import pytest

from src.errors import ConfigError, ContractViolation
from src.damped_gradient import (
    build_functional,
    bump_functional,
    check_flow_invariants,
    check_gradient_oracle,
    conditional_samples,
    constant_functional,
    continuity_probe,
    damped_energy_bound,
    damped_gradient_of,
    duality_residual,
    ellipticity_floor,
    energy_constant,
    estimate_conditional_metric,
    ibp_residual,
    linear_functional,
    lsi_gap,
    resolvent_shift,
    smooth_bounded_functional,
    solve_damped_flow_bundle,
    tilt_functional,
)
from src.stochastic import CameronMartinPath, EnsembleSpec, simulate_ensemble


@pytest.fixture
def ou_bundle(ou_model, small_spec):
    return simulate_ensemble(ou_model, small_spec, keep_frames=True)


@pytest.fixture
def sphere_bundle(sphere_model, small_spec):
    return simulate_ensemble(sphere_model, small_spec, keep_frames=True)


class TestDampedFlow:
    """Резольвентный поток для постоянной Ric − ∇Z"""

    def test_ou_flow_is_exponential(self, ou_bundle):
        """Ric − ∇Z = 0.7·I, поэтому Q_t = e^{−0.35t}·I"""
        flow = solve_damped_flow_bundle(ou_bundle)
        expected = np.exp(-0.35 * ou_bundle.times)[None, :, None, None] * np.eye(2)
        assert np.allclose(flow.Q, expected, rtol=1e-9, atol=1e-12)

    def test_sphere_flow_is_exponential(self, sphere_bundle):
        """На единичной S² Ric = g, поэтому Q_t = e^{−t/2}·I"""
        flow = solve_damped_flow_bundle(sphere_bundle)
        assert np.allclose(flow.Q[:, -1], np.exp(-0.5) * np.eye(2), rtol=1e-8, atol=1e-10)

    def test_flow_invariants(self, ou_bundle):
        """Нормы не превосходят e^{λ⁻(t−s)/2}, коцикл выполняется"""
        report = check_flow_invariants(solve_damped_flow_bundle(ou_bundle), seed=3)
        assert report['norm_excess'] <= 1e-12
        assert report['cocycle_error'] <= 1e-10

    def test_resolvent_shift_closed_form(self, ou_bundle):
        """dh̃/dt + 0.35·h̃ = a: h̃_t = a(1 − e^{−0.35t})/0.35"""
        a = np.array([1.0, -0.5])
        h = CameronMartinPath.constant_direction(ou_bundle.times, a)
        shifted = resolvent_shift(h, ou_bundle)
        decay = (1.0 - np.exp(-0.35 * ou_bundle.times)) / 0.35
        assert shifted.values.shape == (ou_bundle.size, ou_bundle.times.size, 2)
        assert np.allclose(shifted.values, decay[None, :, None] * a, rtol=1e-8, atol=1e-12)

    def test_resolvent_shift_without_curvature(self, flat_model, small_spec):
        """При Ric_Z = 0 сдвиг совпадает с h"""
        bundle = simulate_ensemble(flat_model, small_spec, keep_frames=True)
        h = CameronMartinPath.constant_direction(bundle.times, [0.3, 0.4])
        assert np.allclose(resolvent_shift(h, bundle).values, h.values[None], atol=1e-12)

    def test_energy_constant(self):
        assert energy_constant(0.0, 2.0) == pytest.approx(2.0)
        assert energy_constant(1.0, 1.0) == pytest.approx(np.e - 1.0)
        assert energy_constant(-1.0, 1.0) == pytest.approx(1.0 - np.exp(-1.0))


class TestDampedGradient:
    """Затухающий градиент, двойственность и энергетическая оценка"""

    def test_constant_functional_has_zero_gradient(self, ou_bundle):
        flow = solve_damped_flow_bundle(ou_bundle)
        grad = damped_gradient_of(constant_functional([1.0], 2.0), ou_bundle, flow)
        assert np.all(grad.damped == 0.0)
        assert np.all(grad.energy() == 0.0)

    def test_flat_linear_gradient(self, ou_bundle):
        """Для F = ⟨a, γ_T⟩ обычный градиент равен a на всем [0, T), затухающий — a·e^{−0.35(T−s)}"""
        a = np.array([1.0, -2.0])
        flow = solve_damped_flow_bundle(ou_bundle)
        grad = damped_gradient_of(linear_functional(1.0, a), ou_bundle, flow)
        assert np.allclose(grad.plain, a)
        decay = np.exp(-0.35 * (1.0 - ou_bundle.times[1:]))
        assert np.allclose(grad.damped, decay[None, :, None] * a, rtol=1e-9)

    def test_duality_residual(self, ou_bundle, sphere_bundle):
        """Σ⟨DF, Δh̃⟩ совпадает с Σ⟨D̃F, c_k⟩ до ошибки округления"""
        h = CameronMartinPath.constant_direction(ou_bundle.times, [1.0, 0.5])
        F = smooth_bounded_functional(1.0, 2, n_slots=3, seed=1)
        assert np.max(duality_residual(F, h, ou_bundle)) < 1e-10
        G = linear_functional(0.5, [0.2, -0.1, 0.4])
        assert np.max(duality_residual(G, h, sphere_bundle)) < 1e-10

    def test_energy_bound(self, ou_bundle, sphere_bundle):
        """∫|D̃F|² ≤ (e^{KT}−1)/K·(Σ|∂_j f|)² по всем путям"""
        F = smooth_bounded_functional(1.0, 2, n_slots=4, seed=7)
        _, _, passed = damped_energy_bound(F, ou_bundle, solve_damped_flow_bundle(ou_bundle), K=0.0, T=1.0)
        assert passed.all()
        G = bump_functional(1.0, [0.0, 0.0, 1.0], 0.5)
        flow = solve_damped_flow_bundle(sphere_bundle)
        _, _, passed = damped_energy_bound(G, sphere_bundle, flow, K=0.0, T=1.0)
        assert passed.all()


class TestFunctionals:
    """Цилиндрические функционалы"""

    @pytest.mark.parametrize("functional", [
        tilt_functional(1.0, 0.5, 2, power=0.5),
        bump_functional(0.5, [0.2, -0.3], 0.8),
        smooth_bounded_functional(1.0, 2, n_slots=3, seed=11),
        linear_functional(1.0, [0.3, 0.7]),
    ])
    def test_gradient_oracle(self, functional, rng):
        z = rng.normal(size=(16, functional.n_slots, 2))
        assert check_gradient_oracle(functional, z) < 1e-6

    def test_smooth_bounded_range(self, rng):
        F = smooth_bounded_functional(2.0, 3, n_slots=4, seed=5, amplitude=0.4)
        values = F.value(rng.normal(size=(200, 4, 3)) * 5)
        assert np.all(values >= 0.6 - 1e-12)
        assert np.all(values <= 1.4 + 1e-12)
        assert np.allclose(F.times, [0.5, 1.0, 1.5, 2.0])

    def test_invalid_times(self):
        with pytest.raises(ContractViolation):
            constant_functional([0.5, 0.5])
        with pytest.raises(ContractViolation):
            constant_functional([0.0])

    def test_unknown_kind(self):
        with pytest.raises(ConfigError):
            build_functional({'kind': 'cubic'}, 1.0, 2)


class TestConditionalMetric:
    """A^I для броуновского движения в ℝ² известна точно: блоки min(s_i, s_j)·I"""

    def test_single_slot(self, flat_model, seed):
        spec = EnsembleSpec(horizon=1.0, n_steps=32, n_paths=1000, seed=seed)
        metric = estimate_conditional_metric(flat_model, [1.0], np.zeros((1, 2)), spec=spec, bandwidth=1.0)
        assert metric.reliable
        assert np.allclose(metric.matrix, np.eye(2))
        assert ellipticity_floor(metric, K1=0.0).passed

    def test_two_slots_schur_complement(self, flat_model, seed):
        spec = EnsembleSpec(horizon=1.0, n_steps=32, n_paths=1000, seed=seed)
        samples = conditional_samples(flat_model, [0.5, 1.0], spec)
        assert samples.exclusion_fraction == 0.0
        metric = estimate_conditional_metric(flat_model, [0.5, 1.0], np.zeros((2, 2)),
                                             samples=samples, bandwidth=1.0)
        expected = np.kron(np.array([[0.5, 0.5], [0.5, 1.0]]), np.eye(2))
        assert np.allclose(metric.matrix, expected)
        report = ellipticity_floor(metric, K1=0.0)
        assert report.ratio == pytest.approx(1.0)
        assert report.floor == pytest.approx(0.5)

    def test_continuity_in_anchor(self, flat_model, seed):
        """В ℝ² оценка A^I не зависит от якоря: ‖A^I(z_δ) − A^I(z)‖/δ ≈ 0"""
        spec = EnsembleSpec(horizon=1.0, n_steps=32, n_paths=1000, seed=seed)
        samples = conditional_samples(flat_model, [1.0], spec)
        ratios = continuity_probe(flat_model, samples, np.zeros((1, 2)), np.array([1.0, 0.0]), bandwidth=1.0)
        assert ratios.shape == (3,)
        assert np.all(ratios < 1e-8)

    def test_small_ensemble_rejected(self, flat_model, small_spec):
        with pytest.raises(ConfigError):
            conditional_samples(flat_model, [1.0], small_spec)


@pytest.mark.heavy
class TestCertificates:
    """Монте-Карло сертификаты на больших ансамблях"""

    def test_ibp_flat(self, flat_model, seed):
        spec = EnsembleSpec(horizon=1.0, n_steps=50, n_paths=4000, seed=seed)
        h = CameronMartinPath.constant_direction(np.linspace(0.0, 1.0, 51), [1.0, 0.5])
        result = ibp_residual(flat_model, linear_functional(1.0, [1.0, 0.0]), h, spec)
        assert result.passed
        assert result.exclusion_fraction == 0.0

    def test_lsi_tilt(self, ou_model, seed):
        spec = EnsembleSpec(horizon=1.0, n_steps=50, n_paths=4000, seed=seed)
        result = lsi_gap(ou_model, tilt_functional(1.0, 0.5, 2, power=0.5), spec)
        assert result.passed
