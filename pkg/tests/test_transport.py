import numpy as np
import pytest

from src.damped_gradient import constant_functional, tilt_functional
from src.errors import ConfigError, ContractViolation, TransportCapError
from src.geometry import EuclideanModel
from src.stochastic import EnsembleSpec, PathBundle, time_grid
from src.transport import (
    PathMetric,
    WeightedPathEnsemble,
    atom_count,
    freepath_certificate,
    freepath_constant,
    nested_partition_costs,
    relative_entropy,
    talagrand_certificate,
    talagrand_constant,
    validate_initial_constant,
    w1,
    w2,
    w2_exact,
    w2_sinkhorn,
)

LINE = EuclideanModel(1)


def constant_paths(values, n_steps: int = 4) -> PathBundle:
    """Пакет постоянных путей в ℝ¹ с заданными положениями"""
    values = np.asarray(values, dtype=float)
    B = values.size
    points = np.repeat(values[:, None, None], n_steps + 1, axis=1)
    return PathBundle(
        model=LINE,
        times=time_grid(1.0, n_steps),
        points=points,
        frames=None,
        increments=np.zeros((B, n_steps, 1)),
        exploded_at=np.full(B, -1),
        indices=np.arange(B),
    )


@pytest.fixture
def four_atoms():
    a = WeightedPathEnsemble.uniform(constant_paths([0.0, 1.0, 2.0, 3.0]))
    b = WeightedPathEnsemble.uniform(constant_paths([3.5, 0.5, 2.5, 1.5]))
    return a, b


class TestExactTransport:
    """Точный LP против известных оптимальных перестановок"""

    def test_permutation_oracle(self, four_atoms):
        """Оптимальный план сдвигает каждый атом на 0.5: W₂² = 0.25, W₁ = 0.5"""
        a, b = four_atoms
        value, plan = w2_exact(a, b, PathMetric('sup'))
        assert value == pytest.approx(0.25)
        assert plan.marginal_violation < 1e-12
        assert w1(a, b, PathMetric('endpoint')) == pytest.approx(0.5)

    def test_identical_ensembles(self, four_atoms):
        a, _ = four_atoms
        value, solver = w2(a, a, PathMetric('sup'))
        assert value == pytest.approx(0.0, abs=1e-14)
        assert solver == 'exact'
        assert atom_count(a, a) == 4

    def test_sinkhorn_close_to_exact(self, four_atoms):
        """⟨π_ε, c⟩ отличается от W₂² не больше чем на ε·log n"""
        a, b = four_atoms
        value, _, _ = w2_sinkhorn(a, b, PathMetric('sup'), epsilon=0.01)
        assert 0.25 - 1e-6 <= value <= 0.25 + 0.02

    def test_debiased_sinkhorn(self, four_atoms):
        """S(a,b) − ½S(a,a) − ½S(b,b): ноль на совпадающих ансамблях, не больше смещенной оценки"""
        a, b = four_atoms
        same, _, _ = w2_sinkhorn(a, a, PathMetric('sup'), epsilon=0.01, debiased=True)
        assert same == pytest.approx(0.0, abs=1e-12)
        biased, _, _ = w2_sinkhorn(a, b, PathMetric('sup'), epsilon=0.01)
        debiased, plan, _ = w2_sinkhorn(a, b, PathMetric('sup'), epsilon=0.01, debiased=True)
        assert debiased <= biased + 1e-12
        assert debiased == pytest.approx(0.25, abs=0.02)
        assert plan.cost == pytest.approx(biased)

    def test_sinkhorn_above_cap(self):
        """Выше 600 атомов w2 переходит на Синкхорн без смещения"""
        ensemble = WeightedPathEnsemble.uniform(constant_paths(np.linspace(0.0, 1.0, 601)))
        value, solver = w2(ensemble, ensemble, PathMetric('endpoint'))
        assert solver == 'sinkhorn'
        assert value == pytest.approx(0.0, abs=1e-12)

    def test_atom_cap(self):
        big = WeightedPathEnsemble.uniform(constant_paths(np.linspace(0.0, 1.0, 601)))
        small = WeightedPathEnsemble.uniform(constant_paths(np.zeros(300)))
        other = WeightedPathEnsemble.uniform(constant_paths(np.ones(301)))
        assert atom_count(small, other) == 601
        with pytest.raises(TransportCapError):
            w2_exact(big, big, PathMetric('sup'))
        with pytest.raises(TransportCapError):
            w2_exact(small, other, PathMetric('sup'))


class TestEnsembles:
    """Ансамбли, метрики путей и матрицы стоимости"""

    def test_weights_must_sum_to_one(self):
        with pytest.raises(ContractViolation):
            WeightedPathEnsemble(constant_paths([0.0, 1.0]), np.array([0.5, 0.6]))
        with pytest.raises(ContractViolation):
            WeightedPathEnsemble(constant_paths([0.0, 1.0]), np.array([1.5, -0.5]))

    def test_tilted_weights(self):
        ensemble = WeightedPathEnsemble.tilted(constant_paths([0.0, 1.0, 2.0]), np.array([1.0, 1.0, 2.0]))
        assert np.allclose(ensemble.weights, [0.25, 0.25, 0.5])

    def test_metric_validation(self):
        with pytest.raises(ConfigError):
            PathMetric('hausdorff')
        with pytest.raises(ConfigError):
            PathMetric('partition')
        assert PathMetric('partition', [0.5, 1.0]).label == "d_I[0.5,1]"

    def test_nested_partitions_monotone(self, ou_model, small_spec):
        """d_I ≤ d_I' ≤ d_∞ для I ⊂ I'"""
        from src.stochastic import simulate_ensemble

        bundle = simulate_ensemble(ou_model, small_spec)
        mu = WeightedPathEnsemble.uniform(bundle.select(np.arange(bundle.size) < 16))
        nu = WeightedPathEnsemble.uniform(bundle.select(np.arange(bundle.size) >= 48))
        stacked = nested_partition_costs(mu, nu, [[1.0], [0.5, 1.0], [0.25, 0.5, 0.75, 1.0]])
        assert stacked.shape == (4, 16, 16)
        assert np.all(np.diff(stacked, axis=0) >= -1e-12)


class TestEntropyAndConstants:
    """Относительная энтропия и константы неравенств"""

    def test_constant_density_has_zero_entropy(self):
        estimate, se = relative_entropy(np.full(100, 2.0))
        assert estimate == pytest.approx(0.0, abs=1e-12)
        assert se == pytest.approx(0.0, abs=1e-12)

    def test_two_point_entropy(self):
        estimate, _ = relative_entropy(np.array([0.0, 2.0]))
        assert estimate == pytest.approx(np.log(2.0))

    def test_negative_density_rejected(self):
        with pytest.raises(ContractViolation):
            relative_entropy(np.array([1.0, -1.0]))

    def test_constants(self):
        assert talagrand_constant(0.0, 1.0) == pytest.approx(2.0)
        assert talagrand_constant(1.0, 1.0) == pytest.approx(2.0 * (np.e - 1.0))
        assert freepath_constant(2.0, 0.0, 1.0) == pytest.approx(4.0)

    def test_gaussian_initial_constant(self):
        """Для N(0, 1) константа C₀ = 2 точна на экспоненциальных наклонах"""
        report = validate_initial_constant(2.0)
        assert report.passed
        assert report.worst_ratio == pytest.approx(1.0, abs=2e-3)
        assert not validate_initial_constant(1.5).passed


class TestTalagrand:
    """Сертификат Талаграна на ансамбле путей"""

    def test_constant_density(self, flat_model, small_spec):
        """F ≡ 1: обе части равны нулю"""
        report = talagrand_certificate(flat_model, constant_functional([1.0]), K=0.0, spec=small_spec)
        assert report.passed
        assert report.lhs == 0.0
        assert report.rhs == pytest.approx(0.0, abs=1e-12)
        assert report.solver == 'trivial'

    @pytest.mark.heavy
    def test_tilt_in_flat_space(self, flat_model, seed):
        spec = EnsembleSpec(horizon=1.0, n_steps=64, n_paths=512, seed=seed)
        report = talagrand_certificate(flat_model, tilt_functional(1.0, 0.5, 2), K=0.0, spec=spec)
        assert report.solver == 'exact'
        assert report.passed
        assert report.w1_below_w2
        assert 0.85 <= report.ratio <= 1.0

    def test_ratio_after_control_subtraction(self, flat_model, small_spec):
        """Отношение считается по левой части за вычетом контрольного прогона"""
        report = talagrand_certificate(flat_model, tilt_functional(1.0, 0.5, 2), K=0.0, spec=small_spec)
        assert report.control > 0.0
        assert report.rhs > 0.0
        assert report.lhs_corrected == pytest.approx(max(report.lhs - report.control, 0.0))
        assert report.ratio == pytest.approx(report.lhs_corrected / report.rhs)
        assert report.passed == (report.lhs_corrected <= report.rhs * 1.15 + 1e-12)


class TestFreepath:
    """Сертификат со случайным начальным законом"""

    def test_point_start_matches_talagrand(self, flat_model, small_spec):
        """ν = δ_o и C₀ = 0 дают ту же оценку, что и сертификат с фиксированным началом"""
        F = tilt_functional(1.0, 0.5, 2)
        fixed = talagrand_certificate(flat_model, F, K=0.0, spec=small_spec)
        free = freepath_certificate(flat_model, lambda n, rng: np.zeros((n, 2)), 0.0, F, K=0.0, spec=small_spec)
        assert free.certificate == 'freepath'
        assert free.constant == pytest.approx(fixed.constant)
        assert free.lhs == pytest.approx(fixed.lhs)
        assert free.rhs == pytest.approx(fixed.rhs)

    def test_gaussian_start_constant(self, flat_model, small_spec):
        """C₀e^{KT} + 2(e^{KT}−1)/K при K = 0: C₀ + 2T"""
        report = freepath_certificate(flat_model, lambda n, rng: rng.standard_normal((n, 2)), 2.0,
                                      constant_functional([1.0]), K=0.0, spec=small_spec)
        assert report.constant == pytest.approx(4.0)
        assert report.passed
        assert report.lhs == 0.0
