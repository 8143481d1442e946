import numpy as np
import pytest

from src.errors import ContractViolation
from src.experiments.diagnostics import coupling_report
from src.geometry import EuclideanModel, HyperbolicModel, orthonormal_frame, ou_potential
from src.stochastic import (
    CameronMartinPath,
    DrivingNoise,
    couple_bundle,
    derivative_flow,
    develop_bundle,
    develop_path,
    finite_difference_probe,
    grid_indices,
    noise_batch,
    path_increments,
    simulate_ensemble,
    time_grid,
    uniform_distance,
)


class TestNoise:
    """Шум зависит только от (зерно, номер пути)"""

    def test_batch_matches_single_path(self, seed):
        batch = noise_batch(1.0, 20, 3, seed, [3, 4, 5])
        assert batch.shape == (3, 20, 3)
        assert np.array_equal(batch[1], path_increments(1.0, 20, 3, seed, 4))

    def test_different_seeds_differ(self):
        a = path_increments(1.0, 20, 2, 1, 0)
        b = path_increments(1.0, 20, 2, 2, 0)
        assert not np.array_equal(a, b)

    def test_invalid_grid(self):
        """Нулевой горизонт — нарушение контракта"""
        with pytest.raises(ContractViolation):
            time_grid(0.0, 10)

    def test_cameron_martin_energy(self):
        """‖h‖²_H для постоянной ḣ = (1, 0.5) на [0, 2] равна 2.5"""
        h = CameronMartinPath.constant_direction(time_grid(2.0, 40), [1.0, 0.5])
        assert h.energy == pytest.approx(2.5)
        assert np.allclose(h.values[-1], [2.0, 1.0])

    def test_cameron_martin_must_start_at_zero(self):
        with pytest.raises(ContractViolation):
            CameronMartinPath(time_grid(1.0, 2), np.ones((3, 2)))

    def test_partition_off_grid(self):
        times = time_grid(1.0, 16)
        assert list(grid_indices(times, [0.25, 1.0])) == [4, 16]
        with pytest.raises(ContractViolation):
            grid_indices(times, [0.3])


class TestDevelopment:
    """Стохастическое развитие и ансамбли"""

    def test_flat_development_is_brownian(self, flat_model, seed):
        """Без сноса в ℝ^d путь — это начало плюс накопленные приращения"""
        noise = DrivingNoise.generate(1.0, 50, 2, seed, path_index=7)
        path = develop_path(flat_model, noise, orthonormal_frame(flat_model, flat_model.origin))
        expected = np.vstack([np.zeros(2), np.cumsum(noise.increments, axis=0)])
        assert np.allclose(path.points, expected, atol=1e-12)
        assert not path.exploded

    def test_worker_count_invariance(self, ou_model, small_spec):
        """Результат не зависит от числа потоков при фиксированных чанках"""
        one = simulate_ensemble(ou_model, small_spec, chunk_size=16, workers=1)
        many = simulate_ensemble(ou_model, small_spec, chunk_size=16, workers=3)
        assert np.array_equal(one.points, many.points)
        assert np.array_equal(one.indices, np.arange(small_spec.n_paths))

    def test_sphere_paths_stay_on_sphere(self, sphere_model, small_spec):
        bundle = simulate_ensemble(sphere_model, small_spec, chunk_size=32)
        assert bundle.exclusion_fraction == 0.0
        assert np.all(sphere_model.in_domain(bundle.points))

    def test_hyperbolic_paths_stay_in_ball(self, hyperbolic_model, small_spec):
        bundle = simulate_ensemble(hyperbolic_model, small_spec, chunk_size=32)
        assert bundle.exclusion_fraction == 0.0
        assert np.all(hyperbolic_model.in_domain(bundle.points))

    def test_explosion_is_flagged(self, seed):
        """Путь за порогом взрыва помечается и исключается"""
        model = EuclideanModel(1, explosion_threshold=0.55)
        increments = np.full((2, 10, 1), 0.1)
        increments[1] = 0.0
        bundle = develop_bundle(model, increments, np.zeros(1), 1.0, seed=seed)
        assert bundle.exploded_at[0] == 6
        assert bundle.exploded_at[1] == -1
        assert bundle.exclusion_fraction == 0.5
        assert bundle.select(bundle.valid).size == 1

    def test_uniform_distance_to_itself(self, ou_model, small_spec):
        bundle = simulate_ensemble(ou_model, small_spec)
        assert np.allclose(uniform_distance(bundle, bundle), 0.0)
        assert np.allclose(uniform_distance(bundle, bundle, partition=[0.5, 1.0]), 0.0)


class TestDerivativeFlow:
    """Производный поток против конечной разности отображения Ито"""

    def test_flat_ou_matches_finite_difference(self, ou_model, seed):
        """Схема линейна по шуму, так что β_T совпадает с разностным зондом"""
        noise = DrivingNoise.generate(1.0, 64, 2, seed)
        x0 = np.array([0.3, -0.1])
        path = develop_path(ou_model, noise, orthonormal_frame(ou_model, x0))
        h = CameronMartinPath.constant_direction(noise.times, [1.0, -0.5])
        flow = derivative_flow(ou_model, path, h)
        numeric = finite_difference_probe(ou_model, noise, x0, h, 1e-3)
        assert np.allclose(flow.beta[-1], numeric, atol=1e-7)
        assert np.allclose(flow.rho, 0.0)

    def test_foreign_model_rejected(self, ou_model, flat_model, seed):
        noise = DrivingNoise.generate(1.0, 16, 2, seed)
        path = develop_path(ou_model, noise, orthonormal_frame(ou_model, ou_model.origin))
        h = CameronMartinPath.constant_direction(noise.times, [1.0, 0.0])
        with pytest.raises(ContractViolation):
            derivative_flow(flat_model, path, h)


class TestCoupling:
    """Каплинг параллельным переносом"""

    def test_flat_distance_is_constant(self, flat_model, seed):
        """Без сноса в ℝ^d расстояние между X и Y не меняется"""
        increments = noise_batch(1.0, 32, 2, seed, range(8))
        result = couple_bundle(flat_model, increments, np.zeros(2), np.array([0.5, 0.0]), 1.0, seed)
        assert not result.aborted.any()
        assert np.allclose(result.distances, 0.5)

    def test_ou_contracts(self, seed):
        """Для V = −λ|x|²/2 расстояние не растет"""
        model = EuclideanModel(2, drift=ou_potential(2, 1.0))
        report = coupling_report(model, K=0.0, rho0=[0.5, 1.0], n_paths=64, n_steps=50, seed=seed)
        assert report.passed
        assert all(row.max_ratio <= 1.0 + 1e-12 for row in report.rows)

    @pytest.mark.heavy
    def test_hyperbolic_growth_rate(self, seed):
        """На H² расстояние растет не быстрее e^{Kt/2}, K = c"""
        model = HyperbolicModel(2, curvature=1.0)
        report = coupling_report(model, K=1.0, rho0=[0.1, 0.5], n_paths=256, n_steps=500, seed=seed)
        assert report.passed
