import numpy as np
import pytest

from src.errors import UnsupportedModelError
from src.geometry import (
    AffineEnvelope,
    EuclideanModel,
    HyperbolicModel,
    PowerEnvelope,
    SphereModel,
    StereographicSphere,
    check_growth_envelope,
    christoffel_consistency,
    exp_and_transport,
    orthonormality_error,
    ou_potential,
    power_potential,
    ricci_from_christoffel,
    verify_curvature_bound,
)
from src.errors import ConfigError


class TestEuclidean:
    """Плоская модель и оценки кривизны для градиентных сносов"""

    def test_distance_and_exp(self, flat_model):
        """Расстояние — евклидова норма, экспонента — сдвиг, перенос тождественный"""
        x = np.array([1.0, -2.0])
        v = np.array([0.5, 0.25])
        y, w = exp_and_transport(flat_model, x, v, np.eye(2))
        assert np.allclose(y, x + v)
        assert np.allclose(w, np.eye(2))
        assert flat_model.distance(x, y) == pytest.approx(np.linalg.norm(v))

    def test_ou_curvature_bounds(self, ou_model):
        """Для V = −λ|x|²/2 форма Ric − ∇Z равна λ·I: K = 0, K₁ = λ"""
        assert ou_model.curvature_floor == pytest.approx(0.0)
        assert ou_model.curvature_ceiling == pytest.approx(0.7)
        points = np.random.default_rng(0).normal(size=(50, 2)) * 3
        report = verify_curvature_bound(ou_model, points, K=0.0)
        assert report.passed
        assert report.min_eigenvalue == pytest.approx(0.7)

    def test_power_potential_violates_bound(self):
        """Для δ > 1 нижней оценки нет: уже в нуле Ric − ∇Z = −2δ·I"""
        model = EuclideanModel(2, drift=power_potential(2, 2.0))
        assert np.isinf(model.curvature_floor)
        report = verify_curvature_bound(model, np.zeros((1, 2)), K=1.0)
        assert not report.passed
        assert report.min_eigenvalue == pytest.approx(-4.0)

    def test_growth_envelope(self, ou_model):
        """|Z| = 0.7|x| укладывается в ψ(s) = 1 + s"""
        ou_model.psi = AffineEnvelope(1.0, 1.0)
        points = np.random.default_rng(1).normal(size=(100, 2)) * 5
        assert check_growth_envelope(ou_model, points).passed

    def test_envelope_validation(self):
        """Огибающая с p > 1 отклоняется: ∫ds/ψ конечен"""
        with pytest.raises(ConfigError):
            PowerEnvelope(1.0, 1.0, 1.5)
        assert AffineEnvelope(2.0, 0.0).shifted_integral(np.array(4.0)) == pytest.approx(2.0)


class TestHyperbolic:
    """Шар Пуанкаре: замкнутые формы против конечных разностей"""

    def test_distance_from_origin(self):
        """ρ(0, x) = 2·artanh|x|/√c"""
        model = HyperbolicModel(3, curvature=4.0)
        x = np.array([0.3, 0.2, -0.1])
        expected = 2.0 * np.arctanh(np.linalg.norm(x)) / 2.0
        assert model.distance_from_origin(x) == pytest.approx(expected, rel=1e-12)

    def test_exp_log_consistency(self, hyperbolic_model, rng):
        """log_x(exp_x v) = v и ρ(x, exp_x v) = |v|_g"""
        x = np.array([0.2, -0.3])
        v = rng.normal(size=2) * 0.3
        y, _ = hyperbolic_model.exp_and_transport(x, v, v)
        assert np.allclose(hyperbolic_model.log_map(x, y), v, atol=1e-9)
        norm = np.sqrt(v @ hyperbolic_model.metric(x) @ v)
        assert hyperbolic_model.distance(x, y) == pytest.approx(norm, rel=1e-9)

    def test_transport_keeps_orthonormal_frame(self, hyperbolic_model):
        """Параллельный перенос сохраняет ортонормированность репера"""
        x = np.array([0.1, 0.4])
        e = hyperbolic_model.tangent_basis(x)
        v = e @ np.array([0.7, -0.2])
        y, e1 = hyperbolic_model.exp_and_transport(x, v, e)
        assert orthonormality_error(hyperbolic_model, y, e1) < 1e-9

    def test_christoffel_matches_metric(self, hyperbolic_model):
        """Замкнутая форма Γ совпадает с конечно-разностной по метрике"""
        points = np.array([[0.0, 0.0], [0.3, -0.2], [-0.5, 0.4]])
        assert christoffel_consistency(hyperbolic_model, points) < 1e-5

    def test_curvature_bounds(self):
        """Ric = −(d−1)c·g: K = (d−1)c достигается, K₁ = −(d−1)c"""
        model = HyperbolicModel(3, curvature=0.5)
        assert model.curvature_floor == pytest.approx(1.0)
        assert model.curvature_ceiling == pytest.approx(-1.0)
        points = np.random.default_rng(2).uniform(-0.5, 0.5, size=(20, 3))
        assert verify_curvature_bound(model, points, K=1.0).passed

    def test_drift_rejected(self):
        """Ненулевой снос на гиперболической модели не поддерживается"""
        with pytest.raises(UnsupportedModelError):
            HyperbolicModel(2, drift=ou_potential(2, 1.0))


class TestSphere:
    """Вложенная сфера и стереографическая карта"""

    def test_antipodal_distance(self):
        """Расстояние до антипода равно πR"""
        model = SphereModel(2, radius=2.0)
        assert model.distance(model.origin, -model.origin) == pytest.approx(2.0 * np.pi)

    def test_quarter_geodesic(self, sphere_model):
        """Геодезическая длины πR/2 из полюса приходит на экватор"""
        basis = sphere_model.tangent_basis(sphere_model.origin)
        v = basis[:, 0] * np.pi / 2
        y, _ = sphere_model.exp_and_transport(sphere_model.origin, v, v)
        assert abs(y[-1]) < 1e-12
        assert sphere_model.in_domain(y)
        assert np.allclose(sphere_model.log_map(sphere_model.origin, y), v)

    def test_chart_round_trip(self, sphere_model, rng):
        """from_chart ∘ to_chart — тождество вне южного полюса"""
        y = rng.normal(size=(10, 2))
        p = sphere_model.from_chart(y)
        assert np.all(sphere_model.in_domain(p))
        assert np.allclose(sphere_model.to_chart(p), y)

    def test_chart_distance_matches_embedded(self, sphere_model):
        """Расстояние в карте совпадает с расстоянием на вложенной сфере"""
        chart = sphere_model.chart_view()
        y0, y1 = np.array([0.2, 0.1]), np.array([-0.4, 0.6])
        expected = sphere_model.distance(sphere_model.from_chart(y0), sphere_model.from_chart(y1))
        assert chart.distance(y0, y1) == pytest.approx(expected)

    def test_chart_ricci_from_christoffel(self):
        """Риччи по конечным разностям Γ равен (d−1)/R²·g"""
        chart = StereographicSphere(3, radius=1.5)
        x = np.array([0.3, -0.2, 0.5])
        ricci = ricci_from_christoffel(chart.christoffel, x)
        expected = 2.0 / 1.5 ** 2 * chart.metric(x)
        assert np.allclose(ricci, expected, atol=1e-5)

    def test_christoffel_unsupported(self, sphere_model):
        """Во вложенных координатах символы Кристоффеля не определены"""
        with pytest.raises(UnsupportedModelError):
            sphere_model.christoffel(sphere_model.origin)
