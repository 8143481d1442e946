import numpy as np
import pytest

from src.conformal import (
    ConformalModel,
    ConstantFactor,
    GaussianBump,
    approx_curvature_bound,
    base_bump,
    build_factor,
    conformal_christoffel,
    conformal_connection_diff,
    conformal_ricci,
    containment_probe,
    cutoff_chain,
    laplacian_comparison,
    radial_sample,
    random_vector_fields,
    ricci_oracle,
    support_radius,
    transformed_drift,
    transformed_drift_jacobian,
    transformed_drift_squared_form,
)
from src.errors import ConfigError, UnsupportedModelError
from src.geometry import (AffineEnvelope, EuclideanModel, HyperbolicModel, PowerEnvelope, central_difference,
                          ou_potential)

SPACE = EuclideanModel(3)


@pytest.fixture
def bump():
    return GaussianBump(np.zeros(3), width=1.0)


@pytest.fixture
def points():
    return radial_sample(3, [0.2, 0.5, 0.9], n_directions=4, seed=1)


class TestConformalGeometry:
    """Замкнутые формы Γ′ и Ric′ против конечных разностей метрики f⁻²g"""

    def test_constant_factor(self, points):
        """Постоянный множитель не меняет связность и Риччи"""
        factor = ConstantFactor(0.5)
        assert np.allclose(conformal_christoffel(SPACE, factor, points), 0.0)
        assert np.allclose(conformal_ricci(SPACE, factor, points), 0.0)
        model = ConformalModel(SPACE, factor)
        assert np.allclose(model.metric(points[0]), 4.0 * np.eye(3))

    def test_connection_matches_oracle(self, bump, points):
        fields = random_vector_fields(3, 2, seed=4)
        report = conformal_connection_diff(SPACE, bump, fields[0], fields[1], points)
        assert report.passed
        assert report.max_fd_deviation < 1e-5
        assert report.max_bound_ratio <= 1.0

    def test_ricci_matches_oracle(self, bump):
        x = np.array([0.3, -0.4, 0.2])
        assert np.allclose(conformal_ricci(SPACE, bump, x), ricci_oracle(SPACE, bump, x), atol=1e-4)

    def test_ricci_on_hyperbolic_base(self):
        base = HyperbolicModel(3, curvature=1.0)
        factor = GaussianBump(np.zeros(3), width=0.5)
        x = np.array([0.1, 0.2, -0.1])
        assert np.allclose(conformal_ricci(base, factor, x), ricci_oracle(base, factor, x), atol=1e-4)

    def test_sphere_requires_chart(self, sphere_model):
        with pytest.raises(UnsupportedModelError):
            ConformalModel(sphere_model, ConstantFactor(1.0))
        chart = ConformalModel(sphere_model.chart_view(), ConstantFactor(1.0))
        assert chart.kind == "conformal"

    def test_containment(self, bump, points):
        report = containment_probe(SPACE, bump, random_vector_fields(3, 3, seed=2), points)
        assert report.passed
        assert np.isfinite(report.sup_norm)


class TestTransformedDrift:
    """Снос Z′ = f²Z + (d−2)f∇f"""

    def test_two_forms_agree(self, bump, points):
        model = EuclideanModel(3, drift=None)
        assert np.allclose(transformed_drift(model, bump, points),
                           transformed_drift_squared_form(model, bump, points))

    def test_jacobian_matches_finite_difference(self, bump):
        model = EuclideanModel(3, drift=ou_potential(3, 0.5))
        x = np.array([0.4, 0.1, -0.3])
        numeric = central_difference(lambda y: transformed_drift(model, bump, y), x, 1e-5).T
        assert np.allclose(transformed_drift_jacobian(model, bump, x), numeric, atol=1e-7)

    def test_two_dimensional_base_without_drift(self):
        """При d = 2 и Z = 0 новый снос нулевой"""
        model = ConformalModel(EuclideanModel(2), GaussianBump(np.zeros(2), 1.0))
        assert model.drift_field.is_zero
        assert np.allclose(model.drift(np.array([0.3, 0.4])), 0.0)


class TestCutoffChain:
    """Срезки f_n = h₀(I(ρ̃)/n)"""

    def test_base_bump(self):
        values, _, _ = base_bump(np.array([0.5, 1.0, 1.5, 2.0, 2.5]))
        assert np.allclose(values, [1.0, 1.0, 0.5, 0.0, 0.0])

    def test_support_radius_closed_form(self):
        assert support_radius(AffineEnvelope(1.0, 0.0), 3) == pytest.approx(6.0)
        assert support_radius(AffineEnvelope(1.0, 0.5), 2) == pytest.approx(3.0 * np.expm1(2.0))

    def test_support_radius_by_root_finding(self):
        envelope = PowerEnvelope(1.0, 1.0, 0.5)
        radius = support_radius(envelope, 2)
        assert float(envelope.shifted_integral(radius)) == pytest.approx(4.0, rel=1e-6)

    def test_cutoff_values(self):
        factor = cutoff_chain(SPACE, AffineEnvelope(1.0, 0.0), 2)
        assert factor.support_radius == pytest.approx(np.sqrt(15.0))
        assert factor.value(np.array([1.0, 0.0, 0.0])) == pytest.approx(1.0)
        assert factor.value(np.array([5.0, 0.0, 0.0])) == pytest.approx(0.0)

    def test_cutoff_derivatives(self):
        factor = cutoff_chain(SPACE, AffineEnvelope(1.0, 0.0), 2)
        x = np.array([1.5, 1.2, -1.0])
        assert np.allclose(factor.gradient(x), central_difference(factor.value, x, 1e-5), atol=1e-7)
        assert np.allclose(factor.hessian(x), central_difference(factor.gradient, x, 1e-5), atol=1e-6)

    def test_invalid_factors(self):
        with pytest.raises(ConfigError):
            ConstantFactor(1.5)
        with pytest.raises(ConfigError):
            cutoff_chain(SPACE, AffineEnvelope(), 1)
        with pytest.raises(ConfigError):
            build_factor({'kind': 'spline'}, SPACE)

    def test_defect_decays(self):
        """Дефектные слагаемые срезки убывают с ростом n"""
        envelope = AffineEnvelope(1.0, 0.0)
        trends = []
        for n in (2, 8):
            radius = cutoff_chain(SPACE, envelope, n).support_radius
            sample = radial_sample(3, np.geomspace(0.05, 1.2 * radius, 40), n_directions=4, seed=0)
            trend = approx_curvature_bound(SPACE, envelope, n, sample)
            assert trend.n_used + trend.n_skipped == sample.shape[0]
            assert np.isfinite(trend.K_n)
            trends.append(trend)
        first, last = trends
        assert (last.defect_laplacian + last.defect_gradient
                <= 0.5 * (first.defect_laplacian + first.defect_gradient))


class TestLaplacianComparison:
    """(Δ+Z)ρ ≤ K+1+ψ(ρ) на радиальной сетке"""

    def test_euclidean(self):
        report = laplacian_comparison(SPACE, K=0.0, psi=AffineEnvelope(1.0, 0.0), radii=[1.5, 3.0, 10.0])
        assert report.passed
        assert report.max_ratio == pytest.approx(2.0 / 1.5 / 2.0)

    def test_hyperbolic(self, hyperbolic_model):
        report = laplacian_comparison(hyperbolic_model, K=1.0, psi=AffineEnvelope(1.0, 0.0),
                                      radii=[1.0, 2.0, 5.0, 10.0])
        assert report.passed
        assert report.max_ratio == pytest.approx(1.0 / np.tanh(1.0) / 3.0, rel=1e-6)
