"""
Конформная замена g′ = f⁻²g: связность, кривизна Риччи, снос и численные проверки
"""

import logging
from dataclasses import dataclass
from typing import Callable, List, Sequence

import numpy as np

from ..errors import ChartDomainError, NearBoundaryError, UnsupportedModelError
from ..geometry.checks import (central_difference, christoffel_from_metric, ricci_from_christoffel,
                               symmetric_ricci_z_spectrum)
from ..geometry.envelopes import GrowthEnvelope
from ..geometry.models import ManifoldModel
from .factors import ConformalFactor, cutoff_chain, smooth_radius

logger = logging.getLogger(__name__)

BOUNDARY_FLOOR = 1e-8
FD_STEP = 1e-5
VectorField = Callable[[np.ndarray], np.ndarray]


@dataclass
class ConnectionReport:
    max_fd_deviation: float
    max_bound_ratio: float
    max_difference: float
    passed: bool


@dataclass
class CurvatureTrend:
    """K_n и дефектные слагаемые по точкам выборки с f_n > 0"""

    n: int
    K_n: float
    defect_laplacian: float
    defect_gradient: float
    n_used: int
    n_skipped: int


@dataclass
class LaplacianReport:
    max_ratio: float
    max_ratio_smooth: float
    passed: bool


@dataclass
class ContainmentReport:
    sup_norm: float
    max_ratio: float
    passed: bool


def _require_chart(model: ManifoldModel) -> None:
    if model.kind == 'sphere':
        raise UnsupportedModelError("Конформная замена задается в карте: используйте chart_view() сферы")


def _log_gradient(factor: ConformalFactor, x: np.ndarray) -> np.ndarray:
    f = factor.value(x)
    if np.any(f < BOUNDARY_FLOOR):
        raise NearBoundaryError(f"f = {float(np.min(f)):.2e} у границы носителя")
    return factor.gradient(x) / f[..., None]


def conformal_metric(model: ManifoldModel, factor: ConformalFactor, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return model.metric(x) / factor.value(x)[..., None, None] ** 2


def conformal_christoffel(model: ManifoldModel, factor: ConformalFactor, x: np.ndarray) -> np.ndarray:
    """
    Γ′^k_{ij} = Γ^k_{ij} − δ^k_i ∂_j log f − δ^k_j ∂_i log f + g_{ij} g^{kl} ∂_l log f
    """
    _require_chart(model)
    x = np.asarray(x, dtype=float)
    dlog = _log_gradient(factor, x)
    g = model.metric(x)
    raised = np.einsum('...kl,...l->...k', np.linalg.inv(g), dlog)
    eye = np.eye(x.shape[-1])
    return (model.christoffel(x)
            - np.einsum('ki,...j->...kij', eye, dlog)
            - np.einsum('kj,...i->...kij', eye, dlog)
            + np.einsum('...ij,...k->...kij', g, raised))


def _covariant_jacobian(christoffel: np.ndarray, field: VectorField, x: np.ndarray) -> np.ndarray:
    """(∇X)^k_j = ∂_j X^k + Γ^k_{jl} X^l"""
    partial = np.swapaxes(central_difference(field, x, 1e-6), -1, -2)
    return partial + np.einsum('...kjl,...l->...kj', christoffel, field(x))


def _tensor_norm(T: np.ndarray, g: np.ndarray) -> np.ndarray:
    """|T|_g для (1,1)-тензора T^k_j"""
    g_inv = np.linalg.inv(g)
    return np.sqrt(np.maximum(np.einsum('...kl,...jm,...kj,...lm->...', g, g_inv, T, T), 0.0))


def _vector_norm(v: np.ndarray, g: np.ndarray) -> np.ndarray:
    return np.sqrt(np.maximum(np.einsum('...i,...ij,...j->...', v, g, v), 0.0))


def conformal_connection_diff(model: ManifoldModel, factor: ConformalFactor, X: VectorField,
                              Y: VectorField, points: np.ndarray, tolerance: float = 1e-5) -> ConnectionReport:
    """
    ∇′_X Y − ∇_X Y и проверка ||∇X|_g − |∇′X|_{g′}| ≤ 3|∇f|_g|X|_{g′}

    Γ′ сверяется с разностными символами Кристоффеля метрики g′.

    Raises:
        ChartDomainError: точка вне носителя f
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    f = factor.value(points)
    if np.any(f <= 0):
        raise ChartDomainError(f"{int(np.sum(f <= 0))} точек вне носителя конформного множителя")
    G = model.christoffel(points)
    G_new = conformal_christoffel(model, factor, points)
    oracle = christoffel_from_metric(lambda y: conformal_metric(model, factor, y), points, FD_STEP)
    deviation = float(np.max(np.abs(G_new - oracle)))

    xv, yv = X(points), Y(points)
    difference = np.einsum('...kij,...i,...j->...k', G_new - G, xv, yv)

    g = model.metric(points)
    g_new = g / f[..., None, None] ** 2
    old = _tensor_norm(_covariant_jacobian(G, X, points), g)
    new = _tensor_norm(_covariant_jacobian(G_new, X, points), g_new)
    grad_f = _vector_norm(np.einsum('...ij,...j->...i', np.linalg.inv(g), factor.gradient(points)), g)
    bound = 3.0 * grad_f * _vector_norm(xv, g_new)
    gap = np.abs(old - new)
    ratio = np.where(bound > 0, gap / np.where(bound > 0, bound, 1.0), np.where(gap > 1e-9, np.inf, 0.0))
    max_ratio = float(np.max(ratio))
    passed = deviation <= tolerance and max_ratio <= 1.0 + 1e-6
    logger.info(f"{'✓' if passed else '✗'} Конформная связность: отклонение от оракула {deviation:.2e}, "
                f"max отношение оценки {max_ratio:.4f}")
    return ConnectionReport(max_fd_deviation=deviation, max_bound_ratio=max_ratio,
                            max_difference=float(np.max(np.abs(difference))), passed=bool(passed))


def covariant_hessian(model: ManifoldModel, factor: ConformalFactor, x: np.ndarray) -> np.ndarray:
    """Hess f_{ij} = ∂_i∂_j f − Γ^k_{ij}∂_k f"""
    x = np.asarray(x, dtype=float)
    return factor.hessian(x) - np.einsum('...kij,...k->...ij', model.christoffel(x), factor.gradient(x))


def conformal_ricci(model: ManifoldModel, factor: ConformalFactor, x: np.ndarray) -> np.ndarray:
    """
    Ric′ = Ric + (d−2)f⁻¹Hess f + (f⁻¹Δf − (d−1)|∇log f|²_g)g

    Raises:
        NearBoundaryError: f < 1e−8
    """
    _require_chart(model)
    x = np.asarray(x, dtype=float)
    d = model.dimension
    f = factor.value(x)
    if np.any(f < BOUNDARY_FLOOR):
        raise NearBoundaryError(f"f = {float(np.min(f)):.2e} у границы носителя")
    g = model.metric(x)
    g_inv = np.linalg.inv(g)
    hess = covariant_hessian(model, factor, x)
    laplacian = np.einsum('...ij,...ij->...', g_inv, hess)
    df = factor.gradient(x)
    grad_sq = np.einsum('...i,...ij,...j->...', df, g_inv, df)
    scalar = laplacian / f - (d - 1) * grad_sq / f ** 2
    return model.ricci(x) + (d - 2) * hess / f[..., None, None] + scalar[..., None, None] * g


def ricci_oracle(model: ManifoldModel, factor: ConformalFactor, x: np.ndarray,
                 step: float = 1e-4) -> np.ndarray:
    """Ric метрики g′ конечными разностями разностных символов Кристоффеля"""

    def christoffel(y):
        return christoffel_from_metric(lambda z: conformal_metric(model, factor, z), y, FD_STEP)

    return ricci_from_christoffel(christoffel, np.asarray(x, dtype=float), step)


def transformed_drift(model: ManifoldModel, factor: ConformalFactor, x: np.ndarray) -> np.ndarray:
    """Z′ = f²Z + (d−2) f ∇f"""
    x = np.asarray(x, dtype=float)
    f = factor.value(x)
    grad = np.einsum('...ij,...j->...i', np.linalg.inv(model.metric(x)), factor.gradient(x))
    return f[..., None] ** 2 * model.drift(x) + (model.dimension - 2) * f[..., None] * grad


def transformed_drift_squared_form(model: ManifoldModel, factor: ConformalFactor, x: np.ndarray) -> np.ndarray:
    """Z′ = f²Z + (d−2)/2 ∇(f²), ∂(f²) по правилу произведения"""
    x = np.asarray(x, dtype=float)
    f = factor.value(x)
    d_square = 2.0 * f[..., None] * factor.gradient(x)
    grad = np.einsum('...ij,...j->...i', np.linalg.inv(model.metric(x)), d_square)
    return f[..., None] ** 2 * model.drift(x) + 0.5 * (model.dimension - 2) * grad


def transformed_drift_jacobian(model: ManifoldModel, factor: ConformalFactor, x: np.ndarray) -> np.ndarray:
    """
    Частные производные ∂_j Z′^k

    ∂_j Z′ = 2f ∂_jf Z + f² ∂_jZ + (d−2)[∂_jf g⁻¹∂f + f ∂_j(g⁻¹)∂f + f g⁻¹∂_j∂f]
    """
    x = np.asarray(x, dtype=float)
    d = model.dimension
    f = factor.value(x)
    df = factor.gradient(x)
    d2f = factor.hessian(x)
    g_inv = np.linalg.inv(model.metric(x))
    raised = np.einsum('...kl,...l->...k', g_inv, df)
    Z = model.drift(x)
    J = model.drift_field.jacobian(x)
    out = (2 * f[..., None, None] * np.einsum('...k,...j->...kj', Z, df)
           + f[..., None, None] ** 2 * J
           + (d - 2) * (np.einsum('...k,...j->...kj', raised, df)
                        + f[..., None, None] * np.einsum('...kl,...lj->...kj', g_inv, d2f)))
    if not model.flat:
        dg = central_difference(model.metric, x, FD_STEP)  # dg[..., j, a, b] = ∂_j g_ab
        d_inv = -np.einsum('...ka,...jab,...bl->...jkl', g_inv, dg, g_inv)
        out = out + (d - 2) * f[..., None, None] * np.einsum('...jkl,...l->...kj', d_inv, df)
    return out


def radial_sample(dimension: int, radii: Sequence[float], n_directions: int = 8, seed: int = 0) -> np.ndarray:
    """Точки ρ·θ для сетки радиусов и случайных направлений θ"""
    rng = np.random.default_rng(seed)
    directions = rng.standard_normal((n_directions, dimension))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    radii = np.asarray(radii, dtype=float)
    return (radii[:, None, None] * directions[None]).reshape(-1, dimension)


def approx_curvature_bound(model: ManifoldModel, envelope: GrowthEnvelope, n: int,
                           points: np.ndarray) -> CurvatureTrend:
    """
    K_n = −min собственного значения симметричной части Ric^n − ∇^n Z_n относительно g′

    Дефект (Δ+Z)-слагаемых разложен на две части: sup|f_n(Δ+Z)f_n| и
    sup(|∇f_n|² + |Z||∇f_n|). Точки с f_n < 1e−8 пропускаются и считаются.
    """
    from .model import ConformalModel

    factor = cutoff_chain(model, envelope, n)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    f = factor.value(points)
    inside = f >= BOUNDARY_FLOOR
    skipped = int(np.sum(~inside))
    points = points[inside]
    conformal = ConformalModel(model, factor)
    spectrum = symmetric_ricci_z_spectrum(conformal, points)
    K_n = -float(np.min(spectrum))

    g = model.metric(points)
    g_inv = np.linalg.inv(g)
    df = factor.gradient(points)
    laplacian = np.einsum('...ij,...ij->...', g_inv, covariant_hessian(model, factor, points))
    Z = model.drift(points)
    drift_term = np.einsum('...i,...i->...', Z, df)
    grad_norm = np.sqrt(np.maximum(np.einsum('...i,...ij,...j->...', df, g_inv, df), 0.0))
    defect_laplacian = float(np.max(np.abs(f[inside] * (laplacian + drift_term))))
    defect_gradient = float(np.max(grad_norm ** 2 + _vector_norm(Z, g) * grad_norm))
    logger.info(f"Срезка n={n}: K_n={K_n:.5g}, дефекты {defect_laplacian:.3e} / {defect_gradient:.3e}, "
                f"пропущено {skipped} точек")
    return CurvatureTrend(n=int(n), K_n=K_n, defect_laplacian=defect_laplacian,
                          defect_gradient=defect_gradient, n_used=int(points.shape[0]), n_skipped=skipped)


def _radial_points(model: ManifoldModel, rho: np.ndarray) -> np.ndarray:
    origin = model.origin
    basis = model.tangent_basis(origin)
    v = rho[:, None] * basis[:, 0][None]
    points, _ = model.exp_and_transport(np.broadcast_to(origin, v.shape), v, v)
    return points


def laplacian_comparison(model: ManifoldModel, K: float, psi: GrowthEnvelope,
                         radii: Sequence[float]) -> LaplacianReport:
    """
    (Δ+Z)ρ ≤ K+1+ψ(ρ) и (Δ+Z)ρ̃ ≤ K+2+ψ(ρ̃+1) на радиальной сетке ρ ≥ 1

    Радиальная часть Δρ берется в замкнутой форме модели, Zρ — разностной
    производной ρ_o вдоль Z.
    """
    rho = np.asarray(radii, dtype=float)
    rho = rho[rho >= 1.0]
    lap = model.radial_laplacian(rho)
    points = _radial_points(model, rho)
    Z = model.drift(points)
    h = 1e-6
    z_rho = (model.distance_from_origin(points + h * Z) - model.distance_from_origin(points - h * Z)) / (2 * h)
    generator = lap + z_rho
    tilde = smooth_radius(rho)
    generator_smooth = rho / tilde * generator + 1.0 / tilde ** 3
    ratio = generator / (K + 1.0 + psi(rho))
    ratio_smooth = generator_smooth / (K + 2.0 + psi(tilde + 1.0))
    passed = bool(np.all(ratio <= 1.0 + 1e-12) and np.all(ratio_smooth <= 1.0 + 1e-12))
    logger.info(f"{'✓' if passed else '✗'} Сравнение лапласиана: max отношения "
                f"{np.max(ratio):.4f} (ρ) и {np.max(ratio_smooth):.4f} (ρ̃)")
    return LaplacianReport(max_ratio=float(np.max(ratio)), max_ratio_smooth=float(np.max(ratio_smooth)),
                           passed=passed)


def random_vector_fields(dimension: int, count: int, seed: int = 0, scale: float = 1.0) -> List[VectorField]:
    """Гладкие ограниченные поля X(x) = A sin(Bx + c)"""
    rng = np.random.default_rng(seed)
    fields = []
    for _ in range(count):
        A = scale * rng.standard_normal((dimension, dimension)) / np.sqrt(dimension)
        B = rng.standard_normal((dimension, dimension))
        c = rng.uniform(0.0, 2 * np.pi, dimension)

        def field(x, A=A, B=B, c=c):
            return np.einsum('ij,...j->...i', A, np.sin(np.einsum('ij,...j->...i', B, x) + c))

        fields.append(field)
    return fields


def containment_probe(model: ManifoldModel, factor: ConformalFactor, fields: Sequence[VectorField],
                      points: np.ndarray) -> ContainmentReport:
    """
    |∇′(fX)|_{g′} ≤ 4|∇f|_g|X|_g + f|∇X|_g для полей X на точках с f > 0
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    points = points[factor.value(points) >= BOUNDARY_FLOOR]
    f = factor.value(points)
    g = model.metric(points)
    g_new = g / f[..., None, None] ** 2
    G = model.christoffel(points)
    G_new = conformal_christoffel(model, factor, points)
    grad_f = _vector_norm(np.einsum('...ij,...j->...i', np.linalg.inv(g), factor.gradient(points)), g)
    sup_norm = 0.0
    max_ratio = 0.0
    for X in fields:
        def scaled(x, X=X):
            return factor.value(x)[..., None] * X(x)

        lhs = _tensor_norm(_covariant_jacobian(G_new, scaled, points), g_new)
        rhs = 4.0 * grad_f * _vector_norm(X(points), g) + f * _tensor_norm(_covariant_jacobian(G, X, points), g)
        sup_norm = max(sup_norm, float(np.max(lhs)))
        max_ratio = max(max_ratio, float(np.max(lhs / np.maximum(rhs, 1e-300))))
    passed = np.isfinite(sup_norm) and max_ratio <= 1.0 + 1e-4
    return ContainmentReport(sup_norm=sup_norm, max_ratio=max_ratio, passed=bool(passed))
