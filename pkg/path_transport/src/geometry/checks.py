"""
Операции над моделями: Ric_Z в репере, расстояние, проверка оценки кривизны,
экспонента с переносом и оракулы конечных разностей
"""

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..errors import GeometryEvaluationError
from .frames import Frame
from .models import ManifoldModel

logger = logging.getLogger(__name__)

CURVATURE_TOL = 1e-9


@dataclass
class CurvatureReport:
    """Результат проверки Ric − ∇Z ≥ −K"""

    K: float
    min_eigenvalue: float
    worst_point: np.ndarray
    n_points: int
    passed: bool


@dataclass
class GrowthReport:
    """Результат проверки |Z| ≤ ψ∘ρ_o"""

    max_ratio: float
    worst_point: np.ndarray
    passed: bool


def ricci_z_matrix(model: ManifoldModel, frame: Frame) -> np.ndarray:
    """
    Матрица M[i, j] = (Ric − ∇Z)(u e_i, u e_j)

    Не симметризуется: ∇Z может быть несимметричным.

    Args:
        model: модель многообразия
        frame: ортонормированный репер

    Returns:
        Матрица d × d (или пакет матриц)
    """
    form = model.ricci_z_form(frame.base)
    E = frame.columns
    M = np.einsum('...ki,...kl,...lj->...ij', E, form, E)
    if not np.all(np.isfinite(M)):
        raise GeometryEvaluationError("Нефинитная матрица Ric_Z", point=frame.base)
    return M


def distance(model: ManifoldModel, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Геодезическое расстояние ρ(x, y)"""
    return model.distance(np.asarray(x, dtype=float), np.asarray(y, dtype=float))


def exp_and_transport(model: ManifoldModel, x: np.ndarray, v: np.ndarray, w: np.ndarray):
    """(exp_x(v), параллельный перенос w вдоль t ↦ exp_x(tv))"""
    return model.exp_and_transport(np.asarray(x, dtype=float), np.asarray(v, dtype=float),
                                   np.asarray(w, dtype=float))


def symmetric_ricci_z_spectrum(model: ManifoldModel, points: np.ndarray) -> np.ndarray:
    """Собственные значения симметричной части Ric − ∇Z в g-ортонормированном базисе"""
    points = np.asarray(points, dtype=float)
    frames = Frame(points, model.tangent_basis(points))
    M = ricci_z_matrix(model, frames)
    return np.linalg.eigvalsh(0.5 * (M + np.swapaxes(M, -1, -2)))


def verify_curvature_bound(model: ManifoldModel, sample_points: np.ndarray, K: float) -> CurvatureReport:
    """
    Проверка Ric − ∇Z ≥ −K на выборке точек

    Args:
        model: модель
        sample_points: точки (n, D)
        K: заявленная константа

    Returns:
        CurvatureReport; passed iff min собственное значение ≥ −K − 1e−9
    """
    points = np.atleast_2d(np.asarray(sample_points, dtype=float))
    eigen = symmetric_ricci_z_spectrum(model, points)
    per_point = eigen.min(axis=-1)
    idx = int(np.argmin(per_point))
    min_eig = float(per_point[idx])
    passed = bool(min_eig >= -K - CURVATURE_TOL)
    if passed:
        logger.info(f"✓ Оценка кривизны K={K:g} подтверждена на {len(points)} точках (min λ = {min_eig:.6g})")
    else:
        logger.warning(f"Оценка кривизны K={K:g} нарушена: min λ = {min_eig:.6g} в точке {points[idx]}")
    return CurvatureReport(K=float(K), min_eigenvalue=min_eig, worst_point=points[idx],
                           n_points=len(points), passed=passed)


def check_growth_envelope(model: ManifoldModel, sample_points: np.ndarray) -> GrowthReport:
    """Проверка |Z|_g ≤ ψ(ρ_o) на выборке точек"""
    points = np.atleast_2d(np.asarray(sample_points, dtype=float))
    Z = model.drift(points)
    norm = np.sqrt(np.einsum('...i,...ij,...j->...', Z, model.metric(points), Z))
    rho = model.distance_from_origin(points)
    ratio = norm / model.psi(rho)
    idx = int(np.argmax(ratio))
    return GrowthReport(max_ratio=float(ratio[idx]), worst_point=points[idx],
                        passed=bool(ratio[idx] <= 1.0 + CURVATURE_TOL))


# ----------------------------------------------------------------------
# оракулы конечных разностей
# ----------------------------------------------------------------------

def central_difference(func: Callable[[np.ndarray], np.ndarray], x: np.ndarray, step: float) -> np.ndarray:
    """∂_q func в форме (..., q, <форма func>)"""
    x = np.asarray(x, dtype=float)
    D = x.shape[-1]
    parts = []
    for q in range(D):
        shift = np.zeros(D)
        shift[q] = step
        parts.append((func(x + shift) - func(x - shift)) / (2 * step))
    return np.stack(parts, axis=x.ndim - 1)


def christoffel_from_metric(metric: Callable[[np.ndarray], np.ndarray], x: np.ndarray,
                            step: float = 1e-5) -> np.ndarray:
    """
    Γ^k_{lm} = ½ g^{kp}(∂_l g_{pm} + ∂_m g_{pl} − ∂_p g_{lm}) центральными разностями
    """
    x = np.asarray(x, dtype=float)
    dg = central_difference(metric, x, step)  # dg[..., q, i, j] = ∂_q g_ij
    lower = (np.einsum('...lpm->...plm', dg)
             + np.einsum('...mpl->...plm', dg)
             - np.einsum('...plm->...plm', dg))
    return 0.5 * np.einsum('...kp,...plm->...klm', np.linalg.inv(metric(x)), lower)


def ricci_from_christoffel(christoffel: Callable[[np.ndarray], np.ndarray], x: np.ndarray,
                           step: float = 1e-5) -> np.ndarray:
    """
    R_{jk} = ∂_iΓ^i_{jk} − ∂_kΓ^i_{ji} + Γ^i_{ip}Γ^p_{jk} − Γ^i_{kp}Γ^p_{ij}
    """
    x = np.asarray(x, dtype=float)
    G = christoffel(x)
    dG = central_difference(christoffel, x, step)  # dG[..., q, k, l, m] = ∂_q Γ^k_{lm}
    term1 = np.einsum('...iijk->...jk', dG)
    term2 = np.einsum('...kiji->...jk', dG)
    term3 = np.einsum('...iip,...pjk->...jk', G, G)
    term4 = np.einsum('...ikp,...pij->...jk', G, G)
    return term1 - term2 + term3 - term4


def christoffel_consistency(model: ManifoldModel, points: np.ndarray, step: float = 1e-5) -> float:
    """max отклонения замкнутой формы Γ от конечно-разностной"""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    return float(np.max(np.abs(model.christoffel(points) - christoffel_from_metric(model.metric, points, step))))


def ricci_consistency(model: ManifoldModel, points: np.ndarray) -> float:
    """max |Ric − (d−1)κ g| для моделей постоянной кривизны"""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    kappa = model.sectional_curvature
    expected = (model.dimension - 1) * kappa * model.metric(points)
    return float(np.max(np.abs(model.ricci(points) - expected)))
