"""
Производный поток отображения Ито в направлении h

Линейная система в координатах репера вдоль реализованного пути:
    dβ = (ḣ + ½(∇Z)^#β) dt + ρ∘dw
    dρ = Ω(½Z^# dt + ∘dw, β)
Интегрируется тем же предиктор–корректором, что и само развитие: коэффициенты
второй стадии берутся в точке предиктора. Для плоских моделей это в точности
касательная линеаризация дискретной схемы.
"""

import logging
from dataclasses import dataclass

import numpy as np

from ..errors import ContractViolation
from ..geometry.models import ManifoldModel
from .development import DRIFT_SCALE, HorizontalPath, PathBundle
from .noise import CameronMartinPath, DrivingNoise

logger = logging.getLogger(__name__)


@dataclass
class DerivativeFlow:
    """β(t) ∈ ℝ^d и ρ(t) ∈ so(d) на сетке"""

    times: np.ndarray
    beta: np.ndarray
    rho: np.ndarray


def _frame_coefficients(model: ManifoldModel, x: np.ndarray, e: np.ndarray):
    """(∇Z)^# = Eᵀ g C E и Z^# = Eᵀ g Z в координатах репера"""
    d = model.dimension
    if model.drift_field.is_zero:
        zeros_mat = np.zeros(x.shape[:-1] + (d, d))
        return zeros_mat, np.zeros(x.shape[:-1] + (d,))
    g = model.metric(x)
    C = model.drift_jacobian(x)
    A = np.einsum('...ki,...kl,...lm,...mj->...ij', e, g, C, e)
    z = np.einsum('...ki,...kl,...l->...i', e, g, model.drift(x))
    return A, z


def _stage(model, A, z, beta, rho, dh, dw, dt, curved):
    d_beta = dh + DRIFT_SCALE * np.einsum('...ij,...j->...i', A, beta) * dt \
        + np.einsum('...ij,...j->...i', rho, dw)
    if curved:
        d_rho = model.curvature_operator(DRIFT_SCALE * z * dt + dw, beta)
    else:
        d_rho = np.zeros_like(rho)
    return d_beta, d_rho


def derivative_flow_bundle(bundle: PathBundle, h: CameronMartinPath) -> DerivativeFlow:
    """
    Производный поток для пакета путей

    Args:
        bundle: пакет путей с сохраненными реперами
        h: направление Камерона–Мартина (общее или по путям)

    Returns:
        DerivativeFlow с β формы (B, n+1, d) и ρ формы (B, n+1, d, d)
    """
    bundle.require_valid()
    bundle.require_frames()
    model = bundle.model
    if not np.allclose(h.times, bundle.times):
        raise ContractViolation("Сетка h не совпадает с сеткой пути")
    kappa = model.sectional_curvature
    if kappa is None:
        # проверка, что тензор кривизны доступен
        model.curvature_operator(np.zeros(model.dimension), np.zeros(model.dimension))
    curved = bool(kappa)

    B, n1 = bundle.points.shape[:2]
    d = model.dimension
    dt = bundle.dt
    dh_all = np.broadcast_to(h.increments, (B, n1 - 1, d))
    beta = np.zeros((B, n1, d))
    rho = np.zeros((B, n1, d, d))

    for k in range(n1 - 1):
        x, e = bundle.points[:, k], bundle.frames[:, k]
        dw = bundle.increments[:, k]
        _, _, xp, ep = model.step(x, e, dw, dt, DRIFT_SCALE)
        A0, z0 = _frame_coefficients(model, x, e)
        A1, z1 = _frame_coefficients(model, xp, ep)
        b0, r0 = beta[:, k], rho[:, k]
        db1, dr1 = _stage(model, A0, z0, b0, r0, dh_all[:, k], dw, dt, curved)
        db2, dr2 = _stage(model, A1, z1, b0 + db1, r0 + dr1, dh_all[:, k], dw, dt, curved)
        beta[:, k + 1] = b0 + 0.5 * (db1 + db2)
        rho[:, k + 1] = r0 + 0.5 * (dr1 + dr2)

    return DerivativeFlow(times=bundle.times, beta=beta, rho=rho)


def derivative_flow(model: ManifoldModel, path: HorizontalPath, h: CameronMartinPath) -> DerivativeFlow:
    """
    Производный поток (β, ρ) одного пути

    Args:
        model: модель (должна совпадать с моделью пути)
        path: реализованный путь
        h: направление

    Returns:
        DerivativeFlow с β формы (n+1, d)
    """
    if path.exploded:
        raise ContractViolation(f"Путь взорвался на шаге {path.exploded_at}")
    if path.model is not model:
        raise ContractViolation("Путь построен для другой модели")
    flow = derivative_flow_bundle(path.as_bundle(), h)
    return DerivativeFlow(times=flow.times, beta=flow.beta[0], rho=flow.rho[0])


def finite_difference_probe(model: ManifoldModel, noise: DrivingNoise, x0: np.ndarray,
                            h: CameronMartinPath, eps: float) -> np.ndarray:
    """(γ_T(w + εh) − γ_T(w))/ε в координатах карты"""
    from .development import develop_bundle

    base = develop_bundle(model, noise.increments[None], x0, noise.horizon)
    shifted = develop_bundle(model, noise.shifted(h, eps).increments[None], x0, noise.horizon)
    return (shifted.points[0, -1] - base.points[0, -1]) / eps
