"""
Резольвентный поток dQ/dt = −½Ric_Z^#(u_t)Q и сдвиг направления h ↦ h̃
"""

import logging
from dataclasses import dataclass

import numpy as np

from ..errors import ContractViolation, FlowSolverError
from ..geometry.checks import ricci_z_matrix
from ..geometry.frames import Frame
from ..stochastic.development import HorizontalPath, PathBundle
from ..stochastic.noise import CameronMartinPath

logger = logging.getLogger(__name__)

CONDITION_LIMIT = 1e12


@dataclass
class DampedFlow:
    """
    Q_k = Q_{t_k,0} по путям пакета

    Attributes:
        times: сетка (n+1,)
        Q: (B, n+1, d, d)
        Q_inv: обратные матрицы (B, n+1, d, d)
        steps: матрицы шага РК4 Φ_k, Q_{k+1} = Φ_k Q_k, форма (B, n, d, d)
        generator: Ric_Z^# на сетке (B, n+1, d, d)
    """

    times: np.ndarray
    Q: np.ndarray
    Q_inv: np.ndarray
    steps: np.ndarray
    generator: np.ndarray

    def between(self, t_index: int, s_index: int) -> np.ndarray:
        """Q_{t,s} = Q_{t,0} Q_{s,0}⁻¹"""
        return self.Q[:, t_index] @ self.Q_inv[:, s_index]

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])


def generator_along(bundle: PathBundle) -> np.ndarray:
    """Ric_Z^#(u_k) для всех путей и узлов сетки"""
    bundle.require_frames()
    return ricci_z_matrix(bundle.model, Frame(bundle.points, bundle.frames))


def _rk4_stage_matrices(M0: np.ndarray, M1: np.ndarray):
    A0 = -0.5 * M0
    A1 = -0.5 * M1
    Am = 0.5 * (A0 + A1)
    return A0, Am, A1


def _rk4_step_matrix(A0, Am, A1, h):
    eye = np.eye(A0.shape[-1])
    K1 = A0
    K2 = Am @ (eye + 0.5 * h * K1)
    K3 = Am @ (eye + 0.5 * h * K2)
    K4 = A1 @ (eye + h * K3)
    return eye + h / 6.0 * (K1 + 2 * K2 + 2 * K3 + K4)


def solve_damped_flow_bundle(bundle: PathBundle) -> DampedFlow:
    """
    РК4 для матричного ОДУ вдоль каждого пути пакета

    Генератор берется в узлах сетки, во внутренних стадиях — среднее соседних узлов.
    """
    bundle.require_valid()
    M = generator_along(bundle)
    B, n1, d, _ = M.shape
    h = bundle.dt
    Q = np.empty((B, n1, d, d))
    Q[:, 0] = np.eye(d)
    steps = np.empty((B, n1 - 1, d, d))
    for k in range(n1 - 1):
        A0, Am, A1 = _rk4_stage_matrices(M[:, k], M[:, k + 1])
        steps[:, k] = _rk4_step_matrix(A0, Am, A1, h)
        Q[:, k + 1] = steps[:, k] @ Q[:, k]
        if not np.all(np.isfinite(Q[:, k + 1])):
            raise FlowSolverError("Нефинитные элементы Q", step=k + 1)
    cond = np.linalg.cond(Q.reshape(-1, d, d)).reshape(B, n1)
    if np.any(cond > CONDITION_LIMIT):
        bad = np.argwhere(cond > CONDITION_LIMIT)[0]
        raise FlowSolverError(f"Плохая обусловленность Q (cond={cond[tuple(bad)]:.3e})", step=int(bad[1]))
    Q_inv = np.linalg.inv(Q)
    return DampedFlow(times=bundle.times, Q=Q, Q_inv=Q_inv, steps=steps, generator=M)


def solve_damped_flow(model, path: HorizontalPath) -> DampedFlow:
    """
    Резольвентный поток одного пути

    Args:
        model: модель (для согласованности сигнатуры; берется из пути)
        path: неразорвавшийся путь с реперами

    Returns:
        DampedFlow с ведущей осью пакета длины 1
    """
    if path.exploded:
        raise ContractViolation(f"Путь взорвался на шаге {path.exploded_at}")
    return solve_damped_flow_bundle(path.as_bundle())


def source_increments(flow: DampedFlow, derivative: np.ndarray) -> np.ndarray:
    """
    Вклад постоянного на шаге источника ḣ_k в РК4: h̃_{k+1} = Φ_k h̃_k + c_k
    """
    B, n = flow.steps.shape[:2]
    h = flow.dt
    b = np.broadcast_to(derivative, (B, n, derivative.shape[-1]))
    M = flow.generator
    A0 = -0.5 * M[:, :-1]
    A1 = -0.5 * M[:, 1:]
    Am = 0.5 * (A0 + A1)
    K1 = b
    K2 = np.einsum('bkij,bkj->bki', Am, 0.5 * h * K1) + b
    K3 = np.einsum('bkij,bkj->bki', Am, 0.5 * h * K2) + b
    K4 = np.einsum('bkij,bkj->bki', A1, h * K3) + b
    return h / 6.0 * (K1 + 2 * K2 + 2 * K3 + K4)


def resolvent_shift(h: CameronMartinPath, path, flow: DampedFlow = None) -> CameronMartinPath:
    """
    h̃: dh̃/dt + ½Ric_Z^#(u_t)h̃ = ḣ, h̃(0) = 0

    Args:
        h: направление Камерона–Мартина
        path: HorizontalPath или PathBundle
        flow: готовый поток (иначе решается заново)

    Returns:
        CameronMartinPath со значениями формы (B, n+1, d)
    """
    bundle = path.as_bundle() if isinstance(path, HorizontalPath) else path
    if flow is None:
        flow = solve_damped_flow_bundle(bundle)
    c = source_increments(flow, h.derivative)
    B, n = c.shape[:2]
    values = np.zeros((B, n + 1, c.shape[-1]))
    for k in range(n):
        values[:, k + 1] = np.einsum('bij,bj->bi', flow.steps[:, k], values[:, k]) + c[:, k]
    return CameronMartinPath(flow.times, values)


def check_flow_invariants(flow: DampedFlow, n_triples: int = 20, seed: int = 0) -> dict:
    """
    Оценка ‖Q_{t,s}‖ ≤ e^{λ⁻(t−s)/2} и коцикла Q_{t,0} = Q_{t,s}Q_{s,0} на случайных тройках

    Returns:
        {'norm_excess': max(‖Q_{t,s}‖/e^{λ⁻(t−s)/2}) − 1, 'cocycle_error': max ошибки коцикла}
    """
    M = flow.generator
    sym = 0.5 * (M + np.swapaxes(M, -1, -2))
    lam = np.maximum(0.0, -np.min(np.linalg.eigvalsh(sym), axis=(-2, -1)))
    rng = np.random.default_rng(seed)
    n1 = flow.times.size
    norm_excess = 0.0
    cocycle_error = 0.0
    for _ in range(n_triples):
        s, t = np.sort(rng.integers(0, n1, size=2))
        Q_ts = flow.between(t, s)
        norms = np.linalg.norm(Q_ts, ord=2, axis=(-2, -1))
        bound = np.exp(0.5 * lam * (flow.times[t] - flow.times[s]))
        norm_excess = max(norm_excess, float(np.max(norms / bound)) - 1.0)
        err = np.linalg.norm(flow.Q[:, t] - Q_ts @ flow.Q[:, s], axis=(-2, -1))
        cocycle_error = max(cocycle_error, float(np.max(err)))
    return {'norm_excess': norm_excess, 'cocycle_error': cocycle_error}
