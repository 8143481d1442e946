"""
Поля сноса Z: нулевое и градиентные Z = ∇V символьных потенциалов
"""

import logging
from typing import Optional, Sequence, Tuple

import numpy as np
import sympy as sp

logger = logging.getLogger(__name__)


def _broadcast_outputs(values, shape: Tuple[int, ...]) -> list:
    """Приведение выходов lambdify (константы или массивы) к общей форме"""
    return [np.broadcast_to(np.asarray(v, dtype=float), shape) for v in values]


class DriftField:
    """Базовое поле сноса в координатах карты"""

    kind = "abstract"

    def __init__(self, dimension: int):
        self.dimension = int(dimension)

    def value(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        """Частные производные J[..., k, j] = ∂_j Z^k"""
        raise NotImplementedError

    @property
    def is_zero(self) -> bool:
        return False

    def hessian_bounds(self) -> Tuple[float, float]:
        """(inf, sup) собственных значений ∂Z по всему пространству"""
        return (-np.inf, np.inf)

    def describe(self) -> str:
        return self.kind


class ZeroDrift(DriftField):
    """Z ≡ 0"""

    kind = "zero"

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return np.zeros_like(x)

    def jacobian(self, x):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape + (x.shape[-1],))

    @property
    def is_zero(self) -> bool:
        return True

    def hessian_bounds(self):
        return (0.0, 0.0)


class PotentialDrift(DriftField):
    """
    Градиентный снос Z = ∇V для символьного потенциала V(x_0, ..., x_{d-1})

    Градиент и гессиан получаются символьным дифференцированием (sympy)
    и компилируются в векторизованные numpy-функции.
    """

    kind = "potential"

    def __init__(self, expression: sp.Expr, symbols: Sequence[sp.Symbol], label: str = "V",
                 hessian_bounds: Optional[Tuple[float, float]] = None):
        super().__init__(len(symbols))
        self.expression = expression
        self.symbols = list(symbols)
        self.label = label
        self._bounds = hessian_bounds

        gradient = [sp.diff(expression, s) for s in self.symbols]
        hessian = [[sp.diff(g, s) for s in self.symbols] for g in gradient]
        self.gradient_expr = gradient
        self.hessian_expr = hessian

        self._potential_fn = sp.lambdify(self.symbols, expression, modules="numpy")
        self._gradient_fn = sp.lambdify(self.symbols, gradient, modules="numpy")
        self._hessian_fn = sp.lambdify(self.symbols, [h for row in hessian for h in row], modules="numpy")

    def _args(self, x: np.ndarray):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dimension:
            raise ValueError(f"Ожидалась размерность {self.dimension}, получено {x.shape[-1]}")
        return x, [x[..., i] for i in range(self.dimension)]

    def potential(self, x: np.ndarray) -> np.ndarray:
        x, args = self._args(x)
        return np.broadcast_to(np.asarray(self._potential_fn(*args), dtype=float), x.shape[:-1]).copy()

    def value(self, x):
        x, args = self._args(x)
        parts = _broadcast_outputs(self._gradient_fn(*args), x.shape[:-1])
        return np.stack(parts, axis=-1)

    def jacobian(self, x):
        x, args = self._args(x)
        d = self.dimension
        parts = _broadcast_outputs(self._hessian_fn(*args), x.shape[:-1])
        return np.stack(parts, axis=-1).reshape(x.shape[:-1] + (d, d))

    def hessian_bounds(self):
        if self._bounds is not None:
            return self._bounds
        return super().hessian_bounds()

    def describe(self) -> str:
        return f"{self.label}"


def _coordinate_symbols(dimension: int):
    return sp.symbols(f"x0:{dimension}", real=True)


def ou_potential(dimension: int, lam: float) -> PotentialDrift:
    """
    Потенциал Орнштейна–Уленбека V = −λ|x|²/2, Z = −λx

    Args:
        dimension: размерность
        lam: скорость возврата λ
    """
    xs = _coordinate_symbols(dimension)
    lam_sym = sp.Float(lam)
    expr = -lam_sym * sum(s ** 2 for s in xs) / 2
    return PotentialDrift(expr, xs, label=f"ou(lam={lam:g})", hessian_bounds=(-lam, -lam))


def _power_hessian_bounds(dimension: int, delta: float) -> Tuple[float, float]:
    """Численный inf/sup спектра Hess (1+|x|²)^δ по радиальной сетке"""
    if delta > 1:
        # оба собственных значения возрастают по r, минимум в нуле
        return (2 * delta, np.inf)
    r = np.concatenate([[0.0], np.logspace(-4, 8, 4000)])
    q = 1.0 + r ** 2
    radial = 2 * delta * q ** (delta - 2) * (1 + (2 * delta - 1) * r ** 2)
    eigen = [radial]
    if dimension > 1:
        eigen.append(2 * delta * q ** (delta - 1))
    stacked = np.concatenate(eigen)
    # хвост при r → ∞ стремится к 0 для δ < 1
    lower = min(float(stacked.min()), 0.0) if delta < 1 else float(stacked.min())
    return (lower, float(stacked.max()))


def power_potential(dimension: int, delta: float) -> PotentialDrift:
    """
    Потенциал V = (1+|x|²)^δ, Z = ∇V

    Args:
        dimension: размерность
        delta: показатель δ > 0
    """
    if delta <= 0:
        raise ValueError(f"Показатель δ должен быть положительным, получено {delta}")
    xs = _coordinate_symbols(dimension)
    expr = (1 + sum(s ** 2 for s in xs)) ** sp.Float(delta)
    bounds = _power_hessian_bounds(dimension, delta)
    logger.debug(f"Спектр Hess V для δ={delta}: [{bounds[0]:.4g}, {bounds[1]:.4g}]")
    return PotentialDrift(expr, xs, label=f"power(delta={delta:g})", hessian_bounds=bounds)


def expression_potential(dimension: int, text: str) -> PotentialDrift:
    """Потенциал из строки sympy с переменными x0, x1, ..."""
    xs = _coordinate_symbols(dimension)
    expr = sp.sympify(text, locals={str(s): s for s in xs})
    return PotentialDrift(expr, xs, label=f"expr({text})")
