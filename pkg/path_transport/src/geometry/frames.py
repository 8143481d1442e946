"""
Ортонормированные реперы u ∈ O(M)
"""

from dataclasses import dataclass

import numpy as np

from .models import ManifoldModel


@dataclass
class Frame:
    """Репер: точка base и столбцы columns (D × d)"""

    base: np.ndarray
    columns: np.ndarray

    def __post_init__(self):
        self.base = np.asarray(self.base, dtype=float)
        self.columns = np.asarray(self.columns, dtype=float)

    def apply(self, a: np.ndarray) -> np.ndarray:
        """u·a: координаты репера → касательный вектор"""
        return self.columns @ np.asarray(a, dtype=float)


def orthonormal_frame(model: ManifoldModel, x: np.ndarray) -> Frame:
    """Стандартный g-ортонормированный репер в точке x"""
    x = np.asarray(x, dtype=float)
    return Frame(x, model.tangent_basis(x))


def random_frame(model: ManifoldModel, x: np.ndarray, rng: np.random.Generator) -> Frame:
    """Случайный репер: стандартный базис, повернутый случайной ортогональной матрицей"""
    x = np.asarray(x, dtype=float)
    d = model.dimension
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    q = q * np.sign(np.diag(r))
    return Frame(x, model.tangent_basis(x) @ q)


def orthonormality_error(model: ManifoldModel, base: np.ndarray, columns: np.ndarray) -> float:
    """max |eᵀ g e − I| по пакету реперов"""
    G = np.einsum('...ki,...kl,...lj->...ij', columns, model.metric(base), columns)
    return float(np.max(np.abs(G - np.eye(columns.shape[-1])))) if G.size else 0.0
