"""
Модель (M, f⁻²g) со сносом Z′ = f²Z + (d−2)f∇f
"""

import numpy as np

from ..errors import UnsupportedModelError
from ..geometry.drifts import DriftField
from ..geometry.models import ChartModel, ManifoldModel
from .factors import ConformalFactor
from .toolkit import (BOUNDARY_FLOOR, conformal_christoffel, conformal_metric, conformal_ricci,
                      transformed_drift, transformed_drift_jacobian)


class ConformalDrift(DriftField):
    """Снос Z′ в координатах карты базовой модели"""

    kind = "conformal"

    def __init__(self, base: ManifoldModel, factor: ConformalFactor):
        super().__init__(base.ambient_dimension)
        self.base = base
        self.factor = factor

    def value(self, x):
        return transformed_drift(self.base, self.factor, x)

    def jacobian(self, x):
        return transformed_drift_jacobian(self.base, self.factor, x)

    @property
    def is_zero(self) -> bool:
        return self.base.drift_field.is_zero and self.base.dimension == 2

    def describe(self) -> str:
        return f"conformal({self.base.drift_field.describe()},{self.factor.describe()})"


class ConformalModel(ChartModel):
    """
    Конформно измененная модель g′ = f⁻²g на {f > 0}

    Символы Кристоффеля и Риччи в замкнутой форме через множитель f,
    геодезические и расстояние наследуются от модели в карте.
    """

    kind = "conformal"

    def __init__(self, base: ManifoldModel, factor: ConformalFactor, **kwargs):
        if base.kind == 'sphere':
            raise UnsupportedModelError("Конформная замена сферы задается в стереографической карте")
        super().__init__(base.dimension, drift=ConformalDrift(base, factor), psi=base.psi,
                         explosion_threshold=base.explosion_threshold, **kwargs)
        self.base = base
        self.factor = factor

    @property
    def ambient_dimension(self) -> int:
        return self.dimension

    def in_domain(self, x):
        x = np.asarray(x, dtype=float)
        return self.base.in_domain(x) & (self.factor.value(x) >= BOUNDARY_FLOOR)

    def metric(self, x):
        return conformal_metric(self.base, self.factor, x)

    def christoffel(self, x):
        return conformal_christoffel(self.base, self.factor, x)

    def ricci(self, x):
        return conformal_ricci(self.base, self.factor, x)

    @property
    def model_id(self) -> str:
        return f"conformal[{self.base.model_id},{self.factor.describe()}]"
