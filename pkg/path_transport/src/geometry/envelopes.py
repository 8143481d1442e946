"""
Огибающие роста ψ: |Z| ≤ ψ∘ρ_o, ∫ ds/ψ = ∞
"""

import numpy as np
from scipy import integrate

from ..errors import ConfigError


class GrowthEnvelope:
    """Положительная неубывающая функция ψ на [0, ∞)"""

    kind = "abstract"

    def __call__(self, s):
        raise NotImplementedError

    def derivative(self, s):
        s = np.asarray(s, dtype=float)
        h = 1e-6 * np.maximum(1.0, np.abs(s))
        return (self(s + h) - self(s - h)) / (2 * h)

    def shifted_integral(self, s):
        """∫_0^s dt/ψ(t+1), адаптивная квадратура"""
        s = np.asarray(s, dtype=float)
        flat = s.ravel()
        out = np.empty_like(flat)
        for i, upper in enumerate(flat):
            out[i] = integrate.quad(lambda t: 1.0 / float(self(t + 1.0)), 0.0, float(upper), limit=200)[0]
        return out.reshape(s.shape)

    def describe(self) -> str:
        return self.kind


class AffineEnvelope(GrowthEnvelope):
    """ψ(s) = a + b·s; при b = 0 постоянная огибающая"""

    kind = "affine"

    def __init__(self, a: float = 1.0, b: float = 0.0):
        if a <= 0 or b < 0:
            raise ConfigError(f"Огибающая ψ=a+b·s требует a>0, b≥0 (a={a}, b={b})", "model.psi")
        self.a = float(a)
        self.b = float(b)

    def __call__(self, s):
        return self.a + self.b * np.asarray(s, dtype=float)

    def derivative(self, s):
        return np.full(np.shape(s), self.b, dtype=float)

    def shifted_integral(self, s):
        s = np.asarray(s, dtype=float)
        if self.b == 0.0:
            return s / self.a
        base = self.a + self.b
        return np.log((base + self.b * s) / base) / self.b

    def describe(self) -> str:
        return f"affine(a={self.a:g},b={self.b:g})"


class PowerEnvelope(GrowthEnvelope):
    """ψ(s) = a + b·s^p, 0 < p ≤ 1"""

    kind = "power"

    def __init__(self, a: float = 1.0, b: float = 1.0, p: float = 1.0):
        if a <= 0 or b < 0:
            raise ConfigError(f"Огибающая ψ=a+b·s^p требует a>0, b≥0 (a={a}, b={b})", "model.psi")
        if p <= 0 or p > 1:
            raise ConfigError(f"При p={p} интеграл ∫ds/ψ конечен, огибающая недопустима", "model.psi.p")
        self.a = float(a)
        self.b = float(b)
        self.p = float(p)

    def __call__(self, s):
        s = np.maximum(np.asarray(s, dtype=float), 0.0)
        return self.a + self.b * s ** self.p

    def derivative(self, s):
        s = np.maximum(np.asarray(s, dtype=float), 1e-300)
        return self.b * self.p * s ** (self.p - 1)

    def describe(self) -> str:
        return f"power(a={self.a:g},b={self.b:g},p={self.p:g})"


def build_envelope(spec: dict) -> GrowthEnvelope:
    """Огибающая по словарю {kind, ...}"""
    spec = dict(spec or {})
    kind = spec.pop('kind', 'affine')
    if kind == 'constant':
        return AffineEnvelope(a=spec.get('a', 1.0), b=0.0)
    if kind == 'affine':
        return AffineEnvelope(**spec)
    if kind == 'power':
        return PowerEnvelope(**spec)
    raise ConfigError(f"Неизвестный вид огибающей: {kind}", "model.psi.kind")
