# Campos sintéticos con solución cerrada, usados como referencia
import numpy as np

from .base import ScalarField


class HarmonicBowl(ScalarField):
    """φ = ½ (p - c)ᵀ K (p - c), con K diagonal (3,) o simétrica (3, 3) en V/m²."""

    def __init__(self, center, curvature):
        self.center = np.asarray(center, dtype=float)
        curvature = np.asarray(curvature, dtype=float)
        self.K = np.diag(curvature) if curvature.ndim == 1 else 0.5 * (curvature + curvature.T)

    def value(self, p):
        d = np.asarray(p, dtype=float) - self.center
        return float(0.5 * d @ self.K @ d)

    def gradient(self, p):
        return self.K @ (np.asarray(p, dtype=float) - self.center)

    def hessian(self, p):
        return self.K.copy()

    def gradients(self, points):
        return (np.atleast_2d(points) - self.center) @ self.K.T


class LinearBias(ScalarField):
    """φ = g · p."""

    def __init__(self, g):
        self.g = np.asarray(g, dtype=float)

    def value(self, p):
        return float(self.g @ np.asarray(p, dtype=float))

    def gradient(self, p):
        return self.g.copy()

    def hessian(self, p):
        return np.zeros((3, 3))

    def gradients(self, points):
        return np.broadcast_to(self.g, np.atleast_2d(points).shape).copy()


class QuarticDoubleWell(ScalarField):
    """
    Doble pozo sobre x: φ = a x'⁴ - b x'² + ½ c (y'² + z'²), con p' = p - center.
    Mínimos en x' = ±sqrt(b / 2a) y barrera b² / 4a.
    """

    def __init__(self, a: float, b: float, c_perp: float, center=(0.0, 0.0, 0.0)):
        self.a = a
        self.b = b
        self.c = c_perp
        self.center = np.asarray(center, dtype=float)

    @property
    def minima(self) -> np.ndarray:
        x0 = np.sqrt(self.b / (2 * self.a))
        return self.center + np.array([[-x0, 0.0, 0.0], [x0, 0.0, 0.0]])

    @property
    def barrier(self) -> float:
        return self.b**2 / (4 * self.a)

    def value(self, p):
        x, y, z = np.asarray(p, dtype=float) - self.center
        return float(self.a * x**4 - self.b * x**2 + 0.5 * self.c * (y**2 + z**2))

    def gradient(self, p):
        x, y, z = np.asarray(p, dtype=float) - self.center
        return np.array([4 * self.a * x**3 - 2 * self.b * x, self.c * y, self.c * z])

    def hessian(self, p):
        x = float(np.asarray(p, dtype=float)[0] - self.center[0])
        return np.diag([12 * self.a * x**2 - 2 * self.b, self.c, self.c])


class RfQuadrupole(ScalarField):
    """Amplitud de RF de un cuadrupolo lineal: φ = (κ/2)((x-x0)² - (y-y0)²)."""

    def __init__(self, kappa: float, center=(0.0, 0.0, 0.0)):
        self.kappa = kappa
        self.center = np.asarray(center, dtype=float)

    def value(self, p):
        x, y, _ = np.asarray(p, dtype=float) - self.center
        return float(0.5 * self.kappa * (x**2 - y**2))

    def gradient(self, p):
        x, y, _ = np.asarray(p, dtype=float) - self.center
        return np.array([self.kappa * x, -self.kappa * y, 0.0])

    def hessian(self, p):
        return np.diag([self.kappa, -self.kappa, 0.0])

    def gradients(self, points):
        d = np.atleast_2d(points) - self.center
        return np.stack([self.kappa * d[:, 0], -self.kappa * d[:, 1], np.zeros(len(d))], axis=-1)
