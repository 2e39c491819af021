# Potencial analítico de electrodos rectangulares sobre un plano sin huecos
import numpy as np

from ..iontrap_exceptions import DomainError
from .base import ScalarField


def _check_domain(points: np.ndarray) -> None:
    if np.any(points[:, 2] <= 0):
        raise DomainError("El potencial de los electrodos solo está definido para z > 0")


def _corner_terms(bounds: np.ndarray, points: np.ndarray):
    """Diferencias (X, Y) de cada vértice respecto a cada punto, con forma (m, n)."""
    x1, x2, y1, y2 = bounds.T
    x = points[:, 0:1]
    y = points[:, 1:2]
    z = points[:, 2:3]
    X = (x1 - x, x2 - x)
    Y = (y1 - y, y2 - y)
    return X, Y, z


# Signos de la combinación de vértices: F(x2,y2) - F(x1,y2) - F(x2,y1) + F(x1,y1)
_CORNER_SIGNS = ((1, 1, 1.0), (0, 1, -1.0), (1, 0, -1.0), (0, 0, 1.0))


def unit_potentials(bounds: np.ndarray, points: np.ndarray) -> np.ndarray:
    """
    Potencial de cada rectángulo a 1 V evaluado en cada punto.

    Args:
        bounds: Arreglo (n, 4) con (x1, x2, y1, y2) de cada electrodo.
        points: Arreglo (m, 3) de puntos con z > 0.

    Returns:
        Matriz (m, n) de potenciales en volts.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    _check_domain(points)
    X, Y, z = _corner_terms(np.atleast_2d(bounds), points)
    total = 0.0
    for ix, iy, sign in _CORNER_SIGNS:
        Xc, Yc = X[ix], Y[iy]
        R = np.sqrt(Xc**2 + Yc**2 + z**2)
        total = total + sign * np.arctan(Xc * Yc / (z * R))
    return total / (2 * np.pi)


def unit_gradients(bounds: np.ndarray, points: np.ndarray) -> np.ndarray:
    """
    Gradiente analítico (respecto al punto) del potencial de cada rectángulo a 1 V.

    Returns:
        Arreglo (m, n, 3) en V/m.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    _check_domain(points)
    X, Y, z = _corner_terms(np.atleast_2d(bounds), points)
    gx = gy = gz = 0.0
    for ix, iy, sign in _CORNER_SIGNS:
        Xc, Yc = X[ix], Y[iy]
        R2 = Xc**2 + Yc**2 + z**2
        R = np.sqrt(R2)
        xz = Xc**2 + z**2
        yz = Yc**2 + z**2
        gx = gx - sign * Yc * z / (R * xz)
        gy = gy - sign * Xc * z / (R * yz)
        gz = gz - sign * Xc * Yc * (R2 + z**2) / (R * xz * yz)
    return np.stack([gx, gy, gz], axis=-1) / (2 * np.pi)


class ElectrodeField(ScalarField):
    """Superposición de electrodos rectangulares con voltajes fijos."""

    def __init__(self, bounds: np.ndarray, voltages: np.ndarray):
        self.bounds = np.asarray(bounds, dtype=float).reshape(-1, 4)
        self.voltages = np.asarray(voltages, dtype=float).reshape(-1)
        if len(self.bounds) != len(self.voltages):
            raise ValueError("bounds y voltages deben tener la misma longitud")

    def values(self, points):
        if len(self.voltages) == 0:
            return np.zeros(len(np.atleast_2d(points)))
        return unit_potentials(self.bounds, points) @ self.voltages

    def gradients(self, points):
        if len(self.voltages) == 0:
            return np.zeros((len(np.atleast_2d(points)), 3))
        return np.einsum("mnk,n->mk", unit_gradients(self.bounds, points), self.voltages)

    def value(self, p):
        return float(self.values(np.asarray(p, dtype=float)[None, :])[0])

    def gradient(self, p):
        return self.gradients(np.asarray(p, dtype=float)[None, :])[0]
