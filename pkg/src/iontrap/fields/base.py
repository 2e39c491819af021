import numpy as np
from scipy.constants import e as ELEMENTARY_CHARGE
from abc import ABC, abstractmethod
from typing import Optional


def fd_step(p: np.ndarray) -> float:
    """Paso de diferencias finitas: max(1 nm, 1e-6·|z|)."""
    return max(1e-9, 1e-6 * abs(float(p[2])))


def richardson_jacobian(func, p: np.ndarray, h: Optional[float] = None) -> np.ndarray:
    """
    Jacobiano de una función vectorial R³ -> R³ por diferencias centrales
    con extrapolación de Richardson (error O(h⁴)).

    Args:
        func: Función que recibe un punto (3,) y devuelve un vector (3,).
        p: Punto de evaluación.
        h: Paso; si es None se usa fd_step(p).

    Returns:
        Matriz (3, 3) con J[i, k] = ∂func_i/∂p_k.
    """
    p = np.asarray(p, dtype=float)
    h = fd_step(p) if h is None else h
    jac = np.empty((3, 3))
    for k in range(3):
        e = np.zeros(3)
        e[k] = 1.0
        d_h = (func(p + h * e) - func(p - h * e)) / (2 * h)
        d_h2 = (func(p + 0.5 * h * e) - func(p - 0.5 * h * e)) / h
        jac[:, k] = (4 * d_h2 - d_h) / 3
    return jac


class ScalarField(ABC):
    """
    Clase base abstracta para un campo escalar estático en volts.
    """

    @abstractmethod
    def value(self, p: np.ndarray) -> float:
        """
        Evalúa el campo en un punto.

        Args:
            p: Punto (x, y, z) en metros.

        Returns:
            El valor del campo en volts.
        """
        pass

    @abstractmethod
    def gradient(self, p: np.ndarray) -> np.ndarray:
        """
        Gradiente del campo (V/m) en un punto.
        """
        pass

    def hessian(self, p: np.ndarray) -> np.ndarray:
        """Hessiano (V/m²) por diferencias de Richardson del gradiente; se devuelve simétrico."""
        jac = richardson_jacobian(self.gradient, p)
        return 0.5 * (jac + jac.T)

    def values(self, points: np.ndarray) -> np.ndarray:
        return np.array([self.value(p) for p in np.atleast_2d(points)])

    def gradients(self, points: np.ndarray) -> np.ndarray:
        return np.array([self.gradient(p) for p in np.atleast_2d(points)])


class ZeroField(ScalarField):
    """Campo idénticamente nulo."""

    def value(self, p):
        return 0.0

    def gradient(self, p):
        return np.zeros(3)

    def hessian(self, p):
        return np.zeros((3, 3))

    def gradients(self, points):
        return np.zeros_like(np.atleast_2d(points), dtype=float)


class SumField(ScalarField):
    """Superposición de campos escalares."""

    def __init__(self, *fields: ScalarField):
        self.fields = list(fields)

    def value(self, p):
        return float(sum(f.value(p) for f in self.fields))

    def gradient(self, p):
        return np.sum([f.gradient(p) for f in self.fields], axis=0)

    def hessian(self, p):
        return np.sum([f.hessian(p) for f in self.fields], axis=0)

    def gradients(self, points):
        return np.sum([f.gradients(points) for f in self.fields], axis=0)


class PseudopotentialField(ScalarField):
    """
    Pseudopotencial ponderomotriz en eV: Ψ = Z² e |∇φ_RF|² / (4 m Ω²),
    donde φ_RF es la amplitud del potencial de RF por unidad de cos(Ωt).
    """

    def __init__(self, rf_amplitude: ScalarField, charge: int, mass: float, omega_rf: float):
        self.rf = rf_amplitude
        self.coefficient = charge**2 * ELEMENTARY_CHARGE / (4 * mass * omega_rf**2)

    def value(self, p):
        grad = self.rf.gradient(p)
        return float(self.coefficient * grad @ grad)

    def gradient(self, p):
        return 2 * self.coefficient * self.rf.hessian(p) @ self.rf.gradient(p)

    def values(self, points):
        grads = self.rf.gradients(points)
        return self.coefficient * np.einsum("ij,ij->i", grads, grads)


class TrapPotentialField(ScalarField):
    """Potencial secular en volts: Ψ/Z + φ_DC."""

    def __init__(self, pseudo: Optional[PseudopotentialField], dc: ScalarField, charge: int):
        self.pseudo = pseudo
        self.dc = dc
        self.charge = charge

    def value(self, p):
        psi = self.pseudo.value(p) / self.charge if self.pseudo is not None else 0.0
        return float(psi + self.dc.value(p))

    def gradient(self, p):
        grad = self.dc.gradient(p)
        if self.pseudo is not None:
            grad = grad + self.pseudo.gradient(p) / self.charge
        return grad

    def values(self, points):
        vals = self.dc.values(points)
        if self.pseudo is not None:
            vals = vals + self.pseudo.values(points) / self.charge
        return vals

    def hessian(self, p):
        if self.pseudo is None:
            return self.dc.hessian(p)
        return super().hessian(p)


class TimeDependentField:
    """
    Potencial total dependiente del tiempo: φ(p, t) = φ_DC(p) + φ_RF(p)·cos(Ωt).
    Sin componente de RF el campo es estático.
    """

    def __init__(self, dc: ScalarField, rf_amplitude: Optional[ScalarField] = None,
                 omega_rf: Optional[float] = None):
        if rf_amplitude is not None and not omega_rf:
            raise ValueError("Un campo con RF requiere omega_rf > 0")
        self.dc = dc
        self.rf = rf_amplitude
        self.omega_rf = omega_rf if rf_amplitude is not None else None

    @property
    def is_static(self) -> bool:
        return self.rf is None

    def value(self, p: np.ndarray, t: float) -> float:
        val = self.dc.value(p)
        if self.rf is not None:
            val += self.rf.value(p) * np.cos(self.omega_rf * t)
        return float(val)

    def gradients(self, points: np.ndarray, t: float) -> np.ndarray:
        """Gradientes (N, 3) del potencial total en el instante t."""
        grads = self.dc.gradients(points)
        if self.rf is not None:
            grads = grads + self.rf.gradients(points) * np.cos(self.omega_rf * t)
        return grads

    def secular_field(self, charge: int, mass: float) -> TrapPotentialField:
        """Potencial promediado en el tiempo (volts) que ve un ion de carga Z y masa m."""
        pseudo = None
        if self.rf is not None:
            pseudo = PseudopotentialField(self.rf, charge, mass, self.omega_rf)
        return TrapPotentialField(pseudo, self.dc, charge)
