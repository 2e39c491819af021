class IonTrapError(Exception):
    """Excepción base para todos los errores de iontrap."""

    exit_code = 1


class ConfigurationError(IonTrapError):
    """Se lanza cuando la configuración o un archivo de datos es inválido."""

    exit_code = 2


class DomainError(IonTrapError):
    """Se lanza cuando se evalúa un potencial fuera de su dominio (z <= 0)."""

    pass


class SearchError(IonTrapError):
    """Se lanza cuando la búsqueda de un mínimo no converge o termina en un punto de silla."""

    def __init__(self, message: str, hessian_eigenvalues=None):
        super().__init__(message)
        self.hessian_eigenvalues = hessian_eigenvalues


class NotATrapError(IonTrapError):
    """Se lanza cuando el Hessiano en el mínimo tiene una dirección de escape."""

    def __init__(self, message: str, escape_direction=None):
        super().__init__(message)
        self.escape_direction = escape_direction


class FitError(IonTrapError):
    """Se lanza cuando el ajuste anarmónico está mal condicionado."""

    def __init__(self, message: str, condition_number: float | None = None):
        super().__init__(message)
        self.condition_number = condition_number


class NearCollisionError(IonTrapError):
    """Se lanza cuando dos iones están a menos de 1 nm."""

    pass


class IntegrationError(IonTrapError):
    """Se lanza cuando la integración produce valores no finitos."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


class IonLossError(IonTrapError):
    """Se lanza cuando un ion escapa de la trampa durante la simulación."""

    exit_code = 3

    def __init__(self, message: str, ion: int, time: float):
        super().__init__(message)
        self.ion = ion
        self.time = time


class AmbiguousSpectrumError(IonTrapError):
    """Se lanza cuando no hay un pico espectral claro sobre el piso de ruido."""

    pass


class UnstableCrystalError(IonTrapError):
    """Se lanza cuando el cristal tiene modos con frecuencia imaginaria."""

    exit_code = 4

    def __init__(self, message: str, imaginary_modes=None):
        super().__init__(message)
        self.imaginary_modes = list(imaginary_modes or [])


class InfeasibleVoltageError(IonTrapError):
    """Se lanza cuando un pozo desaparece para un conjunto de voltajes."""

    exit_code = 5

    def __init__(self, message: str, site: int | None = None):
        super().__init__(message)
        self.site = site


class OptimizerStallError(IonTrapError):
    """Se lanza cuando la optimización se estanca o no alcanza la tolerancia."""

    exit_code = 5


class GateInfeasibleError(IonTrapError):
    """Se lanza cuando no existe un pulso que cierre las trayectorias con la fase requerida."""

    exit_code = 6
