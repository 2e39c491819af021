# Enums del dominio de la trampa
from enum import Enum
from ..iontrap_exceptions import ConfigurationError


class ElectrodeRole(Enum):
    """Define los roles posibles de un electrodo rectangular."""
    RF_PLUS = "RF_PLUS"
    RF_MINUS = "RF_MINUS"
    DC_CENTRAL = "DC_CENTRAL"
    DC_SIDE = "DC_SIDE"
    DC_EDGE = "DC_EDGE"
    GROUND = "GROUND"

    @property
    def is_rf(self) -> bool:
        return self in (ElectrodeRole.RF_PLUS, ElectrodeRole.RF_MINUS)

    @property
    def is_dc(self) -> bool:
        return not self.is_rf

    @classmethod
    def from_label(cls, label: str):
        """Devuelve el rol correspondiente a la etiqueta dada (acepta 'RF+' y 'RF-')."""

        aliases = {"RF+": "RF_PLUS", "RF-": "RF_MINUS"}
        key = aliases.get(label.strip(), label.strip()).upper()
        for member in cls:
            if member.value == key:
                return member
        raise ConfigurationError(f"Rol de electrodo no soportado: {label}")


class Axis(Enum):
    """Ejes principales del análisis de modos."""
    X = "x"
    Y = "y"
    Z = "z"
    FULL3N = "full"

    @property
    def index(self) -> int:
        if self is Axis.FULL3N:
            raise ConfigurationError("FULL3N no corresponde a un eje cartesiano")
        return "xyz".index(self.value)

    @classmethod
    def from_label(cls, label: str):
        for member in cls:
            if member.value == label.lower():
                return member
        raise ConfigurationError(f"Eje no soportado: {label}")


class DriftUnit(Enum):
    """Unidad con la que se expresa la tasa de deriva de las frecuencias."""
    HZ_PER_MIN = "hz_per_min"
    RAD_PER_S_PER_MIN = "rad_per_s_per_min"
