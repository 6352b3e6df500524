"""
Validadores de entrada.

Proporciona funciones para validar parámetros numéricos y parsear
las especificaciones textuales de la CLI (listas de temperaturas,
semillas de Bethe).
"""

import math
from typing import Any, List, Tuple

from app.core.exceptions import InvalidParameterError


class DataValidator:
    """
    Clase para validación de parámetros.

    Los métodos ``is_*`` devuelven bool; los ``require_*`` y ``parse_*``
    lanzan ``InvalidParameterError`` con un mensaje utilizable en la CLI.
    """

    @classmethod
    def is_finite_number(cls, value: Any) -> bool:
        """Verifica que el valor sea un real finito (no bool)."""
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            return False
        return math.isfinite(value)

    @classmethod
    def is_positive(cls, value: Any) -> bool:
        """Verifica que el valor sea un real finito y positivo."""
        return cls.is_finite_number(value) and value > 0

    @classmethod
    def is_power_of_two(cls, value: Any) -> bool:
        """Verifica que el valor sea una potencia de dos."""
        return (
            isinstance(value, int)
            and not isinstance(value, bool)
            and value > 0
            and (value & (value - 1)) == 0
        )

    @classmethod
    def require_positive(cls, name: str, value: Any) -> float:
        """Devuelve ``value`` como float o lanza si no es positivo."""
        if not cls.is_positive(value):
            raise InvalidParameterError(name, value, "un real positivo")
        return float(value)

    @classmethod
    def require_int_range(cls, name: str, value: Any, low: int, high: int) -> int:
        """Devuelve ``value`` si es entero en [low, high]."""
        if isinstance(value, bool) or not isinstance(value, int) or not low <= value <= high:
            raise InvalidParameterError(name, value, f"un entero en [{low}, {high}]")
        return value

    @classmethod
    def parse_temperatures(cls, spec: str) -> List[float]:
        """
        Parsea una lista de temperaturas.

        Acepta ``"0.1,0.5,1"`` (lista explícita) o ``"a:b:n"`` (n puntos
        equiespaciados entre a y b, ambos incluidos).

        Raises:
            InvalidParameterError: Lista vacía, valores no numéricos o T ≤ 0
        """
        text = (spec or "").strip()
        if not text:
            raise InvalidParameterError("temps", spec, "al menos una temperatura")

        try:
            if ":" in text:
                parts = text.split(":")
                if len(parts) != 3:
                    raise ValueError(text)
                start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
                if count < 1:
                    raise ValueError(text)
                if count == 1:
                    temps = [start]
                else:
                    temps = [start + (stop - start) * i / (count - 1) for i in range(count)]
            else:
                temps = [float(item) for item in text.split(",") if item.strip()]
        except ValueError:
            raise InvalidParameterError("temps", spec, "'a,b,c' o 'inicio:fin:n'")

        if not temps:
            raise InvalidParameterError("temps", spec, "al menos una temperatura")
        for t in temps:
            if not cls.is_positive(t):
                raise InvalidParameterError("T", t, "temperaturas > 0")
        return temps

    @classmethod
    def parse_seeds(cls, spec: str) -> List[List[Tuple[int, float]]]:
        """
        Parsea semillas de strings para el solver de Bethe.

        Formato: semillas separadas por ``;``; cada semilla es una lista de
        partes ``m:centro`` separadas por comas. Ejemplo ``"1:0.5;1:0;2:0"``
        son tres semillas (las dos primeras con un 1-string, la tercera con
        un 2-string).
        """
        text = (spec or "").strip()
        if not text:
            return []

        seeds: List[List[Tuple[int, float]]] = []
        for chunk in text.split(";"):
            chunk = chunk.strip()
            if not chunk:
                continue
            parts: List[Tuple[int, float]] = []
            for item in chunk.split(","):
                try:
                    m_text, center_text = item.split(":")
                    m, center = int(m_text), float(center_text)
                except ValueError:
                    raise InvalidParameterError("seeds", item, "'m:centro'")
                if m < 1 or not math.isfinite(center):
                    raise InvalidParameterError("seeds", item, "m ≥ 1 y centro finito")
                parts.append((m, center))
            seeds.append(parts)
        return seeds
