"""
Excepciones personalizadas del sistema OSP-TBA.

Define una jerarquía de excepciones específicas para el cálculo
termodinámico de la cadena osp(1|2), separando errores de uso
(configuración, parámetros) de fallos numéricos (polos, convergencia,
inconsistencias).
"""

from typing import Optional, Any, Dict


class OspTbaError(Exception):
    """
    Excepción base para todas las excepciones del sistema.

    Attributes:
        message: Mensaje descriptivo del error
        code: Código de error opcional
        details: Diccionario con detalles adicionales
    """

    def __init__(
        self,
        message: str,
        code: Optional[str] = None,
        details: Optional[Dict[str, Any]] = None
    ):
        self.message = message
        self.code = code or self._default_code()
        self.details = details or {}
        super().__init__(self.message)

    def _default_code(self) -> str:
        """Retorna el código de error por defecto."""
        return "OSPTBA_ERROR"

    def to_dict(self) -> Dict[str, Any]:
        """Convierte la excepción a un diccionario."""
        return {
            "error_type": self.__class__.__name__,
            "code": self.code,
            "message": self.message,
            "details": self.details
        }

    def __str__(self) -> str:
        if self.details:
            return f"[{self.code}] {self.message} - Detalles: {self.details}"
        return f"[{self.code}] {self.message}"


class UsageError(OspTbaError):
    """Error de uso: entrada del usuario inválida (código de salida 2)."""

    def _default_code(self) -> str:
        return "USAGE_ERROR"


class NumericalError(OspTbaError):
    """Fallo numérico (código de salida 1)."""

    def _default_code(self) -> str:
        return "NUMERICAL_ERROR"


# =============================================================================
# Excepciones de Configuración
# =============================================================================

class ConfigurationError(UsageError):
    """Error relacionado con la configuración del sistema."""

    def _default_code(self) -> str:
        return "CONFIG_ERROR"


class InvalidConfigValueError(ConfigurationError):
    """Valor de configuración inválido."""

    def __init__(
        self,
        param_name: str,
        value: Any,
        expected: str,
        **kwargs
    ):
        message = (
            f"Valor inválido para '{param_name}': {value}. "
            f"Se esperaba: {expected}"
        )
        super().__init__(message, **kwargs)
        self.details["param_name"] = param_name
        self.details["invalid_value"] = str(value)
        self.details["expected"] = expected

    def _default_code(self) -> str:
        return "INVALID_CONFIG_VALUE"


class MissingConfigError(ConfigurationError):
    """Archivo de configuración requerido no encontrado."""

    def __init__(self, config_name: str, **kwargs):
        message = f"Configuración requerida no encontrada: '{config_name}'"
        super().__init__(message, **kwargs)
        self.details["config_name"] = config_name

    def _default_code(self) -> str:
        return "MISSING_CONFIG"


class InvalidParameterError(UsageError):
    """Parámetro físico fuera de dominio (T ≤ 0, J ≤ 0 donde se exige, m < 1...)."""

    def __init__(self, param_name: str, value: Any, expected: str, **kwargs):
        message = (
            f"Parámetro inválido '{param_name}' = {value}. Se esperaba: {expected}"
        )
        super().__init__(message, **kwargs)
        self.details["param_name"] = param_name
        self.details["invalid_value"] = str(value)
        self.details["expected"] = expected

    def _default_code(self) -> str:
        return "INVALID_PARAMETER"


# =============================================================================
# Excepciones del Álgebra
# =============================================================================

class PoleError(NumericalError):
    """Evaluación en un polo de una función racional."""

    def __init__(self, location: Any, context: str, **kwargs):
        message = f"Polo encontrado en {location} ({context})"
        super().__init__(message, **kwargs)
        self.details["location"] = str(location)
        self.details["context"] = context

    def _default_code(self) -> str:
        return "POLE_ERROR"


class SizeGuardError(UsageError):
    """El tamaño solicitado excede el límite de almacenamiento denso."""

    def __init__(self, what: str, size: int, limit: int, **kwargs):
        message = f"{what} = {size} excede el límite permitido ({limit})"
        super().__init__(message, **kwargs)
        self.details["size"] = size
        self.details["limit"] = limit

    def _default_code(self) -> str:
        return "SIZE_GUARD"


class SpectrumError(NumericalError):
    """Espectro con partes imaginarias por encima de la tolerancia."""

    def __init__(self, max_imag: float, tolerance: float, **kwargs):
        message = (
            f"Autovalores con parte imaginaria {max_imag:.3e} "
            f"(tolerancia {tolerance:.1e})"
        )
        super().__init__(message, **kwargs)
        self.details["max_imag"] = max_imag
        self.details["tolerance"] = tolerance

    def _default_code(self) -> str:
        return "SPECTRUM_ERROR"


# =============================================================================
# Excepciones de Bethe
# =============================================================================

class RootCollisionError(NumericalError):
    """Dos raíces de Bethe coinciden dentro de la guarda de colisión."""

    def __init__(self, separation: float, guard: float, **kwargs):
        message = f"Raíces colisionan: separación {separation:.3e} < {guard:.1e}"
        super().__init__(message, **kwargs)
        self.details["separation"] = separation
        self.details["guard"] = guard

    def _default_code(self) -> str:
        return "ROOT_COLLISION"


class BetheConvergenceError(NumericalError):
    """Newton no converge en el número máximo de iteraciones."""

    def __init__(self, iterations: int, residual: float, **kwargs):
        message = (
            f"Newton no convergió tras {iterations} iteraciones "
            f"(residuo {residual:.3e})"
        )
        super().__init__(message, **kwargs)
        self.details["iterations"] = iterations
        self.details["residual"] = residual

    def _default_code(self) -> str:
        return "BETHE_NO_CONVERGENCE"


class SingularJacobianError(NumericalError):
    """Jacobiano singular en el paso de Newton."""

    def _default_code(self) -> str:
        return "SINGULAR_JACOBIAN"


class PairingError(NumericalError):
    """La energía de un conjunto de raíces complejas no es real."""

    def __init__(self, imag_part: float, **kwargs):
        message = f"Energía con parte imaginaria {imag_part:.3e}: raíces sin pareja conjugada"
        super().__init__(message, **kwargs)
        self.details["imag_part"] = imag_part

    def _default_code(self) -> str:
        return "PAIRING_ERROR"


class ShapeMismatchError(UsageError):
    """Dimensiones incompatibles entre configuraciones y números cuánticos."""

    def __init__(self, what: str, expected: Any, actual: Any, **kwargs):
        message = f"Forma incompatible en {what}: esperado {expected}, encontrado {actual}"
        super().__init__(message, **kwargs)
        self.details["expected"] = str(expected)
        self.details["actual"] = str(actual)

    def _default_code(self) -> str:
        return "SHAPE_MISMATCH"


# =============================================================================
# Excepciones de Núcleos
# =============================================================================

class TruncationOverflowError(UsageError):
    """Índice de string por encima del máximo configurado."""

    def __init__(self, index: int, limit: int, **kwargs):
        message = f"Índice de string {index} excede el máximo configurado ({limit})"
        super().__init__(message, **kwargs)
        self.details["index"] = index
        self.details["limit"] = limit

    def _default_code(self) -> str:
        return "TRUNCATION_OVERFLOW"


class TailToleranceError(NumericalError):
    """Los extremos de la malla no alcanzan la constante asintótica."""

    def __init__(self, deviation: float, tolerance: float, **kwargs):
        message = (
            f"Desviación en los extremos de la malla {deviation:.3e} "
            f"excede la tolerancia {tolerance:.1e}"
        )
        super().__init__(message, **kwargs)
        self.details["deviation"] = deviation
        self.details["tolerance"] = tolerance

    def _default_code(self) -> str:
        return "TAIL_TOLERANCE"


# =============================================================================
# Excepciones de TBA
# =============================================================================

class NonFiniteStateError(NumericalError):
    """Valores no finitos en la iteración TBA."""

    def __init__(self, iteration: int, **kwargs):
        message = f"Valores no finitos en la iteración {iteration}"
        super().__init__(message, **kwargs)
        self.details["iteration"] = iteration

    def _default_code(self) -> str:
        return "NON_FINITE_STATE"


class UnconvergedStateError(NumericalError):
    """Se pidió una observable sobre un estado no convergido."""

    def __init__(self, residual: float, iterations: int, **kwargs):
        message = (
            f"Estado TBA no convergido (residuo {residual:.3e} "
            f"tras {iterations} iteraciones)"
        )
        super().__init__(message, **kwargs)
        self.details["residual"] = residual
        self.details["iterations"] = iterations

    def _default_code(self) -> str:
        return "UNCONVERGED_STATE"


class NegativeDensityError(NumericalError):
    """Densidad recuperada negativa más allá de la tolerancia."""

    def __init__(self, minimum: float, string_index: int, **kwargs):
        message = f"Densidad negativa {minimum:.3e} en el string m={string_index}"
        super().__init__(message, **kwargs)
        self.details["minimum"] = minimum
        self.details["string_index"] = string_index

    def _default_code(self) -> str:
        return "NEGATIVE_DENSITY"


class ThermodynamicInconsistencyError(NumericalError):
    """Las dos rutas termodinámicas (e − Ts y f) no coinciden."""

    def __init__(self, difference: float, tolerance: float, **kwargs):
        message = f"|e − Ts − f| = {difference:.3e} excede la tolerancia {tolerance:.1e}"
        super().__init__(message, **kwargs)
        self.details["difference"] = difference
        self.details["tolerance"] = tolerance

    def _default_code(self) -> str:
        return "THERMO_INCONSISTENCY"


# =============================================================================
# Excepciones de Archivos
# =============================================================================

class FileProcessingError(OspTbaError):
    """Error durante la lectura o escritura de archivos."""

    def __init__(self, message: str, filepath: Optional[str] = None, **kwargs):
        super().__init__(message, **kwargs)
        if filepath:
            self.details["filepath"] = filepath

    def _default_code(self) -> str:
        return "FILE_PROCESSING_ERROR"


class FileReadError(FileProcessingError):
    """Error al leer el archivo."""

    def __init__(self, filepath: str, reason: str, **kwargs):
        message = f"Error al leer el archivo: {reason}"
        super().__init__(message, filepath=filepath, **kwargs)
        self.details["reason"] = reason

    def _default_code(self) -> str:
        return "FILE_READ_ERROR"


class FileWriteError(FileProcessingError):
    """Error al escribir el archivo."""

    def __init__(self, filepath: str, reason: str, **kwargs):
        message = f"Error al escribir el archivo: {reason}"
        super().__init__(message, filepath=filepath, **kwargs)
        self.details["reason"] = reason

    def _default_code(self) -> str:
        return "FILE_WRITE_ERROR"


class UnsupportedFormatError(UsageError):
    """Formato de salida no soportado."""

    def __init__(self, fmt: str, supported: tuple, **kwargs):
        message = (
            f"Formato no soportado: '{fmt}'. "
            f"Formatos soportados: {', '.join(supported)}"
        )
        super().__init__(message, **kwargs)
        self.details["format"] = fmt
        self.details["supported_formats"] = list(supported)

    def _default_code(self) -> str:
        return "UNSUPPORTED_FORMAT"


# =============================================================================
# Mapeo de códigos de error
# =============================================================================

ERROR_CODES = {
    "OSPTBA_ERROR": "Error general del sistema",
    "USAGE_ERROR": "Error de uso",
    "NUMERICAL_ERROR": "Fallo numérico",
    "CONFIG_ERROR": "Error de configuración",
    "INVALID_CONFIG_VALUE": "Valor de configuración inválido",
    "MISSING_CONFIG": "Configuración faltante",
    "INVALID_PARAMETER": "Parámetro inválido",
    "POLE_ERROR": "Evaluación en un polo",
    "SIZE_GUARD": "Tamaño excedido",
    "SPECTRUM_ERROR": "Espectro no real",
    "ROOT_COLLISION": "Colisión de raíces",
    "BETHE_NO_CONVERGENCE": "Newton no convergió",
    "SINGULAR_JACOBIAN": "Jacobiano singular",
    "PAIRING_ERROR": "Raíces sin pareja conjugada",
    "SHAPE_MISMATCH": "Formas incompatibles",
    "TRUNCATION_OVERFLOW": "Truncación excedida",
    "TAIL_TOLERANCE": "Colas fuera de tolerancia",
    "NON_FINITE_STATE": "Estado no finito",
    "UNCONVERGED_STATE": "Estado no convergido",
    "NEGATIVE_DENSITY": "Densidad negativa",
    "THERMO_INCONSISTENCY": "Inconsistencia termodinámica",
    "FILE_PROCESSING_ERROR": "Error procesando archivo",
    "FILE_READ_ERROR": "Error de lectura",
    "FILE_WRITE_ERROR": "Error de escritura",
    "UNSUPPORTED_FORMAT": "Formato no soportado",
}


def get_error_description(code: str) -> str:
    """Obtiene la descripción de un código de error."""
    return ERROR_CODES.get(code, "Error desconocido")
