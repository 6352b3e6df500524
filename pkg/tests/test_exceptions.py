"""
Tests para el módulo de excepciones.
"""

import pytest

from app.core.exceptions import (
    BetheConvergenceError,
    ConfigurationError,
    FileProcessingError,
    FileReadError,
    FileWriteError,
    InvalidConfigValueError,
    InvalidParameterError,
    MissingConfigError,
    NegativeDensityError,
    NonFiniteStateError,
    NumericalError,
    OspTbaError,
    PoleError,
    RootCollisionError,
    SizeGuardError,
    ThermodynamicInconsistencyError,
    TruncationOverflowError,
    UnsupportedFormatError,
    UsageError,
    get_error_description,
)


class TestOspTbaError:
    """Tests para la excepción base."""

    def test_basic_creation(self):
        """Test de creación básica."""
        exc = OspTbaError("Mensaje de prueba")

        assert exc.message == "Mensaje de prueba"
        assert exc.code == "OSPTBA_ERROR"
        assert exc.details == {}

    def test_with_code_and_details(self):
        """Test con código y detalles."""
        exc = OspTbaError("Mensaje", code="CUSTOM_CODE", details={"key": "value"})

        assert exc.code == "CUSTOM_CODE"
        assert exc.details["key"] == "value"

    def test_to_dict(self):
        """Test de conversión a diccionario."""
        result = OspTbaError("Test", details={"info": "data"}).to_dict()

        assert result["error_type"] == "OspTbaError"
        assert result["message"] == "Test"
        assert result["details"] == {"info": "data"}

    def test_str_representation(self):
        """Test de representación en string."""
        assert str(OspTbaError("Test")) == "[OSPTBA_ERROR] Test"
        assert "Detalles" in str(OspTbaError("Test", details={"a": 1}))


class TestExitCodeFamilies:
    """Las excepciones se reparten entre errores de uso y fallos numéricos."""

    @pytest.mark.parametrize("exc", [
        InvalidConfigValueError("grid.points", 1000, "una potencia de dos"),
        MissingConfigError("run.json"),
        InvalidParameterError("T", -1.0, "T > 0"),
        SizeGuardError("N", 12, 10),
        TruncationOverflowError(500, 400),
        UnsupportedFormatError("parquet", ("csv", "json")),
    ])
    def test_usage_errors(self, exc):
        assert isinstance(exc, UsageError)
        assert not isinstance(exc, NumericalError)

    @pytest.mark.parametrize("exc", [
        PoleError(1.5, "Ř(u)"),
        RootCollisionError(1e-10, 1e-8),
        BetheConvergenceError(100, 1e-3),
        NonFiniteStateError(12),
        NegativeDensityError(-1e-6, 3),
        ThermodynamicInconsistencyError(2e-3, 1e-3),
    ])
    def test_numerical_errors(self, exc):
        assert isinstance(exc, NumericalError)
        assert not isinstance(exc, UsageError)

    def test_file_errors_are_neither(self):
        exc = FileWriteError("/tmp/x.csv", "disco lleno")
        assert isinstance(exc, FileProcessingError)
        assert not isinstance(exc, (UsageError, NumericalError))


class TestConfigurationErrors:
    """Tests para errores de configuración."""

    def test_invalid_config_value(self):
        """Test de valor de configuración inválido."""
        exc = InvalidConfigValueError("solver.damping", 2.0, "un valor en (0, 1]")

        assert isinstance(exc, ConfigurationError)
        assert exc.code == "INVALID_CONFIG_VALUE"
        assert exc.details["param_name"] == "solver.damping"
        assert exc.details["invalid_value"] == "2.0"
        assert "solver.damping" in exc.message

    def test_missing_config(self):
        """Test de configuración faltante."""
        exc = MissingConfigError("run.json")

        assert exc.code == "MISSING_CONFIG"
        assert exc.details["config_name"] == "run.json"


class TestNumericalErrors:
    """Tests para los detalles de los fallos numéricos."""

    def test_pole_error(self):
        exc = PoleError(1.5, "Ř(u)")
        assert exc.code == "POLE_ERROR"
        assert exc.details["location"] == "1.5"

    def test_negative_density(self):
        exc = NegativeDensityError(-2e-7, 4)
        assert exc.details["string_index"] == 4
        assert "m=4" in exc.message

    def test_size_guard(self):
        exc = SizeGuardError("N", 12, 10)
        assert exc.details == {"size": 12, "limit": 10}

    def test_file_read_error(self):
        exc = FileReadError("/no/existe.json", "no encontrado")
        assert exc.details["filepath"] == "/no/existe.json"
        assert exc.details["reason"] == "no encontrado"


class TestErrorDescriptions:
    """Tests para descripciones de errores."""

    def test_known_error_codes(self):
        """Test de códigos conocidos."""
        assert get_error_description("POLE_ERROR") == "Evaluación en un polo"
        assert get_error_description("NEGATIVE_DENSITY") == "Densidad negativa"

    def test_unknown_error_code(self):
        """Test de código desconocido."""
        assert get_error_description("UNKNOWN_CODE") == "Error desconocido"

    def test_every_default_code_is_described(self):
        excs = [
            PoleError(0, ""), RootCollisionError(0, 1), NonFiniteStateError(1),
            UnsupportedFormatError("x", ()), SizeGuardError("N", 1, 0),
        ]
        for exc in excs:
            assert get_error_description(exc.code) != "Error desconocido"
