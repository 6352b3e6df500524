"""
Configuración centralizada del sistema OSP-TBA.

Este módulo gestiona todas las configuraciones del sistema incluyendo:
- Rutas de archivos y directorios
- Geometría de la malla de rapidez y parámetros del solver TBA
- Parámetros de diagonalización exacta y del solver de Bethe
- Plan de barrido de temperaturas y formato de salida
"""

import os
from pathlib import Path
from dataclasses import dataclass, field, asdict, replace
from typing import Optional, List, Dict, Any
import json

from app.core.exceptions import (
    InvalidConfigValueError,
    MissingConfigError,
    ConfigurationError,
)


# Variable de entorno que limita el tamaño del pool de procesos
MAX_WORKERS_ENV = "OSPTBA_MAX_WORKERS"


@dataclass
class PathsConfig:
    """Configuración de rutas del sistema."""

    # Directorio base del proyecto
    base_dir: Path = field(default_factory=lambda: Path(__file__).parent.parent.parent.parent)

    # Directorios derivados
    data_dir: Path = field(init=False)
    output_dir: Path = field(init=False)
    logs_dir: Path = field(init=False)

    def __post_init__(self):
        """Inicializa las rutas derivadas."""
        self.data_dir = self.base_dir / "data"
        self.output_dir = self.data_dir / "output"
        self.logs_dir = self.base_dir / "logs"

    @property
    def registry_path(self) -> Path:
        """Base de datos SQLite del registro de ejecuciones."""
        return self.data_dir / "runs.db"

    def ensure_directories(self) -> None:
        """Crea todos los directorios necesarios si no existen."""
        for directory in (self.data_dir, self.output_dir, self.logs_dir):
            directory.mkdir(parents=True, exist_ok=True)


@dataclass
class GridConfig:
    """Malla uniforme simétrica de rapidez u ∈ [-L, L)."""

    half_extent: float = 20.0
    points: int = 4096

    # La malla del solver crece con la truncación: L >= extent_per_string·M
    # y paso <= max_spacing (los puntos se redondean a potencia de dos)
    extent_per_string: float = 12.0
    max_spacing: float = 0.1


@dataclass
class SolverConfig:
    """Parámetros del solver de punto fijo de las ecuaciones TBA."""

    # Truncación de la jerarquía de strings
    m_trunc: int = 30
    m_trunc_low_t: int = 60
    low_t_threshold: float = 0.1

    # Amortiguamiento (se divide por dos cuando el residuo crece)
    damping: float = 0.5
    min_damping: float = 1.0 / 1024.0
    anderson_depth: int = 5

    # Fase de Newton-GMRES cuando el residuo de Anderson baja de newton_switch
    newton_switch: float = 1e-3
    newton_rtol: float = 1e-6
    newton_max_iter: int = 20

    # Tolerancias
    tolerance: float = 1e-10
    tail_tolerance: float = 1e-6
    density_tolerance: float = 1e-10
    consistency_tolerance: float = 1e-3
    low_t_consistency_tolerance: float = 1e-2

    max_iter: int = 5000

    # Ampliación de la malla para las densidades (factor entero sobre L)
    density_extent: int = 1
    density_max_iter: int = 50


@dataclass
class KernelConfig:
    """Límites de los operadores de Takahashi."""

    max_string_index: int = 400


@dataclass
class ExactConfig:
    """Diagonalización exacta densa."""

    max_sites: int = 10
    max_transfer_sites: int = 8
    imag_tolerance: float = 1e-10


@dataclass
class BetheConfig:
    """Solver de Newton para las ecuaciones de Bethe."""

    tolerance: float = 1e-12
    max_iter: int = 100
    collision_guard: float = 1e-8


@dataclass
class SweepConfig:
    """Plan de barrido de temperaturas."""

    J: float = -1.0
    tmin: float = 0.05
    tmax: float = 4.0
    steps: int = 20
    # Lista explícita; si no está vacía tiene prioridad sobre el rango
    temperatures: List[float] = field(default_factory=list)


@dataclass
class OutputConfig:
    """Formato de los resultados."""

    path: Optional[str] = None
    format: str = "csv"
    precision: int = 12

    SUPPORTED_FORMATS = ("csv", "json", "xlsx")


@dataclass
class LoggingConfig:
    """Configuración del sistema de logging."""

    # Nivel de log
    level: str = "INFO"

    # Formato
    format: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
    date_format: str = "%Y-%m-%d %H:%M:%S"

    # Archivos de log
    log_to_file: bool = False
    log_to_console: bool = True
    log_filename: str = "osptba.log"
    max_file_size_mb: int = 10
    backup_count: int = 5

    separate_error_log: bool = True
    error_log_filename: str = "osptba_errors.log"


def _is_power_of_two(value: int) -> bool:
    return isinstance(value, int) and value > 0 and (value & (value - 1)) == 0


@dataclass
class RunConfig:
    """
    Configuración completa de una ejecución numérica.

    Agrupa malla, solver, núcleos, diagonalización, Bethe, barrido y salida.
    Se construye desde un JSON versionado y admite sobreescritura por flags
    (los flags ganan).
    """

    grid: GridConfig = field(default_factory=GridConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    kernels: KernelConfig = field(default_factory=KernelConfig)
    exact: ExactConfig = field(default_factory=ExactConfig)
    bethe: BetheConfig = field(default_factory=BetheConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    _SECTIONS = ("grid", "solver", "kernels", "exact", "bethe", "sweep", "output")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunConfig":
        """Crea la configuración a partir de un diccionario por secciones."""
        config = cls()
        for section, values in data.items():
            if section not in cls._SECTIONS:
                raise InvalidConfigValueError(
                    param_name=section,
                    value=values,
                    expected=f"una de las secciones {', '.join(cls._SECTIONS)}",
                )
            target = getattr(config, section)
            if not isinstance(values, dict):
                raise InvalidConfigValueError(
                    param_name=section, value=values, expected="un objeto JSON"
                )
            for key, value in values.items():
                if not hasattr(target, key):
                    raise InvalidConfigValueError(
                        param_name=f"{section}.{key}",
                        value=value,
                        expected="un parámetro conocido",
                    )
                setattr(target, key, value)
        config.validate()
        return config

    @classmethod
    def from_file(cls, filepath: Path) -> "RunConfig":
        """Carga la configuración desde un archivo JSON."""
        path = Path(filepath)
        if not path.exists():
            raise MissingConfigError(str(path))
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigurationError(
                f"JSON inválido en {path}: {e}", details={"filepath": str(path)}
            )
        return cls.from_dict(data)

    def with_overrides(self, **overrides: Any) -> "RunConfig":
        """
        Devuelve una copia con parámetros sobreescritos.

        Las claves usan la notación ``seccion__parametro`` (por ejemplo
        ``sweep__J``); los valores ``None`` se ignoran.
        """
        data = self.to_dict()
        for key, value in overrides.items():
            if value is None:
                continue
            section, _, name = key.partition("__")
            if section not in data or name not in data[section]:
                raise InvalidConfigValueError(
                    param_name=key, value=value, expected="seccion__parametro"
                )
            data[section][name] = value
        return RunConfig.from_dict(data)

    def to_dict(self) -> Dict[str, Any]:
        """Convierte la configuración a diccionario serializable."""
        return {section: asdict(getattr(self, section)) for section in self._SECTIONS}

    def validate(self) -> None:
        """Valida los invariantes de la configuración."""
        if not _is_power_of_two(self.grid.points):
            raise InvalidConfigValueError(
                "grid.points", self.grid.points, "una potencia de dos"
            )
        if not self.grid.half_extent > 0:
            raise InvalidConfigValueError(
                "grid.half_extent", self.grid.half_extent, "un real positivo"
            )
        for name in ("extent_per_string", "max_spacing"):
            value = getattr(self.grid, name)
            if not value > 0:
                raise InvalidConfigValueError(f"grid.{name}", value, "un real positivo")
        for name in ("m_trunc", "m_trunc_low_t"):
            value = getattr(self.solver, name)
            if not isinstance(value, int) or value < 2:
                raise InvalidConfigValueError(f"solver.{name}", value, "un entero >= 2")
        if not 0.0 < self.solver.damping <= 1.0:
            raise InvalidConfigValueError(
                "solver.damping", self.solver.damping, "un valor en (0, 1]"
            )
        if not _is_power_of_two(self.solver.density_extent):
            raise InvalidConfigValueError(
                "solver.density_extent", self.solver.density_extent, "una potencia de dos"
            )
        if not self.solver.tolerance > 0:
            raise InvalidConfigValueError(
                "solver.tolerance", self.solver.tolerance, "un real positivo"
            )
        if not 0.0 < self.solver.newton_rtol < 1.0:
            raise InvalidConfigValueError(
                "solver.newton_rtol", self.solver.newton_rtol, "un valor en (0, 1)"
            )
        if self.sweep.temperatures:
            if any(t <= 0 for t in self.sweep.temperatures):
                raise InvalidConfigValueError(
                    "sweep.temperatures", self.sweep.temperatures, "temperaturas > 0"
                )
        else:
            if self.sweep.tmin <= 0 or self.sweep.tmax < self.sweep.tmin:
                raise InvalidConfigValueError(
                    "sweep.tmin/tmax",
                    (self.sweep.tmin, self.sweep.tmax),
                    "0 < tmin <= tmax",
                )
            if not isinstance(self.sweep.steps, int) or self.sweep.steps < 1:
                raise InvalidConfigValueError("sweep.steps", self.sweep.steps, "un entero >= 1")
        if self.output.format not in OutputConfig.SUPPORTED_FORMATS:
            raise InvalidConfigValueError(
                "output.format",
                self.output.format,
                ", ".join(OutputConfig.SUPPORTED_FORMATS),
            )

    def temperature_list(self) -> List[float]:
        """Expande el plan de temperaturas (lista explícita o rango lineal)."""
        if self.sweep.temperatures:
            return [float(t) for t in self.sweep.temperatures]
        if self.sweep.steps == 1:
            return [float(self.sweep.tmin)]
        span = self.sweep.tmax - self.sweep.tmin
        return [
            float(self.sweep.tmin + span * i / (self.sweep.steps - 1))
            for i in range(self.sweep.steps)
        ]

    def m_trunc_for(self, temperature: float) -> int:
        """Nivel de truncación para una temperatura dada."""
        if temperature < self.solver.low_t_threshold:
            return max(self.solver.m_trunc, self.solver.m_trunc_low_t)
        return self.solver.m_trunc

    def with_m_trunc(self, m_trunc: int) -> "RunConfig":
        """Copia con truncación fija para todas las temperaturas."""
        solver = replace(self.solver, m_trunc=m_trunc, m_trunc_low_t=m_trunc)
        return replace(self, solver=solver)


def max_workers_from_env(default: int) -> int:
    """Lee el límite de procesos de ``OSPTBA_MAX_WORKERS``."""
    raw = os.environ.get(MAX_WORKERS_ENV)
    if raw is None or raw.strip() == "":
        return default
    try:
        value = int(raw)
    except ValueError:
        raise InvalidConfigValueError(MAX_WORKERS_ENV, raw, "un entero positivo")
    if value < 1:
        raise InvalidConfigValueError(MAX_WORKERS_ENV, raw, "un entero positivo")
    return value


class Settings:
    """
    Clase principal de configuración del sistema.

    Implementa el patrón Singleton para asegurar una única instancia
    de configuración en todo el sistema.
    """

    _instance: Optional['Settings'] = None

    def __new__(cls) -> 'Settings':
        if cls._instance is None:
            cls._instance = super().__new__(cls)
            cls._instance._initialized = False
        return cls._instance

    def __init__(self):
        if self._initialized:
            return

        self.paths = PathsConfig()
        self.logging = LoggingConfig()
        self.run = RunConfig()

        # Cargar configuración desde archivo si existe
        self._load_config_file()

        self._initialized = True

    def _load_config_file(self) -> None:
        """Carga configuración desde ``config.json`` en la raíz si existe."""
        config_file = self.paths.base_dir / "config.json"

        if config_file.exists():
            try:
                with open(config_file, 'r', encoding='utf-8') as f:
                    config_data = json.load(f)
                self._apply_config(config_data)
            except (json.JSONDecodeError, IOError, ConfigurationError):
                # El logger aún no está configurado; se usan los valores por defecto
                pass

    def _apply_config(self, config_data: Dict[str, Any]) -> None:
        """Aplica configuración desde un diccionario."""
        if "logging" in config_data:
            for key, value in config_data["logging"].items():
                if hasattr(self.logging, key):
                    setattr(self.logging, key, value)

        run_sections = {k: v for k, v in config_data.items() if k in RunConfig._SECTIONS}
        if run_sections:
            self.run = RunConfig.from_dict(run_sections)

    def save_config(self, filepath: Optional[Path] = None) -> None:
        """Guarda la configuración actual a un archivo JSON."""
        if filepath is None:
            filepath = self.paths.base_dir / "config.json"

        config_data = self.run.to_dict()
        config_data["logging"] = {
            "level": self.logging.level,
            "log_to_file": self.logging.log_to_file,
            "log_to_console": self.logging.log_to_console,
        }

        with open(filepath, 'w', encoding='utf-8') as f:
            json.dump(config_data, f, indent=2, ensure_ascii=False)

    def reload(self) -> None:
        """Recarga la configuración desde el archivo."""
        self._initialized = False
        self.__init__()

    @classmethod
    def reset(cls) -> None:
        """Reinicia la instancia singleton."""
        cls._instance = None


def get_settings() -> Settings:
    """
    Función de conveniencia para obtener la instancia de configuración.

    Returns:
        Settings: Instancia única de configuración del sistema.

    Example:
        >>> settings = get_settings()
        >>> settings.run.grid.points
        4096
    """
    return Settings()


# Constantes globales del sistema
APP_NAME = "OSP-TBA"
APP_VERSION = "0.1.0"
APP_DESCRIPTION = "Energía libre de la cadena integrable osp(1|2) vía TBA"
