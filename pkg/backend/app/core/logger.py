"""
Sistema de Logging de OSP-TBA.

Proporciona un sistema de logging centralizado con:
- Salida a stderr con colores (stdout queda libre para tablas y datos)
- Rotación automática de archivos de log
- Log separado para errores
- Medición de tiempos de operaciones largas (solves, diagonalizaciones)
"""

import logging
import sys
import time
from pathlib import Path
from logging.handlers import RotatingFileHandler
from typing import Optional

from app.config.settings import get_settings, LoggingConfig


class ColoredFormatter(logging.Formatter):
    """Formatter con colores ANSI para terminal."""

    COLORS = {
        'DEBUG': '\033[36m',
        'INFO': '\033[32m',
        'WARNING': '\033[33m',
        'ERROR': '\033[31m',
        'CRITICAL': '\033[35m',
    }
    RESET = '\033[0m'

    def __init__(self, fmt: str, datefmt: str, use_color: bool = True):
        super().__init__(fmt=fmt, datefmt=datefmt)
        self.use_color = use_color

    def format(self, record: logging.LogRecord) -> str:
        if not self.use_color or record.levelname not in self.COLORS:
            return super().format(record)

        original_levelname = record.levelname
        record.levelname = f"{self.COLORS[original_levelname]}{original_levelname}{self.RESET}"
        try:
            return super().format(record)
        finally:
            record.levelname = original_levelname


class TBALogger:
    """
    Logger centralizado del sistema.

    Singleton: la primera instancia instala los handlers sobre el logger
    ``app``; los módulos de la librería usan ``logging.getLogger(__name__)``
    y heredan esa configuración.
    """

    ROOT_NAME = "app"

    _instance: Optional['TBALogger'] = None

    def __new__(cls) -> 'TBALogger':
        if cls._instance is None:
            cls._instance = super().__new__(cls)
            cls._instance._initialized = False
        return cls._instance

    def __init__(self):
        if self._initialized:
            return

        self.settings = get_settings()
        self._setup_logging(self.settings.logging)
        self._initialized = True

    def _setup_logging(self, config: LoggingConfig) -> None:
        """Instala los handlers según ``LoggingConfig``."""
        level = getattr(logging, config.level.upper(), logging.INFO)

        app_logger = logging.getLogger(self.ROOT_NAME)
        app_logger.setLevel(level)
        app_logger.propagate = False
        for handler in list(app_logger.handlers):
            app_logger.removeHandler(handler)
            handler.close()

        if config.log_to_console:
            console = logging.StreamHandler(sys.stderr)
            console.setLevel(level)
            console.setFormatter(ColoredFormatter(
                fmt=config.format,
                datefmt=config.date_format,
                use_color=sys.stderr.isatty(),
            ))
            app_logger.addHandler(console)

        if config.log_to_file:
            log_dir = self.settings.paths.logs_dir
            log_dir.mkdir(parents=True, exist_ok=True)
            app_logger.addHandler(
                self._create_file_handler(log_dir / config.log_filename, config, level)
            )
            if config.separate_error_log:
                app_logger.addHandler(
                    self._create_file_handler(
                        log_dir / config.error_log_filename, config, logging.ERROR
                    )
                )

    @staticmethod
    def _create_file_handler(
        filepath: Path,
        config: LoggingConfig,
        level: int
    ) -> RotatingFileHandler:
        """Crea un handler de archivo con rotación."""
        handler = RotatingFileHandler(
            filename=str(filepath),
            maxBytes=config.max_file_size_mb * 1024 * 1024,
            backupCount=config.backup_count,
            encoding='utf-8'
        )
        handler.setLevel(level)
        handler.setFormatter(logging.Formatter(fmt=config.format, datefmt=config.date_format))
        return handler

    def configure(
        self,
        level: Optional[str] = None,
        log_file: Optional[str] = None
    ) -> None:
        """
        Reconfigura el logging desde la CLI.

        Args:
            level: Nivel nuevo (``DEBUG``, ``INFO``...)
            log_file: Nombre del archivo de log dentro de ``logs_dir``
        """
        config = self.settings.logging
        if level:
            config.level = level
        if log_file:
            config.log_to_file = True
            config.log_filename = log_file
        self._setup_logging(config)

    @classmethod
    def reset(cls) -> None:
        """Reinicia la instancia del logger."""
        cls._instance = None


def get_logger(name: str) -> logging.Logger:
    """
    Función de conveniencia para obtener un logger configurado.

    Args:
        name: Nombre del logger (usar __name__)

    Returns:
        Logger configurado

    Example:
        >>> logger = get_logger(__name__)
        >>> logger.info("Barrido completado")
    """
    TBALogger()
    return logging.getLogger(name)


class LogContext:
    """
    Context manager que registra inicio, fin y duración de una operación.

    Example:
        >>> with LogContext(logger, "Solve TBA T=1.0"):
        ...     pass
    """

    def __init__(
        self,
        logger: logging.Logger,
        operation: str,
        level: int = logging.INFO
    ):
        self.logger = logger
        self.operation = operation
        self.level = level
        self.start: Optional[float] = None
        self.elapsed_ms: float = 0.0

    def __enter__(self) -> 'LogContext':
        self.start = time.perf_counter()
        self.logger.log(self.level, "Iniciando: %s", self.operation)
        return self

    def __exit__(self, exc_type, exc_val, exc_tb) -> bool:
        self.elapsed_ms = (time.perf_counter() - self.start) * 1000

        if exc_type is not None:
            self.logger.error(
                "Error en %s: %s (tiempo: %.2fms)", self.operation, exc_val, self.elapsed_ms
            )
            return False

        self.logger.log(
            self.level, "Completado: %s (tiempo: %.2fms)", self.operation, self.elapsed_ms
        )
        return False
