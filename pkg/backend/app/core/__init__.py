"""
Módulo Core - Componentes centrales: excepciones, logging y trazabilidad.
"""

from .exceptions import (
    OspTbaError,
    UsageError,
    NumericalError,
    ConfigurationError,
    PoleError,
    SizeGuardError,
    UnconvergedStateError,
)

__all__ = [
    'OspTbaError',
    'UsageError',
    'NumericalError',
    'ConfigurationError',
    'PoleError',
    'SizeGuardError',
    'UnconvergedStateError',
]
