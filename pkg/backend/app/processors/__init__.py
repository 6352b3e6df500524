"""
Módulo de Procesamiento de Resultados.

Contiene las clases para exportar las tablas del barrido de temperaturas,
la comparación con diagonalización exacta y los estados de Bethe.
"""

from .results_exporter import ResultsExporter, SUPPORTED_FORMATS, COMPARISON_COLUMNS

__all__ = [
    'ResultsExporter',
    'SUPPORTED_FORMATS',
    'COMPARISON_COLUMNS',
]
