"""
Módulo de Física - Álgebra osp(1|2), diagonalización exacta, ecuaciones
de Bethe, núcleos integrales y solver TBA.
"""

from .models import (
    BetheState,
    DensityState,
    GradedMatrix,
    Grid,
    SampledFunction,
    SpectrumResult,
    StringConfig,
    TbaState,
    ThermoRecord,
)

__all__ = [
    'BetheState',
    'DensityState',
    'GradedMatrix',
    'Grid',
    'SampledFunction',
    'SpectrumResult',
    'StringConfig',
    'TbaState',
    'ThermoRecord',
]
