"""
Módulo de Configuración - Gestión centralizada de parámetros del sistema.
"""

from .settings import Settings, RunConfig, get_settings

__all__ = ['Settings', 'RunConfig', 'get_settings']
