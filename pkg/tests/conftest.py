"""
Configuración compartida de la suite.
"""

import sys
from pathlib import Path

import pytest

BACKEND_DIR = Path(__file__).parent.parent / "backend"
if str(BACKEND_DIR) not in sys.path:
    sys.path.insert(0, str(BACKEND_DIR))

from app.config.settings import RunConfig, get_settings  # noqa: E402


@pytest.fixture(autouse=True)
def isolated_paths(tmp_path, monkeypatch):
    """Registro de ejecuciones, salidas y logs dentro de ``tmp_path``."""
    paths = get_settings().paths
    monkeypatch.setattr(paths, "data_dir", tmp_path / "data")
    monkeypatch.setattr(paths, "output_dir", tmp_path / "data" / "output")
    monkeypatch.setattr(paths, "logs_dir", tmp_path / "logs")
    return paths


@pytest.fixture
def small_config():
    """Malla reducida para soluciones TBA rápidas."""
    return RunConfig.from_dict({
        "grid": {"half_extent": 20.0, "points": 1024},
        "solver": {"m_trunc": 12, "m_trunc_low_t": 12, "consistency_tolerance": 1e-2},
    })
