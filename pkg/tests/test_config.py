"""
Tests para el módulo de configuración.
"""

import json

import pytest

from app.config.settings import (
    GridConfig,
    LoggingConfig,
    PathsConfig,
    RunConfig,
    Settings,
    SolverConfig,
    get_settings,
    max_workers_from_env,
)
from app.core.exceptions import (
    ConfigurationError,
    InvalidConfigValueError,
    MissingConfigError,
)


class TestPathsConfig:
    """Tests para PathsConfig."""

    def test_default_paths(self):
        """Verifica que las rutas derivadas cuelgan de base_dir."""
        config = PathsConfig()

        assert config.data_dir == config.base_dir / "data"
        assert config.output_dir == config.data_dir / "output"
        assert config.logs_dir == config.base_dir / "logs"
        assert config.registry_path == config.data_dir / "runs.db"

    def test_ensure_directories(self, tmp_path):
        """Verifica que ensure_directories crea los directorios."""
        config = PathsConfig(base_dir=tmp_path)
        config.ensure_directories()

        assert config.data_dir.exists()
        assert config.output_dir.exists()
        assert config.logs_dir.exists()


class TestDefaults:
    """Valores por defecto de las secciones numéricas."""

    def test_grid(self):
        grid = GridConfig()
        assert grid.half_extent == 20.0
        assert grid.points == 4096

    def test_solver(self):
        solver = SolverConfig()
        assert solver.m_trunc == 30
        assert solver.m_trunc_low_t == 60
        assert solver.damping == 0.5
        assert solver.tolerance == 1e-10

    def test_logging(self):
        config = LoggingConfig()
        assert config.level == "INFO"
        assert config.log_to_console is True
        assert config.log_to_file is False


class TestRunConfig:
    """Tests para RunConfig."""

    def test_from_dict_sections(self):
        config = RunConfig.from_dict({"grid": {"points": 2048}, "sweep": {"J": 1.0}})
        assert config.grid.points == 2048
        assert config.sweep.J == 1.0
        assert config.solver.m_trunc == 30

    def test_unknown_section(self):
        with pytest.raises(InvalidConfigValueError):
            RunConfig.from_dict({"mesh": {"points": 2048}})

    def test_unknown_parameter(self):
        with pytest.raises(InvalidConfigValueError):
            RunConfig.from_dict({"grid": {"spacing": 0.01}})

    @pytest.mark.parametrize("data", [
        {"grid": {"points": 1000}},
        {"grid": {"half_extent": 0.0}},
        {"solver": {"m_trunc": 1}},
        {"solver": {"damping": 0.0}},
        {"solver": {"density_extent": 3}},
        {"sweep": {"tmin": 2.0, "tmax": 1.0}},
        {"sweep": {"temperatures": [1.0, -0.5]}},
        {"output": {"format": "parquet"}},
    ])
    def test_invalid_values(self, data):
        with pytest.raises(InvalidConfigValueError):
            RunConfig.from_dict(data)

    def test_from_file(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"solver": {"m_trunc": 20}}), encoding="utf-8")
        assert RunConfig.from_file(path).solver.m_trunc == 20

    def test_from_missing_file(self, tmp_path):
        with pytest.raises(MissingConfigError):
            RunConfig.from_file(tmp_path / "nope.json")

    def test_from_malformed_file(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{grid:", encoding="utf-8")
        with pytest.raises(ConfigurationError):
            RunConfig.from_file(path)

    def test_overrides_win_and_none_is_ignored(self):
        base = RunConfig.from_dict({"sweep": {"J": -1.0, "steps": 5}})
        config = base.with_overrides(sweep__J=1.0, sweep__steps=None)
        assert config.sweep.J == 1.0
        assert config.sweep.steps == 5
        assert base.sweep.J == -1.0

    def test_bad_override_key(self):
        with pytest.raises(InvalidConfigValueError):
            RunConfig().with_overrides(sweep_J=1.0)

    def test_roundtrip_through_dict(self):
        config = RunConfig.from_dict({"bethe": {"max_iter": 50}})
        assert RunConfig.from_dict(config.to_dict()).to_dict() == config.to_dict()

    def test_temperature_range(self):
        config = RunConfig.from_dict({"sweep": {"tmin": 1.0, "tmax": 2.0, "steps": 3}})
        assert config.temperature_list() == pytest.approx([1.0, 1.5, 2.0])

    def test_single_step(self):
        config = RunConfig.from_dict({"sweep": {"tmin": 0.7, "tmax": 2.0, "steps": 1}})
        assert config.temperature_list() == [0.7]

    def test_explicit_list_wins(self):
        config = RunConfig.from_dict({"sweep": {"temperatures": [3.0, 0.5]}})
        assert config.temperature_list() == [3.0, 0.5]

    def test_low_temperature_truncation(self):
        config = RunConfig()
        assert config.m_trunc_for(0.05) == 60
        assert config.m_trunc_for(1.0) == 30
        fixed = config.with_m_trunc(45)
        assert fixed.m_trunc_for(0.05) == fixed.m_trunc_for(1.0) == 45


class TestMaxWorkers:
    """Tests para OSPTBA_MAX_WORKERS."""

    def test_default_when_unset(self, monkeypatch):
        monkeypatch.delenv("OSPTBA_MAX_WORKERS", raising=False)
        assert max_workers_from_env(6) == 6

    def test_value_from_environment(self, monkeypatch):
        monkeypatch.setenv("OSPTBA_MAX_WORKERS", "3")
        assert max_workers_from_env(6) == 3

    @pytest.mark.parametrize("raw", ["cero", "0", "-2"])
    def test_invalid_values(self, monkeypatch, raw):
        monkeypatch.setenv("OSPTBA_MAX_WORKERS", raw)
        with pytest.raises(InvalidConfigValueError):
            max_workers_from_env(6)


class TestSettings:
    """Tests para Settings."""

    def test_singleton_pattern(self):
        """Verifica que Settings es singleton."""
        assert Settings() is Settings()

    def test_get_settings_function(self):
        """Verifica que get_settings devuelve la instancia."""
        assert get_settings() is Settings()

    def test_has_all_configs(self):
        """Verifica que tiene todas las configuraciones."""
        settings = get_settings()

        assert hasattr(settings, "paths")
        assert hasattr(settings, "logging")
        assert isinstance(settings.run, RunConfig)

    def test_save_and_apply_config(self, tmp_path):
        """Verifica guardar y volver a aplicar la configuración."""
        settings = get_settings()
        filepath = tmp_path / "config.json"
        settings.save_config(filepath)

        data = json.loads(filepath.read_text(encoding="utf-8"))
        assert data["grid"]["points"] == settings.run.grid.points
        assert "logging" in data

        original = settings.run
        try:
            data["solver"]["m_trunc"] = 17
            settings._apply_config(data)
            assert settings.run.solver.m_trunc == 17
        finally:
            settings.run = original
