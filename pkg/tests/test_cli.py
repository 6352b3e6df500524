"""
Tests de la interfaz de línea de comandos y de sus códigos de salida.
"""

import json

import pytest

from app import cli
from app.config.settings import RunConfig
from app.core.traceability import get_history
from app.engine import checks
from app.utils.file_utils import FileUtils


@pytest.fixture
def config_file(tmp_path):
    """Configuración de malla reducida para barridos rápidos."""
    path = tmp_path / "small.json"
    path.write_text(json.dumps({
        "grid": {"half_extent": 20.0, "points": 1024},
        "solver": {"m_trunc": 12, "m_trunc_low_t": 12, "consistency_tolerance": 1e-2},
        "sweep": {"J": -1.0},
    }), encoding="utf-8")
    return path


class TestParser:
    """Tests del parser de argumentos."""

    def test_subcommand_is_required(self):
        with pytest.raises(SystemExit) as exc:
            cli.main([])
        assert exc.value.code == 2

    def test_unknown_format_is_rejected(self):
        with pytest.raises(SystemExit) as exc:
            cli.main(["sweep", "--format", "parquet"])
        assert exc.value.code == 2

    def test_format_resolution(self, tmp_path):
        config = RunConfig()
        assert cli._format_for(tmp_path / "a.xlsx", config, None) == "xlsx"
        assert cli._format_for(tmp_path / "a.xlsx", config, "json") == "json"
        assert cli._format_for(tmp_path / "a.dat", config, None) == "csv"

    def test_flags_override_config_file(self, config_file):
        args = cli.build_parser().parse_args(
            ["sweep", "--config", str(config_file), "--J", "1", "--tmin", "0.5",
             "--tmax", "1", "--steps", "2", "--mtrunc", "7"]
        )
        config = cli._load_config(args)
        assert config.sweep.J == 1.0
        assert config.temperature_list() == [0.5, 1.0]
        assert config.solver.m_trunc == 7
        assert config.solver.m_trunc_low_t == 7
        assert config.grid.points == 1024


class TestValidate:
    """Tests del subcomando validate."""

    def test_selected_checks_pass(self, capsys):
        code = cli.main(["validate", "--only", "brauer_identities", "high_t_recursion"])
        assert code == 0
        out = capsys.readouterr().out
        assert "brauer_identities" in out
        assert "2/2 verificaciones superadas" in out

    def test_broken_kernel_fails(self, monkeypatch):
        monkeypatch.setattr(checks, "measure_kernel_K", lambda grid: 0.1)
        assert cli.main(["validate", "--only", "kernel_K_norm"]) == 1
        assert get_history(limit=1)[0]["status"] == "failed"

    def test_unknown_check_is_usage_error(self):
        assert cli.main(["validate", "--only", "no_such_check"]) == 2

    @pytest.mark.integration
    def test_full_battery(self):
        assert cli.main(["validate"]) == 0


class TestSweep:
    """Tests del subcomando sweep."""

    def test_empty_temperature_list(self):
        assert cli.main(["sweep", "--temps", ""]) == 2

    def test_missing_config_file(self, tmp_path):
        assert cli.main(["sweep", "--config", str(tmp_path / "nope.json")]) == 2

    def test_csv_is_deterministic(self, config_file, tmp_path):
        first, second = tmp_path / "a.csv", tmp_path / "b.csv"
        for path in (first, second):
            code = cli.main([
                "sweep", "--config", str(config_file), "--temps", "1,2",
                "--out", str(path), "--workers", "1",
            ])
            assert code == 0

        lines = first.read_text(encoding="utf-8").split("\n")
        assert lines[0] == "T,J,f,e,s,iterations,residual,M_trunc"
        assert len([line for line in lines if line]) == 3
        assert b"\r\n" not in first.read_bytes()
        assert FileUtils.compute_file_hash(first) == FileUtils.compute_file_hash(second)

    def test_run_is_registered(self, config_file, tmp_path):
        path = tmp_path / "r.json"
        cli.main(["sweep", "--config", str(config_file), "--temps", "2",
                  "--out", str(path), "--workers", "1"])
        run = get_history(limit=1)[0]
        assert run["command"] == "sweep"
        assert run["status"] == "ok"
        assert run["rows_written"] == 1
        assert run["output_path"] == str(path)
        rows = json.loads(path.read_text(encoding="utf-8"))
        assert rows[0]["T"] == 2.0


class TestCompare:
    """Tests del subcomando compare."""

    def test_size_guard(self):
        assert cli.main(["compare", "--N", "11", "--temps", "1"]) == 2

    def test_too_small_chain(self):
        assert cli.main(["compare", "--N", "1", "--temps", "1"]) == 2

    def test_table(self, config_file, tmp_path):
        path = tmp_path / "cmp.csv"
        code = cli.main([
            "compare", "--config", str(config_file), "--N", "4", "--temps", "2",
            "--out", str(path), "--workers", "1",
        ])
        assert code == 0
        header, row = path.read_text(encoding="utf-8").splitlines()[:2]
        assert header == "T,f_exact,f_tba,difference"
        T, f_exact, f_tba, difference = (float(x) for x in row.split(","))
        assert difference == pytest.approx(f_tba - f_exact, abs=1e-10)

        exact_lines = (tmp_path / "cmp_exact.csv").read_text(encoding="utf-8").splitlines()
        assert exact_lines[0] == "N,J,T,f,e,s"
        N, J, T_exact, f, e, s = (float(x) for x in exact_lines[1].split(","))
        assert (N, T_exact) == (4, T)
        assert f == pytest.approx(f_exact, abs=1e-10)
        assert e - T * s == pytest.approx(f, abs=1e-9)


class TestBethe:
    """Tests del subcomando bethe."""

    def test_pseudovacuum(self, tmp_path):
        path = tmp_path / "n0.json"
        assert cli.main(["bethe", "--N", "4", "--sector", "0", "--J", "1", "--out", str(path)]) == 0
        states = json.loads(path.read_text(encoding="utf-8"))
        assert len(states) == 1
        assert states[0]["energy"] == pytest.approx(-4.0)
        assert states[0]["spectrum_match"] < 1e-8

    def test_single_root_sector(self, tmp_path):
        path = tmp_path / "n1.json"
        assert cli.main(["bethe", "--N", "4", "--sector", "1", "--J", "1", "--out", str(path)]) == 0
        states = json.loads(path.read_text(encoding="utf-8"))
        assert len(states) == 3
        energies = sorted(state["energy"] for state in states)
        assert energies == pytest.approx([-2.0, -2.0, 0.0], abs=1e-10)
        for state in states:
            assert state["transfer_match"] < 1e-8
            assert state["spectrum_match"] < 1e-8

    def test_explicit_seeds(self, tmp_path):
        path = tmp_path / "seeds.json"
        code = cli.main(["bethe", "--N", "4", "--sector", "1", "--seeds", "1:0.45;1:0.02",
                         "--out", str(path)])
        assert code == 0
        assert len(json.loads(path.read_text(encoding="utf-8"))) == 2

    def test_seed_count_mismatch(self):
        assert cli.main(["bethe", "--N", "4", "--sector", "2", "--seeds", "1:0.3"]) == 2

    def test_seeds_required_beyond_single_root(self):
        assert cli.main(["bethe", "--N", "4", "--sector", "2"]) == 2

    def test_sector_out_of_range(self):
        assert cli.main(["bethe", "--N", "4", "--sector", "5"]) == 2

    def test_size_guard(self):
        assert cli.main(["bethe", "--N", "9", "--sector", "0"]) == 2


class TestHistory:
    """Tests del subcomando history."""

    def test_lists_previous_runs(self, capsys):
        cli.main(["validate", "--only", "high_t_recursion"])
        capsys.readouterr()
        assert cli.main(["history", "--limit", "5"]) == 0
        out = capsys.readouterr().out
        assert "validate" in out
        assert "ok" in out

    def test_history_is_not_registered(self):
        cli.main(["history"])
        assert get_history() == []
