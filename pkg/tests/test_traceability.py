"""
Tests para el registro de ejecuciones (SQLite).
"""

from app.core import traceability


class TestRegistry:
    """Tests para init_db, log_run, update_run y get_history."""

    def test_init_creates_database(self, tmp_path):
        path = traceability.init_db(tmp_path / "reg" / "runs.db")
        assert path.exists()

    def test_default_path_follows_settings(self, isolated_paths):
        path = traceability.init_db()
        assert path == isolated_paths.registry_path
        assert path.exists()

    def test_log_and_update(self, tmp_path):
        db = tmp_path / "runs.db"
        run_id = traceability.log_run("sweep", "abc123", db_path=db)
        assert traceability.update_run(
            run_id, "ok", output_path="out.csv", rows_written=20, failures=0, db_path=db
        )

        run = traceability.get_history(db_path=db)[0]
        assert run["command"] == "sweep"
        assert run["config_hash"] == "abc123"
        assert run["status"] == "ok"
        assert run["rows_written"] == 20
        assert run["finished_at"] is not None

    def test_update_keeps_previous_fields(self, tmp_path):
        db = tmp_path / "runs.db"
        run_id = traceability.log_run("compare", db_path=db)
        traceability.update_run(run_id, "running", rows_written=3, db_path=db)
        traceability.update_run(run_id, "error", error_message="N demasiado grande", db_path=db)

        run = traceability.get_history(db_path=db)[0]
        assert run["rows_written"] == 3
        assert run["error_message"] == "N demasiado grande"

    def test_update_unknown_id(self, tmp_path):
        db = tmp_path / "runs.db"
        traceability.init_db(db)
        assert not traceability.update_run(999, "ok", db_path=db)

    def test_history_is_newest_first_and_limited(self, tmp_path):
        db = tmp_path / "runs.db"
        for command in ("sweep", "validate", "bethe"):
            traceability.log_run(command, db_path=db)
        history = traceability.get_history(limit=2, db_path=db)
        assert [run["command"] for run in history] == ["bethe", "validate"]
