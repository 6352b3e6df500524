import sqlite3
from pathlib import Path
from typing import List, Dict, Any, Optional

from app.config.settings import get_settings


def _db_path(db_path: Optional[Path]) -> Path:
    return Path(db_path) if db_path is not None else get_settings().paths.registry_path


def init_db(db_path: Optional[Path] = None) -> Path:
    """Inicializa la base de datos del registro de ejecuciones."""
    path = _db_path(db_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    conn = sqlite3.connect(path)
    cursor = conn.cursor()

    cursor.execute('''
        CREATE TABLE IF NOT EXISTS runs (
            id INTEGER PRIMARY KEY AUTOINCREMENT,
            command TEXT NOT NULL,
            config_hash TEXT,
            started_at TIMESTAMP DEFAULT CURRENT_TIMESTAMP,
            finished_at TIMESTAMP,
            status TEXT NOT NULL,
            output_path TEXT,
            rows_written INTEGER,
            failures INTEGER,
            error_message TEXT
        )
    ''')

    conn.commit()
    conn.close()
    return path


def log_run(
    command: str,
    config_hash: Optional[str] = None,
    status: str = "running",
    db_path: Optional[Path] = None,
) -> int:
    """Inserta un registro de ejecución y devuelve el ID insertado."""
    path = init_db(db_path)
    conn = sqlite3.connect(path)
    cursor = conn.cursor()

    cursor.execute(
        'INSERT INTO runs (command, config_hash, status) VALUES (?, ?, ?)',
        (command, config_hash, status),
    )
    inserted_id = cursor.lastrowid

    conn.commit()
    conn.close()
    return inserted_id


def update_run(
    run_id: int,
    status: str,
    output_path: Optional[str] = None,
    rows_written: Optional[int] = None,
    failures: Optional[int] = None,
    error_message: Optional[str] = None,
    db_path: Optional[Path] = None,
) -> bool:
    """Actualiza un registro existente; los campos ``None`` conservan su valor."""
    conn = sqlite3.connect(_db_path(db_path))
    cursor = conn.cursor()

    cursor.execute(
        '''
        UPDATE runs
        SET status = ?,
            output_path = COALESCE(?, output_path),
            rows_written = COALESCE(?, rows_written),
            failures = COALESCE(?, failures),
            error_message = COALESCE(?, error_message),
            finished_at = CURRENT_TIMESTAMP
        WHERE id = ?
        ''',
        (status, output_path, rows_written, failures, error_message, run_id),
    )
    updated = cursor.rowcount > 0
    conn.commit()
    conn.close()
    return updated


def get_history(limit: int = 50, db_path: Optional[Path] = None) -> List[Dict[str, Any]]:
    """Obtiene el historial de ejecuciones, más recientes primero."""
    path = init_db(db_path)
    conn = sqlite3.connect(path)
    conn.row_factory = sqlite3.Row
    cursor = conn.cursor()

    cursor.execute('SELECT * FROM runs ORDER BY id DESC LIMIT ?', (limit,))
    history = [dict(row) for row in cursor.fetchall()]
    conn.close()
    return history
