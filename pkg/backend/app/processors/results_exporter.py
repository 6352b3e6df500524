"""
Exportador de resultados numéricos a CSV, JSON y Excel.

Las tablas del barrido (T, J, f, e, s, iterations, residual, M_trunc) y de
la comparación con diagonalización exacta (T, f_exact, f_tba, difference,
y las filas exactas N, J, T, f, e, s) se escriben con cabecera y orden de
columnas fijos, finales de línea LF, UTF-8 y 12 cifras significativas, de
modo que dos ejecuciones con la misma configuración producen archivos
idénticos byte a byte.
"""

import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

import pandas as pd

from app.config.settings import OutputConfig
from app.core.exceptions import FileWriteError, UnsupportedFormatError
from app.physics.models import ThermoRecord
from app.utils.file_utils import FileUtils

logger = logging.getLogger(__name__)

SUPPORTED_FORMATS = OutputConfig.SUPPORTED_FORMATS
COMPARISON_COLUMNS = ("T", "f_exact", "f_tba", "difference")
EXACT_COLUMNS = ("N", "J", "T", "f", "e", "s")


def _round_value(value: Any, precision: int) -> Any:
    """Redondea floats a ``precision`` cifras significativas (NaN → None)."""
    if isinstance(value, bool) or not isinstance(value, float):
        return value
    if not math.isfinite(value):
        return None
    return float(f"{value:.{precision}g}")


def _round_nested(data: Any, precision: int) -> Any:
    if isinstance(data, dict):
        return {key: _round_nested(value, precision) for key, value in data.items()}
    if isinstance(data, (list, tuple)):
        return [_round_nested(value, precision) for value in data]
    return _round_value(data, precision)


class ResultsExporter:
    """
    Escritura de tablas de resultados.

    Attributes:
        precision: Cifras significativas de los valores en coma flotante
    """

    def __init__(self, precision: int = 12):
        self.precision = precision

    @property
    def float_format(self) -> str:
        return f"%.{self.precision}g"

    # -------------------------------------------------------------------------
    # Construcción de tablas
    # -------------------------------------------------------------------------

    @staticmethod
    def records_to_frame(records: Iterable[ThermoRecord]) -> pd.DataFrame:
        """DataFrame con las columnas fijas del barrido, en el orden de entrada."""
        rows = [record.to_row() for record in records]
        frame = pd.DataFrame(rows, columns=list(ThermoRecord.COLUMNS))
        return frame.astype({"iterations": "int64", "M_trunc": "int64"})

    @staticmethod
    def comparison_frame(rows: Sequence[Dict[str, float]]) -> pd.DataFrame:
        return pd.DataFrame(list(rows), columns=list(COMPARISON_COLUMNS))

    @staticmethod
    def exact_frame(rows: Sequence[Dict[str, float]]) -> pd.DataFrame:
        """Termodinámica exacta de la cadena finita: (N, J, T, f, e, s)."""
        frame = pd.DataFrame(list(rows), columns=list(EXACT_COLUMNS))
        return frame.astype({"N": "int64"})

    # -------------------------------------------------------------------------
    # Escritura
    # -------------------------------------------------------------------------

    def write_frame(self, frame: pd.DataFrame, filepath: Union[str, Path], fmt: Optional[str] = None) -> Path:
        """
        Escribe un DataFrame en el formato indicado (o deducido de la extensión).

        Raises:
            UnsupportedFormatError: Formato desconocido
            FileWriteError: Error de E/S
        """
        path = FileUtils.ensure_parent(filepath)
        fmt = (fmt or path.suffix.lstrip(".") or "csv").lower()
        if fmt not in SUPPORTED_FORMATS:
            raise UnsupportedFormatError(fmt, SUPPORTED_FORMATS)

        try:
            if fmt == "csv":
                frame.to_csv(
                    path,
                    index=False,
                    float_format=self.float_format,
                    na_rep="nan",
                    lineterminator="\n",
                    encoding="utf-8",
                )
            elif fmt == "json":
                records = _round_nested(frame.to_dict(orient="records"), self.precision)
                self.write_json(records, path)
            else:
                with pd.ExcelWriter(path, engine="xlsxwriter") as writer:
                    frame.to_excel(writer, index=False, sheet_name="results", float_format=self.float_format)
        except OSError as e:
            raise FileWriteError(filepath=str(path), reason=str(e))

        logger.info(f"Resultados escritos en {path} ({len(frame)} filas, {fmt})")
        return path

    def write_json(self, data: Any, filepath: Union[str, Path]) -> Path:
        """JSON indentado con floats redondeados; NaN se escribe como null."""
        payload = json.dumps(_round_nested(data, self.precision), indent=2, ensure_ascii=False)
        return FileUtils.write_text_file(filepath, payload + "\n")

    def export_sweep(
        self,
        records: Sequence[ThermoRecord],
        filepath: Union[str, Path],
        fmt: Optional[str] = None,
    ) -> Path:
        return self.write_frame(self.records_to_frame(records), filepath, fmt)

    def export_comparison(
        self,
        rows: Sequence[Dict[str, float]],
        filepath: Union[str, Path],
        fmt: Optional[str] = None,
    ) -> Path:
        return self.write_frame(self.comparison_frame(rows), filepath, fmt)

    def export_exact(
        self,
        rows: Sequence[Dict[str, float]],
        filepath: Union[str, Path],
        fmt: Optional[str] = None,
    ) -> Path:
        return self.write_frame(self.exact_frame(rows), filepath, fmt)

    def export_bethe(self, records: List[Dict[str, Any]], filepath: Union[str, Path]) -> Path:
        """Estados de Bethe como lista JSON de registros anidados."""
        path = self.write_json(records, filepath)
        logger.info(f"{len(records)} estados de Bethe escritos en {path}")
        return path

    def render(self, frame: pd.DataFrame) -> str:
        """Tabla de texto para la consola."""
        return frame.to_string(index=False, float_format=lambda x: f"{x:.{self.precision}g}")

    @staticmethod
    def file_hash(filepath: Union[str, Path]) -> str:
        return FileUtils.compute_file_hash(filepath)
