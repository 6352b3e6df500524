"""
Interfaz de línea de comandos de OSP-TBA.

Subcomandos:
    sweep     Barrido de temperaturas TBA → CSV/JSON/XLSX
    validate  Tabla de verificaciones de invariantes
    compare   Energía libre TBA frente a diagonalización exacta (N sitios)
    bethe     Resolución de las ecuaciones de Bethe desde semillas de strings
    history   Últimas ejecuciones del registro

Códigos de salida: 0 éxito, 1 fallo numérico, 2 error de uso.
"""

import argparse
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import scipy.linalg

from app.config.settings import RunConfig, get_settings
from app.core.exceptions import (
    FileProcessingError,
    InvalidParameterError,
    NumericalError,
    SizeGuardError,
    UsageError,
)
from app.core.logger import TBALogger
from app.core.traceability import get_history, log_run, update_run
from app.engine.checks import CheckEngine
from app.physics import algebra, bethe, exact, tba
from app.physics.models import BetheState, Grid, StringConfig
from app.processors.results_exporter import SUPPORTED_FORMATS, ResultsExporter
from app.utils.file_utils import FileUtils
from app.utils.validators import DataValidator

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_NUMERIC = 1
EXIT_USAGE = 2

# Desplazamiento de las semillas por defecto del sector n = 1
SINGLE_ROOT_SEED_SHIFT = 0.05
# Punto espectral en el que se compara la DVF con T(u)
TRANSFER_POINT = 0.3


@dataclass
class CommandResult:
    """Resultado de un subcomando para el registro de ejecuciones."""
    exit_code: int
    output_path: Optional[Path] = None
    rows: int = 0
    failures: int = 0


# =============================================================================
# Configuración
# =============================================================================

def _load_config(args: argparse.Namespace) -> RunConfig:
    """Configuración base (archivo o settings) con los flags aplicados encima."""
    config_path = getattr(args, "config", None)
    config = RunConfig.from_file(Path(config_path)) if config_path else get_settings().run

    range_given = any(
        getattr(args, name, None) is not None for name in ("tmin", "tmax", "steps")
    )
    overrides: Dict[str, Any] = {
        "sweep__J": getattr(args, "J", None),
        "sweep__tmin": getattr(args, "tmin", None),
        "sweep__tmax": getattr(args, "tmax", None),
        "sweep__steps": getattr(args, "steps", None),
        "output__path": getattr(args, "out", None),
        "output__format": getattr(args, "format", None),
    }
    temps = getattr(args, "temps", None)
    if temps is not None:
        overrides["sweep__temperatures"] = DataValidator.parse_temperatures(temps)
    elif range_given:
        overrides["sweep__temperatures"] = []
    config = config.with_overrides(**overrides)

    m_trunc = getattr(args, "mtrunc", None)
    if m_trunc is not None:
        config = config.with_m_trunc(m_trunc)
        config.validate()
    return config


def _output_path(config: RunConfig, default_name: str) -> Path:
    if config.output.path:
        return Path(config.output.path)
    return get_settings().paths.output_dir / default_name


def _format_for(path: Path, config: RunConfig, explicit: Optional[str]) -> str:
    """El flag gana; si no, la extensión del archivo; si no, la configuración."""
    if explicit:
        return explicit
    suffix = path.suffix.lstrip(".").lower()
    return suffix if suffix in SUPPORTED_FORMATS else config.output.format


# =============================================================================
# Subcomandos
# =============================================================================

def cmd_sweep(args: argparse.Namespace) -> CommandResult:
    """Barrido de temperaturas; las filas fallidas se conservan con NaN."""
    config = _load_config(args)
    temps = config.temperature_list()
    if not temps:
        raise InvalidParameterError("temperatures", temps, "al menos una temperatura")

    records = tba.sweep(config, max_workers=args.workers)
    failures = sum(1 for record in records if record.failed)

    path = _output_path(config, f"sweep.{config.output.format}")
    exporter = ResultsExporter(precision=config.output.precision)
    exporter.export_sweep(records, path, _format_for(path, config, args.format))

    print(exporter.render(exporter.records_to_frame(records)))
    print(f"\n{len(records)} filas escritas en {path} ({failures} fallidas)")
    return CommandResult(
        exit_code=EXIT_NUMERIC if failures else EXIT_OK,
        output_path=path,
        rows=len(records),
        failures=failures,
    )


def cmd_validate(args: argparse.Namespace) -> CommandResult:
    """Ejecuta la batería de invariantes e imprime la tabla."""
    config = _load_config(args)
    engine = CheckEngine(Grid(config.grid.half_extent, config.grid.points))
    report = engine.run(args.only or None)
    print(report.render())
    return CommandResult(
        exit_code=EXIT_OK if report.passed else EXIT_NUMERIC,
        rows=len(report.results),
        failures=len(report.failures),
    )


def cmd_compare(args: argparse.Namespace) -> CommandResult:
    """
    Tabla (T, f_exact, f_tba, difference) para una cadena de N sitios.

    Las filas exactas completas (N, J, T, f, e, s) se escriben junto a la
    tabla, en un archivo con sufijo ``_exact``.
    """
    config = _load_config(args)
    N = args.N
    if N < 2:
        raise InvalidParameterError("N", N, "N ≥ 2")
    if N > config.exact.max_sites:
        raise SizeGuardError("N", N, config.exact.max_sites)

    J = config.sweep.J
    temps = config.temperature_list()
    records = tba.sweep(config, J=J, temperatures=temps, max_workers=args.workers)

    exact_rows = [exact.thermodynamics_row(N, J, T) for T in temps]
    rows: List[Dict[str, float]] = [
        {"T": T, "f_exact": row["f"], "f_tba": record.f, "difference": record.f - row["f"]}
        for T, row, record in zip(temps, exact_rows, records)
    ]
    failures = sum(1 for record in records if record.failed)

    path = _output_path(config, f"compare_N{N}.{config.output.format}")
    exporter = ResultsExporter(precision=config.output.precision)
    fmt = _format_for(path, config, args.format)
    exporter.export_comparison(rows, path, fmt)
    exporter.export_exact(exact_rows, path.with_name(f"{path.stem}_exact{path.suffix}"), fmt)
    print(exporter.render(exporter.comparison_frame(rows)))
    return CommandResult(
        exit_code=EXIT_NUMERIC if failures else EXIT_OK,
        output_path=path,
        rows=len(rows),
        failures=failures,
    )


def _bethe_seeds(N: int, n: int, spec: Optional[str], guard: float) -> List[BetheState]:
    """Semillas del subcomando ``bethe``."""
    if spec:
        seeds = []
        for pairs in DataValidator.parse_seeds(spec):
            strings = StringConfig.from_pairs(pairs, N)
            if strings.total_roots != n:
                raise InvalidParameterError(
                    "seeds", pairs, f"semillas con {n} raíces en total"
                )
            seeds.append(bethe.seed_from_strings(strings, collision_guard=guard))
        return seeds
    if n == 1:
        return [
            BetheState(N, (root + SINGLE_ROOT_SEED_SHIFT,), collision_guard=guard)
            for root in bethe.closed_form_single_roots(N)
        ]
    raise InvalidParameterError("seeds", spec, f"semillas explícitas para n = {n}")


def bethe_record(state: BetheState, J: float, transfer: np.ndarray, energies: np.ndarray) -> Dict[str, Any]:
    """Registro JSON de un estado resuelto con su comparación espectral."""
    energy = bethe.energy_from_roots(state, J)
    eigenvalue = bethe.dvf_transfer_eigenvalue(TRANSFER_POINT, state)
    record = state.to_dict()
    record.update({
        "energy": energy,
        "transfer_match": float(np.min(np.abs(transfer - eigenvalue))),
        "spectrum_match": float(np.min(np.abs(energies - energy))),
    })
    return record


def cmd_bethe(args: argparse.Namespace) -> CommandResult:
    """Resuelve el sector n de la cadena de N sitios y compara con el espectro."""
    config = _load_config(args)
    N, n = args.N, args.sector
    if N < 1:
        raise InvalidParameterError("N", N, "N ≥ 1")
    if N > config.exact.max_transfer_sites:
        raise SizeGuardError("N", N, config.exact.max_transfer_sites)
    DataValidator.require_int_range("sector", n, 0, N)

    guard = config.bethe.collision_guard
    if n == 0:
        states = [BetheState(N, residual=0.0, collision_guard=guard)]
        failures = 0
    else:
        seeds = _bethe_seeds(N, n, args.seeds, guard)
        failed: List[BetheState] = []
        states = bethe.solve_seeds(
            N,
            seeds,
            tol=config.bethe.tolerance,
            max_iter=config.bethe.max_iter,
            on_failure=lambda seed, exc: failed.append(seed),
        )
        failures = len(failed)

    J = config.sweep.J
    transfer = scipy.linalg.eigvals(algebra.build_transfer_matrix(TRANSFER_POINT, N).data)
    energies = exact.spectrum(N, J).eigenvalues
    records = [bethe_record(state, J, transfer, energies) for state in states]

    path = _output_path(config, f"bethe_N{N}_n{n}.json")
    ResultsExporter(precision=config.output.precision).export_bethe(records, path)
    for record in records:
        print(
            f"n={record['n']} E={record['energy']:.12g} "
            f"residuo={record['residual']} "
            f"|ΔT|={record['transfer_match']:.2e} |ΔE|={record['spectrum_match']:.2e}"
        )
    print(f"\n{len(records)} estados escritos en {path} ({failures} semillas descartadas)")
    return CommandResult(
        exit_code=EXIT_OK if records else EXIT_NUMERIC,
        output_path=path,
        rows=len(records),
        failures=failures,
    )


def cmd_history(args: argparse.Namespace) -> CommandResult:
    """Muestra las últimas ejecuciones registradas."""
    history = get_history(limit=args.limit)
    for run in history:
        print(
            f"#{run['id']} {run['command']:<8} {run['status']:<7} "
            f"{run['started_at']} filas={run['rows_written']} fallos={run['failures']}"
        )
    return CommandResult(exit_code=EXIT_OK, rows=len(history))


# =============================================================================
# Parser
# =============================================================================

def _add_config_flag(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="Archivo JSON de configuración")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="osptba",
        description="Termodinámica de la cadena osp(1|2) por TBA",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Ejemplos:
  python main.py sweep --config runs/afm.json --J -1 --tmin 0.05 --tmax 4 --steps 20 --out f.csv
  python main.py validate
  python main.py compare --N 8 --J -1 --temps 0.5,1,2
  python main.py bethe --N 4 --sector 1
        """,
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="Logging a nivel DEBUG")
    parser.add_argument("--log-file", help="Escribe también el log en logs/<archivo>")

    sub = parser.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("sweep", help="Barrido de temperaturas TBA")
    _add_config_flag(ps)
    ps.add_argument("--J", type=float)
    ps.add_argument("--tmin", type=float)
    ps.add_argument("--tmax", type=float)
    ps.add_argument("--steps", type=int)
    ps.add_argument("--temps", help="Lista 'a,b,c' o rango 'inicio:fin:n'")
    ps.add_argument("--mtrunc", type=int, help="Truncación M fija para todas las T")
    ps.add_argument("--out", help="Archivo de salida")
    ps.add_argument("--format", choices=SUPPORTED_FORMATS)
    ps.add_argument("--workers", type=int, help="Máximo de procesos")
    ps.set_defaults(func=cmd_sweep)

    pv = sub.add_parser("validate", help="Verificaciones de invariantes")
    _add_config_flag(pv)
    pv.add_argument("--only", nargs="+", help="Nombres de verificaciones a ejecutar")
    pv.set_defaults(func=cmd_validate)

    pc = sub.add_parser("compare", help="TBA frente a diagonalización exacta")
    _add_config_flag(pc)
    pc.add_argument("--N", type=int, required=True)
    pc.add_argument("--J", type=float)
    pc.add_argument("--temps", required=True, help="Lista 'a,b,c' o rango 'inicio:fin:n'")
    pc.add_argument("--mtrunc", type=int)
    pc.add_argument("--out")
    pc.add_argument("--format", choices=SUPPORTED_FORMATS)
    pc.add_argument("--workers", type=int)
    pc.set_defaults(func=cmd_compare)

    pb = sub.add_parser("bethe", help="Ecuaciones de Bethe para N sitios")
    _add_config_flag(pb)
    pb.add_argument("--N", type=int, required=True)
    pb.add_argument("--sector", type=int, required=True, help="Número de raíces n")
    pb.add_argument("--seeds", help="Semillas 'm:centro,...;m:centro,...'")
    pb.add_argument("--J", type=float)
    pb.add_argument("--out")
    pb.set_defaults(func=cmd_bethe)

    ph = sub.add_parser("history", help="Registro de ejecuciones")
    ph.add_argument("--limit", type=int, default=20)
    ph.set_defaults(func=cmd_history)

    return parser


def _config_hash(args: argparse.Namespace) -> str:
    values = {key: value for key, value in vars(args).items() if key != "func"}
    return FileUtils.hash_mapping(values)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Punto de entrada; devuelve el código de salida."""
    parser = build_parser()
    args = parser.parse_args(argv)

    TBALogger().configure(level="DEBUG" if args.verbose else None, log_file=args.log_file)

    run_id = None if args.command == "history" else log_run(args.command, _config_hash(args))
    status, error_message = "error", None
    try:
        result = args.func(args)
        status = "ok" if result.exit_code == EXIT_OK else "failed"
        if run_id is not None:
            update_run(
                run_id,
                status,
                output_path=str(result.output_path) if result.output_path else None,
                rows_written=result.rows,
                failures=result.failures,
            )
        return result.exit_code
    except UsageError as e:
        error_message, code = str(e), EXIT_USAGE
    except (NumericalError, FileProcessingError) as e:
        error_message, code = str(e), EXIT_NUMERIC

    logger.error(error_message)
    print(f"Error: {error_message}", file=sys.stderr)
    if run_id is not None:
        update_run(run_id, status, error_message=error_message)
    return code


if __name__ == "__main__":
    sys.exit(main())
