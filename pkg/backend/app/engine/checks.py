"""
Motor de verificaciones para la validación de invariantes numéricos.

Cada verificación tiene un nombre, un umbral y una función que devuelve
el valor medido; la verificación pasa si el valor medido es finito y
estrictamente menor que el umbral. El conjunto completo cubre:
- Ecuación de Yang-Baxter graduada e identidades del álgebra de Brauer
- Consistencia Hamiltoniano / matriz de transferencia
- Normalización de los núcleos K, f_m y R sobre la malla por defecto
- Producto truncado B·B⁻¹ en el espacio de Fourier
- Constantes y recursión de alta temperatura
- Autovalores DVF frente al espectro directo (N = 4)
- Propiedad de semigrupo de los núcleos de Lorentz
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
import scipy.integrate
import scipy.linalg

from app.core.exceptions import InvalidParameterError, OspTbaError
from app.core.logger import LogContext
from app.physics import algebra, bethe, exact, kernels, tba
from app.physics.models import BetheState, GradedMatrix, Grid

logger = logging.getLogger(__name__)

YBE_PAIRS = 20
YBE_SEED = 20240917
# Distancia mínima de u, v y u+v al polo de Ř
YBE_POLE_MARGIN = 0.1
B_INVERSE_MOMENTA = (0.1, 0.7, 3.0)
B_INVERSE_MAX_INDEX = 10
DVF_SITES = 4
DVF_SPECTRAL_POINT = 0.3
SEMIGROUP_POINTS = (0.0, 0.4, 1.7, 5.0)


@dataclass
class InvariantCheck:
    """Verificación con nombre, umbral y función de medida."""
    name: str
    threshold: float
    measure: Callable[[], float]
    group: str = "general"
    description: str = ""


@dataclass
class CheckResult:
    """Resultado de ejecutar una verificación."""
    name: str
    group: str
    measured: float
    threshold: float
    passed: bool
    error: Optional[str] = None

    def to_row(self) -> Dict[str, object]:
        return {
            "check": self.name,
            "group": self.group,
            "measured": f"{self.measured:.3e}" if math.isfinite(self.measured) else "nan",
            "threshold": f"{self.threshold:.0e}",
            "status": "PASS" if self.passed else "FAIL",
            "error": self.error or "",
        }


@dataclass
class CheckReport:
    """Colección ordenada de resultados."""
    results: List[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(result.passed for result in self.results)

    @property
    def failures(self) -> List[CheckResult]:
        return [result for result in self.results if not result.passed]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([result.to_row() for result in self.results])

    def render(self) -> str:
        """Tabla de texto con una fila por verificación."""
        if not self.results:
            return "(sin verificaciones)"
        table = self.to_frame().to_string(index=False)
        summary = f"{len(self.results) - len(self.failures)}/{len(self.results)} verificaciones superadas"
        return f"{table}\n{summary}"


# =============================================================================
# Medidas
# =============================================================================

def _ybe_pairs(count: int = YBE_PAIRS, seed: int = YBE_SEED) -> np.ndarray:
    """Pares (u, v) ∈ (−1, 1)² lejos del polo de Ř en u, v y u+v."""
    rng = np.random.default_rng(seed)
    pairs = []
    while len(pairs) < count:
        u, v = rng.uniform(-1.0, 1.0, size=2)
        if min(abs(x - algebra.POLE) for x in (u, v, u + v)) > YBE_POLE_MARGIN:
            pairs.append((u, v))
    return np.array(pairs)


def measure_ybe() -> float:
    return max(algebra.check_graded_ybe(u, v) for u, v in _ybe_pairs())


def measure_brauer() -> float:
    residuals = algebra.check_temperley_lieb()
    identity = algebra.build_R_check(0.0).distance(GradedMatrix.identity(2))
    return max(max(residuals.values()), identity)


def measure_transfer_hamiltonian(N: int = DVF_SITES, J: float = 1.0) -> float:
    """max |J/i T⁻¹T' − H| para N sitios."""
    from_transfer = algebra.hamiltonian_from_transfer(N, J)
    return from_transfer.distance(algebra.build_hamiltonian(N, J))


def measure_kernel_K(grid: Grid) -> float:
    return abs(kernels.grid_integral(kernels.K_KERNEL, grid) - 0.5)


def measure_kernel_f(grid: Grid, m_max: int = 10) -> float:
    return max(
        abs(kernels.grid_integral(kernels.lorentzian(m), grid) - 1.0)
        for m in range(1, m_max + 1)
    )


def measure_kernel_R(grid: Grid) -> float:
    return abs(kernels.grid_integral(kernels.R_KERNEL, grid) - 1.0)


def measure_b_inverse(
    momenta: Sequence[float] = B_INVERSE_MOMENTA,
    max_index: int = B_INVERSE_MAX_INDEX,
) -> float:
    """max |Σ_m B⁻¹_{nm}(k) B_{ml}(k) − δ_{nl}| para n, l ≤ max_index."""
    worst = 0.0
    for k in momenta:
        for n in range(1, max_index + 1):
            row = kernels.b_inverse_row(n)
            for l in range(1, max_index + 1):
                total = sum(
                    kernels.evaluate_b_inverse(n, m, k) * kernels.fourier_B(m, l, k)
                    for m in row
                )
                worst = max(worst, abs(total - (1.0 if n == l else 0.0)))
    return worst


def measure_high_t_constants(m_trunc: int = 30) -> float:
    """Residuo de la ecuación TBA en β = 0 evaluada en las constantes exactas."""
    eta = tba.high_t_constants(m_trunc + 1)
    m = np.arange(1, m_trunc + 1)
    lower = np.concatenate([[0.0], eta[: m_trunc - 1]])
    upper = eta[1 : m_trunc + 1]
    # ln η_m = ½[ln(1+η_{m−1}) + ln(1+η_{m+1}) − ln(1+η_m⁻¹)]
    rhs = 0.5 * (np.log1p(lower) + np.log1p(upper) - np.log1p(1.0 / eta[:m_trunc]))
    return float(np.max(np.abs(np.log(eta[:m_trunc]) - rhs) / np.log1p(m)))


def measure_high_t_recursion() -> float:
    return tba.high_t_recursion_residual(49)


def measure_dvf_spectrum(N: int = DVF_SITES, J: float = 1.0, u: float = DVF_SPECTRAL_POINT) -> float:
    """
    Distancia máxima de los autovalores DVF (n = 0, 1) al espectro de T(u)
    y de las energías de Bethe al espectro de H.
    """
    transfer = scipy.linalg.eigvals(algebra.build_transfer_matrix(u, N).data)
    energies = exact.spectrum(N, J).eigenvalues
    states = [BetheState(N)] + [
        BetheState(N, (root,)) for root in bethe.closed_form_single_roots(N)
    ]
    worst = 0.0
    for state in states:
        eigenvalue = bethe.dvf_transfer_eigenvalue(u, state)
        worst = max(worst, float(np.min(np.abs(transfer - eigenvalue))))
        energy = bethe.energy_from_roots(state, J)
        worst = max(worst, float(np.min(np.abs(energies - energy))))
    return worst


def measure_lorentzian_semigroup(pairs: Sequence[tuple] = ((1, 1), (1, 2), (2, 3))) -> float:
    """max |(f_m * f_l)(u) − f_{m+l}(u)| por cuadratura adaptativa."""
    worst = 0.0
    for m, l in pairs:
        first, second, target = kernels.lorentzian(m), kernels.lorentzian(l), kernels.lorentzian(m + l)
        for u in SEMIGROUP_POINTS:
            value, _ = scipy.integrate.quad(
                lambda v: first(v) * second(u - v), -np.inf, np.inf, epsabs=1e-13, epsrel=1e-12
            )
            worst = max(worst, abs(value - target(u)))
    return worst


# =============================================================================
# Motor
# =============================================================================

class CheckEngine:
    """
    Registro de verificaciones de invariantes.

    Las verificaciones se ejecutan en orden de registro; un error del
    dominio durante la medida cuenta como fallo con su mensaje.
    """

    def __init__(self, grid: Optional[Grid] = None):
        self.grid = grid or Grid()
        self.checks = self._build_registry()

    def _build_registry(self) -> List[InvariantCheck]:
        grid = self.grid
        checks = []

        # ═══════════════════════════════════════════════════════════════════
        # ÁLGEBRA
        # ═══════════════════════════════════════════════════════════════════
        checks.append(InvariantCheck(
            name="yang_baxter",
            threshold=1e-12,
            measure=measure_ybe,
            group="algebra",
            description=f"YBE trenzada en {YBE_PAIRS} pares aleatorios",
        ))
        checks.append(InvariantCheck(
            name="brauer_identities",
            threshold=1e-14,
            measure=measure_brauer,
            group="algebra",
            description="P², E², PE, E₁E₂E₁ y Ř(0) = I",
        ))
        checks.append(InvariantCheck(
            name="transfer_hamiltonian",
            threshold=1e-6,
            measure=measure_transfer_hamiltonian,
            group="algebra",
            description="J/i T⁻¹T'(0) = H con N = 4",
        ))

        # ═══════════════════════════════════════════════════════════════════
        # NÚCLEOS
        # ═══════════════════════════════════════════════════════════════════
        checks.append(InvariantCheck(
            name="kernel_K_norm",
            threshold=1e-8,
            measure=lambda: measure_kernel_K(grid),
            group="kernels",
            description="∫K = 1/2",
        ))
        checks.append(InvariantCheck(
            name="kernel_f_norm",
            threshold=1e-6,
            measure=lambda: measure_kernel_f(grid),
            group="kernels",
            description="∫f_m = 1, m ≤ 10",
        ))
        checks.append(InvariantCheck(
            name="kernel_R_norm",
            threshold=1e-6,
            measure=lambda: measure_kernel_R(grid),
            group="kernels",
            description="∫R = 1",
        ))
        checks.append(InvariantCheck(
            name="b_inverse",
            threshold=1e-8,
            measure=measure_b_inverse,
            group="kernels",
            description="Σ_m B⁻¹_{nm}B_{ml} = δ_{nl}",
        ))
        checks.append(InvariantCheck(
            name="lorentzian_semigroup",
            threshold=1e-8,
            measure=measure_lorentzian_semigroup,
            group="kernels",
            description="f_m * f_l = f_{m+l}",
        ))

        # ═══════════════════════════════════════════════════════════════════
        # TBA Y BETHE
        # ═══════════════════════════════════════════════════════════════════
        checks.append(InvariantCheck(
            name="high_t_constants",
            threshold=1e-10,
            measure=measure_high_t_constants,
            group="tba",
            description="η_m = m(m+3)/2 resuelve el sistema en β = 0",
        ))
        checks.append(InvariantCheck(
            name="high_t_recursion",
            threshold=1e-12,
            measure=measure_high_t_recursion,
            group="tba",
            description="η_m² = (1+η_{m+1})(1+η_{m−1})/(1+η_m⁻¹), m ≤ 49",
        ))
        checks.append(InvariantCheck(
            name="dvf_spectrum",
            threshold=1e-8,
            measure=measure_dvf_spectrum,
            group="bethe",
            description="DVF y energías de Bethe frente al espectro, N = 4",
        ))

        return checks

    @property
    def names(self) -> List[str]:
        return [check.name for check in self.checks]

    def run_check(self, check: InvariantCheck) -> CheckResult:
        error = None
        try:
            measured = float(check.measure())
        except OspTbaError as e:
            measured, error = math.nan, str(e)
        passed = math.isfinite(measured) and measured < check.threshold
        if not passed:
            logger.warning(
                f"Verificación '{check.name}' fallida: {measured:.3e} (umbral {check.threshold:.0e})"
            )
        return CheckResult(
            name=check.name,
            group=check.group,
            measured=measured,
            threshold=check.threshold,
            passed=passed,
            error=error,
        )

    def run(self, names: Optional[Sequence[str]] = None) -> CheckReport:
        """
        Ejecuta todas las verificaciones (o las indicadas por nombre).

        Raises:
            InvalidParameterError: Si algún nombre no está registrado
        """
        if names is not None:
            unknown = sorted(set(names) - set(self.names))
            if unknown:
                raise InvalidParameterError("checks", unknown, ", ".join(self.names))
        selected = self.checks if names is None else [c for c in self.checks if c.name in names]
        report = CheckReport()
        with LogContext(logger, "Verificación de invariantes"):
            for check in selected:
                report.results.append(self.run_check(check))
        return report
