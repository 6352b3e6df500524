"""
Diagonalización exacta de la cadena finita.

El Hamiltoniano conserva la magnetización total (pesos +1, 0, −1 de la
base), así que se diagonaliza por sectores con un resolvedor general
(H no es simétrica en la base producto) y se comprueba que la parte
imaginaria de los autovalores sea despreciable.
"""

import logging
from functools import lru_cache
from typing import Dict, Tuple, Union

import numpy as np
import scipy.linalg
from scipy.special import logsumexp

from app.core.exceptions import InvalidParameterError, SpectrumError
from app.core.logger import LogContext
from app.physics.algebra import build_hamiltonian_sparse, magnetization_sectors
from app.physics.models import SpectrumResult

logger = logging.getLogger(__name__)

IMAG_TOLERANCE = 1e-10


@lru_cache(maxsize=32)
def spectrum(N: int, J: float) -> SpectrumResult:
    """
    Espectro completo y ordenado de H(N, J).

    Raises:
        SizeGuardError: Si N > 10
        SpectrumError: Si algún autovalor tiene parte imaginaria apreciable
    """
    H = build_hamiltonian_sparse(N, J)
    values = []
    with LogContext(logger, f"Diagonalización N={N} J={J}", level=logging.DEBUG):
        for weight, index in magnetization_sectors(N).items():
            block = H[index][:, index].toarray()
            values.append(scipy.linalg.eigvals(block, check_finite=False))
    eigenvalues = np.concatenate(values)

    scale = max(1.0, float(np.max(np.abs(eigenvalues))))
    max_imag = float(np.max(np.abs(eigenvalues.imag)))
    if max_imag > IMAG_TOLERANCE * scale:
        raise SpectrumError(max_imag, IMAG_TOLERANCE * scale)

    real = np.sort(eigenvalues.real)
    real.setflags(write=False)
    return SpectrumResult(eigenvalues=real, N=N, J=float(J), max_imag=max_imag)


def _require_temperature(T: float) -> float:
    if not (np.isfinite(T) and T > 0):
        raise InvalidParameterError("T", T, "T > 0")
    return float(T)


def free_energy_exact(N: int, J: float, T: float) -> float:
    """f = −(T/N) ln Σ_k exp(−E_k/T), con log-sum-exp desplazado."""
    T = _require_temperature(T)
    energies = spectrum(N, float(J)).eigenvalues
    return float(-T * logsumexp(-energies / T) / N)


def thermodynamics_exact(N: int, J: float, T: float) -> Tuple[float, float, float]:
    """
    (f, e, s) por sitio a temperatura T.

    e es el promedio de Boltzmann de la energía y s = (e − f)/T.
    """
    T = _require_temperature(T)
    energies = spectrum(N, float(J)).eigenvalues
    log_weights = -energies / T
    log_z = logsumexp(log_weights)
    probabilities = np.exp(log_weights - log_z)
    f = float(-T * log_z / N)
    e = float(np.dot(probabilities, energies) / N)
    return f, e, (e - f) / T


def thermodynamics_row(N: int, J: float, T: float) -> Dict[str, Union[int, float]]:
    """Fila (N, J, T, f, e, s) de la cadena finita para las tablas de comparación."""
    f, e, s = thermodynamics_exact(N, J, T)
    return {"N": int(N), "J": float(J), "T": float(T), "f": f, "e": e, "s": s}


def energy_from_partition_function(N: int, J: float, T: float, step: float = 1e-20) -> float:
    """
    e = −(1/N) ∂ln Z/∂β por paso complejo.

    ∂ln Z/∂β = Im ln Z(β + ih)/h, sin cancelación (exacto a precisión de
    máquina para h ≪ 1). Ruta independiente del promedio de Boltzmann de
    ``thermodynamics_exact``.
    """
    beta = 1.0 / _require_temperature(T)
    energies = spectrum(N, float(J)).eigenvalues
    exponents = -(beta + 1j * step) * energies
    shift = float(np.max(exponents.real))
    log_z = shift + np.log(np.sum(np.exp(exponents - shift)))
    return float(-log_z.imag / step / N)


def ground_energy(N: int, J: float) -> float:
    """Energía del estado fundamental por sitio."""
    return spectrum(N, float(J)).ground_energy / N
