"""
Núcleos integrales y álgebra en espacio de Fourier.

Incluye las lorentzianas f_m, el núcleo K = 1/(2 cosh πu), el núcleo R
de la energía libre, los operadores de Takahashi A_{ml} y B_{ml}, la
inversa tridiagonal de B y la convolución sobre la malla con separación
de la constante asintótica.

Convención de Fourier: F[g](k) = ∫ g(u) e^{iku} du.
"""

import logging
import math
from abc import ABC, abstractmethod
from functools import lru_cache
from typing import Callable, Dict, Optional, Tuple, Union

import numpy as np
import scipy.fft
import scipy.signal

from app.core.exceptions import (
    InvalidParameterError,
    TruncationOverflowError,
    TailToleranceError,
)
from app.physics.models import Grid, SampledFunction

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

SQRT3 = math.sqrt(3.0)
DEFAULT_MAX_INDEX = 400


# =============================================================================
# Núcleos
# =============================================================================

class Kernel(ABC):
    """Núcleo par, positivo y con transformada de Fourier conocida."""

    name: str = "kernel"

    @abstractmethod
    def __call__(self, u: ArrayLike) -> ArrayLike:
        """Valor en u."""

    @abstractmethod
    def fourier(self, k: ArrayLike) -> ArrayLike:
        """Transformada de Fourier analítica."""

    @property
    @abstractmethod
    def total_integral(self) -> float:
        """∫ κ(u) du sobre la recta real."""

    @abstractmethod
    def tail_mass(self, L: float) -> float:
        """∫_{|u|>L} κ(u) du."""

    def offsets(self, grid: Grid) -> np.ndarray:
        """Muestras en los desplazamientos −M·h .. M·h (longitud 2M + 1)."""
        lags = grid.spacing * np.arange(-grid.points, grid.points + 1)
        return np.asarray(self(lags), dtype=float)


class LorentzianKernel(Kernel):
    """f_m(u) = m / (2π(u² + (m/2)²)); F = e^{−m|k|/2}."""

    def __init__(self, m: int):
        if m < 1:
            raise InvalidParameterError("m", m, "m ≥ 1")
        self.m = m
        self.name = f"f_{m}"

    def __call__(self, u: ArrayLike) -> ArrayLike:
        half = 0.5 * self.m
        return self.m / (2.0 * np.pi * (np.square(u) + half * half))

    def fourier(self, k: ArrayLike) -> ArrayLike:
        return np.exp(-0.5 * self.m * np.abs(k))

    @property
    def total_integral(self) -> float:
        return 1.0

    def tail_mass(self, L: float) -> float:
        return 1.0 - (2.0 / np.pi) * math.atan(2.0 * L / self.m)


class SechKernel(Kernel):
    """K(u) = 1/(2 cosh πu); F = 1/(2 cosh(k/2))."""

    name = "K"

    def __call__(self, u: ArrayLike) -> ArrayLike:
        x = np.exp(-np.pi * np.abs(u))
        return x / (1.0 + x * x)

    def fourier(self, k: ArrayLike) -> ArrayLike:
        x = np.exp(-0.5 * np.abs(k))
        return x / (1.0 + x * x)

    @property
    def total_integral(self) -> float:
        return 0.5

    def tail_mass(self, L: float) -> float:
        return (2.0 / np.pi) * math.atan(math.exp(-np.pi * L))


class FreeEnergyKernel(Kernel):
    """
    R(u) = 2 sinh(4πu/3) / (√3 sinh 2πu); F = 1/(2 cosh(k/2) − 1).

    Se evalúa como (2/√3) e^{−2π|u|/3} · expm1(−8π|u|/3)/expm1(−4π|u|),
    con el límite 4/(3√3) en u = 0.
    """

    name = "R"
    VALUE_AT_ZERO = 4.0 / (3.0 * SQRT3)

    def __call__(self, u: ArrayLike) -> ArrayLike:
        a = np.abs(np.asarray(u, dtype=float))
        safe = np.where(a > 0.0, a, 1.0)
        ratio = np.expm1(-8.0 * np.pi * safe / 3.0) / np.expm1(-4.0 * np.pi * safe)
        value = (2.0 / SQRT3) * np.exp(-2.0 * np.pi * safe / 3.0) * ratio
        value = np.where(a > 0.0, value, self.VALUE_AT_ZERO)
        return value if value.ndim else float(value)

    def fourier(self, k: ArrayLike) -> ArrayLike:
        return 1.0 / (2.0 * np.cosh(0.5 * np.asarray(k, dtype=float)) - 1.0)

    @property
    def total_integral(self) -> float:
        return 1.0

    def tail_mass(self, L: float) -> float:
        # Cola asintótica (2/√3) e^{−2π|u|/3}
        return (2.0 * SQRT3 / np.pi) * math.exp(-2.0 * np.pi * L / 3.0)


K_KERNEL = SechKernel()
R_KERNEL = FreeEnergyKernel()


@lru_cache(maxsize=None)
def lorentzian(m: int) -> LorentzianKernel:
    return LorentzianKernel(m)


def f_m_kernel(m: int, u: ArrayLike) -> ArrayLike:
    """f_m(u) = m/(2π(u² + (m/2)²))."""
    return lorentzian(m)(u)


def K_kernel(u: ArrayLike) -> ArrayLike:
    """K(u) = 1/(2 cosh πu)."""
    return K_KERNEL(u)


def R_kernel(u: ArrayLike) -> ArrayLike:
    """R(u) con la singularidad evitable de u = 0 resuelta."""
    return R_KERNEL(u)


def fourier_R(k: ArrayLike) -> ArrayLike:
    """F[R](k) = 1/(2 cosh(k/2) − 1)."""
    return R_KERNEL.fourier(k)


def grid_integral(kernel: Kernel, grid: Grid) -> float:
    """
    ∫ κ sobre la malla (regla del trapecio) más la masa analítica fuera de [−L, L].

    Para un núcleo par el trapecio en [−L, L] coincide con h·Σ sobre los
    M nodos de la malla.
    """
    interior = grid.spacing * float(np.sum(kernel(grid.nodes)))
    return interior + kernel.tail_mass(grid.half_extent)


# =============================================================================
# Operadores de Takahashi
# =============================================================================

@lru_cache(maxsize=4096)
def takahashi_coefficients(m: int, l: int) -> Tuple[Tuple[int, int], ...]:
    """
    Coeficientes c_d de [d] para d = |l−m| .. l+m.

    Desplazamiento par respecto de |l−m|: 1 en los extremos y 2 en el
    interior; impar: −1. El mismo patrón define Θ_{ml}, E_{ml} y A_{ml};
    el término d = 0 (sólo si m = l) es la identidad en A_{ml} y no
    aparece en Θ_{ml} ni en E_{ml}.

    Returns:
        Tupla de pares (d, c_d), ordenada por d
    """
    if m < 1 or l < 1:
        raise InvalidParameterError("m, l", (m, l), "enteros ≥ 1")
    low, high = abs(l - m), l + m
    coefficients = []
    for d in range(low, high + 1):
        offset = d - low
        if offset % 2:
            coefficient = -1
        elif d in (low, high):
            coefficient = 1
        else:
            coefficient = 2
        coefficients.append((d, coefficient))
    return tuple(coefficients)


def _check_index(m: int, l: int, max_index: int) -> None:
    if m + l > max_index:
        raise TruncationOverflowError(m + l, max_index)


def fourier_B(m: int, l: int, k: ArrayLike) -> ArrayLike:
    """
    B_{ml}(k) = (e^{−|l−m||k|/2} − e^{−(l+m)|k|/2}) coth(|k|/2).

    En k = 0 toma el límite analítico 2·min(l, m).
    """
    a = np.abs(np.asarray(k, dtype=float))
    low, high = abs(l - m), l + m
    safe = np.where(a > 0.0, a, 1.0)
    x = np.exp(-0.5 * safe)
    # x^low (1 − x^{high−low}) (1 + x²)/(1 − x²), sin cancelaciones para k pequeño
    value = (
        x ** low
        * np.expm1(-0.5 * (high - low) * safe)
        / np.expm1(-safe)
        * (1.0 + x * x)
    )
    value = np.where(a > 0.0, value, 2.0 * min(l, m))
    return value if value.ndim else float(value)


def fourier_A(m: int, l: int, k: ArrayLike) -> ArrayLike:
    """F[A_{ml}](k) = (1 − 1/(2 cosh(k/2))) B_{ml}(k)."""
    return (1.0 - K_KERNEL.fourier(k)) * fourier_B(m, l, k)


def fourier_A_series(m: int, l: int, k: ArrayLike) -> ArrayLike:
    """F[A_{ml}](k) como suma término a término Σ_d c_d e^{−d|k|/2}."""
    a = np.abs(np.asarray(k, dtype=float))
    total = np.zeros_like(a)
    for d, coefficient in takahashi_coefficients(m, l):
        total = total + coefficient * np.exp(-0.5 * d * a)
    return total if total.ndim else float(total)


def b_inverse_row(
    n: int, m: Optional[int] = None
) -> Union[Dict[int, Tuple[int, int]], Tuple[int, int]]:
    """
    Fila n de B⁻¹ como plantilla de vecinos, o su entrada (n, m).

    Returns:
        Sin ``m``: dict m → (coeficiente, potencia de w) con
        w = 1/(2 cosh(k/2)): {n: (1, 0), n±1: (−1, 1)}; la fila 1 no
        tiene vecino m = 0.
        Con ``m``: el par (coeficiente, potencia) de B⁻¹_{nm}, (0, 0)
        fuera de la banda tridiagonal.
    """
    if n < 1:
        raise InvalidParameterError("n", n, "n ≥ 1")
    row = {n: (1, 0), n + 1: (-1, 1)}
    if n >= 2:
        row[n - 1] = (-1, 1)
    if m is not None:
        if m < 1:
            raise InvalidParameterError("m", m, "m ≥ 1")
        return row.get(m, (0, 0))
    return dict(sorted(row.items()))


def evaluate_b_inverse(n: int, m: int, k: ArrayLike) -> ArrayLike:
    """B⁻¹_{nm}(k) evaluado numéricamente."""
    coefficient, power = b_inverse_row(n, m)
    return coefficient * K_KERNEL.fourier(k) ** power


# =============================================================================
# Convolución
# =============================================================================

def _check_tail(g: SampledFunction, tail_tolerance: Optional[float]) -> None:
    if tail_tolerance is None:
        return
    deviation = g.edge_deviation()
    if deviation > tail_tolerance:
        raise TailToleranceError(deviation, tail_tolerance)


def convolve(
    kernel: Kernel,
    g: SampledFunction,
    method: str = "fft",
    tail_tolerance: Optional[float] = None,
) -> SampledFunction:
    """
    (κ * g)(u) = ∫ κ(u − v) g(v) dv sobre la malla.

    Se separa g = c + (g − c): la parte decreciente se convoluciona con
    el núcleo muestreado en desplazamientos −M..M (convolución lineal,
    sin solapamiento periódico) y la constante aporta c·∫κ exactamente.

    Args:
        kernel: Núcleo (K, f_j o R)
        g: Función muestreada con su constante asintótica
        method: ``"fft"`` (espectral) o ``"direct"`` (cuadratura O(M²))
        tail_tolerance: Si se indica, exige |g(±L) − c| ≤ tolerancia

    Raises:
        TailToleranceError: Si los extremos no alcanzan la constante
    """
    _check_tail(g, tail_tolerance)
    grid = g.grid
    decaying = g.decaying_part()

    if method == "fft":
        values = scipy.signal.fftconvolve(decaying, kernel.offsets(grid), mode="same")
    elif method == "direct":
        lags = np.subtract.outer(grid.nodes, grid.nodes)
        values = kernel(lags) @ decaying
    else:
        raise InvalidParameterError("method", method, "'fft' o 'direct'")

    constant = g.tail_constant * kernel.total_integral
    return SampledFunction(grid, grid.spacing * values + constant, constant)


class BatchConvolver:
    """
    Convolución de varias filas con un mismo núcleo.

    Guarda el espectro del núcleo muestreado con relleno de ceros
    (longitud ≥ 3M) para reutilizarlo en cada iteración.
    """

    def __init__(self, kernel: Kernel, grid: Grid):
        self.kernel = kernel
        self.grid = grid
        self._full_length = 3 * grid.points
        self._nfft = scipy.fft.next_fast_len(self._full_length, real=True)
        self._spectrum = scipy.fft.rfft(kernel.offsets(grid), self._nfft)

    def __call__(self, rows: np.ndarray, tail_constants: Optional[np.ndarray] = None) -> np.ndarray:
        """
        Convoluciona cada fila de ``rows`` (forma (n, M) o (M,)).

        Args:
            rows: Valores muestreados
            tail_constants: Constante asintótica por fila (0 si se omite)

        Returns:
            Array con la misma forma que ``rows``
        """
        rows = np.asarray(rows, dtype=float)
        single = rows.ndim == 1
        block = np.atleast_2d(rows)
        constants = (
            np.zeros(block.shape[0]) if tail_constants is None
            else np.atleast_1d(np.asarray(tail_constants, dtype=float))
        )
        decaying = block - constants[:, None]
        spectrum = scipy.fft.rfft(decaying, self._nfft, axis=-1)
        full = scipy.fft.irfft(spectrum * self._spectrum, self._nfft, axis=-1)
        M = self.grid.points
        # modo "same": desplazamiento M en la convolución completa
        out = self.grid.spacing * full[:, M:2 * M]
        out = out + (constants * self.kernel.total_integral)[:, None]
        return out[0] if single else out


class SpectralConvolver:
    """
    Convolución con un núcleo par dado por su transformada de Fourier.

    El multiplicador se evalúa una vez sobre las frecuencias de la
    malla rellenada (longitud ≥ 3M). Las filas deben decaer a cero en
    los extremos.
    """

    def __init__(self, grid: Grid, multiplier: Callable[[np.ndarray], np.ndarray]):
        self.grid = grid
        self._nfft = scipy.fft.next_fast_len(3 * grid.points, real=True)
        k = 2.0 * np.pi * scipy.fft.rfftfreq(self._nfft, d=grid.spacing)
        self._spectrum = np.asarray(multiplier(k), dtype=float)

    def __call__(self, rows: np.ndarray) -> np.ndarray:
        rows = np.asarray(rows, dtype=float)
        spectrum = scipy.fft.rfft(rows, self._nfft, axis=-1)
        full = scipy.fft.irfft(spectrum * self._spectrum, self._nfft, axis=-1)
        return full[..., :self.grid.points]


def apply_A(
    m: int,
    l: int,
    g: SampledFunction,
    max_index: int = DEFAULT_MAX_INDEX,
) -> SampledFunction:
    """
    A_{ml} g = Σ_d c_d [d] g con [0] = identidad y [d] = f_d * (·).

    Raises:
        TruncationOverflowError: Si l + m supera ``max_index``
    """
    _check_index(m, l, max_index)
    values = np.zeros(g.grid.points)
    constant = 0.0
    for d, coefficient in takahashi_coefficients(m, l):
        if d == 0:
            term = g
        else:
            term = convolve(lorentzian(d), g)
        values += coefficient * term.values
        constant += coefficient * term.tail_constant
    return SampledFunction(g.grid, values, constant)


class TakahashiOperator:
    """
    Acción conjunta Σ_l A_{ml} g_l para todas las filas m.

    Precalcula f_d * g_l para d = 1..m_max + l_max y combina con los
    coeficientes de Takahashi.
    """

    def __init__(self, grid: Grid, max_index: int = DEFAULT_MAX_INDEX):
        self.grid = grid
        self.max_index = max_index
        self._convolvers: Dict[int, BatchConvolver] = {}

    def _convolver(self, d: int) -> BatchConvolver:
        if d not in self._convolvers:
            self._convolvers[d] = BatchConvolver(lorentzian(d), self.grid)
        return self._convolvers[d]

    def apply(
        self,
        rows: np.ndarray,
        tail_constants: np.ndarray,
        m_values,
    ) -> np.ndarray:
        """
        Devuelve out[i] = Σ_l A_{m_i, l} g_l con l = 1..len(rows).

        Args:
            rows: g_l muestreadas, forma (L, M)
            tail_constants: Constante asintótica de cada g_l
            m_values: Índices m a evaluar
        """
        rows = np.asarray(rows, dtype=float)
        n_rows = rows.shape[0]
        m_values = list(m_values)
        _check_index(max(m_values), n_rows, self.max_index)

        convolved: Dict[int, np.ndarray] = {}
        for d in range(1, max(m_values) + n_rows + 1):
            convolved[d] = self._convolver(d)(rows, tail_constants)

        out = np.zeros((len(m_values), self.grid.points))
        for i, m in enumerate(m_values):
            for l in range(1, n_rows + 1):
                for d, coefficient in takahashi_coefficients(m, l):
                    term = rows[l - 1] if d == 0 else convolved[d][l - 1]
                    out[i] += coefficient * term
        return out
