"""
Modelos de datos del sistema OSP-TBA.

Define las estructuras de datos para representar:
- Matrices sobre productos tensoriales del espacio graduado de dimensión 3
- Estados de Bethe y configuraciones de strings
- Mallas de rapidez y funciones muestreadas con constante asintótica
- Estados TBA, densidades y registros termodinámicos
"""

from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Optional, Tuple, Any
import math

import numpy as np

from app.core.exceptions import (
    InvalidParameterError,
    RootCollisionError,
)


LOCAL_DIMENSION = 3


@dataclass(frozen=True)
class Grading:
    """
    Graduación Z2 de la base {1, 2, 3}.

    Attributes:
        parity: Paridad de cada vector de la base (índices 0..2 en código)
    """
    parity: Tuple[int, int, int] = (1, 0, 1)

    def __post_init__(self):
        if self.parity != (1, 0, 1):
            raise InvalidParameterError("parity", self.parity, "(1, 0, 1)")

    def of(self, label: int) -> int:
        """Paridad del vector con etiqueta 1..3."""
        return self.parity[label - 1]

    def sign(self, a: int, b: int) -> int:
        """Signo (−1)^{p(a)p(b)} con índices 0..2."""
        return -1 if self.parity[a] and self.parity[b] else 1


GRADING = Grading()


def _is_power_of_three(value: int) -> bool:
    if value < 1:
        return False
    while value % 3 == 0:
        value //= 3
    return value == 1


@dataclass(frozen=True, eq=False)
class GradedMatrix:
    """
    Matriz densa compleja sobre k copias del espacio graduado.

    Convención de índices: fila = multi-índice saliente, columna =
    multi-índice entrante, aplanado con el primer factor como el más
    significativo (el mismo orden que ``numpy.kron``). En 9×9 la entrada
    ``(E^g)_{ab}^{cd}`` vive en ``[3c + d, 3a + b]``.
    """
    data: np.ndarray
    grading: Grading = GRADING

    def __post_init__(self):
        array = np.array(self.data, dtype=complex)
        if array.ndim != 2 or array.shape[0] != array.shape[1]:
            raise InvalidParameterError("data", array.shape, "una matriz cuadrada")
        if not _is_power_of_three(array.shape[0]):
            raise InvalidParameterError("dimension", array.shape[0], "una potencia de 3")
        array.setflags(write=False)
        object.__setattr__(self, "data", array)

    @property
    def dimension(self) -> int:
        return self.data.shape[0]

    @property
    def spaces(self) -> int:
        """Número de factores tensoriales."""
        return round(math.log(self.dimension, LOCAL_DIMENSION))

    def entry(self, outgoing: Tuple[int, ...], incoming: Tuple[int, ...]) -> complex:
        """
        Elemento con etiquetas 1..3.

        Example:
            >>> E.entry(outgoing=(2, 2), incoming=(2, 2))
            (1+0j)
        """
        return complex(self.data[self._flat(outgoing), self._flat(incoming)])

    def _flat(self, labels: Tuple[int, ...]) -> int:
        if len(labels) != self.spaces:
            raise InvalidParameterError("labels", labels, f"{self.spaces} etiquetas")
        index = 0
        for label in labels:
            if not 1 <= label <= LOCAL_DIMENSION:
                raise InvalidParameterError("label", label, "1, 2 o 3")
            index = index * LOCAL_DIMENSION + (label - 1)
        return index

    def __matmul__(self, other: "GradedMatrix") -> "GradedMatrix":
        return GradedMatrix(self.data @ other.data)

    def __add__(self, other: "GradedMatrix") -> "GradedMatrix":
        return GradedMatrix(self.data + other.data)

    def __sub__(self, other: "GradedMatrix") -> "GradedMatrix":
        return GradedMatrix(self.data - other.data)

    def __mul__(self, scalar: complex) -> "GradedMatrix":
        return GradedMatrix(scalar * self.data)

    __rmul__ = __mul__

    def __neg__(self) -> "GradedMatrix":
        return GradedMatrix(-self.data)

    def max_abs(self) -> float:
        """Norma del máximo de los elementos."""
        return float(np.max(np.abs(self.data))) if self.data.size else 0.0

    def distance(self, other: "GradedMatrix") -> float:
        return (self - other).max_abs()

    @classmethod
    def identity(cls, spaces: int = 1) -> "GradedMatrix":
        return cls(np.eye(LOCAL_DIMENSION ** spaces))


@dataclass(frozen=True)
class SpectrumResult:
    """Espectro completo del Hamiltoniano de N sitios."""
    eigenvalues: np.ndarray
    N: int
    J: float
    max_imag: float = 0.0

    @property
    def ground_energy(self) -> float:
        return float(self.eigenvalues[0])

    def __len__(self) -> int:
        return len(self.eigenvalues)


@dataclass(frozen=True)
class BetheState:
    """
    Conjunto de raíces de Bethe {u_j} con número cuántico n = len(roots).

    Attributes:
        N: Número de sitios
        roots: Rapideces complejas
        iterations: Iteraciones de Newton usadas para obtenerlo
        residual: Norma infinito del residuo de las ecuaciones de Bethe
    """
    N: int
    roots: Tuple[complex, ...] = ()
    iterations: int = 0
    residual: Optional[float] = None
    collision_guard: float = field(default=1e-8, repr=False, compare=False)

    def __post_init__(self):
        roots = tuple(complex(u) for u in self.roots)
        object.__setattr__(self, "roots", roots)
        if not isinstance(self.N, int) or self.N < 1:
            raise InvalidParameterError("N", self.N, "un entero ≥ 1")
        if len(roots) > self.N:
            raise InvalidParameterError("n", len(roots), f"0 ≤ n ≤ N = {self.N}")
        separation = self.min_separation
        if separation is not None and separation <= self.collision_guard:
            raise RootCollisionError(separation, self.collision_guard)

    @property
    def n(self) -> int:
        return len(self.roots)

    @property
    def min_separation(self) -> Optional[float]:
        if len(self.roots) < 2:
            return None
        roots = np.array(self.roots)
        diffs = np.abs(roots[:, None] - roots[None, :])
        np.fill_diagonal(diffs, np.inf)
        return float(diffs.min())

    def with_roots(self, roots, iterations: int = 0, residual: Optional[float] = None) -> "BetheState":
        return BetheState(
            N=self.N,
            roots=tuple(roots),
            iterations=iterations,
            residual=residual,
            collision_guard=self.collision_guard,
        )

    def conjugate(self) -> "BetheState":
        return self.with_roots([u.conjugate() for u in self.roots])

    def key(self, digits: int = 8) -> Tuple[Tuple[float, float], ...]:
        """Clave canónica (redondeada y ordenada) para deduplicar."""
        # +0.0 evita que -0.0 y 0.0 den claves distintas
        return tuple(sorted(
            (round(u.real, digits) + 0.0, round(u.imag, digits) + 0.0) for u in self.roots
        ))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "N": self.N,
            "n": self.n,
            "roots": [[u.real, u.imag] for u in self.roots],
            "iterations": self.iterations,
            "residual": self.residual,
        }


@dataclass(frozen=True)
class StringConfig:
    """
    Configuración de strings: lista de (m, centros reales).

    Attributes:
        parts: Tupla de pares (longitud m ≥ 1, centros)
        N: Número de sitios
    """
    parts: Tuple[Tuple[int, Tuple[float, ...]], ...]
    N: int

    def __post_init__(self):
        normalized = []
        for m, centers in self.parts:
            if not isinstance(m, int) or m < 1:
                raise InvalidParameterError("m", m, "un entero ≥ 1")
            normalized.append((m, tuple(float(c) for c in centers)))
        object.__setattr__(self, "parts", tuple(normalized))

    @classmethod
    def from_pairs(cls, pairs: List[Tuple[int, float]], N: int) -> "StringConfig":
        """Agrupa pares (m, centro) por longitud de string."""
        grouped: Dict[int, List[float]] = {}
        for m, center in pairs:
            grouped.setdefault(m, []).append(center)
        return cls(parts=tuple((m, tuple(c)) for m, c in sorted(grouped.items())), N=N)

    @property
    def total_roots(self) -> int:
        return sum(m * len(centers) for m, centers in self.parts)

    def counts(self) -> Dict[int, int]:
        """n_m: número de m-strings."""
        return {m: len(centers) for m, centers in self.parts}

    def flat(self) -> List[Tuple[int, float]]:
        """Lista (m, centro) en el orden de ``parts``."""
        return [(m, c) for m, centers in self.parts for c in centers]


@dataclass(frozen=True)
class Grid:
    """
    Malla uniforme u_i = −L + i·h, h = 2L/M, i = 0..M−1.

    Attributes:
        half_extent: L
        points: M (potencia de dos)
    """
    half_extent: float = 20.0
    points: int = 4096

    def __post_init__(self):
        if not self.half_extent > 0:
            raise InvalidParameterError("half_extent", self.half_extent, "L > 0")
        if not (isinstance(self.points, int) and self.points > 1
                and self.points & (self.points - 1) == 0):
            raise InvalidParameterError("points", self.points, "una potencia de dos")

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_extent / self.points

    @cached_property
    def nodes(self) -> np.ndarray:
        nodes = -self.half_extent + self.spacing * np.arange(self.points)
        nodes.setflags(write=False)
        return nodes

    def mirror_index(self) -> np.ndarray:
        """Índice j con u_j = −u_i (el nodo −L no tiene espejo y se mapea a sí mismo)."""
        index = (self.points - np.arange(self.points)) % self.points
        index[0] = 0
        return index


@dataclass(frozen=True, eq=False)
class SampledFunction:
    """
    Función real muestreada en una malla, con su valor asintótico.

    Attributes:
        grid: Malla
        values: Muestras (longitud ``grid.points``)
        tail_constant: Límite en |u| → ∞
    """
    grid: Grid
    values: np.ndarray
    tail_constant: float = 0.0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.points,):
            raise InvalidParameterError("values", values.shape, f"({self.grid.points},)")
        object.__setattr__(self, "values", values)

    def edge_deviation(self) -> float:
        """Mayor desviación de los extremos respecto de la constante asintótica."""
        return float(max(
            abs(self.values[0] - self.tail_constant),
            abs(self.values[-1] - self.tail_constant),
        ))

    def decaying_part(self) -> np.ndarray:
        return self.values - self.tail_constant

    def __add__(self, other: "SampledFunction") -> "SampledFunction":
        return SampledFunction(self.grid, self.values + other.values,
                               self.tail_constant + other.tail_constant)

    def scaled(self, factor: float, offset: float = 0.0) -> "SampledFunction":
        return SampledFunction(self.grid, factor * self.values + offset,
                               factor * self.tail_constant + offset)


@dataclass
class TbaState:
    """
    Familia truncada {ln η_m(u)}, m = 1..M, con metadatos de convergencia.

    ``log_eta`` tiene forma (M, puntos de malla); la fila m−1 guarda ln η_m.
    """
    grid: Grid
    m_trunc: int
    log_eta: np.ndarray
    beta: float
    J: float
    converged: bool = False
    iterations: int = 0
    residual: float = float("inf")
    damping: float = 0.5
    residual_history: List[float] = field(default_factory=list, repr=False)

    @property
    def temperature(self) -> float:
        return math.inf if self.beta == 0 else 1.0 / self.beta

    @property
    def eta(self) -> np.ndarray:
        return np.exp(self.log_eta)

    def tail_constants(self) -> np.ndarray:
        """ln(m(m+3)/2) para m = 1..M."""
        m = np.arange(1, self.m_trunc + 1)
        return np.log(m * (m + 3) / 2.0)

    def log_eta_function(self, m: int) -> SampledFunction:
        return SampledFunction(self.grid, self.log_eta[m - 1], float(self.tail_constants()[m - 1]))

    def symmetry_defect(self) -> float:
        """max |ln η_m(u) − ln η_m(−u)|."""
        mirror = self.grid.mirror_index()
        return float(np.max(np.abs(self.log_eta - self.log_eta[:, mirror])))

    def tail_defect(self) -> float:
        """Mayor desviación de η_m en los extremos respecto de m(m+3)/2 (relativa)."""
        edges = self.log_eta[:, [0, -1]] - self.tail_constants()[:, None]
        return float(np.max(np.abs(np.expm1(edges))))


@dataclass
class DensityState:
    """
    Densidades de partículas y huecos por longitud de string.

    ``tail_coefficients[m−1]`` guarda C_m en ρ_m^p(u) ≈ C_m/u² para |u| > L.
    """
    grid: Grid
    rho_p: np.ndarray
    rho_h: np.ndarray
    tail_coefficients: np.ndarray
    solver_info: Dict[str, Any] = field(default_factory=dict)

    @property
    def rho(self) -> np.ndarray:
        return self.rho_p + self.rho_h

    def min_value(self) -> Tuple[float, int]:
        """Mínimo de todas las densidades y el m donde ocurre."""
        stacked = np.minimum(self.rho_p, self.rho_h)
        flat_index = int(np.argmin(stacked))
        return float(stacked.flat[flat_index]), flat_index // self.grid.points + 1


@dataclass
class ThermoRecord:
    """Fila del barrido de temperaturas."""
    T: float
    J: float
    f: float = math.nan
    e: float = math.nan
    s: float = math.nan
    iterations: int = 0
    residual: float = math.nan
    M_trunc: int = 0
    status: str = "ok"
    error: Optional[str] = None

    COLUMNS = ("T", "J", "f", "e", "s", "iterations", "residual", "M_trunc")

    @property
    def failed(self) -> bool:
        return self.status != "ok"

    def to_row(self) -> Dict[str, Any]:
        return {name: getattr(self, name) for name in self.COLUMNS}
