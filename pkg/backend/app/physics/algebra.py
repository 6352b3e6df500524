"""
Álgebra de la cadena osp(1|2).

Construye la matriz α, la permutación graduada P^g, el generador de
Temperley-Lieb E^g, las matrices Ř(u) y R(u) = P·Ř(u), el Hamiltoniano
periódico y la matriz de transferencia, y verifica la ecuación de
Yang-Baxter graduada.

Convención de índices (ver ``GradedMatrix``): fila = saliente (c, d),
columna = entrante (a, b), índice plano 3·primero + segundo. La base
{1, 2, 3} se indexa 0..2 en código.

Convención de Yang-Baxter (forma trenzada, Ř₁ = Ř⊗I, Ř₂ = I⊗Ř):

    Ř₁(u) Ř₂(u+v) Ř₁(v) = Ř₂(v) Ř₁(u+v) Ř₂(u)

Los argumentos del lado derecho van en orden inverso (v, u+v, u); con
(u, u+v, v) en ambos lados el residuo no se anula para esta Ř. Como Ř
es par (conserva la paridad total), los embebidos ordinarios con
``numpy.kron`` son equivalentes a los graduados.
"""

import functools
import logging
from typing import Dict

import numpy as np
import scipy.sparse as sp

from app.core.exceptions import PoleError, SizeGuardError, InvalidParameterError
from app.physics.models import GradedMatrix, GRADING, LOCAL_DIMENSION

logger = logging.getLogger(__name__)


POLE = 1.5
POLE_GUARD = 1e-12
MAX_DENSE_SITES = 10
MAX_TRANSFER_SITES = 8

_ALPHA = np.array([[0, 0, 1], [0, 1, 0], [-1, 0, 0]], dtype=float)
_ALPHA_INV = np.array([[0, 0, -1], [0, 1, 0], [1, 0, 0]], dtype=float)

# Pesos de magnetización de la base (1, 2, 3); P^g y E^g los conservan
MAGNETIZATION = np.array([1, 0, -1])

# Signatura real S = diag(1, 1, −1) por sitio: S h S = hᵀ
SIGNATURE = np.array([1.0, 1.0, -1.0])


# =============================================================================
# Generadores locales
# =============================================================================

def build_alpha() -> GradedMatrix:
    """Matriz α con filas (0,0,1), (0,1,0), (−1,0,0)."""
    return GradedMatrix(_ALPHA)


def build_alpha_inverse() -> GradedMatrix:
    """Inversa exacta de α (entera, igual a αᵀ)."""
    return GradedMatrix(_ALPHA_INV)


def build_graded_permutation() -> GradedMatrix:
    """(P^g)_{ab}^{cd} = (−1)^{p(a)p(b)} δ_{a,d} δ_{b,c}."""
    d = LOCAL_DIMENSION
    data = np.zeros((d * d, d * d))
    for a in range(d):
        for b in range(d):
            # entrante (a, b) → saliente (c, d) = (b, a)
            data[d * b + a, d * a + b] = GRADING.sign(a, b)
    return GradedMatrix(data)


def build_permutation() -> GradedMatrix:
    """Permutación ordinaria (no graduada) P_{ab}^{cd} = δ_{a,d} δ_{b,c}."""
    d = LOCAL_DIMENSION
    data = np.zeros((d * d, d * d))
    for a in range(d):
        for b in range(d):
            data[d * b + a, d * a + b] = 1.0
    return GradedMatrix(data)


def build_E() -> GradedMatrix:
    """(E^g)_{ab}^{cd} = α_{ab} (α⁻¹)_{cd}: producto externo vec(α⁻¹)·vec(α)ᵀ."""
    return GradedMatrix(np.outer(_ALPHA_INV.ravel(), _ALPHA.ravel()))


def _check_pole(u: complex) -> None:
    if abs(u - POLE) < POLE_GUARD:
        raise PoleError(u, "coeficiente u/(u − 3/2) de E^g")


def build_R_check(u: complex) -> GradedMatrix:
    """
    Ř(u) = I + u P^g − u/(u − 3/2) E^g.

    Raises:
        PoleError: Si u = 3/2
    """
    _check_pole(u)
    identity = np.eye(LOCAL_DIMENSION ** 2)
    data = (
        identity
        + u * build_graded_permutation().data
        - (u / (u - POLE)) * build_E().data
    )
    return GradedMatrix(data)


def build_R(u: complex) -> GradedMatrix:
    """R(u) = P·Ř(u) con la permutación ordinaria."""
    return build_permutation() @ build_R_check(u)


def local_hamiltonian() -> GradedMatrix:
    """Densidad de energía h = P^g + (2/3) E^g = dŘ/du en u = 0."""
    return build_graded_permutation() + (2.0 / 3.0) * build_E()


# =============================================================================
# Verificaciones algebraicas
# =============================================================================

def check_graded_ybe(u: float, v: float) -> float:
    """
    Residuo (norma del máximo) de la ecuación de Yang-Baxter trenzada.

    Args:
        u, v: Parámetros espectrales (u, v y u+v lejos de 3/2)

    Returns:
        max |Ř₁(u)Ř₂(u+v)Ř₁(v) − Ř₂(v)Ř₁(u+v)Ř₂(u)|
    """
    identity = np.eye(LOCAL_DIMENSION)

    def first(x):
        return np.kron(build_R_check(x).data, identity)

    def second(x):
        return np.kron(identity, build_R_check(x).data)

    lhs = first(u) @ second(u + v) @ first(v)
    rhs = second(v) @ first(u + v) @ second(u)
    return float(np.max(np.abs(lhs - rhs)))


def check_temperley_lieb() -> Dict[str, float]:
    """
    Residuos de las relaciones del álgebra de Brauer graduada (δ = −1).

    Returns:
        dict nombre → residuo máximo
    """
    identity = np.eye(LOCAL_DIMENSION)
    P = build_graded_permutation().data
    E = build_E().data
    E1 = np.kron(E, identity)
    E2 = np.kron(identity, E)
    P2 = np.kron(identity, P)

    def norm(matrix: np.ndarray) -> float:
        return float(np.max(np.abs(matrix)))

    return {
        "P^2 = I": norm(P @ P - np.eye(9)),
        "E^2 = -E": norm(E @ E + E),
        "P E = E": norm(P @ E - E),
        "E1 E2 E1 = E1": norm(E1 @ E2 @ E1 - E1),
        "E1 P2 E1 = E1": norm(E1 @ P2 @ E1 - E1),
    }


# =============================================================================
# Hamiltoniano
# =============================================================================

def _guard_sites(N: int, limit: int, what: str = "N") -> None:
    if not isinstance(N, int) or N < 1:
        raise InvalidParameterError(what, N, "un entero positivo")
    if N > limit:
        raise SizeGuardError(what, N, limit)


def embed_two_site(op: np.ndarray, first: int, second: int, N: int) -> sp.csr_matrix:
    """
    Embebe un operador de dos sitios en la cadena de N sitios.

    Embebido ordinario: el sitio 1 es el factor de Kronecker más a la
    izquierda y ``first`` actúa como el primer factor de ``op`` aunque
    ``first > second`` (enlace periódico (N, 1)).

    Args:
        op: Matriz 9×9 con la convención fila (c, d), columna (a, b)
        first, second: Sitios 1..N distintos
        N: Número de sitios

    Returns:
        Matriz dispersa 3^N × 3^N
    """
    if first == second or not (1 <= first <= N and 1 <= second <= N):
        raise InvalidParameterError("sites", (first, second), f"sitios distintos en 1..{N}")

    d = LOCAL_DIMENSION
    op4 = np.asarray(op).reshape(d, d, d, d)
    identity = sp.identity(d, format="csr")
    result = sp.csr_matrix((d ** N, d ** N), dtype=np.result_type(op4, float))

    for c, dd, a, b in zip(*np.nonzero(op4)):
        factors = []
        for site in range(1, N + 1):
            if site == first:
                factors.append(sp.csr_matrix(([1.0], ([c], [a])), shape=(d, d)))
            elif site == second:
                factors.append(sp.csr_matrix(([1.0], ([dd], [b])), shape=(d, d)))
            else:
                factors.append(identity)
        term = functools.reduce(lambda x, y: sp.kron(x, y, format="csr"), factors)
        result = result + op4[c, dd, a, b] * term
    return result.tocsr()


def build_hamiltonian_sparse(N: int, J: float) -> sp.csr_matrix:
    """H = J Σ_{j=1}^{N} h_{j,j+1} (periódico) en formato disperso real."""
    _guard_sites(N, MAX_DENSE_SITES)
    if N < 2:
        raise InvalidParameterError("N", N, "N ≥ 2")
    h = local_hamiltonian().data.real
    H = sp.csr_matrix((LOCAL_DIMENSION ** N,) * 2)
    for j in range(1, N + 1):
        H = H + embed_two_site(h, j, j % N + 1, N)
    return (J * H).tocsr()


def build_hamiltonian(N: int, J: float) -> GradedMatrix:
    """
    Hamiltoniano denso de N sitios.

    Con N = 2 el enlace (1,2) y el periódico (2,1) se suman por separado,
    siguiendo la fórmula literal.

    Raises:
        SizeGuardError: Si N > 10
    """
    return GradedMatrix(build_hamiltonian_sparse(N, J).toarray())


def site_signature(N: int) -> np.ndarray:
    """Diagonal de S = ⊗ diag(1, 1, −1)."""
    return functools.reduce(np.kron, [SIGNATURE] * N)


def pseudo_symmetry_defect(H) -> float:
    """
    max |S H S − Hᵀ|.

    H es real pero no simétrica en la base producto (E^gᵀ ≠ E^g); la
    autoadjunción se verifica respecto de la métrica S.
    """
    dense = H.data if isinstance(H, GradedMatrix) else np.asarray(H)
    N = round(np.log(dense.shape[0]) / np.log(LOCAL_DIMENSION))
    s = site_signature(N)
    return float(np.max(np.abs(s[:, None] * dense * s[None, :] - dense.T)))


def magnetization_sectors(N: int) -> Dict[int, np.ndarray]:
    """Índices de la base agrupados por magnetización total."""
    weights = functools.reduce(
        lambda x, y: (x[:, None] + y[None, :]).ravel(), [MAGNETIZATION] * N
    )
    return {int(w): np.flatnonzero(weights == w) for w in np.unique(weights)}


# =============================================================================
# Matriz de transferencia
# =============================================================================

def build_transfer_matrix(u: float, N: int) -> GradedMatrix:
    """
    T(u) = tr_a[R_{aN}(iu) ··· R_{a1}(iu)] con traza ordinaria.

    El espacio auxiliar es el primer factor de R; el sitio 1 es el factor
    de Kronecker más a la izquierda del espacio cuántico.

    Raises:
        SizeGuardError: Si N > 8
        PoleError: Si iu = 3/2
    """
    _guard_sites(N, MAX_TRANSFER_SITES)
    d = LOCAL_DIMENSION
    R4 = build_R(1j * u).data.reshape(d, d, d, d)
    # r[c, p] es el operador sobre el sitio para la entrada auxiliar (c ← p)
    r = R4.transpose(0, 2, 1, 3)

    monodromy = r
    for _ in range(1, N):
        dim = monodromy.shape[2]
        monodromy = np.einsum("pbij,cpst->cbisjt", monodromy, r).reshape(d, d, dim * d, dim * d)

    return GradedMatrix(np.einsum("aaij->ij", monodromy))


def hamiltonian_from_transfer(N: int, J: float, step: float = 1e-4) -> GradedMatrix:
    """
    (J/i) T(0)⁻¹ T'(0) con derivada central de paso ``step``.

    Reproduce ``build_hamiltonian(N, J)`` como matriz (error O(step²)).
    """
    t0 = build_transfer_matrix(0.0, N).data
    derivative = (
        build_transfer_matrix(step, N).data - build_transfer_matrix(-step, N).data
    ) / (2.0 * step)
    return GradedMatrix((J / 1j) * np.linalg.solve(t0, derivative))


def commutator_norm(a: GradedMatrix, b: GradedMatrix) -> float:
    """max |AB − BA|."""
    return (a @ b - b @ a).max_abs()
