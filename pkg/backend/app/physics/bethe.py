"""
Ansatz de Bethe de la cadena osp(1|2).

Funciones Q, autovalores en forma de vacío vestido (DVF), ecuaciones de
Bethe en forma producto y logarítmica, solver de Newton, strings y fases
de dispersión.

Convenciones:
    e(u) = (u + i/2)/(u − i/2),  e(u/d) = (u + i·d/2)/(u − i·d/2)
    θ(u) = 2 arctan(2u), de modo que e(u) = −exp(−iθ(u)) en la recta real
    Λ(u) es el autovalor DVF; el autovalor de T(u) construida con R(iu)
    es i^N · Λ(u).
"""

import logging
import math
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from app.core.exceptions import (
    BetheConvergenceError,
    InvalidParameterError,
    PairingError,
    PoleError,
    RootCollisionError,
    ShapeMismatchError,
    SingularJacobianError,
)
from app.physics.kernels import takahashi_coefficients
from app.physics.models import BetheState, StringConfig

logger = logging.getLogger(__name__)

POLE_GUARD = 1e-12
PAIRING_TOLERANCE = 1e-10
DEFAULT_SEED_SPREAD = 1e-3
STRING_DEVIATION_LIMIT = 0.1


# =============================================================================
# Funciones elementales
# =============================================================================

def q_function(u: complex, state: BetheState) -> complex:
    """Q(u) = Π_j (u − u_j); Q ≡ 1 si n = 0."""
    if not state.roots:
        return 1.0 + 0.0j
    return complex(np.prod(u - np.asarray(state.roots)))


def e_factor(u: complex, d: float = 1.0) -> complex:
    """
    e(u/d) = (u + i·d/2)/(u − i·d/2).

    Raises:
        PoleError: Si u = ±i·d/2
    """
    half = 0.5j * d
    if abs(u - half) < POLE_GUARD:
        raise PoleError(u, f"e(u/{d})")
    return (u + half) / (u - half)


def theta(u):
    """θ(u) = 2 arctan(2u): impar, creciente, con imagen (−π, π)."""
    value = 2.0 * np.arctan(2.0 * np.asarray(u, dtype=float))
    return value if value.ndim else float(value)


def theta_prime(u):
    """θ'(u) = 4/(1 + 4u²)."""
    value = 4.0 / (1.0 + 4.0 * np.square(np.asarray(u, dtype=float)))
    return value if value.ndim else float(value)


def big_theta(m: int, l: int, u):
    """
    Θ_{ml}(u) = Σ_d c_d θ(u/d) con los coeficientes de Takahashi.

    El término d = 0 de m = l no contribuye. Para m = l = 1 queda
    θ(u/2) − θ(u).
    """
    total = 0.0
    for d, coefficient in takahashi_coefficients(m, l):
        if d:
            total = total + coefficient * theta(np.asarray(u, dtype=float) / d)
    return total if np.ndim(total) else float(total)


def big_theta_prime(m: int, l: int, u):
    """Derivada de Θ_{ml} respecto de u."""
    total = 0.0
    for d, coefficient in takahashi_coefficients(m, l):
        if d:
            total = total + coefficient * theta_prime(np.asarray(u, dtype=float) / d) / d
    return total if np.ndim(total) else float(total)


def scattering_E(m: int, l: int, u: complex) -> complex:
    """
    E_{ml}(u) = Π_d e(u/d)^{c_d}: fase de dispersión entre un m-string y un l-string.

    Unimodular para u real; E_{ml}(u)·E_{ml}(−u) = 1.
    """
    value = 1.0 + 0.0j
    for d, coefficient in takahashi_coefficients(m, l):
        if d:
            value *= e_factor(u, d) ** coefficient
    return value


# =============================================================================
# Forma de vacío vestido
# =============================================================================

def _sign(state: BetheState) -> int:
    return -1 if (state.N - state.n) % 2 else 1


def _safe_ratio(numerator: complex, denominator: complex, where: complex) -> complex:
    if abs(denominator) < POLE_GUARD:
        raise PoleError(where, "cero de Q en el denominador de la DVF")
    return numerator / denominator


def dvf_eigenvalue(u: complex, state: BetheState) -> complex:
    """
    Λ(u) = t₁ + t₂ + t₃ en forma de vacío vestido.

        t₁ = (−1)^{N−n} (u+i)^N Q(u−i/2)/Q(u+i/2)
        t₂ = u^N Q(u) Q(u+3i/2)/(Q(u+i/2) Q(u+i))
        t₃ = (−1)^{N−n} (u(u+i/2)/(u+3i/2))^N Q(u+2i)/Q(u+i)

    Raises:
        PoleError: En un cero de Q(u+i/2) o Q(u+i), o en u = −3i/2
    """
    N = state.N
    sign = _sign(state)

    def Q(x):
        return q_function(x, state)

    q_half = Q(u + 0.5j)
    q_one = Q(u + 1.0j)
    t1 = sign * (u + 1.0j) ** N * _safe_ratio(Q(u - 0.5j), q_half, u)
    t2 = u ** N * _safe_ratio(Q(u) * Q(u + 1.5j), q_half * q_one, u)
    shifted = _safe_ratio(u * (u + 0.5j), u + 1.5j, u)
    t3 = sign * shifted ** N * _safe_ratio(Q(u + 2.0j), q_one, u)
    return complex(t1 + t2 + t3)


def dvf_transfer_eigenvalue(u: float, state: BetheState) -> complex:
    """Autovalor de la matriz de transferencia T(u) (argumento iu): i^N Λ(u)."""
    return (1.0j ** state.N) * dvf_eigenvalue(u, state)


def dvf_pole_residues(state: BetheState, radius: float = 1e-3, points: int = 64) -> np.ndarray:
    """
    Residuos de Λ en los ceros de Q(u+i/2) y Q(u+i).

    Se calculan como (1/2πi)∮Λ(u)du sobre circunferencias de radio
    ``radius`` (reducido si otra singularidad cae cerca). Son nulos
    cuando las raíces satisfacen las ecuaciones de Bethe.

    Returns:
        |residuo| para cada candidato u_j − i/2, u_j − i
    """
    roots = np.asarray(state.roots)
    if roots.size == 0:
        return np.zeros(0)

    candidates = np.concatenate([roots - 0.5j, roots - 1.0j])
    singular = np.concatenate([candidates, [-1.5j]])
    angles = 2.0 * np.pi * np.arange(points) / points
    circle = np.exp(1j * angles)

    residues = []
    for center in candidates:
        others = np.abs(singular - center)
        others = others[others > POLE_GUARD]
        r = min(radius, 0.25 * float(others.min())) if others.size else radius
        values = np.array([dvf_eigenvalue(center + r * z, state) for z in circle])
        # trapecio sobre la circunferencia: du = i r z dθ
        residues.append(abs(np.mean(values * r * circle)))
    return np.array(residues)


def dvf_energy(state: BetheState, J: float, radius: float = 0.1, points: int = 64) -> float:
    """
    E = (J/i) d/du ln Λ(u) en u = 0.

    Λ(0) y Λ'(0) salen de la fórmula integral de Cauchy sobre una
    circunferencia de radio ``radius`` (reducido a 1/4 de la distancia a
    la singularidad más próxima); el trapecio converge exponencialmente.

    Raises:
        PoleError: Si Λ es singular en u = 0
    """
    roots = np.asarray(state.roots, dtype=complex)
    singular = np.concatenate([roots - 0.5j, roots - 1.0j, [-1.5j]])
    nearest = float(np.min(np.abs(singular)))
    if nearest < POLE_GUARD:
        raise PoleError(0.0, "Λ singular en u = 0")
    r = min(radius, 0.25 * nearest)
    circle = np.exp(2j * np.pi * np.arange(points) / points)
    values = np.array([dvf_eigenvalue(r * z, state) for z in circle])
    value = np.mean(values)
    derivative = np.mean(values / circle) / r
    return float(((J / 1j) * derivative / value).real)


# =============================================================================
# Ecuaciones de Bethe
# =============================================================================

def bae_residual(state: BetheState) -> np.ndarray:
    """
    Residuo de las ecuaciones de Bethe en forma producto.

    Componente k: e(u_k)^N − (−(−1)^{N−n} Q(u_k−i/2)Q(u_k+i)/(Q(u_k+i/2)Q(u_k−i))).

    Raises:
        PoleError: Raíz en ±i/2 o cero de Q en el denominador
    """
    N = state.N
    sign = _sign(state)
    residual = []
    for u in state.roots:
        lhs = e_factor(u) ** N
        numerator = q_function(u - 0.5j, state) * q_function(u + 1.0j, state)
        denominator = q_function(u + 0.5j, state) * q_function(u - 1.0j, state)
        rhs = -sign * _safe_ratio(numerator, denominator, u)
        residual.append(lhs - rhs)
    return np.array(residual, dtype=complex)


def _log_bae(roots: np.ndarray, N: int) -> np.ndarray:
    """G_k = log(LHS_k/RHS_k) con la rama principal."""
    n = roots.size
    sign = -1 if (N - n) % 2 else 1
    diff = roots[:, None] - roots[None, :]
    np.fill_diagonal(diff, 1.0)
    pair = (
        np.log(diff + 1.0j) - np.log(diff - 1.0j)
        - np.log(diff + 0.5j) + np.log(diff - 0.5j)
    )
    np.fill_diagonal(pair, 0.0)
    value = (
        N * (np.log(roots + 0.5j) - np.log(roots - 0.5j))
        - pair.sum(axis=1)
        - np.log(complex(-sign))
    )
    # rama principal del cociente
    return value.real + 1j * np.angle(np.exp(1j * value.imag))


def _log_bae_jacobian(roots: np.ndarray, N: int) -> np.ndarray:
    diff = roots[:, None] - roots[None, :]
    np.fill_diagonal(diff, 1.0)
    bracket = (
        1.0 / (diff - 0.5j) + 1.0 / (diff + 1.0j)
        - 1.0 / (diff + 0.5j) - 1.0 / (diff - 1.0j)
    )
    np.fill_diagonal(bracket, 0.0)
    jacobian = bracket.copy()
    diagonal = N * (1.0 / (roots + 0.5j) - 1.0 / (roots - 0.5j)) - bracket.sum(axis=1)
    np.fill_diagonal(jacobian, diagonal)
    return jacobian


def _check_roots(roots: np.ndarray, collision_guard: float) -> None:
    if np.any(np.abs(roots - 0.5j) < POLE_GUARD) or np.any(np.abs(roots + 0.5j) < POLE_GUARD):
        raise PoleError(roots.tolist(), "raíz en ±i/2")
    if roots.size > 1:
        gaps = np.abs(roots[:, None] - roots[None, :])
        np.fill_diagonal(gaps, np.inf)
        if gaps.min() <= collision_guard:
            raise RootCollisionError(float(gaps.min()), collision_guard)


def solve_bae_newton(
    initial: BetheState,
    tol: float = 1e-12,
    max_iter: int = 100,
) -> BetheState:
    """
    Newton complejo sobre la forma logarítmica de las ecuaciones de Bethe.

    Jacobiano analítico; si un paso no reduce ‖G‖ se divide a la mitad
    (hasta 1/64). El criterio de parada usa el residuo en forma producto.

    Args:
        initial: Semilla no degenerada
        tol: Tolerancia sobre ‖bae_residual‖_∞
        max_iter: Máximo de pasos de Newton

    Raises:
        RootCollisionError: Si dos raíces colapsan
        SingularJacobianError: Si el Jacobiano no es invertible
        BetheConvergenceError: Si no converge en ``max_iter`` pasos
    """
    N = initial.N
    guard = initial.collision_guard
    roots = np.array(initial.roots, dtype=complex)
    if roots.size == 0:
        return initial.with_roots((), iterations=0, residual=0.0)

    _check_roots(roots, guard)
    residual = float(np.max(np.abs(bae_residual(initial))))

    for iteration in range(max_iter + 1):
        if residual < tol:
            logger.debug("Bethe N=%d n=%d convergido en %d pasos (residuo %.2e)",
                         N, roots.size, iteration, residual)
            return initial.with_roots(roots, iterations=iteration, residual=residual)
        if iteration == max_iter:
            break

        G = _log_bae(roots, N)
        jacobian = _log_bae_jacobian(roots, N)
        try:
            step = np.linalg.solve(jacobian, -G)
        except np.linalg.LinAlgError:
            raise SingularJacobianError(
                "Jacobiano singular en el paso de Newton",
                details={"iteration": iteration, "roots": roots.tolist()},
            )
        if not np.all(np.isfinite(step)):
            raise SingularJacobianError(
                "Paso de Newton no finito",
                details={"iteration": iteration},
            )

        norm = float(np.max(np.abs(G)))
        t = 1.0
        while True:
            trial = roots + t * step
            _check_roots(trial, guard)
            if float(np.max(np.abs(_log_bae(trial, N)))) < norm or t <= 1.0 / 64:
                break
            t *= 0.5
        roots = trial
        residual = float(np.max(np.abs(bae_residual(initial.with_roots(roots)))))

    raise BetheConvergenceError(max_iter, residual)


def energy_from_roots(state: BetheState, J: float) -> float:
    """
    E = J(Σ_j 1/(u_j² + 1/4) − N).

    Raises:
        PairingError: Si la suma no es real (raíces complejas sin su conjugada)
    """
    roots = np.asarray(state.roots, dtype=complex)
    total = complex(np.sum(1.0 / (roots ** 2 + 0.25))) if roots.size else 0.0j
    if abs(total.imag) > PAIRING_TOLERANCE * max(1.0, abs(total.real)):
        raise PairingError(total.imag)
    return J * (total.real - state.N)


def closed_form_single_root(N: int, k: int) -> float:
    """
    Raíz real del sector n = 1: u = −(1/2) tan(πk/N), |k| < N/2.

    Son las soluciones de e(u)^N = (−1)^N.
    """
    if not isinstance(N, int) or N < 1:
        raise InvalidParameterError("N", N, "un entero ≥ 1")
    if not isinstance(k, int) or not abs(2 * k) < N:
        raise InvalidParameterError("k", k, f"un entero con |k| < {N}/2")
    return -0.5 * math.tan(math.pi * k / N)


def closed_form_single_roots(N: int) -> List[float]:
    """Todas las raíces de n = 1, ordenadas de mayor a menor."""
    return [closed_form_single_root(N, k) for k in range(-((N - 1) // 2), (N - 1) // 2 + 1)]


# =============================================================================
# Strings
# =============================================================================

def expand_string(m: int, center: float) -> List[complex]:
    """u^{m,α} = centro + (i/2)(m + 1 − 2α), α = 1..m."""
    if m < 1:
        raise InvalidParameterError("m", m, "m ≥ 1")
    return [complex(center, 0.5 * (m + 1 - 2 * alpha)) for alpha in range(1, m + 1)]


def seed_from_strings(
    config: StringConfig,
    spread: float = DEFAULT_SEED_SPREAD,
    collision_guard: float = 1e-8,
) -> BetheState:
    """
    Semilla de Newton a partir de una configuración de strings.

    Los strings exactos caen sobre ceros de Q(u ± i) y anulan los
    denominadores de las ecuaciones; cada raíz se desplaza un poco
    (``spread``) en ambas direcciones.
    """
    roots: List[complex] = []
    for m, center in config.flat():
        for alpha, root in enumerate(expand_string(m, center), start=1):
            offset = alpha - 0.5 * (m + 1)
            roots.append(complex(root.real + spread * offset, root.imag * (1.0 + spread)))
    return BetheState(N=config.N, roots=tuple(roots), collision_guard=collision_guard)


def string_deviation(state: BetheState, config: StringConfig) -> float:
    """
    Mayor distancia entre las raíces y las posiciones ideales de los strings.

    Las raíces se emparejan con las posiciones por asignación óptima.
    """
    ideal = [root for m, center in config.flat() for root in expand_string(m, center)]
    if len(ideal) != state.n:
        raise ShapeMismatchError("roots", len(ideal), state.n)
    if not ideal:
        return 0.0
    cost = np.abs(np.subtract.outer(np.asarray(state.roots), np.asarray(ideal)))
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].max())


def solve_string_seed(
    config: StringConfig,
    tol: float = 1e-12,
    max_iter: int = 100,
    collision_guard: float = 1e-8,
    max_deviation: float = STRING_DEVIATION_LIMIT,
) -> Tuple[BetheState, float]:
    """
    Resuelve las ecuaciones de Bethe desde una configuración de strings.

    Newton no conserva la forma de string: si la solución queda a más de
    ``max_deviation`` de las posiciones ideales se avisa en el log. Es lo
    que ocurre cuando el string no existe como solución regular, por
    ejemplo el 2-string de centro 0 con N = 6: el par simétrico ±iy no
    tiene solución y las raíces ideales ±i/2 son polos de e(u).

    Returns:
        (estado resuelto, desviación respecto de los strings ideales)
    """
    seed = seed_from_strings(config, collision_guard=collision_guard)
    state = solve_bae_newton(seed, tol=tol, max_iter=max_iter)
    deviation = string_deviation(state, config)
    if deviation > max_deviation:
        logger.warning(
            "N=%d: la solución se aparta %.3g de los strings %s",
            config.N, deviation, config.flat(),
        )
    return state, deviation


def string_energy(config: StringConfig, J: float) -> float:
    """E = J(Σ_strings m/(x² + m²/4) − N): energía de strings ideales."""
    total = sum(m / (center ** 2 + 0.25 * m * m) for m, center in config.flat())
    return J * (total - config.N)


def _centers(config: StringConfig) -> Tuple[np.ndarray, np.ndarray]:
    pairs = config.flat()
    lengths = np.array([m for m, _ in pairs], dtype=int)
    centers = np.array([c for _, c in pairs], dtype=float)
    return lengths, centers


def _counting(config: StringConfig) -> np.ndarray:
    """N θ(x_k/m) − Σ_{l,j} Θ_{ml}(x_k − x_j)."""
    lengths, centers = _centers(config)
    values = np.empty(lengths.size)
    for k, (m, x) in enumerate(zip(lengths, centers)):
        scattering = sum(
            big_theta(int(m), int(l), x - y) for l, y in zip(lengths, centers)
        )
        values[k] = config.N * theta(x / m) - scattering
    return values


def log_bae_residual(config: StringConfig, quantum_numbers: Sequence[float]) -> np.ndarray:
    """
    Residuo de las ecuaciones de Bethe logarítmicas para centros de strings.

    Componente (m, k): N θ(x_k^m/m) − 2π I_k^m − Σ_{l,j} Θ_{ml}(x_k^m − x_j^l).

    Raises:
        ShapeMismatchError: Si el número de I no coincide con el de strings
    """
    quantum_numbers = np.asarray(quantum_numbers, dtype=float)
    expected = len(config.flat())
    if quantum_numbers.shape != (expected,):
        raise ShapeMismatchError("quantum_numbers", expected, quantum_numbers.shape)
    return _counting(config) - 2.0 * np.pi * quantum_numbers


def log_bae_jacobian(config: StringConfig) -> np.ndarray:
    """Jacobiano analítico de ``log_bae_residual`` respecto de los centros."""
    lengths, centers = _centers(config)
    size = lengths.size
    jacobian = np.zeros((size, size))
    for k in range(size):
        m = int(lengths[k])
        for j in range(size):
            if j == k:
                continue
            jacobian[k, j] = big_theta_prime(m, int(lengths[j]), centers[k] - centers[j])
        jacobian[k, k] = config.N * theta_prime(centers[k] / m) / m - jacobian[k].sum()
    return jacobian


def infer_quantum_numbers(config: StringConfig) -> np.ndarray:
    """
    Números cuánticos I_k^m ∈ (1/2)Z compatibles con los centros.

    Se redondea (N θ − ΣΘ)/2π al semientero más próximo.
    """
    return np.round(_counting(config) / np.pi) / 2.0


def state_to_strings(state: BetheState, lengths: Iterable[int]) -> StringConfig:
    """
    Centros reales de strings a partir de raíces agrupadas.

    Las raíces se ordenan por parte real y se agrupan en bloques de las
    longitudes dadas; el centro es la media de la parte real.
    """
    lengths = list(lengths)
    if sum(lengths) != state.n:
        raise ShapeMismatchError("lengths", state.n, sum(lengths))
    ordered = sorted(state.roots, key=lambda u: (round(u.real, 6), -u.imag))
    pairs, start = [], 0
    for m in lengths:
        block = ordered[start:start + m]
        pairs.append((m, float(np.mean([u.real for u in block]))))
        start += m
    return StringConfig.from_pairs(pairs, state.N)


def solve_seeds(
    N: int,
    seeds: Iterable[BetheState],
    tol: float = 1e-12,
    max_iter: int = 100,
    on_failure: Optional[Callable[[BetheState, Exception], None]] = None,
) -> List[BetheState]:
    """
    Resuelve un conjunto de semillas y elimina duplicados.

    Las semillas que fallan se notifican a ``on_failure`` y se omiten.
    """
    solved: List[BetheState] = []
    seen = set()
    for seed in seeds:
        try:
            state = solve_bae_newton(seed, tol=tol, max_iter=max_iter)
        except (BetheConvergenceError, SingularJacobianError,
                RootCollisionError, PoleError) as exc:
            logger.warning("Semilla descartada (N=%d): %s", N, exc)
            if on_failure is not None:
                on_failure(seed, exc)
            continue
        key = state.key()
        if key in seen:
            continue
        seen.add(key)
        solved.append(state)
    return solved
