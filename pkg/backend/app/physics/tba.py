"""
Solver de las ecuaciones TBA truncadas de la cadena osp(1|2).

Sistema resuelto (ln η_m sobre la malla, m = 1..M):

    ln η_1 = πβJ/cosh πu − K*ln(1+η_1⁻¹) + K*ln(1+η_2)
    ln η_m = K*ln(1+η_{m−1}) − K*ln(1+η_m⁻¹) + K*ln(1+η_{m+1}),  m ≥ 2

con cierre lineal para la fila M + 1:

    ln(1+η_{M+1}) = P_{M+1} + Λ_M*(ln(1+η_M) − P_M),  P_m = ln(1 + m(m+3)/2)

donde Λ_M tiene transformada λ_M(k), el cociente z_{M+1}/z_M de la
solución decreciente de la escalera linealizada en torno a η_m constantes.
Se reduce a la constante P_{M+1} en β = 0 y en las colas. A partir del
punto fijo se obtienen la energía libre, las densidades de partículas y
huecos, y la energía y entropía por sitio.
"""

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from functools import cached_property, lru_cache
from itertools import repeat
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres
from scipy.special import expit

from app.config.settings import RunConfig, SolverConfig, max_workers_from_env
from app.core.exceptions import (
    InvalidParameterError,
    NegativeDensityError,
    NonFiniteStateError,
    NumericalError,
    TailToleranceError,
    ThermodynamicInconsistencyError,
    UnconvergedStateError,
)
from app.core.logger import LogContext
from app.physics.kernels import (
    K_KERNEL,
    R_KERNEL,
    BatchConvolver,
    SpectralConvolver,
    TakahashiOperator,
    f_m_kernel,
)
from app.physics.models import DensityState, Grid, TbaState, ThermoRecord

logger = logging.getLogger(__name__)

LN3 = math.log(3.0)
GROUND_STATE_AFM = 4.0 * math.pi / (3.0 * math.sqrt(3.0)) - 1.0
NEGATIVE_DENSITY_GUARD = -1e-8
STRING_TAIL_TERMS = 20000
# Profundidad de la recurrencia hacia atrás del cierre
CLOSURE_DEPTH = 2000


# =============================================================================
# Constantes de alta temperatura
# =============================================================================

def high_t_constants(m_trunc: int) -> np.ndarray:
    """η_m = m(m+3)/2 para m = 1..M (solución exacta en β = 0)."""
    if not isinstance(m_trunc, int) or m_trunc < 1:
        raise InvalidParameterError("m_trunc", m_trunc, "un entero ≥ 1")
    m = np.arange(1, m_trunc + 1, dtype=float)
    return m * (m + 3.0) / 2.0


def high_t_recursion_residual(m_max: int = 49) -> float:
    """
    max_m |η_m² − (1+η_{m+1})(1+η_{m−1})/(1+η_m⁻¹)| / η_m², m = 2..m_max.
    """
    eta = high_t_constants(m_max + 1)
    m = np.arange(2, m_max + 1)
    lhs = eta[m - 1] ** 2
    rhs = (1.0 + eta[m]) * (1.0 + eta[m - 2]) / (1.0 + 1.0 / eta[m - 1])
    return float(np.max(np.abs(lhs - rhs) / lhs))


def _log_constants(m_trunc: int) -> np.ndarray:
    return np.log(high_t_constants(m_trunc))


def _closure_constant(m_trunc: int) -> float:
    """P_{M+1} = ln(1 + η_{M+1}) con η_{M+1} = (M+1)(M+4)/2."""
    return math.log1p((m_trunc + 1) * (m_trunc + 4) / 2.0)


def _closure_ratio(m_trunc: int) -> float:
    """λ_M(0): cociente z_{M+1}/z_M de la solución decreciente en k = 0."""
    M = float(m_trunc)
    return (2.0 * M + 5.0) * (M + 1.0) / ((2.0 * M + 3.0) * (M + 3.0))


def closure_multiplier(m_trunc: int, k) -> np.ndarray:
    """
    λ_M(k) = z_{M+1}/z_M para la solución decreciente en m de

        z_{m−1} + z_{m+1} = c_m(k) z_m,
        c_m(k) = (2 cosh(k/2)(m+1)(m+2) − 2)/(m(m+3)),

    la escalera linealizada en torno a η_m = m(m+3)/2 con z_m = b_m δln η_m.

    Recurrencia hacia atrás desde M + CLOSURE_DEPTH; el valor de arranque
    es el cociente asintótico e^{−κ}(1 + κ(m+1))/(1 + κm)·λ_m(0), κ = |k|/2.
    """
    if not isinstance(m_trunc, int) or m_trunc < 1:
        raise InvalidParameterError("m_trunc", m_trunc, "un entero ≥ 1")
    kappa = 0.5 * np.abs(np.asarray(k, dtype=float))
    start = m_trunc + CLOSURE_DEPTH
    with np.errstate(over="ignore"):
        two_cosh = 2.0 * np.cosh(kappa)
        ratio = (
            _closure_ratio(start) * np.exp(-kappa)
            * (1.0 + kappa * (start + 1.0)) / (1.0 + kappa * start)
        )
        for m in range(start, m_trunc, -1):
            c = (two_cosh * (m + 1.0) * (m + 2.0) - 2.0) / (m * (m + 3.0))
            ratio = 1.0 / (c - ratio)
    return ratio if ratio.ndim else float(ratio)


def free_energy_high_t_series(beta: float, J: float) -> float:
    """
    Comportamiento dominante a alta temperatura: f ≈ −T ln 3 − 5J/27.

    El término −5J/27 es tr(h)/9 por enlace (energía media a T = ∞).
    """
    if not beta > 0:
        raise InvalidParameterError("beta", beta, "β > 0")
    return -LN3 / beta - 5.0 * J / 27.0


# =============================================================================
# Operadores de la escalera de strings
# =============================================================================

def solver_grid(config: RunConfig, m_trunc: int) -> Grid:
    """
    Malla del solver para la truncación M.

    Semianchura max(L, extent_per_string·M) y paso ≤ max_spacing; nunca
    baja de los puntos configurados. Las colas de η_m se asientan a una
    distancia que crece con m.
    """
    settings = config.grid
    half_extent = max(settings.half_extent, settings.extent_per_string * m_trunc)
    needed = max(2, math.ceil(2.0 * half_extent / settings.max_spacing))
    points = max(settings.points, 1 << (needed - 1).bit_length())
    return Grid(float(half_extent), points)


@lru_cache(maxsize=8)
def closure_convolver(grid: Grid, m_trunc: int) -> SpectralConvolver:
    """Convolución con K*Λ_M (transformada λ_M(k)/(2 cosh(k/2)))."""
    return SpectralConvolver(
        grid, lambda k: K_KERNEL.fourier(k) * closure_multiplier(m_trunc, k)
    )


def _thomas(lower: np.ndarray, diag: np.ndarray, upper: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Sistema tridiagonal por columnas (eliminación de Thomas vectorizada)."""
    n = diag.shape[0]
    c = np.empty_like(diag)
    d = np.empty_like(rhs)
    c[0] = upper[0] / diag[0]
    d[0] = rhs[0] / diag[0]
    for i in range(1, n):
        denominator = diag[i] - lower[i] * c[i - 1]
        c[i] = upper[i] / denominator
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / denominator
    x = np.empty_like(rhs)
    x[-1] = d[-1]
    for i in range(n - 2, -1, -1):
        x[i] = d[i] - c[i] * x[i + 1]
    return x


class _LadderOperator:
    """
    v ↦ v − K*(a_m v_m + b_{m−1} v_{m−1} + b_{m+1} v_{m+1}),
    con el cierre −K*Λ_M*(b_M v_M) en la fila M.

    a = 1/(1+η), b = η/(1+η). Es I − F' del sistema TBA y a la vez el
    operador de la densidad total ρ_m = ρ_m^p + ρ_m^h.
    """

    def __init__(self, log_eta: np.ndarray, convolver: BatchConvolver,
                 closure: SpectralConvolver):
        self.a = expit(-log_eta)
        self.b = expit(log_eta)
        self.shape = log_eta.shape
        self.convolver = convolver
        self.closure = closure

    def __call__(self, vector: np.ndarray) -> np.ndarray:
        v = np.reshape(vector, self.shape)
        hole = self.b * v
        coupled = self.a * v
        coupled[1:] += hole[:-1]
        coupled[:-1] += hole[1:]
        out = v - self.convolver(coupled)
        out[-1] -= self.closure(hole[-1])
        return out.ravel()

    def as_operator(self) -> LinearOperator:
        size = self.a.size
        return LinearOperator((size, size), matvec=self, dtype=float)


class _ConstantEtaInverse:
    """
    Inversa exacta, modo a modo de Fourier, de ``_LadderOperator`` con
    η_m = m(m+3)/2; precondicionador de GMRES (Newton y densidades).
    """

    def __init__(self, grid: Grid, m_trunc: int):
        self.points = grid.points
        self.m_trunc = m_trunc
        k = 2.0 * np.pi * np.fft.rfftfreq(grid.points, d=grid.spacing)
        w = K_KERNEL.fourier(k)
        eta = high_t_constants(m_trunc)
        a = (1.0 / (1.0 + eta))[:, None]
        b = (eta / (1.0 + eta))[:, None]

        self.diag = 1.0 - w[None, :] * a
        self.diag[-1] -= w * closure_multiplier(m_trunc, k) * b[-1, 0]
        self.lower = np.zeros_like(self.diag)
        self.upper = np.zeros_like(self.diag)
        self.lower[1:] = -w[None, :] * b[:-1]
        self.upper[:-1] = -w[None, :] * b[1:]

    def __call__(self, vector: np.ndarray) -> np.ndarray:
        rows = np.reshape(vector, (self.m_trunc, self.points))
        spectrum = np.fft.rfft(rows, axis=-1)
        solved = _thomas(self.lower, self.diag, self.upper, spectrum)
        return np.fft.irfft(solved, n=self.points, axis=-1).ravel()

    def as_operator(self) -> LinearOperator:
        size = self.m_trunc * self.points
        return LinearOperator((size, size), matvec=self, dtype=float)


# =============================================================================
# Iteración de punto fijo
# =============================================================================

def _drive(grid: Grid, beta: float, J: float) -> np.ndarray:
    """πβJ/cosh(πu) = 2πβJ·K(u)."""
    return 2.0 * np.pi * beta * J * K_KERNEL(grid.nodes)


class _TbaMap:
    """Lado derecho del sistema TBA para una malla, β, J y M fijos."""

    def __init__(self, grid: Grid, m_trunc: int, beta: float, J: float):
        self.grid = grid
        self.m_trunc = m_trunc
        self.drive = _drive(grid, beta, J)
        self.log_constants = _log_constants(m_trunc)
        # Constantes asintóticas de la fuente: 2 ln η_m (identidad de alta T)
        self.source_constants = 2.0 * self.log_constants
        self.closure_constant = _closure_constant(m_trunc)
        self.last_constant = math.log1p(m_trunc * (m_trunc + 3) / 2.0)
        self.convolver = BatchConvolver(K_KERNEL, grid)
        self.closure = closure_convolver(grid, m_trunc)

    def __call__(self, log_eta: np.ndarray) -> np.ndarray:
        plus = np.logaddexp(0.0, log_eta)    # ln(1 + η)
        minus = np.logaddexp(0.0, -log_eta)  # ln(1 + η⁻¹)
        source = -minus
        source[1:] += plus[:-1]
        source[:-1] += plus[1:]
        source[-1] += self.closure_constant
        out = self.convolver(source, self.source_constants)
        out[-1] += self.closure(plus[-1] - self.last_constant)
        out[0] += self.drive
        return out

    @cached_property
    def preconditioner(self) -> _ConstantEtaInverse:
        return _ConstantEtaInverse(self.grid, self.m_trunc)

    def linearized(self, log_eta: np.ndarray) -> _LadderOperator:
        """I − F'(ln η)."""
        return _LadderOperator(log_eta, self.convolver, self.closure)


@lru_cache(maxsize=8)
def _tba_map(grid: Grid, m_trunc: int, beta: float, J: float) -> _TbaMap:
    return _TbaMap(grid, m_trunc, beta, J)


def initialize_eta(
    config: RunConfig,
    beta: float,
    J: float,
    m_trunc: Optional[int] = None,
) -> TbaState:
    """
    Estado inicial: ln η_m = ln(m(m+3)/2), más el término de arrastre en m = 1.

    La malla depende de M (``solver_grid``). En β = 0 es el punto fijo
    exacto.
    """
    if not (math.isfinite(beta) and beta >= 0):
        raise InvalidParameterError("beta", beta, "β ≥ 0 finito")
    if m_trunc is None:
        m_trunc = config.m_trunc_for(math.inf if beta == 0 else 1.0 / beta)
    grid = solver_grid(config, m_trunc)
    constants = _log_constants(m_trunc)
    log_eta = np.repeat(constants[:, None], grid.points, axis=1)
    log_eta[0] += _drive(grid, beta, J)
    return TbaState(
        grid=grid,
        m_trunc=m_trunc,
        log_eta=log_eta,
        beta=float(beta),
        J=float(J),
        damping=config.solver.damping,
    )


def iterate_once(state: TbaState, damping: Optional[float] = None) -> TbaState:
    """
    Un paso amortiguado: ln η ← (1−ω) ln η + ω F(ln η).

    El residuo del estado devuelto es max|F(ln η) − ln η| del estado de
    entrada. El mapa F se reutiliza entre llamadas con la misma malla,
    M, β y J.

    Raises:
        NonFiniteStateError: Si F produce valores no finitos
    """
    omega = state.damping if damping is None else damping
    tba_map = _tba_map(state.grid, state.m_trunc, state.beta, state.J)
    image = tba_map(state.log_eta)
    if not np.all(np.isfinite(image)):
        raise NonFiniteStateError(state.iterations + 1)
    residual = float(np.max(np.abs(image - state.log_eta)))
    return TbaState(
        grid=state.grid,
        m_trunc=state.m_trunc,
        log_eta=(1.0 - omega) * state.log_eta + omega * image,
        beta=state.beta,
        J=state.J,
        converged=False,
        iterations=state.iterations + 1,
        residual=residual,
        damping=omega,
        residual_history=state.residual_history + [residual],
    )


def _anderson_mix(x_history: List[np.ndarray], f_history: List[np.ndarray],
                  depth: int, omega: float) -> np.ndarray:
    """
    Mezcla de Anderson sobre las últimas ``depth`` iteraciones.

    Combinación de norma mínima de los residuos recientes; con menos de
    dos elementos se reduce a la mezcla lineal.
    """
    x_last = x_history[-1]
    f_last = f_history[-1]
    n = min(len(x_history), depth)
    if n < 2:
        return (1.0 - omega) * x_last + omega * f_last

    X = np.asarray([x.ravel() for x in x_history[-n:]])
    F = np.asarray([f.ravel() for f in f_history[-n:]])
    R = F - X
    dR = np.diff(R, axis=0)
    r_last = R[-1]
    A = dR @ dR.T
    b = dR @ r_last
    A.flat[::A.shape[0] + 1] += 1e-10

    try:
        theta = np.linalg.solve(A, b)
    except np.linalg.LinAlgError:
        return (1.0 - omega) * x_last + omega * f_last

    dX = np.diff(X, axis=0)
    mixed = x_last.ravel() + omega * r_last - theta @ (dX + omega * dR)
    return mixed.reshape(x_last.shape)


def _newton_step(
    tba_map: _TbaMap,
    x: np.ndarray,
    image: np.ndarray,
    residual: float,
    solver: SolverConfig,
) -> Optional[Tuple[np.ndarray, np.ndarray, float]]:
    """
    Paso de Newton inexacto: (I − F'(x))Δ = F(x) − x por GMRES
    precondicionado, con retroceso hasta Δ/32.

    Returns:
        (x + tΔ, F(x + tΔ), residuo), o None si ningún t reduce el residuo
    """
    operator = tba_map.linearized(x).as_operator()
    delta, info = gmres(
        operator, (image - x).ravel(), rtol=solver.newton_rtol, atol=0.0,
        restart=30, maxiter=solver.newton_max_iter,
        M=tba_map.preconditioner.as_operator(),
    )
    if info != 0:
        logger.debug("GMRES de Newton incompleto (info=%d)", info)
    delta = delta.reshape(x.shape)

    t = 1.0
    while t >= 1.0 / 32.0:
        trial = x + t * delta
        trial_image = tba_map(trial)
        if np.all(np.isfinite(trial_image)):
            trial_residual = float(np.max(np.abs(trial_image - trial)))
            if trial_residual < residual:
                return trial, trial_image, trial_residual
        t *= 0.5
    return None


def solve(
    config: RunConfig,
    beta: float,
    J: float,
    m_trunc: Optional[int] = None,
) -> TbaState:
    """
    Resuelve el sistema TBA truncado.

    Iteración amortiguada con Anderson hasta que el residuo baja de
    ``newton_switch``; desde ahí pasos de Newton-GMRES con el mismo
    precondicionador que las densidades. Si Newton no reduce el residuo
    se vuelve a Anderson. ω se divide por dos (y se vacía la historia)
    cada vez que el residuo crece; tras diez descensos seguidos se
    recupera un 20 % hasta el valor configurado. Cada paso, de Anderson
    o de Newton, cuenta como una iteración. Si no converge en
    ``max_iter`` se devuelve el estado con ``converged=False`` y un aviso
    en el log.

    Raises:
        NonFiniteStateError: Valores no finitos (malla o truncación insuficientes)
    """
    solver = config.solver
    state = initialize_eta(config, beta, J, m_trunc)
    tba_map = _tba_map(state.grid, state.m_trunc, state.beta, state.J)

    x = state.log_eta
    omega = solver.damping
    x_history: List[np.ndarray] = []
    f_history: List[np.ndarray] = []
    history: List[float] = []
    previous = math.inf
    streak = 0
    converged = False
    iterations = 0
    newton = solver.newton_switch > 0
    pending: Optional[Tuple[np.ndarray, float]] = None

    label = f"TBA T={state.temperature:.6g} J={J:g} M={state.m_trunc}"
    with LogContext(logger, label, level=logging.DEBUG):
        for iterations in range(1, solver.max_iter + 1):
            if pending is None:
                image = tba_map(x)
                if not np.all(np.isfinite(image)):
                    raise NonFiniteStateError(iterations)
                residual = float(np.max(np.abs(image - x)))
            else:
                image, residual = pending
                pending = None
            history.append(residual)

            if residual < solver.tolerance:
                x = image
                converged = True
                break

            if newton and residual < solver.newton_switch:
                step = _newton_step(tba_map, x, image, residual, solver)
                if step is not None:
                    x = step[0]
                    pending = (step[1], step[2])
                    continue
                logger.debug("%s: Newton sin descenso en residuo %.2e, vuelta a Anderson",
                             label, residual)
                newton = False
                x_history, f_history = [], []

            if residual > previous:
                omega = max(0.5 * omega, solver.min_damping)
                x_history, f_history = [], []
                streak = 0
            else:
                streak += 1
                if streak >= 10:
                    omega = min(1.2 * omega, solver.damping)
                    streak = 0
            previous = residual

            x_history.append(x)
            f_history.append(image)
            x_history = x_history[-(solver.anderson_depth + 1):]
            f_history = f_history[-(solver.anderson_depth + 1):]
            x = _anderson_mix(x_history, f_history, solver.anderson_depth, omega)

            if iterations % 500 == 0:
                logger.debug("%s iter=%d residuo=%.3e ω=%.4g", label, iterations, residual, omega)

    result = TbaState(
        grid=state.grid,
        m_trunc=state.m_trunc,
        log_eta=x,
        beta=state.beta,
        J=state.J,
        converged=converged,
        iterations=iterations,
        residual=history[-1] if history else 0.0,
        damping=omega,
        residual_history=history,
    )

    if not converged:
        logger.warning("%s sin convergencia: residuo %.3e tras %d iteraciones",
                       label, result.residual, iterations)
    elif result.tail_defect() > solver.tail_tolerance:
        logger.warning("%s: colas de η_m a %.2e de m(m+3)/2",
                       label, result.tail_defect())
    else:
        logger.info("%s convergido en %d iteraciones (residuo %.2e)",
                    label, iterations, result.residual)
    return result


def check_tails(state: TbaState, tolerance: float) -> None:
    """
    Exige que ln η_m alcance ln(m(m+3)/2) en ±L.

    Raises:
        TailToleranceError: Si max|η_m(±L)/η_m^∞ − 1| > tolerance
    """
    defect = state.tail_defect()
    if defect > tolerance:
        raise TailToleranceError(
            defect, tolerance, details={"m_trunc": state.m_trunc, "L": state.grid.half_extent}
        )


# =============================================================================
# Energía libre y comprobaciones del punto fijo
# =============================================================================

def _require_converged(state: TbaState) -> None:
    if not state.converged:
        raise UnconvergedStateError(state.residual, state.iterations)
    if not state.beta > 0:
        raise InvalidParameterError("beta", state.beta, "β > 0")


def free_energy(state: TbaState) -> float:
    """
    f = J(4π/(3√3) − 1) − T ∫ R(u) ln(1+η_1(u)) du.

    La constante asintótica ln 3 de ln(1+η_1) se integra analíticamente
    (∫R = 1).

    Raises:
        UnconvergedStateError: Si el estado no ha convergido
    """
    _require_converged(state)
    grid = state.grid
    plus = np.logaddexp(0.0, state.log_eta[0])
    integral = grid.spacing * float(np.sum(R_KERNEL(grid.nodes) * (plus - LN3))) + LN3
    return state.J * GROUND_STATE_AFM - state.temperature * integral


def residual_unreduced(state: TbaState, m_max: int = 3, window: float = 5.0) -> float:
    """
    Residuo de la forma no reducida

        ln(1+η_m) = 2πβJ f_m + Σ_l A_{ml} ln(1+η_l⁻¹)

    para m ≤ ``m_max`` y |u| ≤ ``window``. Los términos l > M usan las
    constantes de alta temperatura: Σ_{l>M} m·ln(1+η_l⁻¹) = m ln((M+3)/(M+1)).
    """
    grid = state.grid
    M = state.m_trunc
    m_values = list(range(1, min(m_max, M) + 1))
    minus = np.logaddexp(0.0, -state.log_eta)
    eta_c = high_t_constants(M)
    minus_constants = np.log1p(1.0 / eta_c)

    operator = TakahashiOperator(grid)
    scattered = operator.apply(minus, minus_constants, m_values)

    mask = np.abs(grid.nodes) <= window
    worst = 0.0
    for i, m in enumerate(m_values):
        lhs = np.logaddexp(0.0, state.log_eta[m - 1])
        rhs = (
            2.0 * np.pi * state.beta * state.J * f_m_kernel(m, grid.nodes)
            + scattered[i]
            + m * math.log((M + 3.0) / (M + 1.0))
        )
        worst = max(worst, float(np.max(np.abs(lhs - rhs)[mask])))
    return worst


# =============================================================================
# Densidades
# =============================================================================

def _density_profile(m_values: np.ndarray) -> np.ndarray:
    """
    Solución decreciente de la recursión en m de ∫ρ_m^p con η_m constantes:
    φ(m) = (2m+3)/(m(m+1)(m+2)(m+3)).
    """
    m = np.asarray(m_values, dtype=float)
    return (2.0 * m + 3.0) / (m * (m + 1.0) * (m + 2.0) * (m + 3.0))


def _density_grid(state: TbaState, extent: int) -> Tuple[Grid, int]:
    grid = state.grid
    wide = Grid(grid.half_extent * extent, grid.points * extent)
    offset = (extent - 1) * grid.points // 2
    return wide, offset


def recover_densities(
    state: TbaState,
    extent: int = 1,
    tol: float = 1e-10,
    max_iter: int = 50,
) -> DensityState:
    """
    Densidades ρ_m^p y ρ_m^h a partir del punto fijo.

    Se resuelve, para la densidad total ρ_n = ρ_n^p + ρ_n^h,

        ρ_n − K*(a_n ρ_n + b_{n−1} ρ_{n−1} + b_{n+1} ρ_{n+1}) = δ_{n1} K

    con a = 1/(1+η), b = η/(1+η), mediante GMRES. Con ``extent`` > 1 la
    malla se amplía (mismo paso) y fuera de la malla del estado ln η_m
    toma su constante asintótica. El cierre en n = M es
    b_{M+1}ρ_{M+1} = Λ_M*(b_M ρ_M), el mismo que el del sistema TBA.

    Raises:
        UnconvergedStateError: Si el estado no ha convergido
        NegativeDensityError: Si alguna densidad baja de −1e−8
    """
    _require_converged(state)
    M = state.m_trunc
    grid, offset = _density_grid(state, extent)
    points = grid.points

    log_eta = np.repeat(_log_constants(M)[:, None], points, axis=1)
    log_eta[:, offset:offset + state.grid.points] = state.log_eta
    ladder = _LadderOperator(
        log_eta, BatchConvolver(K_KERNEL, grid), closure_convolver(grid, M)
    )
    operator = ladder.as_operator()
    preconditioner = _ConstantEtaInverse(grid, M).as_operator()
    rhs = np.zeros((M, points))
    rhs[0] = K_KERNEL(grid.nodes)

    iterations = {"count": 0}

    def count(_):
        iterations["count"] += 1

    with LogContext(logger, f"Densidades M={M} malla={points}", level=logging.DEBUG):
        solution, info = gmres(
            operator, rhs.ravel(), x0=preconditioner.matvec(rhs.ravel()),
            rtol=tol, atol=0.0, restart=20, maxiter=max_iter, M=preconditioner,
            callback=count, callback_type="pr_norm",
        )
    residual = float(np.max(np.abs(ladder(solution) - rhs.ravel())))
    if info != 0:
        logger.warning("GMRES de densidades sin convergencia (info=%d, residuo %.2e)",
                       info, residual)

    rho = solution.reshape(M, points)
    rho_p = ladder.a * rho
    rho_h = ladder.b * rho

    nodes = grid.nodes
    window = (np.abs(nodes) >= 0.5 * grid.half_extent) & (np.abs(nodes) <= 0.75 * grid.half_extent)
    tail_coefficients = np.mean(rho_p[:, window] * nodes[window] ** 2, axis=1)

    dens = DensityState(
        grid=grid,
        rho_p=rho_p,
        rho_h=rho_h,
        tail_coefficients=tail_coefficients,
        solver_info={
            "info": int(info),
            "iterations": iterations["count"],
            "residual": residual,
            "offset": offset,
            "extent": extent,
            "closure_ratio": _closure_ratio(M),
        },
    )
    minimum, string_index = dens.min_value()
    if minimum < NEGATIVE_DENSITY_GUARD:
        raise NegativeDensityError(minimum, string_index)
    return dens


def density_on_state_grid(dens: DensityState, state: TbaState) -> np.ndarray:
    """ρ^p restringida a la malla del estado TBA."""
    offset = dens.solver_info.get("offset", 0)
    return dens.rho_p[:, offset:offset + state.grid.points]


def _entropy_density(log_eta: np.ndarray) -> np.ndarray:
    """ln(1+η) + η ln(1+η⁻¹), estable para |ln η| grande."""
    plus = np.logaddexp(0.0, log_eta)
    t = np.exp(-np.abs(log_eta))
    # η ln(1+1/η): log1p(t)/t si η > 1, η·ln(1+1/η) si η ≤ 1
    large = np.log1p(t) / np.where(t > 0, t, 1.0)
    large = np.where(t > 0, large, 1.0)
    small = np.exp(np.minimum(log_eta, 0.0)) * np.logaddexp(0.0, -log_eta)
    return plus + np.where(log_eta > 0, large, small)


def _string_tail_entropy(m_trunc: int, n_last: float) -> float:
    """Σ_{m>M} ∫ρ_m^p g_m con η_m constantes y la solución decreciente φ(m)."""
    m = np.arange(m_trunc + 1, m_trunc + 1 + STRING_TAIL_TERMS, dtype=float)
    eta = m * (m + 3.0) / 2.0
    g = np.log1p(eta) + eta * np.log1p(1.0 / eta)
    weights = _density_profile(m) / _density_profile(np.array([m_trunc]))[0]
    return float(n_last * np.sum(weights * g))


def thermo_observables(
    dens: DensityState,
    state: TbaState,
    tolerance: Optional[float] = None,
) -> Tuple[float, float]:
    """
    Energía y entropía por sitio a partir de las densidades.

        e = J(Σ_m ∫ 2π f_m ρ_m^p du − 1)
        s = Σ_m ∫ ρ_m^p [ln(1+η_m) + η_m ln(1+η_m⁻¹)] du

    Las colas algebraicas C_m/u² fuera de la malla se integran
    analíticamente, y los strings m > M se suman con η_m constantes.

    Args:
        tolerance: Si se indica, exige |(e − T s) − f| ≤ tolerance

    Raises:
        ThermodynamicInconsistencyError: Si las dos rutas discrepan
    """
    _require_converged(state)
    grid = dens.grid
    M = state.m_trunc
    offset = dens.solver_info.get("offset", 0)
    h = grid.spacing
    L = grid.half_extent
    nodes = grid.nodes
    C = dens.tail_coefficients
    m = np.arange(1, M + 1, dtype=float)

    # Energía
    energy_kernel = 2.0 * np.pi * np.array([f_m_kernel(int(k), nodes) for k in m])
    interior = h * np.sum(energy_kernel * dens.rho_p, axis=1)
    half = m / 2.0
    energy_tails = 2.0 * m * C / half ** 2 * (
        1.0 / L - (np.pi / 2.0 - np.arctan(L / half)) / half
    )
    e = state.J * (float(np.sum(interior + energy_tails)) - 1.0)

    # Entropía
    log_eta = np.repeat(_log_constants(M)[:, None], grid.points, axis=1)
    log_eta[:, offset:offset + state.grid.points] = state.log_eta
    g = _entropy_density(log_eta)
    eta_c = high_t_constants(M)
    g_inf = np.log1p(eta_c) + eta_c * np.log1p(1.0 / eta_c)
    entropy_rows = h * np.sum(dens.rho_p * g, axis=1) + 2.0 * C * g_inf / L
    n_last = h * float(np.sum(dens.rho_p[-1])) + 2.0 * C[-1] / L
    s = float(np.sum(entropy_rows)) + _string_tail_entropy(M, n_last)

    if tolerance is not None:
        f = free_energy(state)
        difference = abs((e - state.temperature * s) - f)
        if difference > tolerance:
            raise ThermodynamicInconsistencyError(difference, tolerance)
    return e, s


def epsilon_low_t(m: int, u, J: float):
    """
    ε_m(u) = 2πJ f_m(u): límite T → 0 de T ln η_m para J > 0.

    Raises:
        InvalidParameterError: Si J ≤ 0
    """
    if not J > 0:
        raise InvalidParameterError("J", J, "J > 0")
    return 2.0 * np.pi * J * f_m_kernel(m, u)


# =============================================================================
# Barrido de temperaturas
# =============================================================================

def consistency_tolerance(config: RunConfig, temperature: float) -> float:
    if temperature < config.solver.low_t_threshold:
        return config.solver.low_t_consistency_tolerance
    return config.solver.consistency_tolerance


def solve_row(temperature: float, J: float, config: RunConfig) -> ThermoRecord:
    """
    Resuelve una temperatura y devuelve su registro.

    Los fallos numéricos, incluidas las colas de η_m fuera de
    ``tail_tolerance``, se registran en la fila (``status="failed"``) y
    no interrumpen el barrido.
    """
    m_trunc = config.m_trunc_for(temperature)
    record = ThermoRecord(T=float(temperature), J=float(J), M_trunc=m_trunc)
    try:
        state = solve(config, 1.0 / temperature, J, m_trunc)
        record.iterations = state.iterations
        record.residual = state.residual
        record.f = free_energy(state)
        check_tails(state, config.solver.tail_tolerance)
        dens = recover_densities(
            state,
            extent=config.solver.density_extent,
            tol=config.solver.density_tolerance,
            max_iter=config.solver.density_max_iter,
        )
        record.e, record.s = thermo_observables(
            dens, state, tolerance=consistency_tolerance(config, temperature)
        )
    except NumericalError as exc:
        logger.error("T=%g J=%g: %s", temperature, J, exc)
        record.status = "failed"
        record.error = str(exc)
    return record


def _worker_count(tasks: int, max_workers: Optional[int]) -> int:
    default = min(tasks, os.cpu_count() or 1)
    cap = max_workers_from_env(default)
    if max_workers is not None:
        cap = min(cap, max_workers)
    return max(1, min(default, cap))


def sweep(
    config: RunConfig,
    J: Optional[float] = None,
    temperatures: Optional[Sequence[float]] = None,
    max_workers: Optional[int] = None,
) -> List[ThermoRecord]:
    """
    Barrido de temperaturas en paralelo.

    Los registros se devuelven en el orden de entrada con independencia
    del orden de finalización. Con un solo proceso se calcula en línea.
    """
    J = config.sweep.J if J is None else J
    temps = list(config.temperature_list() if temperatures is None else temperatures)
    if not temps:
        raise InvalidParameterError("temperatures", temps, "al menos una temperatura")

    workers = _worker_count(len(temps), max_workers)
    logger.info("Barrido J=%g: %d temperaturas, %d procesos", J, len(temps), workers)

    if workers == 1:
        return [solve_row(t, J, config) for t in temps]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(solve_row, temps, repeat(J), repeat(config)))
