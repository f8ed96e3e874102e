"""Active (BS-side) beamformer design for a two-user SIC pair.

User m is the weak user decoded first at both receivers; user n cancels m
and then decodes its own signal interference-free. Powers are minimized
subject to SINR targets, or a weighted sum rate is maximized under a power
budget.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import cvxpy as cp
import numpy as np
import structlog
from scipy.optimize import linprog, minimize_scalar

from ris_noma.beamforming.sinr import BeamformerSet, sic_sinrs
from ris_noma.channel_models import stream_rng
from ris_noma.errors import DimensionError, DomainError, InfeasibleError

logger = structlog.get_logger(__name__)

CERTIFY_TOLERANCE = 1e-6
RANK_ONE_RATIO = 1e-6
RANDOMIZATIONS = 100
_GRID_POINTS = 401
_DEGENERATE = 1e-12


class ActiveMethod(str, Enum):
    STRUCTURED = "structured"
    RELAXATION = "relaxation"


@dataclass
class ActiveSolution:
    """Beamformers plus the diagnostics of how they were obtained."""

    beamformers: BeamformerSet
    power: float
    method: ActiveMethod
    lower_bound: Optional[float] = None
    quasi_degraded: bool = False
    randomized: bool = False
    certified: bool = True
    report: dict = field(default_factory=dict)

    @property
    def gap(self) -> Optional[float]:
        if self.lower_bound is None or self.lower_bound <= 0:
            return None
        return (self.power - self.lower_bound) / self.lower_bound


def _channels(h_m: np.ndarray, h_n: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    a = np.asarray(h_m, dtype=complex).reshape(-1)
    b = np.asarray(h_n, dtype=complex).reshape(-1)
    if a.shape != b.shape:
        msg = f"channel vectors disagree in length: {a.shape[0]} vs {b.shape[0]}"
        raise DimensionError(msg)
    if not np.any(a) or not np.any(b):
        msg = "channels must be nonzero"
        raise DomainError(msg)
    return a, b


def _targets(targets: Sequence[float]) -> Tuple[float, float]:
    t_m, t_n = (float(t) for t in targets)
    if not (t_m > 0 and t_n > 0):
        msg = f"SINR targets must be > 0, got ({t_m}, {t_n})"
        raise DomainError(msg)
    return t_m, t_n


def _is_degenerate(a: np.ndarray, b: np.ndarray) -> bool:
    gram_det = (np.vdot(a, a) * np.vdot(b, b)).real - abs(np.vdot(a, b)) ** 2
    return gram_det <= _DEGENERATE * (np.vdot(a, a) * np.vdot(b, b)).real


def _min_norm(h_m: np.ndarray, h_n: np.ndarray, alpha: complex, beta: complex) -> np.ndarray:
    """Smallest w with h_m^H w = alpha and h_n^H w = beta."""
    stacked = np.column_stack([h_m, h_n])
    coeffs = np.linalg.solve(stacked.conj().T @ stacked, np.array([alpha, beta]))
    return stacked @ coeffs


def meets_targets(
    h_m: np.ndarray,
    h_n: np.ndarray,
    beamformers: BeamformerSet,
    targets: Sequence[float],
    noise: float,
    *,
    enforce_sic: bool = True,
    tolerance: float = CERTIFY_TOLERANCE,
) -> bool:
    """Re-evaluate every constraint, including r_nm >= r_mm when SIC is enforced."""
    t_m, t_n = targets
    mm, nm, nn = sic_sinrs(h_m, h_n, beamformers[0], beamformers[1], noise)
    ok = mm >= t_m * (1 - tolerance) and nn >= t_n * (1 - tolerance)
    if enforce_sic:
        ok = ok and nm >= t_m * (1 - tolerance) and nm >= mm * (1 - tolerance)
    return bool(ok)


def _degenerate_solution(
    a: np.ndarray, b: np.ndarray, t_m: float, t_n: float, noise: float, enforce_sic: bool
) -> BeamformerSet:
    g_m = float(np.vdot(a, a).real)
    g_n = float(np.vdot(b, b).real)
    kappa = math.sqrt(g_n / g_m)
    if enforce_sic and kappa < 1.0:
        msg = (
            f"collinear channels with |h_n|/|h_m| = {kappa:.6g} < 1 leave user n "
            "unable to cancel user m"
        )
        logger.warning("active_infeasible", kappa=kappa)
        raise InfeasibleError(msg, {"kappa": kappa})
    p_n = t_n * noise / g_n
    p_m = t_m * (p_n + noise / g_m)
    direction = a / math.sqrt(g_m)
    return BeamformerSet.of(math.sqrt(p_m) * direction, math.sqrt(p_n) * direction)


def _structured(
    a: np.ndarray, b: np.ndarray, t_m: float, t_n: float, noise: float, enforce_sic: bool
) -> BeamformerSet:
    """Two-user closed form searched over the leakage of w_n onto user m.

    For a given leakage e = |h_m^H w_n|^2 the min-norm beamformers follow from
    the inverse Gram matrix G of [h_m, h_n]; w_m is pinned to make user m's
    own constraint tight so that the SIC rate ordering holds.
    """
    stacked = np.column_stack([a, b])
    inverse = np.linalg.inv(stacked.conj().T @ stacked)
    g11, g22 = inverse[0, 0].real, inverse[1, 1].real
    g12 = inverse[0, 1]
    c12 = abs(g12)
    i_n = t_n * noise
    b0 = math.sqrt(t_m * (i_n + noise))
    norm_m = float(np.vdot(a, a).real)

    def magnitudes(s: float) -> Tuple[float, float]:
        a0 = math.sqrt(t_m * (s * s + noise))
        return a0, max(b0, a0 * c12 / g22)

    def total(s: float) -> float:
        p_n = s * s * g11 + i_n * g22 - 2 * s * math.sqrt(i_n) * c12
        if not enforce_sic:
            return p_n + t_m * (s * s + noise) / norm_m
        am, bm = magnitudes(s)
        return p_n + am * am * g11 + bm * bm * g22 - 2 * am * bm * c12

    s_hi = math.sqrt(i_n) * c12 / g11
    if enforce_sic:
        s_hi = max(s_hi, math.sqrt(max(0.0, b0 * b0 * c12 * c12 / (g11 * g11 * t_m) - noise)))
    grid = np.linspace(0.0, s_hi, _GRID_POINTS) if s_hi > 0 else np.zeros(1)
    values = np.array([total(float(s)) for s in grid])
    best = int(np.argmin(values))
    s_best = float(grid[best])
    if grid.shape[0] > 1:
        lo = float(grid[max(best - 1, 0)])
        hi = float(grid[min(best + 1, grid.shape[0] - 1)])
        refined = minimize_scalar(total, bounds=(lo, hi), method="bounded")
        if refined.success and refined.fun < values[best]:
            s_best = float(refined.x)

    # relative phases that cancel the cross term of the Gram quadratic form
    rotate = -np.exp(1j * np.angle(g12)) if c12 > 0 else 1.0
    w_n = _min_norm(a, b, s_best * rotate, math.sqrt(i_n))
    if enforce_sic:
        am, bm = magnitudes(s_best)
        w_m = _min_norm(a, b, am, bm * np.conj(rotate))
    else:
        w_m = math.sqrt(t_m * (s_best * s_best + noise)) * a / norm_m
    return BeamformerSet.of(w_m, w_n)


def _powers_for_directions(
    a: np.ndarray,
    b: np.ndarray,
    u_m: np.ndarray,
    u_n: np.ndarray,
    t_m: float,
    t_n: float,
    noise: float,
    enforce_sic: bool,
) -> Optional[BeamformerSet]:
    """Cheapest powers for fixed unit directions, by a two-variable LP."""
    mm, mn = abs(np.vdot(a, u_m)) ** 2, abs(np.vdot(a, u_n)) ** 2
    nm, nn = abs(np.vdot(b, u_m)) ** 2, abs(np.vdot(b, u_n)) ** 2
    rows = [[-mm, t_m * mn], [0.0, -nn]]
    rhs = [-t_m * noise, -t_n * noise]
    if enforce_sic:
        rows.append([-nm, t_m * nn])
        rhs.append(-t_m * noise)
    result = linprog(
        np.ones(2), A_ub=np.array(rows), b_ub=np.array(rhs), bounds=[(0, None)] * 2, method="highs"
    )
    if result.status != 0:
        return None
    p_m, p_n = result.x
    return BeamformerSet.of(math.sqrt(max(p_m, 0.0)) * u_m, math.sqrt(max(p_n, 0.0)) * u_n)


def _solve_relaxation(
    a: np.ndarray, b: np.ndarray, t_m: float, t_n: float, noise: float, enforce_sic: bool
) -> Tuple[float, np.ndarray, np.ndarray]:
    antennas = a.shape[0]
    q_m = np.outer(a, a.conj())
    q_n = np.outer(b, b.conj())
    w_m = cp.Variable((antennas, antennas), hermitian=True)
    w_n = cp.Variable((antennas, antennas), hermitian=True)
    constraints = [
        w_m >> 0,
        w_n >> 0,
        cp.real(cp.trace(q_m @ w_m)) >= t_m * (cp.real(cp.trace(q_m @ w_n)) + noise),
        cp.real(cp.trace(q_n @ w_n)) >= t_n * noise,
    ]
    if enforce_sic:
        constraints.append(
            cp.real(cp.trace(q_n @ w_m)) >= t_m * (cp.real(cp.trace(q_n @ w_n)) + noise)
        )
    problem = cp.Problem(cp.Minimize(cp.real(cp.trace(w_m + w_n))), constraints)
    for solver in (cp.SCS, cp.CLARABEL):
        try:
            problem.solve(solver=solver)
        except cp.SolverError as e:
            logger.debug("relaxation_solver_failed", solver=solver, error=str(e))
            continue
        if problem.status in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
            return float(problem.value), np.asarray(w_m.value), np.asarray(w_n.value)
    msg = f"semidefinite relaxation failed with status {problem.status}"
    raise InfeasibleError(msg, {"status": str(problem.status)})


def _principal(matrix: np.ndarray) -> Tuple[np.ndarray, bool]:
    values, vectors = np.linalg.eigh((matrix + matrix.conj().T) / 2)
    top = max(values[-1], 0.0)
    rank_one = values.shape[0] == 1 or max(values[-2], 0.0) <= RANK_ONE_RATIO * top
    return vectors[:, -1], bool(rank_one)


def _randomized_directions(
    matrix: np.ndarray, rng: np.random.Generator, draws: int
) -> np.ndarray:
    values, vectors = np.linalg.eigh((matrix + matrix.conj().T) / 2)
    root = vectors * np.sqrt(np.clip(values, 0.0, None))[None, :]
    size = (draws, matrix.shape[0])
    samples = (rng.standard_normal(size) + 1j * rng.standard_normal(size)) / math.sqrt(2.0)
    directions = samples @ root.T
    norms = np.linalg.norm(directions, axis=1, keepdims=True)
    return directions / np.where(norms > 0, norms, 1.0)


def solve_active_power_min(
    h_m: np.ndarray,
    h_n: np.ndarray,
    targets: Sequence[float],
    noise: float = 1.0,
    *,
    method: ActiveMethod = ActiveMethod.STRUCTURED,
    enforce_sic: bool = True,
    seed: int = 0,
) -> ActiveSolution:
    """Minimum-power beamformers meeting both users' SINR targets.

    ``RELAXATION`` also solves the semidefinite relaxation: its value is a
    lower bound, rank-one factors are taken directly and otherwise Gaussian
    randomization proposes directions. Every candidate is re-checked against
    the constraints and the cheapest certified one is returned.

    Raises:
        InfeasibleError: If user n cannot cancel user m on collinear channels
    """
    if not noise > 0:
        msg = f"noise power must be > 0, got {noise}"
        raise DomainError(msg)
    a, b = _channels(h_m, h_n)
    t_m, t_n = _targets(targets)
    method = ActiveMethod(method)

    degenerate = _is_degenerate(a, b)
    if degenerate:
        structured = _degenerate_solution(a, b, t_m, t_n, noise, enforce_sic)
    else:
        structured = _structured(a, b, t_m, t_n, noise, enforce_sic)
    certified = meets_targets(a, b, structured, (t_m, t_n), noise, enforce_sic=enforce_sic)
    if method is ActiveMethod.STRUCTURED:
        return ActiveSolution(structured, structured.total_power, method, certified=certified)

    bound, matrix_m, matrix_n = _solve_relaxation(a, b, t_m, t_n, noise, enforce_sic)
    u_m, rank_m = _principal(matrix_m)
    u_n, rank_n = _principal(matrix_n)
    candidates: List[BeamformerSet] = []
    direct = _powers_for_directions(a, b, u_m, u_n, t_m, t_n, noise, enforce_sic)
    if direct is not None:
        candidates.append(direct)
    randomized = not (rank_m and rank_n)
    if randomized:
        logger.info("relaxation_rank_fallback", draws=RANDOMIZATIONS)
        rng = stream_rng(seed, 4)
        dirs_m = _randomized_directions(matrix_m, rng, RANDOMIZATIONS)
        dirs_n = _randomized_directions(matrix_n, rng, RANDOMIZATIONS)
        for v_m, v_n in zip(dirs_m, dirs_n):
            candidate = _powers_for_directions(a, b, v_m, v_n, t_m, t_n, noise, enforce_sic)
            if candidate is not None:
                candidates.append(candidate)

    best, best_certified = structured, certified
    for candidate in candidates:
        ok = meets_targets(a, b, candidate, (t_m, t_n), noise, enforce_sic=enforce_sic)
        if ok and (not best_certified or candidate.total_power < best.total_power):
            best, best_certified = candidate, True
    solution = ActiveSolution(
        best,
        best.total_power,
        method,
        lower_bound=bound,
        quasi_degraded=rank_m and rank_n,
        randomized=randomized,
        certified=best_certified,
        report={"candidates": len(candidates), "degenerate": degenerate},
    )
    logger.debug(
        "active_power_min",
        power=solution.power,
        lower_bound=bound,
        gap=solution.gap,
        quasi_degraded=solution.quasi_degraded,
    )
    return solution


def active_power_min(
    h_m: np.ndarray,
    h_n: np.ndarray,
    sinr_targets: Sequence[float],
    noise: float = 1.0,
    *,
    method: ActiveMethod = ActiveMethod.STRUCTURED,
    enforce_sic: bool = True,
) -> BeamformerSet:
    return solve_active_power_min(
        h_m, h_n, sinr_targets, noise, method=method, enforce_sic=enforce_sic
    ).beamformers


def quasi_degraded(h_m: np.ndarray, h_n: np.ndarray, targets: Sequence[float], noise: float = 1.0) -> bool:
    """True when the relaxation is tight with rank-one factors for both users."""
    return solve_active_power_min(
        h_m, h_n, targets, noise, method=ActiveMethod.RELAXATION
    ).quasi_degraded


def _unit(vectors: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(vectors, axis=-1, keepdims=True)
    return vectors / np.where(norms > 0, norms, 1.0)


def wsr_active_step(
    h_m: np.ndarray,
    h_n: np.ndarray,
    weights: Sequence[float],
    power: float,
    noise: float = 1.0,
    *,
    splits: int = 41,
    angles: int = 21,
) -> Tuple[BeamformerSet, float]:
    """Weighted-sum-rate beamformers under a total power budget.

    Grid search over the power share of user m, the mix between matched
    filtering and zero-forcing for w_n, and the mix of both users' matched
    filters for w_m. Points where user n cannot cancel user m (r_nm < r_mm)
    are excluded. Returns the beamformers and the weighted sum rate.
    """
    if not noise > 0:
        msg = f"noise power must be > 0, got {noise}"
        raise DomainError(msg)
    if power < 0:
        msg = f"power budget must be >= 0, got {power}"
        raise DomainError(msg)
    a, b = _channels(h_m, h_n)
    w_m_weight, w_n_weight = (float(w) for w in weights)

    mrt_m = a / np.linalg.norm(a)
    mrt_n = b / np.linalg.norm(b)
    zf_n = b - mrt_m * np.vdot(mrt_m, b)
    zf_n = zf_n / np.linalg.norm(zf_n) if np.linalg.norm(zf_n) > 1e-12 else mrt_n
    nu = -np.angle(np.vdot(a, b))

    psi = np.linspace(0.0, np.pi / 2, angles)
    chi = np.linspace(0.0, np.pi / 2, angles)
    u_n = _unit(np.cos(psi)[:, None] * mrt_n + np.sin(psi)[:, None] * zf_n)
    u_m = _unit(np.cos(chi)[:, None] * mrt_m + np.sin(chi)[:, None] * np.exp(1j * nu) * mrt_n)
    rho = np.linspace(0.0, 1.0, splits)

    am = np.abs(u_m.conj() @ a) ** 2
    bm = np.abs(u_m.conj() @ b) ** 2
    an = np.abs(u_n.conj() @ a) ** 2
    bn = np.abs(u_n.conj() @ b) ** 2
    p_m = rho[:, None, None] * power
    p_n = (1 - rho)[:, None, None] * power
    # axes: (split, chi, psi)
    r_mm = np.log2(1 + p_m * am[None, :, None] / (p_n * an[None, None, :] + noise))
    r_nm = np.log2(1 + p_m * bm[None, :, None] / (p_n * bn[None, None, :] + noise))
    r_nn = np.log2(1 + p_n * bn[None, None, :] / noise)
    # rho = 0 gives r_mm = r_nm = 0, so at least one entry is finite
    value = np.where(
        r_nm >= r_mm,
        w_m_weight * r_mm + w_n_weight * np.broadcast_to(r_nn, r_mm.shape),
        -np.inf,
    )
    i, j, k = np.unravel_index(int(np.argmax(value)), value.shape)
    beamformers = BeamformerSet.of(
        math.sqrt(rho[i] * power) * u_m[j], math.sqrt((1 - rho[i]) * power) * u_n[k]
    )
    return beamformers, float(value[i, j, k])
