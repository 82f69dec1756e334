"""Bound states at the collapse point epsilon = omega/2.

At the collapse point psi_minus obeys a Schrodinger-like equation with zero
effective energy,

    psi''(x) = Q(x) psi(x),
    Q(x) = (-4 Et w^2 x^2 + 4 Et^2 - w0^2) / (4 w^2 x^2 - 4 Et) = 2 V_eff(x),

where Et = E + omega/2.  The shifted energy enters the potential rather than
the eigenvalue slot.  Q decreases strictly with Et, so by Sturm comparison
the number of nodes of the solution grows monotonically with Et, which is
what the shooting search brackets on.  psi_plus follows algebraically from
psi_minus.

For omega0 > omega the potential has an attractive -(w0/2w)^2 / x^2 tail at
Et = 0, so bound states accumulate geometrically at Et -> 0-.  Every search
here therefore works above an energy resolution floor |Et| >= resolution*omega.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.optimize import brentq

from . import _ode
from .errors import (BracketFailure, ExtendDomainError, InternalError, InvalidArgument,
                     NumericFailure, OutOfWindow, SingularityError)
from .model import (ModelParams, Parity, ParityKind, ShiftedEnergy, SpinorGridFunction,
                    is_admissible)

DEFAULT_STEP = 1e-3
DEFAULT_RESOLUTION = 4e-6
ENERGY_XTOL = 1e-10
TAIL_DECAY_LENGTHS = 16.0
MIN_EXTENT = 30.0
TAIL_TOL = 1e-6
NODE_NOISE = 1e-9
POLE_TOL = 1e-9
CORE_POINTS = 8  # minimum grid points across the psi_plus core sqrt(|E~|)/omega

__all__ = [
    "SpinorGridFunction", "CollapseBoundState", "EffectivePotentialProfile", "PotentialClass",
    "CollapseIntegration", "effective_potential", "integrate_collapse_ode",
    "shoot_bound_states", "reconstruct_psi_plus", "normalize", "count_nodes",
    "threshold_omega0", "count_bound_states", "domain_extent", "default_step",
]


def _require_collapse(params: ModelParams):
    if not params.is_collapse_point():
        raise InvalidArgument(
            f"collapse solver needs epsilon = omega/2, got epsilon={params.epsilon}, "
            f"omega={params.omega}")


def default_step(omega: float) -> float:
    return DEFAULT_STEP / math.sqrt(omega)


def domain_extent(e_tilde: float, omega: float) -> float:
    """Half-width of the integration domain: 16 decay lengths, at least 30/sqrt(omega)."""
    if e_tilde >= 0:
        raise OutOfWindow(f"decay length undefined for E~ = {e_tilde} >= 0")
    return max(MIN_EXTENT / math.sqrt(omega), TAIL_DECAY_LENGTHS / math.sqrt(-e_tilde))


# ---------------------------------------------------------------------------
# effective potential

class PotentialClass(enum.Enum):
    UNBOUND_ABOVE = "unbound_above"
    POSITIVE_NO_ZERO_ENERGY_STATE = "positive_no_zero_energy_state"
    BOWL = "bowl"


@dataclass(frozen=True, eq=False)
class EffectivePotentialProfile:
    x: np.ndarray
    values: np.ndarray
    classification: PotentialClass
    depth: float
    asymptote: float
    poles: tuple[float, ...] = ()

    @property
    def minimum(self) -> float:
        return float(np.min(self.values))


def effective_potential_values(x, e_tilde: float, params: ModelParams) -> np.ndarray:
    """V_eff(x) = 1/2 (-4 Et w^2 x^2 + 4 Et^2 - w0^2) / (4 w^2 x^2 - 4 Et)."""
    w2x2 = params.omega ** 2 * np.asarray(x, dtype=float) ** 2
    num = -4 * e_tilde * w2x2 + 4 * e_tilde ** 2 - params.omega0 ** 2
    return 0.5 * num / (4 * w2x2 - 4 * e_tilde)


def effective_potential(e_tilde: float, params: ModelParams, x_grid) -> EffectivePotentialProfile:
    """Profile V_eff on a grid and classify the regime.

    The large-|x| limit is -Et/2 and, for Et != 0, V(inf) - V(0) equals
    -w0^2/(8 Et).
    """
    e_tilde = float(e_tilde)
    x = np.asarray(x_grid, dtype=float)
    poles: tuple[float, ...] = ()
    if e_tilde >= 0:
        p = math.sqrt(e_tilde) / params.omega
        poles = (-p, p) if p > 0 else (0.0,)
        near = np.min(np.abs(np.abs(x) - p)) if x.size else np.inf
        if near < POLE_TOL:
            raise SingularityError(f"grid point within {POLE_TOL} of the pole at |x| = {p}")
        cls = PotentialClass.UNBOUND_ABOVE
    elif e_tilde <= -params.omega0 / 2:
        cls = PotentialClass.POSITIVE_NO_ZERO_ENERGY_STATE
    else:
        cls = PotentialClass.BOWL
    depth = -params.omega0 ** 2 / (8 * e_tilde) if e_tilde != 0 else math.inf
    return EffectivePotentialProfile(x, effective_potential_values(x, e_tilde, params), cls,
                                     depth, -e_tilde / 2, poles)


# ---------------------------------------------------------------------------
# integration

@dataclass(frozen=True, eq=False)
class CollapseIntegration:
    """Raw outward solution on [0, x_max]; not normalized."""

    x: np.ndarray
    psi: np.ndarray
    dpsi: np.ndarray
    diverged: bool
    blowup_x: float | None = None

    @property
    def h(self) -> float:
        return float(self.x[1] - self.x[0])


def _check_energy(e_tilde: float):
    if not e_tilde < 0:
        raise OutOfWindow(f"collapse equation needs E~ < 0, got {e_tilde}")


def integrate_collapse_ode(e_tilde: float, params: ModelParams, parity: Parity,
                           h: float | None = None, x_max: float | None = None) -> CollapseIntegration:
    """Classical RK4 on (psi, psi') outward from the origin.

    Even parity starts from psi(0)=1, psi'(0)=0, odd from psi(0)=0, psi'(0)=1.
    A solution that overflows is cut at the blow-up point and flagged.
    """
    _require_collapse(params)
    _check_energy(e_tilde)
    h = default_step(params.omega) if h is None else float(h)
    if not h > 0:
        raise InvalidArgument(f"step must be positive, got {h}")
    x_max = domain_extent(e_tilde, params.omega) if x_max is None else float(x_max)
    n = int(math.ceil(x_max / h - 1e-9))
    y0, dy0 = parity.initial_conditions()
    ys, dys, done = _ode.integrate_path(0.0, h, n, y0, dy0, e_tilde, params.omega0, params.omega)
    x = h * np.arange(done + 1)
    diverged = done < n
    return CollapseIntegration(x, ys[: done + 1], dys[: done + 1], diverged,
                               float(x[-1]) if diverged else None)


def half_line_nodes(e_tilde: float, params: ModelParams, parity: Parity,
                    h: float | None = None, x_max: float | None = None) -> int:
    """Sign changes of the outward solution on (0, x_max]."""
    h = default_step(params.omega) if h is None else h
    x_max = domain_extent(e_tilde, params.omega) if x_max is None else x_max
    n = int(math.ceil(x_max / h - 1e-9))
    y0, dy0 = parity.initial_conditions()
    changes, _ = _ode.count_sign_changes(e_tilde, params.omega0, params.omega, y0, dy0, h, n)
    return int(changes)


def count_bound_states(params: ModelParams, resolution: float = DEFAULT_RESOLUTION,
                       h: float | None = None, x_max: float | None = None) -> dict[ParityKind, int]:
    """Bound states with E~ < -resolution*omega, per reflection parity.

    Every parity-p state with j half-line nodes lies below E~ iff the outward
    solution at E~ has more than j sign changes.
    """
    _require_collapse(params)
    et = -resolution * params.omega
    return {kind: half_line_nodes(et, params, Parity(kind, kind), h, x_max) for kind in ParityKind}


def _matching_index(e_tilde: float, params: ModelParams, h: float, n_total: int) -> int:
    # outermost turning point of V_eff; the inward solution is stable beyond it
    w0, w = params.omega0, params.omega
    arg = (w0 ** 2 - 4 * e_tilde ** 2) / (4 * -e_tilde * w ** 2)
    x_t = math.sqrt(arg) if arg > 0 else 0.0
    m = int(round(x_t / h))
    return min(max(m, 8), n_total // 2)


def _mismatch(e_tilde, params, parity, h, n_total, m) -> float:
    """Normalized Wronskian of the outward and inward solutions at index m."""
    y0, dy0 = parity.initial_conditions()
    w0, w = params.omega0, params.omega
    yo, dyo = _ode.integrate_endpoint(0.0, h, m, y0, dy0, e_tilde, w0, w)
    kappa = math.sqrt(-e_tilde)
    yi, dyi = _ode.integrate_endpoint(n_total * h, -h, n_total - m, 1.0, -kappa, e_tilde, w0, w)
    return (yo * dyi - dyo * yi) / (math.hypot(yo, dyo) * math.hypot(yi, dyi))


def _half_line_solution(e_tilde, params, parity, h, n_total, m) -> np.ndarray:
    """psi_minus on x = 0, h, ..., n_total h, outward to m then inward from the edge.

    The inward leg starts with psi'/psi = -sqrt(-E~), the decaying asymptote.
    """
    y0, dy0 = parity.initial_conditions()
    w0, w = params.omega0, params.omega
    yo, dyo, done = _ode.integrate_path(0.0, h, m, y0, dy0, e_tilde, w0, w)
    kappa = math.sqrt(-e_tilde)
    yi, dyi, done_in = _ode.integrate_path(n_total * h, -h, n_total - m, 1.0, -kappa,
                                           e_tilde, w0, w)
    if done < m or done_in < n_total - m:
        raise NumericFailure("overflow while assembling the bound state",
                             {"e_tilde": e_tilde, "omega0": w0})
    yi, dyi = yi[::-1], dyi[::-1]
    # continuous junction; the residual slope jump is set by the energy accuracy
    if abs(yi[0]) * kappa > 0.1 * abs(dyi[0]):
        scale = yo[m] / yi[0]
    else:
        scale = dyo[m] / dyi[0]
    return np.concatenate([yo[:m], scale * yi])


def _mirror(half: np.ndarray, sign: int) -> np.ndarray:
    return np.concatenate([sign * half[:0:-1], half])


# ---------------------------------------------------------------------------
# grid-level helpers

def reconstruct_psi_plus(psi_minus, x, e_tilde: float, params: ModelParams) -> np.ndarray:
    """psi_plus = w0 psi_minus / (2 Et - 2 w^2 x^2), from the coupled equations at collapse."""
    _check_energy(e_tilde)
    x = np.asarray(x, dtype=float)
    return params.omega0 * np.asarray(psi_minus) / (2 * e_tilde - 2 * params.omega ** 2 * x * x)


def normalize(spinor: SpinorGridFunction) -> tuple[SpinorGridFunction, float, float]:
    """Scale to unit total norm; returns (spinor, norm_plus, norm_minus).

    Both components must have decayed to below 1e-6 of their peak at the grid
    edges, otherwise the norm would be truncated.
    """
    for name, psi in (("psi_plus", spinor.psi_plus), ("psi_minus", spinor.psi_minus)):
        if not np.all(np.isfinite(psi)):
            raise NumericFailure(f"{name} is not finite")
        peak = float(np.max(np.abs(psi)))
        if peak == 0:
            continue
        edge = max(abs(psi[0]), abs(psi[-1]))
        if edge >= TAIL_TOL * peak:
            raise ExtendDomainError(
                f"{name} edge value is {edge / peak:.2e} of its peak at x_max={spinor.x_max:g}; "
                "increase x_max")
    total = spinor.total_norm()
    if not total > 0:
        raise InvalidArgument("spinor has zero norm")
    scaled = spinor.scaled(1 / math.sqrt(total))
    norm_plus, norm_minus = scaled.component_norms()
    return scaled, norm_plus, norm_minus


def count_nodes(psi, noise: float = NODE_NOISE) -> int:
    """Strict sign changes, skipping samples below ``noise`` times the peak."""
    psi = np.asarray(psi, dtype=float)
    peak = float(np.max(np.abs(psi))) if psi.size else 0.0
    if peak == 0:
        return 0
    kept = psi[np.abs(psi) > noise * peak]
    return int(np.count_nonzero(np.signbit(kept[1:]) != np.signbit(kept[:-1])))


# ---------------------------------------------------------------------------
# bound states

@dataclass(frozen=True, eq=False)
class CollapseBoundState:
    """A solved bound state; the wavefunction is rebuilt on first access."""

    params: ModelParams
    e_tilde: ShiftedEnergy
    node_count: int
    norm_plus: float
    norm_minus: float
    parity: Parity
    h: float
    x_max: float
    _match_index: int = field(repr=False, default=0)

    @property
    def E(self) -> float:
        return self.e_tilde.to_E()

    @cached_property
    def wavefunction(self) -> SpinorGridFunction:
        spinor, _, _ = _build_state(self.e_tilde.e_tilde, self.params, self.parity, self.h,
                                    int(round(self.x_max / self.h)), self._match_index)
        return spinor

    def release(self):
        """Drop the cached wavefunction (large grids near threshold)."""
        self.__dict__.pop("wavefunction", None)


def _build_state(et, params, parity, h, n_total, m):
    half = _half_line_solution(et, params, parity, h, n_total, m)
    sign = 1 if parity.is_even else -1
    psi_minus = _mirror(half, sign)
    x = h * np.arange(-n_total, n_total + 1)
    if not parity.is_even:
        psi_minus[n_total] = 0.0
    psi_plus = reconstruct_psi_plus(psi_minus, x, et, params)
    spinor = SpinorGridFunction(x, psi_plus, psi_minus, h)
    spinor, norm_plus, norm_minus = normalize(spinor)
    return spinor, norm_plus, norm_minus


def _bisect_nodes(params, parity, j, lo, hi, h, x_max, rel_width):
    """Shrink [lo, hi] around the E~ where the node count passes j -> j+1."""
    nodes = lambda et: half_line_nodes(et, params, parity, h, x_max)
    for _ in range(400):
        if hi - lo <= rel_width * abs(hi):
            break
        mid = -math.sqrt(lo * hi) if hi / lo < 0.5 else 0.5 * (lo + hi)
        if nodes(mid) <= j:
            lo = mid
        else:
            hi = mid
    return lo, hi


def state_step(h: float, e_tilde: float, omega: float) -> float:
    """Grid step for a solved state: h, or finer when the core sqrt(|E~|)/omega is narrow."""
    return min(h, math.sqrt(-e_tilde) / (CORE_POINTS * omega))


def _solve_state(params, parity, j, lo, hi, h, x_max, refine):
    """Refine the j-th (half-line nodes) state of a parity inside [lo, hi].

    The bracket is narrowed by node counting at step h; the matching solve
    runs on the (possibly finer) output step.
    """
    width = 0.05
    for _attempt in range(4):
        lo, hi = _bisect_nodes(params, parity, j, lo, hi, h, x_max, width)
        hf = state_step(h, hi, params.omega) if refine else h
        n_total = int(math.ceil((x_max if x_max is not None else
                                 domain_extent(hi, params.omega)) / hf - 1e-9))
        m = _matching_index(0.5 * (lo + hi), params, hf, n_total)
        f = lambda et: _mismatch(et, params, parity, hf, n_total, m)
        f_lo, f_hi = f(lo), f(hi)
        if f_lo * f_hi < 0:
            et = brentq(f, lo, hi, xtol=ENERGY_XTOL * params.omega * 1e-5, rtol=1e-15)
            return et, hf, n_total, m
        width /= 10  # no single sign change: shrink the bracket and retry
    raise NumericFailure("could not isolate a bound state",
                         {"parity": parity.reflection_parity.name, "half_nodes": j,
                          "bracket": (lo, hi)})


def _solve_and_build(params, parity, j, lo, hi, h, x_max, refine, extensions=6):
    """Solve one state; widen the domain by 25% while its tail is not decayed."""
    et, hf, n_total, m = _solve_state(params, parity, j, lo, hi, h, x_max, refine)
    for _ in range(extensions):
        try:
            spinor, norm_plus, norm_minus = _build_state(et, params, parity, hf, n_total, m)
            return et, hf, n_total, m, spinor, norm_plus, norm_minus
        except ExtendDomainError:
            if x_max is not None:
                raise
            wider = 1.25 * n_total * hf
            et, hf, n_total, m = _solve_state(params, parity, j, lo, hi, h, wider, refine)
    spinor, norm_plus, norm_minus = _build_state(et, params, parity, hf, n_total, m)
    return et, hf, n_total, m, spinor, norm_plus, norm_minus


def shoot_bound_states(params: ModelParams, max_states: int | None = None,
                       h: float | None = None, x_max: float | None = None,
                       resolution: float = DEFAULT_RESOLUTION) -> list[CollapseBoundState]:
    """All bound states with -omega0/2 < E~ < -resolution*omega, lowest first.

    Each state is bracketed by node counting on the outward solution, then
    refined by matching against an inward solution that starts from the
    decaying asymptote at the domain edge.  ``x_max=None`` sizes the domain
    per state.  ``max_states`` keeps only the lowest states.  With ``h=None``
    the output grid of a state is refined below the default step when its
    core sqrt(|E~|)/omega spans fewer than CORE_POINTS steps; an explicit
    ``h`` is used as is.
    """
    _require_collapse(params)
    if not params.omega0 > 0:
        raise InvalidArgument("collapse bound states need omega0 > 0")
    refine = h is None
    h = default_step(params.omega) if h is None else float(h)
    counts = count_bound_states(params, resolution, h, x_max)
    total = sum(counts.values())
    if total == 0:
        raise InternalError(
            f"no bound state above the resolution floor for omega0={params.omega0}; "
            "a bound state must exist for omega0 > 0 (lower the resolution)")
    n_wanted = total if max_states is None else min(total, int(max_states))

    ceiling = -resolution * params.omega
    floor = -params.omega0 / 2
    states = []
    next_lo = {kind: floor for kind in ParityKind}
    for nodes_total in range(n_wanted):
        kind = ParityKind.of(nodes_total)
        parity = Parity(kind, kind)
        j = nodes_total // 2
        if j >= counts[kind]:
            break
        et, hf, n_total, m, spinor, norm_plus, norm_minus = _solve_and_build(
            params, parity, j, next_lo[kind], ceiling, h, x_max, refine)
        next_lo[kind] = et
        found = count_nodes(spinor.psi_minus)
        if found != nodes_total:
            raise NumericFailure("node count of the assembled state is inconsistent",
                                 {"expected": nodes_total, "found": found, "e_tilde": et})
        if not is_admissible(et, params):
            raise InternalError(f"shooting produced E~={et} outside the bound-state window")
        states.append(CollapseBoundState(params, ShiftedEnergy(et, params.omega), found,
                                         norm_plus, norm_minus, parity, hf, n_total * hf, m))
    states.sort(key=lambda s: s.e_tilde.e_tilde)
    return states


@dataclass(frozen=True)
class ThresholdResult:
    k: int
    omega0_threshold: float
    tolerance: float
    bracket_history: list[tuple[float, float]]


def threshold_omega0(k: int, omega: float = 1.0, tol: float = 1e-3,
                     resolution: float = DEFAULT_RESOLUTION, h: float | None = None,
                     upper: float | None = None) -> ThresholdResult:
    """Smallest omega0 at which a k-node bound state exists, by bisection.

    A k-node state counts as present once its E~ lies below
    -resolution*omega; the bound-state count never decreases with omega0.
    """
    if not isinstance(k, (int, np.integer)) or k < 1:
        raise InvalidArgument(f"excitation index must be >= 1, got {k!r}")
    if not tol > 0:
        raise InvalidArgument("tolerance must be positive")
    kind = ParityKind.of(k)
    parity = Parity(kind, kind)
    j = k // 2
    et = -resolution * omega

    def present(w0):
        return half_line_nodes(et, ModelParams.at_collapse(w0, omega), parity, h) > j

    lo, hi = 0.0, 20.0 * omega if upper is None else float(upper)
    if not present(hi):
        raise BracketFailure(f"no {k}-node state up to omega0={hi}",
                             {"k": k, "upper": hi, "resolution": resolution})
    history = [(lo, hi)]
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if present(mid):
            hi = mid
        else:
            lo = mid
        history.append((lo, hi))
    return ThresholdResult(k, 0.5 * (lo + hi), tol, history)
