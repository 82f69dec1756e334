"""Independent checks on computed states.

Everything here works on grid functions or Fock vectors and never calls the
solvers, so it can be pointed at output of either method.

Notation: a = 1 + 2 eps/omega, b = 1 - 2 eps/omega, lam = 2E + omega.  The
real-space eigenvalue problem is the coupled pair

    omega0 psi_plus  = a psi_minus'' - b omega^2 x^2 psi_minus + lam psi_minus
    omega0 psi_minus = b psi_plus''  - a omega^2 x^2 psi_plus  + lam psi_plus

and eliminating one component gives a fourth-order equation for the other.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConventionError, InvalidArgument, SectorViolation
from .fock import FockSpinVector, sector_of
from .model import ModelParams, ParityKind, SpinorGridFunction

FOURTH_ORDER_SPACING = 0.02  # stencil spacing (units of omega^-1/2) when psi'''' is needed
FOURIER_SPACING = 0.01
FOURIER_K_MAX = 10.0
FOURIER_K_POINTS = 1024
TAIL_NOISE_FLOOR = 1e3 * np.finfo(float).tiny  # relative to the peak
TAIL_WINDOW = 0.2

_PHASES = np.array([1, 1j, -1, -1j])


def _spacing(x) -> float:
    x = np.asarray(x, dtype=float)
    return float((x[-1] - x[0]) / (x.size - 1))


# central stencils on a lattice of spacing H: 8th order for the first and
# second derivative, 4th order for the fourth
_D1 = np.array([1 / 280, -4 / 105, 1 / 5, -4 / 5, 0.0, 4 / 5, -1 / 5, 4 / 105, -1 / 280])
_D2 = np.array([-1 / 560, 8 / 315, -1 / 5, 8 / 5, -205 / 72, 8 / 5, -1 / 5, 8 / 315, -1 / 560])
HALF_STENCIL = 4


def _apply(f, weights, scale):
    return np.convolve(f, weights[::-1], mode="valid") / scale


def _d1(f, H):
    return _apply(f, _D1, H)


def _d2(f, H):
    return _apply(f, _D2, H * H)


def _d4(f, H):
    return (-f[6:] + 12 * f[5:-1] - 39 * f[4:-2] + 56 * f[3:-3] - 39 * f[2:-4]
            + 12 * f[1:-5] - f[:-6]) / (6 * H ** 4)


def _subsample(x, stride, *arrays):
    """Sub-lattice through x = 0 (or the first point if 0 is not on the grid)."""
    x = np.asarray(x, dtype=float)
    zero = int(np.argmin(np.abs(x)))
    start = zero % stride
    sl = slice(start, None, stride)
    return (x[sl],) + tuple(np.asarray(a)[sl] for a in arrays)


def _default_stride(h: float, omega: float, needs_fourth: bool) -> int:
    if not needs_fourth:
        return 1
    # 4th differences at tiny spacing are swamped by roundoff (~eps/H^4)
    return max(1, int(round(FOURTH_ORDER_SPACING / math.sqrt(omega) / h)))


def fourth_order_coefficients(x, sign: int, E: float, params: ModelParams):
    """Coefficients (c4, c2, c1, c0) of psi'''', psi'', psi', psi in the decoupled equation."""
    w, eps, w0 = params.omega, params.epsilon, params.omega0
    x = np.asarray(x, dtype=float)
    r2 = 4 * eps ** 2 / w ** 2
    s2 = (1 + sign * 2 * eps / w) ** 2
    lam = 2 * E + w
    c4 = np.full_like(x, 1 - r2)
    c2 = -(2 * (1 + r2) * w ** 2 * x ** 2 - 2 * lam)
    c1 = -4 * s2 * w ** 2 * x
    c0 = (1 - r2) * w ** 4 * x ** 4 - 2 * lam * w ** 2 * x ** 2 + lam ** 2 - 2 * s2 * w ** 2 - w0 ** 2
    return c4, c2, c1, c0


def residual_fourth_order(psi, x, sign: int, E: float, params: ModelParams,
                          stride: int | None = None) -> float:
    """max |residual| / max |psi| of the decoupled fourth-order equation.

    ``sign`` is +1 for psi_plus, -1 for psi_minus.  Derivatives use central
    stencils; when the psi'''' coefficient is nonzero they are taken on a
    sub-lattice of spacing ~0.02/sqrt(omega) to keep roundoff in check.
    Valid at any coupling.
    """
    if sign not in (1, -1):
        raise InvalidArgument("sign must be +1 or -1")
    h = _spacing(x)
    needs_fourth = abs(1 - 4 * params.epsilon ** 2 / params.omega ** 2) > 1e-14
    stride = _default_stride(h, params.omega, needs_fourth) if stride is None else stride
    xs, f = _subsample(x, stride, psi)
    H = h * stride
    if f.size < 2 * HALF_STENCIL + 1:
        raise InvalidArgument("grid too short for the derivative stencils")
    c4, c2, c1, c0 = fourth_order_coefficients(xs[4:-4], sign, E, params)
    res = c2 * _d2(f, H) + c1 * _d1(f, H) + c0 * f[4:-4]
    if needs_fourth:
        res = res + c4 * _d4(f, H)[1:-1]
    return float(np.max(np.abs(res)) / np.max(np.abs(psi)))


def residual_coupled(spinor: SpinorGridFunction, E: float, params: ModelParams,
                     stride: int = 1) -> tuple[float, float]:
    """Max residuals of both coupled equations, relative to the spinor's peak."""
    w, eps, w0 = params.omega, params.epsilon, params.omega0
    a, b, lam = 1 + 2 * eps / w, 1 - 2 * eps / w, 2 * E + w
    xs, fp, fm = _subsample(spinor.x, stride, spinor.psi_plus, spinor.psi_minus)
    H = spinor.h * stride
    xi, p, m = xs[4:-4], fp[4:-4], fm[4:-4]
    first = w0 * p - (a * _d2(fm, H) - b * w ** 2 * xi ** 2 * m + lam * m)
    second = w0 * m - (b * _d2(fp, H) - a * w ** 2 * xi ** 2 * p + lam * p)
    scale = max(np.max(np.abs(spinor.psi_plus)), np.max(np.abs(spinor.psi_minus)))
    return float(np.max(np.abs(first)) / scale), float(np.max(np.abs(second)) / scale)


def fourier_transform(x, f, k, weights=None, chunk_elements: int = 4_000_000) -> np.ndarray:
    """Unitary transform F[f](k) = (2 pi)^(-1/2) int f(x) exp(-i k x) dx.

    Direct quadrature at arbitrary output points, trapezoid weights unless
    ``weights`` is given.  With this convention the Hermite functions satisfy
    F[h_n] = (-i)^n h_n.
    """
    x = np.asarray(x, dtype=float)
    f = np.asarray(f)
    k = np.atleast_1d(np.asarray(k, dtype=float))
    if weights is None:
        weights = np.full(x.size, _spacing(x))
        weights[0] *= 0.5
        weights[-1] *= 0.5
    wf = weights * f
    out = np.empty(k.size, dtype=complex)
    step = max(1, chunk_elements // x.size)
    for start in range(0, k.size, step):
        kk = k[start:start + step]
        phase = np.outer(kk, x)
        out[start:start + step] = np.cos(phase) @ wf - 1j * (np.sin(phase) @ wf)
    return out / math.sqrt(2 * math.pi)


def graded_quadrature(n_half: int, h: float, core: float, max_spacing: float):
    """Composite Simpson panels on the half grid x = 0, h, ..., n_half h.

    Panel width follows hypot(core, x)/8, clipped to [h, max_spacing], using
    grid points only.  Returns (offsets from x = 0, weights).
    """
    idx, w = [0], [0.0]
    i = 0
    while i < n_half:
        d = min(max_spacing, max(h, math.hypot(core, i * h) / 8))
        s = 1 << max(0, int(math.log2(d / h) + 1e-9))
        while s > 1 and i + 2 * s > n_half:
            s //= 2
        if i + 2 * s <= n_half:
            H = s * h
            w[-1] += H / 3
            idx += [i + s, i + 2 * s]
            w += [4 * H / 3, H / 3]
            i += 2 * s
        else:
            w[-1] += h / 2
            idx.append(i + 1)
            w.append(h / 2)
            i += 1
    return np.array(idx), np.array(w)


def _symmetric_transform(x_half, f_half, w_half, k, parity: ParityKind):
    """Transform of an even/odd function from its half-line samples (x >= 0)."""
    kernel = np.cos if parity is ParityKind.EVEN else np.sin
    factor = 2 / math.sqrt(2 * math.pi) * (1 if parity is ParityKind.EVEN else -1j)
    wf = w_half * f_half
    out = np.empty(k.size)
    step = max(1, 4_000_000 // x_half.size)
    for start in range(0, k.size, step):
        out[start:start + step] = kernel(np.outer(k[start:start + step], x_half)) @ wf
    return factor * out


@dataclass(frozen=True)
class FourierPairResult:
    """Residuals of the two Fourier identities at the collapse point (omega = 1).

    multiplication: omega0 F[psi_plus](k)  = p (-2 k^2 + 2E + 1) psi_plus(k)
    derivative:     omega0 F[psi_minus](k) = p (2 d^2/dk^2 + 2E + 1) psi_minus(k)

    ``phase`` is the fourth root of unity p (the same in both identities,
    since F[psi_plus] = p psi_minus and F[psi_minus] = p psi_plus).
    """

    multiplication: float
    derivative: float
    phase: complex
    phase_fit: tuple[complex, complex]

    @property
    def max_residual(self) -> float:
        return max(self.multiplication, self.derivative)


def _fit_phase(lhs, rhs) -> complex:
    return complex(np.vdot(rhs, lhs) / np.vdot(rhs, rhs))


def fourier_pair_check(spinor: SpinorGridFunction, E: float, params: ModelParams,
                       k_max: float = FOURIER_K_MAX) -> FourierPairResult:
    """Check the Fourier-pair identities satisfied by collapse-point states.

    The transform uses graded Simpson quadrature on the input grid (fine in
    the core of width sqrt(|E~|), at most 0.01 elsewhere) and is evaluated at
    up to FOURIER_K_POINTS quadrature nodes with 0 <= k <= k_max (the
    identities are symmetric in k for states of definite parity).
    Residuals are relative to max |omega0 F[psi]|.
    """
    if params.omega != 1.0:
        raise ConventionError("Fourier-pair identities are stated at omega = 1")
    if not params.is_collapse_point():
        raise InvalidArgument("Fourier-pair identities hold at epsilon = omega/2")
    if not params.omega0 > 0:
        raise InvalidArgument("identities are trivial for omega0 = 0")
    n_half = (spinor.x.size - 1) // 2
    if abs(spinor.x[n_half]) > 1e-9 * spinor.h or spinor.x.size % 2 == 0:
        raise InvalidArgument("grid must be symmetric about x = 0")
    e_tilde = E + 0.5
    core = math.sqrt(-e_tilde) if e_tilde < 0 else 1.0
    offsets, weights = graded_quadrature(n_half, spinor.h, core, FOURIER_SPACING)
    at = offsets[(offsets * spinor.h <= k_max) & (offsets <= n_half - HALF_STENCIL)]
    at = at[::max(1, -(-at.size // FOURIER_K_POINTS))]
    k = at * spinor.h
    fp, fm = spinor.psi_plus, spinor.psi_minus
    parity = spinor.reflection_parity()
    if parity is None:
        full = np.concatenate([n_half - offsets[:0:-1], n_half + offsets])
        w_full = np.concatenate([weights[:0:-1], [2 * weights[0]], weights[1:]])
        transform = lambda f: fourier_transform(spinor.x[full], f[full], k, w_full)
    else:
        transform = lambda f: _symmetric_transform(offsets * spinor.h, f[n_half + offsets],
                                                   weights, k, parity)
    at = at + n_half
    lam = 2 * E + 1
    w0 = params.omega0

    lhs_mult = w0 * transform(fp)
    rhs_mult = (-2 * k ** 2 + lam) * fp[at]
    lhs_der = w0 * transform(fm)
    rhs_der = 2 * _d2(fm, spinor.h)[at - HALF_STENCIL] + lam * fm[at]

    fit = (_fit_phase(lhs_mult, rhs_mult), _fit_phase(lhs_der, rhs_der))
    phase = complex(_PHASES[np.argmin(np.abs(_PHASES - fit[0]))])
    res_mult = np.max(np.abs(lhs_mult - phase * rhs_mult)) / np.max(np.abs(lhs_mult))
    res_der = np.max(np.abs(lhs_der - phase * rhs_der)) / np.max(np.abs(lhs_der))
    return FourierPairResult(float(res_mult), float(res_der), phase, fit)


def sigma_z_phase_check(v: FockSpinVector) -> float:
    """Distance between F[v] and p sigma_z v for a single-sector vector.

    F multiplies number state n by (-i)^n; sigma_z is the bare-frame spin
    (the splitting term); p is the sector's phase.  Raises SectorViolation
    for vectors spanning several sectors.
    """
    sector = sector_of(v)
    bare = v.to_bare()
    n = np.arange(v.cutoff + 1)
    fourier = ((-1j) ** n)[:, None] * bare
    sigma_z = bare * np.array([1.0, -1.0])
    return float(np.linalg.norm(fourier - sector.fourier_phase * sigma_z))


class TailKind(enum.Enum):
    GAUSSIAN = "gaussian"
    EXPONENTIAL = "exponential"


@dataclass(frozen=True)
class TailFit:
    kind: TailKind
    slope: float       # b in log|psi| ~ a + b x + c x^2
    curvature: float   # c
    intercept: float
    window: tuple[float, float]


class FitWindowError(InvalidArgument):
    pass


def tail_classifier(psi, x, noise_floor: float = TAIL_NOISE_FLOOR,
                    window: float = TAIL_WINDOW) -> TailFit:
    """Fit log|psi| = a + b x + c x^2 over the outer tail on x > 0.

    The window is the last ``window`` fraction of [0, x_end], where x_end is
    the last point with |psi| above ``noise_floor`` times the peak.  The
    default floor sits just above underflow: near the collapse point the
    Gaussian term only dominates far out (beyond ~2 sqrt(-E~)/alpha for a
    tail exp(-sqrt(-E~) x - alpha x^2/2)), so the fit must reach there.  The tail
    is Gaussian if |c| * mean(x) > |b| over the window, exponential otherwise.
    """
    x = np.asarray(x, dtype=float)
    psi = np.asarray(psi, dtype=float)
    pos = x > 0
    x, psi = x[pos], psi[pos]
    peak = np.max(np.abs(psi))
    above = np.flatnonzero(np.abs(psi) > noise_floor * peak)
    if above.size < 10:
        raise FitWindowError("tail is below the noise floor everywhere")
    x_end = x[above[-1]]
    sel = (x >= (1 - window) * x_end) & (x <= x_end)
    xw, pw = x[sel], psi[sel]
    if xw.size < 5 or np.any(np.abs(pw) <= noise_floor * peak):
        raise FitWindowError("fit window contains points below the noise floor")
    design = np.column_stack([np.ones_like(xw), xw, xw ** 2])
    (a, b, c), *_ = np.linalg.lstsq(design, np.log(np.abs(pw)), rcond=None)
    kind = TailKind.GAUSSIAN if abs(c) * float(np.mean(xw)) > abs(b) else TailKind.EXPONENTIAL
    return TailFit(kind, float(b), float(c), float(a), (float(xw[0]), float(xw[-1])))


def log_slope(psi, x, start_fraction: float = 0.9) -> float:
    """Least-squares slope of log|psi| over x in [start_fraction x_max, x_max]."""
    x = np.asarray(x, dtype=float)
    psi = np.asarray(psi, dtype=float)
    sel = x >= start_fraction * x[-1]
    slope, _ = np.polyfit(x[sel], np.log(np.abs(psi[sel])), 1)
    return float(slope)


def l2_distance(a: SpinorGridFunction, b: SpinorGridFunction, align_sign: bool = True) -> float:
    """L2 distance between two spinors on the same grid, optionally up to a global sign."""
    if a.x.shape != b.x.shape or np.max(np.abs(a.x - b.x)) > 1e-9:
        raise InvalidArgument("spinors must share a grid")
    h = a.h
    sign = 1.0
    if align_sign:
        overlap = np.sum(a.psi_plus * b.psi_plus + a.psi_minus * b.psi_minus)
        sign = -1.0 if overlap < 0 else 1.0
    diff = SpinorGridFunction(a.x, a.psi_plus - sign * b.psi_plus,
                              a.psi_minus - sign * b.psi_minus, h)
    return math.sqrt(diff.total_norm())


def component_l2_errors(a: SpinorGridFunction, b: SpinorGridFunction) -> tuple[float, float]:
    """Per-component L2 distances, b aligned to a by the global sign of the overlap."""
    overlap = np.sum(a.psi_plus * b.psi_plus + a.psi_minus * b.psi_minus)
    sign = -1.0 if overlap < 0 else 1.0
    diff = SpinorGridFunction(a.x, a.psi_plus - sign * b.psi_plus,
                              a.psi_minus - sign * b.psi_minus, a.h)
    return tuple(math.sqrt(max(n, 0.0)) for n in diff.component_norms())
