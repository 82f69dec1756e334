"""Truncated Fock-space treatment of the two-photon Rabi Hamiltonian.

The Hamiltonian is assembled in the rotated spin frame

    H = omega a^dag a + omega0/2 sigma_x + epsilon (a^dag^2 + a^2) sigma_z

with basis |n, s>, s = +/- the sigma_z eigenvalue, ordered
(0,+), (0,-), (1,+), (1,-), ...  The spin flip sits one off the diagonal and
the two-photon hop four off, so the matrix is banded with half-bandwidth 4.

The model has a Z4 symmetry.  In the bare frame (spin states
|up> = (|+> + |->)/sqrt2, |down> = (|+> - |->)/sqrt2, where the splitting is
diagonal) each symmetry sector is a chain of number states two apart with
alternating spin, e.g. |0,down>, |2,up>, |4,down>, ...  On such a chain H is
tridiagonal, which is what ``diagonalize`` exploits.
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, eigh_tridiagonal

from .errors import InvalidArgument, NumericFailure, SectorViolation
from .model import ModelParams, SpinorGridFunction

HALF_BANDWIDTH = 4
DEFAULT_CUTOFF = 2000
SECTOR_WEIGHT_TOL = 1e-8
CONVERGENCE_ATOL = 1e-6  # in units of omega

_SQRT_HALF = math.sqrt(0.5)


class Sector(enum.Enum):
    """Symmetry sector, named after its lowest number state."""

    EVEN_DOWN = (0, -1)
    EVEN_UP = (0, 1)
    ODD_DOWN = (1, -1)
    ODD_UP = (1, 1)

    @property
    def first_photon(self) -> int:
        return self.value[0]

    @property
    def first_spin(self) -> int:
        return self.value[1]

    @property
    def photon_parity(self) -> int:
        return self.value[0]

    def spin_of(self, n):
        """Bare spin (+1 up, -1 down) carried by number state n in this sector."""
        n = np.asarray(n)
        steps = (n - self.first_photon) // 2
        return self.first_spin * np.where(steps % 2 == 0, 1, -1)

    def photons(self, cutoff: int) -> np.ndarray:
        return np.arange(self.first_photon, cutoff + 1, 2)

    @property
    def fourier_phase(self) -> complex:
        """Phase p with F[Psi] = p * sigma_z Psi for states in this sector.

        sigma_z is the bare-frame spin operator (the splitting term), F the
        unitary Fourier transform at omega = 1.  Fixed by evaluating
        (-i)^n * spin_of(n) on the first member of the chain; it is the same
        for every member (see ``analysis.sigma_z_phase_check`` and its tests).
        """
        n = self.first_photon
        return complex((-1j) ** n * int(self.spin_of(n)))


def _index(n, s):
    """Interleaved position of |n, s> in the rotated basis (s = +1 or -1)."""
    return 2 * np.asarray(n) + np.where(np.asarray(s) > 0, 0, 1)


@dataclass(frozen=True, eq=False)
class HamiltonianMatrix:
    """Symmetric matrix in LAPACK upper banded storage.

    ``band[HALF_BANDWIDTH + i - j, j] = H[i, j]`` for ``i <= j``.
    """

    params: ModelParams
    cutoff: int
    band: np.ndarray

    @property
    def dimension(self) -> int:
        return 2 * (self.cutoff + 1)

    def entry(self, i: int, j: int) -> float:
        if i > j:
            i, j = j, i
        offset = j - i
        if offset > HALF_BANDWIDTH:
            return 0.0
        return float(self.band[HALF_BANDWIDTH - offset, j])

    def diagonal(self, offset: int = 0) -> np.ndarray:
        """The ``offset``-th superdiagonal (equal to the subdiagonal)."""
        return self.band[HALF_BANDWIDTH - offset, offset:]

    def to_dense(self) -> np.ndarray:
        dim = self.dimension
        dense = np.zeros((dim, dim))
        for offset in range(HALF_BANDWIDTH + 1):
            d = self.diagonal(offset)
            idx = np.arange(dim - offset)
            dense[idx, idx + offset] = d
            dense[idx + offset, idx] = d
        return dense

    def matvec(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        out = self.diagonal(0) * v
        for offset in range(1, HALF_BANDWIDTH + 1):
            d = self.diagonal(offset)
            out[:-offset] += d * v[offset:]
            out[offset:] += d * v[:-offset]
        return out


def build_hamiltonian(params: ModelParams, cutoff: int = DEFAULT_CUTOFF) -> HamiltonianMatrix:
    """Assemble H in the rotated frame, truncated at ``cutoff`` photons."""
    if not isinstance(cutoff, (int, np.integer)) or cutoff < 2:
        raise InvalidArgument(f"cutoff must be an integer >= 2, got {cutoff!r}")
    cutoff = int(cutoff)
    dim = 2 * (cutoff + 1)
    band = np.zeros((HALF_BANDWIDTH + 1, dim))
    n = np.arange(cutoff + 1)

    # diagonal: omega * n for both spin components
    band[HALF_BANDWIDTH, 0::2] = params.omega * n
    band[HALF_BANDWIDTH, 1::2] = params.omega * n
    # spin flip (n,+) <-> (n,-): one off the diagonal, column of (n,-)
    band[HALF_BANDWIDTH - 1, 1::2] = params.omega0 / 2
    # <n+2, s| eps (a^dag^2 + a^2) s |n, s> = s eps sqrt((n+1)(n+2))
    hop = params.epsilon * np.sqrt((n[:-2] + 1.0) * (n[:-2] + 2.0))
    band[0, _index(n[:-2] + 2, 1)] = hop
    band[0, _index(n[:-2] + 2, -1)] = -hop
    return HamiltonianMatrix(params, cutoff, band)


@dataclass(frozen=True, eq=False)
class FockSpinVector:
    """Coefficients c[n, s] over |n, s>, n = 0..cutoff.

    ``coeffs[:, 0]`` holds s = + and ``coeffs[:, 1]`` holds s = - (rotated
    frame, the components that become psi_plus and psi_minus in real space).
    """

    cutoff: int
    coeffs: np.ndarray
    sector: Sector | None = None

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=float)
        if coeffs.shape != (self.cutoff + 1, 2):
            raise InvalidArgument(
                f"coeffs must have shape ({self.cutoff + 1}, 2), got {coeffs.shape}")
        object.__setattr__(self, "coeffs", coeffs)

    @classmethod
    def from_bare(cls, bare: np.ndarray, sector: Sector | None = None) -> "FockSpinVector":
        """Build from bare-frame coefficients ``bare[:, 0]`` (up), ``bare[:, 1]`` (down)."""
        bare = np.asarray(bare, dtype=float)
        up, down = bare[:, 0], bare[:, 1]
        coeffs = np.column_stack([(up + down) * _SQRT_HALF, (up - down) * _SQRT_HALF])
        return cls(bare.shape[0] - 1, coeffs, sector)

    @classmethod
    def basis_state(cls, n: int, spin: str, cutoff: int) -> "FockSpinVector":
        """Single number state.  ``spin`` is 'up'/'down' (bare) or '+'/'-' (rotated)."""
        if not 0 <= n <= cutoff:
            raise InvalidArgument(f"photon number {n} outside 0..{cutoff}")
        if spin in ("up", "down"):
            bare = np.zeros((cutoff + 1, 2))
            bare[n, 0 if spin == "up" else 1] = 1.0
            vec = cls.from_bare(bare)
        elif spin in ("+", "-"):
            coeffs = np.zeros((cutoff + 1, 2))
            coeffs[n, 0 if spin == "+" else 1] = 1.0
            vec = cls(cutoff, coeffs)
        else:
            raise InvalidArgument(f"unknown spin label {spin!r}")
        try:
            return vec.with_sector(sector_of(vec))
        except SectorViolation:
            return vec

    def to_bare(self) -> np.ndarray:
        plus, minus = self.coeffs[:, 0], self.coeffs[:, 1]
        return np.column_stack([(plus + minus) * _SQRT_HALF, (plus - minus) * _SQRT_HALF])

    def flat(self) -> np.ndarray:
        """Interleaved vector matching the HamiltonianMatrix ordering."""
        return self.coeffs.reshape(-1)

    @classmethod
    def from_flat(cls, v: np.ndarray, sector: Sector | None = None) -> "FockSpinVector":
        v = np.asarray(v, dtype=float)
        return cls(v.size // 2 - 1, v.reshape(-1, 2).copy(), sector)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def normalized(self) -> "FockSpinVector":
        nrm = self.norm
        if nrm == 0:
            raise InvalidArgument("cannot normalize the zero vector")
        return FockSpinVector(self.cutoff, self.coeffs / nrm, self.sector)

    def with_sector(self, sector: Sector | None) -> "FockSpinVector":
        return FockSpinVector(self.cutoff, self.coeffs, sector)


def sector_weights(v: FockSpinVector) -> dict[Sector, float]:
    """Fraction of the squared norm carried by each sector."""
    bare = v.to_bare()
    total = float(np.sum(bare ** 2))
    if total == 0:
        raise InvalidArgument("zero vector has no sector")
    weights = {}
    for sector in Sector:
        n = sector.photons(v.cutoff)
        col = np.where(sector.spin_of(n) > 0, 0, 1)
        weights[sector] = float(np.sum(bare[n, col] ** 2)) / total
    return weights


def sector_of(v: FockSpinVector) -> Sector:
    """The sector carrying all but ``SECTOR_WEIGHT_TOL`` of the norm."""
    weights = sector_weights(v)
    best = max(weights, key=weights.get)
    if weights[best] < 1 - SECTOR_WEIGHT_TOL:
        raise SectorViolation(
            "vector spans several sectors: "
            + ", ".join(f"{s.name}={w:.3g}" for s, w in weights.items() if w > 0))
    return best


def _sector_chain(H: HamiltonianMatrix, sector: Sector):
    """Tridiagonal (diagonal, offdiagonal) of H restricted to ``sector``.

    Matrix elements are read from the rotated-frame band and rotated to the
    bare frame, <n,a|H|m,b> = 1/2 sum_{s,t} u_a(s) u_b(t) H[(n,s),(m,t)] with
    u_up = (1, 1), u_down = (1, -1).
    """
    n = sector.photons(H.cutoff)
    spin = sector.spin_of(n)
    d0 = H.diagonal(0)
    flip = H.band[HALF_BANDWIDTH - 1, 1::2]  # H[(n,+),(n,-)]
    diag = 0.5 * (d0[_index(n, 1)] + d0[_index(n, -1)]) + spin * flip[n]

    m = n[1:]
    s_lo, s_hi = spin[:-1], spin[1:]
    hop_plus = H.band[0, _index(m, 1)]     # H[(m-2,+),(m,+)]
    hop_minus = H.band[0, _index(m, -1)]   # H[(m-2,-),(m,-)]
    offdiag = 0.5 * (hop_plus + s_lo * s_hi * hop_minus)
    return n, spin, diag, offdiag


@dataclass(frozen=True, eq=False)
class SpectrumResult:
    params: ModelParams
    cutoff: int
    eigenvalues: np.ndarray
    residual_norms: np.ndarray
    converged: np.ndarray
    vectors: list[FockSpinVector] = field(default_factory=list)
    warning: str | None = None

    @property
    def sectors(self) -> list[Sector]:
        return [v.sector for v in self.vectors]

    def __len__(self):
        return len(self.eigenvalues)


def _canonical_sign(bare_chain: np.ndarray) -> np.ndarray:
    # deterministic sign: largest-magnitude component positive
    idx = np.argmax(np.abs(bare_chain), axis=0)
    signs = np.sign(bare_chain[idx, np.arange(bare_chain.shape[1])])
    signs[signs == 0] = 1.0
    return bare_chain * signs


TAIL_START = 1e-6


def _minimal_tail(vec: np.ndarray, diag: np.ndarray, offdiag: np.ndarray, E: float) -> np.ndarray:
    """Recompute the decaying tail of a chain eigenvector to full relative accuracy.

    The eigensolver gets small components only to ~1e-16 absolute; past the
    point where |c_k| drops below TAIL_START of the peak they are rebuilt
    from the ratios c_{k+1}/c_k of the minimal solution of the three-term
    recurrence, evaluated as a continued fraction from the cutoff down.
    """
    big = np.flatnonzero(np.abs(vec) >= TAIL_START * np.max(np.abs(vec)))
    start = int(big[-1])
    last = vec.size - 1
    if start >= last - 1:
        return vec
    ratios = np.empty(last - start)
    rho = 0.0
    with np.errstate(all="ignore"):
        for k in range(last - 1, start - 1, -1):
            rho = -offdiag[k] / (diag[k + 1] - E + (offdiag[k + 1] * rho if k + 1 < last else 0.0))
            ratios[k - start] = rho
    if not np.all(np.isfinite(ratios)):
        return vec
    out = vec.copy()
    out[start + 1:] = vec[start] * np.cumprod(ratios)
    return out / np.linalg.norm(out)


def _sector_eigenpairs(H: HamiltonianMatrix, sector: Sector, k: int):
    n, spin, diag, offdiag = _sector_chain(H, sector)
    kk = min(k, n.size)
    try:
        if kk == n.size:
            vals, vecs = eigh_tridiagonal(diag, offdiag)
        else:
            vals, vecs = eigh_tridiagonal(diag, offdiag, select="i", select_range=(0, kk - 1))
    except (LinAlgError, ValueError) as exc:
        raise NumericFailure(
            f"tridiagonal eigensolver failed in sector {sector.name}",
            {"sector": sector.name, "dimension": int(n.size), "k": kk, "cause": str(exc)},
        ) from exc
    for j in range(kk):
        vecs[:, j] = _minimal_tail(vecs[:, j], diag, offdiag, vals[j])
    vecs = _canonical_sign(vecs)
    out = []
    col = np.where(spin > 0, 0, 1)
    for j in range(kk):
        bare = np.zeros((H.cutoff + 1, 2))
        bare[n, col] = vecs[:, j]
        out.append((float(vals[j]), FockSpinVector.from_bare(bare, sector)))
    return out


def diagonalize(H: HamiltonianMatrix, k: int, check_convergence: bool = True) -> SpectrumResult:
    """The ``k`` lowest eigenpairs of ``H``.

    Each sector is solved separately, so eigenvectors carry an exact sector
    label even when levels of different sectors are degenerate.  Residuals
    ||Hv - Ev|| are measured against the full banded matrix.  With
    ``check_convergence`` the cutoff-doubling test of ``convergence_guard``
    fills ``converged``; otherwise every flag is False.
    """
    if not isinstance(k, (int, np.integer)) or not 1 <= k <= H.dimension:
        raise InvalidArgument(f"k must be in 1..{H.dimension}, got {k!r}")
    pairs = []
    for sector in Sector:
        pairs.extend((val, order, vec) for order, (val, vec) in
                     enumerate(_sector_eigenpairs(H, sector, k)))
    sector_rank = {s: i for i, s in enumerate(Sector)}
    pairs.sort(key=lambda p: (p[0], sector_rank[p[2].sector], p[1]))
    pairs = pairs[:k]

    values = np.array([p[0] for p in pairs])
    vectors = [p[2] for p in pairs]
    residuals = np.array([
        np.linalg.norm(H.matvec(v.flat()) - e * v.flat()) for e, v in zip(values, vectors)
    ])
    tol = 1e-8 * np.maximum(1.0, np.abs(values))
    if np.any(residuals > tol):
        bad = int(np.argmax(residuals / tol))
        raise NumericFailure(
            "eigenpair residual above tolerance",
            {"index": bad, "residual": float(residuals[bad]), "energy": float(values[bad])},
        )

    warning = None
    if check_convergence:
        report = _doubling_test(H.params, values, H.cutoff, k)
        converged, warning = report.flags, report.warning
    else:
        converged = np.zeros(k, dtype=bool)
    return SpectrumResult(H.params, H.cutoff, values, residuals, np.asarray(converged),
                          vectors, warning)


@dataclass(frozen=True)
class ConvergenceReport:
    flags: np.ndarray
    warning: str | None = None

    @property
    def all_converged(self) -> bool:
        return bool(np.all(self.flags))


BEYOND_COLLAPSE_WARNING = (
    "epsilon > omega/2: the spectrum is unbounded below and truncated "
    "diagonalization produces spurious converging states; all levels flagged unconverged")


def _doubling_test(params: ModelParams, values: np.ndarray, cutoff: int, k: int) -> ConvergenceReport:
    if params.is_beyond_collapse():
        return ConvergenceReport(np.zeros(k, dtype=bool), BEYOND_COLLAPSE_WARNING)
    doubled = diagonalize(build_hamiltonian(params, 2 * cutoff), k, check_convergence=False)
    diff = np.abs(doubled.eigenvalues - values)
    return ConvergenceReport(diff < CONVERGENCE_ATOL * params.omega)


def convergence_guard(params: ModelParams, cutoff: int, k: int) -> ConvergenceReport:
    """Flag level i converged iff |E_i(N) - E_i(2N)| < 1e-6 omega.

    Beyond the collapse point every flag is False and a warning is attached
    (and emitted through :mod:`warnings`).
    """
    if params.is_beyond_collapse():
        warnings.warn(BEYOND_COLLAPSE_WARNING, RuntimeWarning, stacklevel=2)
        return ConvergenceReport(np.zeros(k, dtype=bool), BEYOND_COLLAPSE_WARNING)
    base = diagonalize(build_hamiltonian(params, cutoff), k, check_convergence=False)
    return _doubling_test(params, base.eigenvalues, cutoff, k)


def spectrum(params: ModelParams, k: int, cutoff: int = DEFAULT_CUTOFF,
             check_convergence: bool = True) -> SpectrumResult:
    """Shorthand for ``diagonalize(build_hamiltonian(params, cutoff), k)``."""
    return diagonalize(build_hamiltonian(params, cutoff), k, check_convergence)


_RESCALE_ABOVE = 1e100


def hermite_series(coeffs: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Evaluate sum_n coeffs[n, j] h_n(x) for every column j.

    h_n are the orthonormal Hermite functions, generated by the normalized
    three-term recurrence

        h_{n+1} = x sqrt(2/(n+1)) h_n - sqrt(n/(n+1)) h_{n-1},

    started from h_0 = pi^(-1/4) exp(-x^2/2).  The Gaussian factor is kept as
    a separate per-point log scale and the running values are rescaled when
    they grow, so neither the e^(-x^2/2) underflow at large |x| nor the growth
    of h_n inside the oscillatory region can overflow.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    squeeze = coeffs.ndim == 1
    if squeeze:
        coeffs = coeffs[:, None]
    x = np.asarray(x, dtype=float)
    n_max = coeffs.shape[0] - 1

    log_scale = -0.5 * x * x
    h_prev = np.zeros_like(x)
    h_cur = np.full_like(x, np.pi ** -0.25)
    acc = h_cur[:, None] * coeffs[0][None, :]
    for n in range(n_max):
        h_next = x * math.sqrt(2.0 / (n + 1)) * h_cur - math.sqrt(n / (n + 1)) * h_prev
        h_prev, h_cur = h_cur, h_next
        c = coeffs[n + 1]
        if np.any(c):
            acc += h_cur[:, None] * c[None, :]
        big = np.abs(h_cur) > _RESCALE_ABOVE
        if np.any(big):
            h_cur[big] /= _RESCALE_ABOVE
            h_prev[big] /= _RESCALE_ABOVE
            acc[big] /= _RESCALE_ABOVE
            log_scale[big] += math.log(_RESCALE_ABOVE)

    with np.errstate(divide="ignore", over="ignore"):
        magnitude = np.exp(np.log(np.abs(acc)) + log_scale[:, None])
    if not np.all(np.isfinite(magnitude)):
        raise NumericFailure("overflow in Hermite recurrence",
                             {"n_max": n_max, "x_max": float(np.max(np.abs(x)))})
    out = np.sign(acc) * magnitude
    return out[:, 0] if squeeze else out


def hermite_function(n: int, x: np.ndarray) -> np.ndarray:
    coeffs = np.zeros(n + 1)
    coeffs[n] = 1.0
    return hermite_series(coeffs, x)


def _check_symmetric_grid(x: np.ndarray) -> float:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size < 3 or x.size % 2 == 0:
        raise InvalidArgument("grid must be 1-D with an odd number of points")
    steps = np.diff(x)
    h = float(steps.mean())
    if h <= 0 or np.max(np.abs(steps - h)) > 1e-9 * max(h, abs(x[-1])):
        raise InvalidArgument("grid must be uniform and increasing")
    if np.max(np.abs(x + x[::-1])) > 1e-9 * max(1.0, abs(x[-1])):
        raise InvalidArgument("grid must be symmetric about 0")
    return h


def truncate_to_sector_states(v: FockSpinVector, n_states: int) -> FockSpinVector:
    """Keep only the first ``n_states`` members of the vector's sector chain.

    Without a sector label the first ``n_states`` number states are kept.
    """
    coeffs = v.coeffs.copy()
    if v.sector is None:
        coeffs[n_states:] = 0.0
    else:
        keep = v.sector.photons(v.cutoff)[:n_states]
        mask = np.zeros(v.cutoff + 1, dtype=bool)
        mask[keep] = True
        coeffs[~mask] = 0.0
    return FockSpinVector(v.cutoff, coeffs, v.sector)


def reconstruct_wavefunction(v: FockSpinVector, x_grid: np.ndarray, omega: float,
                             n_states: int | None = None) -> SpinorGridFunction:
    """Real-space spinor psi_s(x) = omega^(1/4) sum_n c[n, s] h_n(sqrt(omega) x)."""
    h = _check_symmetric_grid(x_grid)
    if n_states is not None:
        v = truncate_to_sector_states(v, n_states)
    nz = np.flatnonzero(np.any(v.coeffs != 0, axis=1))
    last = int(nz[-1]) if nz.size else 0
    x = np.asarray(x_grid, dtype=float)
    values = hermite_series(v.coeffs[: last + 1], math.sqrt(omega) * x) * omega ** 0.25
    return SpinorGridFunction(x, values[:, 0].copy(), values[:, 1].copy(), h)
