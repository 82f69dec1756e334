"""Model parameters and the shared energy conventions.

Units: hbar = 1 and unit oscillator mass.  The boson frequency ``omega`` is
always carried explicitly.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

from .errors import InvalidArgument

COLLAPSE_RTOL = 1e-12


@dataclass(frozen=True)
class ModelParams:
    """Boson frequency, spin splitting and two-photon coupling."""

    omega: float
    omega0: float
    epsilon: float

    def __post_init__(self):
        for name in ("omega", "omega0", "epsilon"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or value != value:
                raise InvalidArgument(f"{name} must be a real number, got {value!r}")
            object.__setattr__(self, name, float(value))
        if not self.omega > 0:
            raise InvalidArgument(f"omega must be > 0, got {self.omega}")
        if self.omega0 < 0:
            raise InvalidArgument(f"omega0 must be >= 0, got {self.omega0}")
        if self.epsilon < 0:
            raise InvalidArgument(f"epsilon must be >= 0, got {self.epsilon}")

    @classmethod
    def at_collapse(cls, omega0: float, omega: float = 1.0) -> "ModelParams":
        return cls(omega=omega, omega0=omega0, epsilon=omega / 2)

    def is_collapse_point(self) -> bool:
        return abs(self.epsilon - self.omega / 2) <= COLLAPSE_RTOL * self.omega

    def is_subcritical(self) -> bool:
        return self.epsilon < self.omega / 2

    def is_beyond_collapse(self) -> bool:
        return self.epsilon > self.omega / 2 and not self.is_collapse_point()

    def replace(self, **changes) -> "ModelParams":
        fields = {"omega": self.omega, "omega0": self.omega0, "epsilon": self.epsilon}
        fields.update(changes)
        return ModelParams(**fields)


@dataclass(frozen=True)
class ShiftedEnergy:
    """Energy measured from the collapse threshold, E~ = E + omega/2."""

    e_tilde: float
    omega: float

    @classmethod
    def from_E(cls, E: float, omega: float) -> "ShiftedEnergy":
        return cls(float(E) + omega / 2, float(omega))

    def to_E(self) -> float:
        return self.e_tilde - self.omega / 2

    def __float__(self):
        return self.e_tilde


def shift_energy(E: float, params: ModelParams) -> ShiftedEnergy:
    return ShiftedEnergy.from_E(E, params.omega)


def unshift_energy(e_tilde: float, params: ModelParams) -> float:
    return ShiftedEnergy(float(e_tilde), params.omega).to_E()


def is_admissible(e_tilde: float, params: ModelParams) -> bool:
    """Whether a shifted energy lies in the collapse-point bound-state window.

    Bound states at the collapse point need -omega0/2 < E~ < 0: above zero
    the effective potential flattens below the zero effective energy, below
    -omega0/2 it is positive everywhere.
    """
    return -params.omega0 / 2 < e_tilde < 0


class ParityKind(enum.Enum):
    EVEN = 0
    ODD = 1

    @property
    def sign(self) -> int:
        return 1 if self is ParityKind.EVEN else -1

    @classmethod
    def of(cls, n: int) -> "ParityKind":
        return cls.EVEN if n % 2 == 0 else cls.ODD


@dataclass(frozen=True)
class Parity:
    """Photon-number parity and the x -> -x reflection parity of psi_minus.

    The two always agree for eigenstates (number state n has reflection
    parity (-1)^n), but they are kept apart because they are measured
    differently: one from Fock support, the other from the grid function.
    """

    photon_parity: ParityKind
    reflection_parity: ParityKind

    @classmethod
    def even(cls) -> "Parity":
        return cls(ParityKind.EVEN, ParityKind.EVEN)

    @classmethod
    def odd(cls) -> "Parity":
        return cls(ParityKind.ODD, ParityKind.ODD)

    @classmethod
    def from_nodes(cls, node_count: int) -> "Parity":
        kind = ParityKind.of(node_count)
        return cls(kind, kind)

    @property
    def is_even(self) -> bool:
        return self.reflection_parity is ParityKind.EVEN

    def initial_conditions(self) -> tuple[float, float]:
        """(psi(0), psi'(0)) for outward integration from the origin."""
        return (1.0, 0.0) if self.is_even else (0.0, 1.0)


@dataclass(frozen=True, eq=False)
class SpinorGridFunction:
    """The pair (psi_plus, psi_minus) on a grid symmetric about 0.

    Solvers produce uniform grids of step ``h``; only ``decimated(core=...)``
    returns a graded one.
    """

    x: np.ndarray
    psi_plus: np.ndarray
    psi_minus: np.ndarray
    h: float

    def __post_init__(self):
        if not (self.x.shape == self.psi_plus.shape == self.psi_minus.shape):
            raise InvalidArgument("grid and both components must have the same shape")

    @property
    def x_max(self) -> float:
        return float(self.x[-1])

    def component_norms(self) -> tuple[float, float]:
        """Integrals of psi_plus^2 and psi_minus^2.

        Trapezoid rule: for integrands that are smooth and decayed at both
        grid ends it converges exponentially in 1/h, and it stays accurate
        when a feature (the psi_plus core near threshold) spans only a few
        grid steps, where composite Simpson does not.
        """
        return (float(trapezoid(self.psi_plus ** 2, x=self.x)),
                float(trapezoid(self.psi_minus ** 2, x=self.x)))

    def total_norm(self) -> float:
        return sum(self.component_norms())

    def scaled(self, factor: float) -> "SpinorGridFunction":
        return SpinorGridFunction(self.x, self.psi_plus * factor, self.psi_minus * factor, self.h)

    def reflection_parity(self, tol: float = 1e-10) -> ParityKind | None:
        """Parity of psi_minus under x -> -x, or None if it has none."""
        scale = max(float(np.max(np.abs(self.psi_minus))), 1e-300)
        flipped = self.psi_minus[::-1]
        if np.max(np.abs(flipped - self.psi_minus)) <= tol * scale:
            return ParityKind.EVEN
        if np.max(np.abs(flipped + self.psi_minus)) <= tol * scale:
            return ParityKind.ODD
        return None

    def decimated(self, max_rows: int, core: float | None = None) -> "SpinorGridFunction":
        """At most ``max_rows`` points, symmetric about x = 0.

        Without ``core`` every m-th point is kept.  With ``core`` the points
        follow x = core * sinh(u) for uniform u, so features of width ~core
        at the origin stay resolved while the far tails are thinned; the
        result is then non-uniform and ``h`` is the smallest spacing.
        """
        half = (self.x.size - 1) // 2
        if self.x.size <= max_rows:
            return self
        if core is None:
            stride = -(-half // ((max_rows - 1) // 2))
            m = half // stride
            idx = half + stride * np.arange(-m, m + 1)
            return SpinorGridFunction(self.x[idx], self.psi_plus[idx], self.psi_minus[idx],
                                      self.h * stride)
        target = (max_rows - 1) // 2 + 1
        right = None
        samples = target
        for _ in range(8):
            # the core is oversampled and collapses onto repeated grid points
            u = np.linspace(0.0, np.arcsinh(self.x_max / core), samples)
            trial = np.unique(np.rint(core * np.sinh(u) / self.h).astype(np.int64))
            trial = trial[trial <= half]
            if trial.size > target:
                break
            right = trial
            samples = int(samples * min(2.0, 1.0 + 0.9 * (target - trial.size) / trial.size))
        idx = np.concatenate([half - right[:0:-1], half + right])
        x = self.x[idx]
        return SpinorGridFunction(x, self.psi_plus[idx], self.psi_minus[idx],
                                  float(np.min(np.diff(x))))
