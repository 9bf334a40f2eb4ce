"""Parameter conventions and effective single-mode models.

Every quantity is expressed in units of the cavity decay rate ``kappa``.
The microscopic system is a driven collective atomic mode (the cavity wall)
coupled to one cavity mode; after adiabatic elimination of the wall one is
left with a driven, possibly nonlinear, single-mode cavity Hamiltonian.
"""

from __future__ import annotations

import math
import numbers
from dataclasses import dataclass, field
from typing import Mapping

__all__ = [
    "SingularDetuningError",
    "SystemParams",
    "LinearEffectiveModel",
    "NonlinearEffectiveModel",
    "KerrModel",
    "SqueezeModel",
    "ValidityReport",
    "DEFAULT_THRESHOLDS",
    "thermal_occupation",
    "derive_linear_model",
    "derive_nonlinear_model",
    "reduce_kerr",
    "reduce_squeeze",
    "validity_report",
]


class SingularDetuningError(ValueError):
    """Raised when the atom-drive detuning vanishes and elimination is invalid."""


def _real(name, value):
    if isinstance(value, complex) or not isinstance(value, numbers.Real):
        raise TypeError(f"{name} must be a real number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")
    return value


@dataclass(frozen=True)
class SystemParams:
    """Microscopic inputs of the cavity + atomic-wall model.

    Frequencies are absolute (rotating-frame offsets are formed from them);
    use :meth:`from_detunings` when only the detunings matter.
    """

    omega_c: float
    omega_a: float
    omega_f: float
    g: float
    Omega: float
    N: int
    kappa: float = 1.0
    gamma: float = 0.0
    T: float = 0.0

    def __post_init__(self):
        for name in ("omega_c", "omega_a", "omega_f", "g", "Omega", "kappa", "gamma", "T"):
            object.__setattr__(self, name, _real(name, getattr(self, name)))
        if isinstance(self.N, bool) or not isinstance(self.N, numbers.Integral):
            if isinstance(self.N, float) and self.N.is_integer():
                object.__setattr__(self, "N", int(self.N))
            else:
                raise TypeError(f"N must be a positive integer, got {self.N!r}")
        if self.N < 1:
            raise ValueError(f"N must be >= 1, got {self.N}")
        if self.kappa <= 0:
            raise ValueError(f"kappa must be > 0, got {self.kappa}")
        if self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if self.T < 0:
            raise ValueError(f"T must be >= 0, got {self.T}")

    @classmethod
    def from_detunings(cls, delta_c, delta_b, g, Omega, N, kappa=1.0, gamma=0.0, T=0.0):
        """Build parameters in the drive frame (``omega_f = 0``)."""
        return cls(omega_c=delta_c, omega_a=delta_b, omega_f=0.0, g=g, Omega=Omega,
                   N=N, kappa=kappa, gamma=gamma, T=T)

    @property
    def delta_c(self) -> float:
        return self.omega_c - self.omega_f

    @property
    def delta_b(self) -> float:
        return self.omega_a - self.omega_f

    @property
    def omega_ac(self) -> float:
        return self.omega_a - self.omega_c

    def replace(self, **changes) -> "SystemParams":
        values = {k: getattr(self, k) for k in self.__dataclass_fields__}
        values.update(changes)
        return SystemParams(**values)


def thermal_occupation(omega_r: float, T: float) -> float:
    """Bose-Einstein occupation ``1/(exp(omega_r/T) - 1)`` with ``k_B = 1``.

    Exactly zero at ``T = 0``.
    """
    if not omega_r > 0:
        raise ValueError(f"omega_r must be > 0, got {omega_r}")
    if T < 0:
        raise ValueError(f"T must be >= 0, got {T}")
    if T == 0:
        return 0.0
    x = omega_r / T
    if x > 700:
        return 0.0
    return 1.0 / math.expm1(x)


def _check_detuning(p: SystemParams) -> float:
    delta_b = p.delta_b
    if delta_b == 0:
        raise SingularDetuningError(
            "atom-drive detuning delta_b = omega_a - omega_f is zero; "
            "adiabatic elimination of the collective mode is invalid")
    return delta_b


@dataclass(frozen=True)
class LinearEffectiveModel:
    delta_c: float
    delta_b: float
    G: float
    chi: float
    delta_shift: float
    omega_eff0: float
    f: float
    omega_ac: float

    @property
    def delta_eff0(self) -> float:
        """Detuning of the shifted cavity from the drive."""
        return self.delta_c - self.delta_shift


def derive_linear_model(p: SystemParams) -> LinearEffectiveModel:
    delta_b = _check_detuning(p)
    G = p.g * math.sqrt(p.N)
    chi = p.Omega * math.sqrt(p.N)
    shift = p.N * p.g**2 / delta_b
    return LinearEffectiveModel(
        delta_c=p.delta_c,
        delta_b=delta_b,
        G=G,
        chi=chi,
        delta_shift=shift,
        omega_eff0=p.omega_c - shift,
        f=-G * chi / delta_b,
        omega_ac=p.omega_ac,
    )


@dataclass(frozen=True)
class KerrModel:
    """Kerr-dominant reduction (squeezing term dropped)."""

    delta_eff_k: float
    chi_kerr: float
    zeta: float
    F_prime: float


@dataclass(frozen=True)
class SqueezeModel:
    """Squeezing-dominant reduction (Kerr term dropped)."""

    delta_eff_s: float
    mu: float
    zeta: float
    F_dprime: float


@dataclass(frozen=True)
class NonlinearEffectiveModel:
    delta_eff1: float
    chi_kerr: float
    mu: float
    zeta: float
    F: float
    params: SystemParams = field(repr=False)

    @property
    def linear_shift(self) -> float:
        """``N g^2 / delta_b``, the ensemble-induced frequency shift."""
        p = self.params
        return p.N * p.g**2 / p.delta_b

    @property
    def linear_drive(self) -> float:
        """``-N g Omega / delta_b``, the leading-order induced drive."""
        p = self.params
        return -p.N * p.g * p.Omega / p.delta_b

    def reduce_kerr(self) -> KerrModel:
        return reduce_kerr(self)

    def reduce_squeeze(self) -> SqueezeModel:
        return reduce_squeeze(self)


def derive_nonlinear_model(p: SystemParams) -> NonlinearEffectiveModel:
    delta_b = _check_detuning(p)
    N, g, Om = p.N, p.g, p.Omega
    db3 = delta_b**3
    chi_kerr = N * g**4 / db3
    mu = N * g**2 * Om**2 / db3
    zeta = 2.0 * N * g**3 * Om / db3
    delta_eff1 = p.delta_c - N * g**2 / delta_b + chi_kerr + 4.0 * mu
    F = -(N * g * Om / delta_b) * (1.0 - (2.0 * Om**2 + g**2) / delta_b**2)
    return NonlinearEffectiveModel(delta_eff1=delta_eff1, chi_kerr=chi_kerr, mu=mu,
                                   zeta=zeta, F=F, params=p)


def reduce_kerr(m: NonlinearEffectiveModel) -> KerrModel:
    return KerrModel(
        delta_eff_k=m.params.delta_c - m.linear_shift + m.chi_kerr,
        chi_kerr=m.chi_kerr,
        zeta=m.zeta,
        F_prime=m.linear_drive + 0.5 * m.zeta,
    )


def reduce_squeeze(m: NonlinearEffectiveModel) -> SqueezeModel:
    p = m.params
    cubic_drive = 2.0 * p.N * p.g * p.Omega**3 / p.delta_b**3
    return SqueezeModel(
        delta_eff_s=p.delta_c - m.linear_shift + 4.0 * m.mu,
        mu=m.mu,
        zeta=m.zeta,
        F_dprime=m.linear_drive + cubic_drive,
    )


# A ratio check passes when the ratio is at least this large
# ("excitation_fraction" instead passes when below 1/threshold).
DEFAULT_THRESHOLDS = {
    "delta_b_over_gamma": 10.0,
    "delta_b_over_Omega": 10.0,
    "delta_b_over_G": 10.0,
    "gamma_over_kappa": 10.0,
    "excitation_fraction": 10.0,
}


@dataclass(frozen=True)
class ValidityReport:
    ratios: dict
    passed: dict
    thresholds: dict

    @property
    def all_passed(self) -> bool:
        return all(self.passed.values())

    def failures(self) -> list:
        return [k for k, ok in self.passed.items() if not ok]


def _ratio(num, den):
    if den == 0:
        return math.inf if num != 0 else math.nan
    return num / den


def validity_report(p: SystemParams, thresholds: Mapping[str, float] | None = None) -> ValidityReport:
    """Diagnose the adiabatic-elimination and low-excitation conditions.

    Purely informational: nothing downstream consults it.
    """
    th = dict(DEFAULT_THRESHOLDS)
    if thresholds:
        unknown = set(thresholds) - set(th)
        if unknown:
            raise KeyError(f"unknown validity thresholds: {sorted(unknown)}")
        th.update(thresholds)
    db = abs(p.delta_b)
    G = abs(p.g) * math.sqrt(p.N)
    ratios = {
        "delta_b_over_gamma": _ratio(db, p.gamma),
        "delta_b_over_Omega": _ratio(db, abs(p.Omega)),
        "delta_b_over_G": _ratio(db, G),
        "gamma_over_kappa": p.gamma / p.kappa,
        # <B^dag B>/N with B ~ -Omega sqrt(N)/delta_b from the collective-mode steady state
        "excitation_fraction": _ratio(p.Omega**2, db**2),
    }
    passed = {}
    for key, value in ratios.items():
        if key == "excitation_fraction":
            passed[key] = bool(value < 1.0 / th[key])
        else:
            passed[key] = bool(value >= th[key])
    return ValidityReport(ratios=ratios, passed=passed, thresholds=th)
