"""Output spectra: linear cavity response and the squeezing-model intensity spectrum.

The squeezing model uses Langevin damping ``kappa/2`` and the input-output
relation ``c_out = sqrt(kappa) c - c_in``.  With

    A(w) = -i w + kappa/2 + i Delta + 4 i zeta Re(c_s),   B = 2 (mu + zeta c_s),
    D(w) = A(w) A*(-w) - |B|^2,

the output fluctuation is ``u(w) c_in(w) + v(w) c_in^dag(w)`` where
``u = kappa A*(-w)/D - 1`` and ``v = -i kappa B / D``.  Projecting on the
mean-field phase ``phi`` and using vacuum input gives

    S_I(w) = |u(w) + exp(2 i phi) v*(-w)|^2,

normalized so that the vacuum level is 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fluctuations import squeeze_drift_matrix
from .model import LinearEffectiveModel, SqueezeModel
from .steady import classify_stability

__all__ = [
    "UnstableSteadyStateError",
    "SpectrumCoefficients",
    "SpectrumCurve",
    "DEFAULT_OMEGA_GRID",
    "linear_response_spectrum",
    "spectrum_coefficients",
    "output_intensity_spectrum",
    "peak_position",
    "full_width_half_maximum",
    "local_minima",
]

DEFAULT_OMEGA_GRID = np.linspace(-10.0, 10.0, 2001)


class UnstableSteadyStateError(ValueError):
    pass


@dataclass(frozen=True)
class SpectrumCoefficients:
    A_w: np.ndarray
    B: complex
    D_w: np.ndarray
    omega: np.ndarray


@dataclass
class SpectrumCurve:
    omega: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)
    phi: float | None = None
    literal: np.ndarray | None = None
    u: np.ndarray | None = None
    v: np.ndarray | None = None


def linear_response_spectrum(m: LinearEffectiveModel, kappa: float, omega_grid) -> SpectrumCurve:
    """Unit-peak Lorentzian of the indirectly driven cavity versus drive frequency.

    Centered at the shifted cavity frequency ``omega_c - delta`` with full
    width ``kappa``.
    """
    if not kappa > 0:
        raise ValueError("kappa must be > 0")
    w = np.asarray(omega_grid, dtype=float)
    hw = kappa / 2
    values = hw**2 / ((w - m.omega_eff0) ** 2 + hw**2)
    meta = {"center": m.omega_eff0, "bare_cavity": m.omega_eff0 + m.delta_shift,
            "shift": m.delta_shift, "drive_amplitude": m.f, "kappa": kappa}
    return SpectrumCurve(omega=w, values=values, meta=meta)


def _a0(m: SqueezeModel, kappa, c_s):
    return kappa / 2 + 1j * m.delta_eff_s + 4j * m.zeta * complex(c_s).real


def spectrum_coefficients(m: SqueezeModel, kappa: float, c_s: complex, omega) -> SpectrumCoefficients:
    w = np.asarray(omega, dtype=float)
    a = _a0(m, kappa, c_s)
    B = 2 * (m.mu + m.zeta * complex(c_s))
    A_w = -1j * w + a
    A_star_minus = np.conj(1j * w + a)
    D_w = A_w * A_star_minus - abs(B) ** 2
    return SpectrumCoefficients(A_w=A_w, B=B, D_w=D_w, omega=w)


def output_intensity_spectrum(m: SqueezeModel, kappa: float, c_s: complex, omega_grid=None,
                              phi: float | None = None) -> SpectrumCurve:
    """Zero-temperature output intensity spectrum around the steady state ``c_s``.

    ``phi`` defaults to the phase of the mean output field ``sqrt(kappa) c_s``
    (zero when ``c_s = 0``).  The closed form ``|1 - kappa/D (A*(-w) +
    i exp(2 i phi) B*)|^2`` is evaluated alongside as ``literal``.
    """
    c_s = complex(c_s)
    A = squeeze_drift_matrix(m, kappa, c_s)
    stability = classify_stability(None, A)
    if stability != "stable":
        raise UnstableSteadyStateError(f"steady state {c_s!r} is {stability}; no stationary spectrum")
    w = DEFAULT_OMEGA_GRID if omega_grid is None else np.asarray(omega_grid, dtype=float)
    if phi is None:
        phi = float(np.angle(np.sqrt(kappa) * c_s)) if c_s != 0 else 0.0
    co = spectrum_coefficients(m, kappa, c_s, w)
    a = _a0(m, kappa, c_s)
    A_star_minus = np.conj(1j * w + a)
    u = kappa * A_star_minus / co.D_w - 1.0
    v = -1j * kappa * co.B / co.D_w
    # v*(-w): D(-w) = conj(D(w)) on the real axis
    v_star_minus = np.conj(-1j * kappa * co.B / np.conj(co.D_w))
    rot = np.exp(2j * phi)
    values = np.abs(u + rot * v_star_minus) ** 2
    literal = np.abs(1.0 - kappa / co.D_w * (A_star_minus + 1j * rot * np.conj(co.B))) ** 2
    meta = {"c_s": c_s, "B": co.B, "kappa": kappa,
            "max_literal_deviation": float(np.max(np.abs(values - literal)))}
    return SpectrumCurve(omega=w, values=values, meta=meta, phi=phi, literal=literal, u=u, v=v)


def peak_position(curve: SpectrumCurve) -> float:
    """Location of the maximum, refined by a parabola through the top three samples."""
    y = curve.values
    x = curve.omega
    i = int(np.argmax(y))
    if 0 < i < len(y) - 1:
        y0, y1, y2 = y[i - 1], y[i], y[i + 1]
        denom = y0 - 2 * y1 + y2
        if denom != 0:
            h = x[i + 1] - x[i]
            return float(x[i] + 0.5 * h * (y0 - y2) / denom)
    return float(x[i])


def full_width_half_maximum(curve: SpectrumCurve) -> float:
    """Width between the half-maximum crossings, linearly interpolated."""
    x, y = curve.omega, curve.values
    i = int(np.argmax(y))
    half = y[i] / 2
    left = np.flatnonzero(y[:i] < half)
    right = np.flatnonzero(y[i:] < half)
    if left.size == 0 or right.size == 0:
        raise ValueError("grid does not bracket both half-maximum crossings")
    l0 = left[-1]
    r0 = i + right[0]
    xl = np.interp(half, [y[l0], y[l0 + 1]], [x[l0], x[l0 + 1]])
    xr = np.interp(half, [y[r0], y[r0 - 1]], [x[r0], x[r0 - 1]])
    return float(xr - xl)


def local_minima(curve: SpectrumCurve, below: float | None = None) -> np.ndarray:
    """Frequencies of strict interior local minima, optionally only those below a level."""
    y = curve.values
    idx = np.flatnonzero((y[1:-1] < y[:-2]) & (y[1:-1] < y[2:])) + 1
    if below is not None:
        idx = idx[y[idx] < below]
    return curve.omega[idx]
