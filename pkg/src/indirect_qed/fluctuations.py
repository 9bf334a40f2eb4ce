"""Linearized quantum fluctuations around a Kerr-model steady state.

Works in the positive-P picture with the basis ``(alpha_1, alpha_1^dag)``.
The fluctuations obey ``d/dt alpha_1 = -A alpha_1 + D^(1/2) xi`` and their
steady-state correlation matrix solves ``A C + C A^T = D``.

Damping follows the master-equation convention ``kappa (2 c rho c^dag - ...)``,
so the mean-field amplitude decays at rate ``kappa``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .model import KerrModel, SqueezeModel, SystemParams, derive_nonlinear_model, thermal_occupation
from .roots import SolverConfig

logger = logging.getLogger(__name__)

__all__ = [
    "MarginalStabilityError",
    "ConventionError",
    "UndefinedObservableError",
    "CorrelationResult",
    "G2Scan",
    "drift_matrix",
    "diffusion_matrix",
    "squeeze_drift_matrix",
    "correlation_matrix",
    "lyapunov_residual",
    "analyze",
    "g2_zero",
    "g2_scan",
]


class MarginalStabilityError(ArithmeticError):
    """Tr(A) Det(A) vanishes; the steady-state correlations do not exist."""


class ConventionError(RuntimeError):
    """A quantity that must be real came out complex (wrong root or convention)."""


class UndefinedObservableError(ValueError):
    """g2(0) requested at zero mean photon number."""


def _kerr_terms(m: KerrModel, kappa, alpha0):
    kp = kappa + 1j * m.delta_eff_k
    chi2 = 1j * m.chi_kerr
    zp = 1j * m.zeta
    n0 = abs(alpha0) ** 2
    a11 = kp + 4 * chi2 * n0 + 4 * zp * alpha0.real
    x = chi2 * alpha0**2 + zp * alpha0
    return a11, x


def drift_matrix(m: KerrModel, kappa: float, alpha0: complex) -> np.ndarray:
    alpha0 = complex(alpha0)
    a11, x = _kerr_terms(m, kappa, alpha0)
    a12 = 2 * x
    return np.array([[a11, a12], [np.conj(a12), np.conj(a11)]], dtype=complex)


def diffusion_matrix(m: KerrModel, kappa: float, n_th: float, alpha0: complex) -> np.ndarray:
    if n_th < 0:
        raise ValueError(f"n_th must be >= 0, got {n_th}")
    alpha0 = complex(alpha0)
    _, x = _kerr_terms(m, kappa, alpha0)
    d11 = -2 * x
    d12 = 2 * kappa * n_th
    return np.array([[d11, d12], [d12, np.conj(d11)]], dtype=complex)


def squeeze_drift_matrix(m: SqueezeModel, kappa: float, c_s: complex) -> np.ndarray:
    """Drift of ``(delta c, delta c^dag)`` for the squeezing model (half-rate damping)."""
    c_s = complex(c_s)
    a = kappa / 2 + 1j * m.delta_eff_s + 4j * m.zeta * c_s.real
    B = 2 * (m.mu + m.zeta * c_s)
    return np.array([[a, 1j * B], [-1j * np.conj(B), np.conj(a)]], dtype=complex)


@dataclass
class CorrelationResult:
    C11: complex
    C12: float
    C: np.ndarray = field(repr=False)
    C11_closed: complex = 0j
    C12_closed: float = 0.0
    n0: float | None = None
    n_bar: float | None = None
    g2_0: float | None = None


def _closed_forms(A, D):
    # inverts A11 = kappa', A12 = 2X, D12 = 2 kappa n_th
    tr = np.trace(A)
    det = np.linalg.det(A)
    kappa = tr.real / 2
    a11 = A[0, 0]
    x = A[0, 1] / 2
    n_th = (D[0, 1] / (2 * kappa)).real
    c11 = -2 * kappa * np.conj(a11) * x * (1 + 2 * n_th) / (tr * det)
    c12 = (2 * kappa * n_th * abs(a11) ** 2 + 4 * kappa * abs(x) ** 2) / (tr * det)
    return c11, c12


def correlation_matrix(A: np.ndarray, D: np.ndarray) -> CorrelationResult:
    """Steady-state correlations from the 2x2 closed-form Lyapunov solution.

    Both the general matrix expression and the element-wise closed forms are
    evaluated; ``C11_closed``/``C12_closed`` hold the latter.
    """
    A = np.asarray(A, dtype=complex)
    D = np.asarray(D, dtype=complex)
    tr = np.trace(A)
    det = np.linalg.det(A)
    scale = max(np.abs(A).max(), 1e-300)
    if abs(tr * det) <= 1e-13 * scale**3:
        raise MarginalStabilityError(f"Tr(A) Det(A) = {tr * det!r} is numerically zero")
    M = A - tr * np.eye(2)
    C = (D * det + M @ D @ M.T) / (2 * tr * det)
    c12 = C[0, 1]
    if abs(c12.imag) > 1e-10 * max(1.0, abs(c12)):
        raise ConventionError(f"<alpha1^dag alpha1> has imaginary part {c12.imag:.3e}")
    c11_closed, c12_closed = _closed_forms(A, D)
    if abs(complex(c12_closed).imag) > 1e-10 * max(1.0, abs(c12_closed)):
        raise ConventionError("closed-form C12 is not real")
    return CorrelationResult(C11=complex(C[0, 0]), C12=float(c12.real), C=C,
                             C11_closed=complex(c11_closed),
                             C12_closed=float(np.real(c12_closed)))


def lyapunov_residual(A, C, D) -> float:
    """Relative residual of ``A C + C A^T = D``."""
    A, C, D = (np.asarray(x, dtype=complex) for x in (A, C, D))
    r = A @ C + C @ A.T - D
    ref = max(np.linalg.norm(D), np.linalg.norm(A) * np.linalg.norm(C), 1e-300)
    return float(np.linalg.norm(r) / ref)


def g2_zero(C: CorrelationResult, alpha0: complex) -> float:
    alpha0 = complex(alpha0)
    n0 = abs(alpha0) ** 2
    if n0 == 0:
        raise UndefinedObservableError("g2(0) is undefined at zero mean-field photon number")
    return 1.0 + 2.0 * C.C12 / n0 + 2.0 * (C.C11 / alpha0**2).real


def analyze(m: KerrModel, kappa: float, alpha0: complex, n_th: float = 0.0) -> CorrelationResult:
    """Drift, diffusion, correlations, total photon number and g2(0) at one root."""
    A = drift_matrix(m, kappa, alpha0)
    D = diffusion_matrix(m, kappa, n_th, alpha0)
    res = correlation_matrix(A, D)
    res.n0 = abs(alpha0) ** 2
    res.n_bar = res.n0 + res.C12
    res.g2_0 = g2_zero(res, alpha0) if res.n0 > 0 else float("nan")
    return res


@dataclass
class G2Scan:
    g: np.ndarray
    n0: np.ndarray
    C12: np.ndarray
    C11: np.ndarray
    n_bar: np.ndarray
    g2_0: np.ndarray
    alpha0: np.ndarray
    stability: list
    flags: list

    def rows(self):
        for i in range(len(self.g)):
            yield {
                "g": self.g[i], "n0": self.n0[i], "C12": self.C12[i],
                "C11_re": self.C11[i].real, "C11_im": self.C11[i].imag,
                "n_bar": self.n_bar[i], "g2_0": self.g2_0[i],
                "stability": self.stability[i], "flag": self.flags[i],
            }


def _g2_point(p: SystemParams, kappa, n_th, cfg):
    from .steady import kerr_steady_states

    km = derive_nonlinear_model(p).reduce_kerr()
    states = kerr_steady_states(km, kappa, cfg)
    stable = [s for s in states if s.stability == "stable"]
    if not stable:
        return None, km, "no_stable_root"
    best = min(stable, key=lambda s: s.n0)
    logger.debug("g=%g: selected n0=%g out of %d roots (%d stable)",
                 p.g, best.n0, len(states), len(stable))
    return best, km, "ok" if len(stable) == 1 else f"ok_{len(stable)}_stable"


def g2_scan(p: SystemParams, g_grid, cfg: SolverConfig | None = None,
            n_th: float | None = None, workers: int = 1) -> G2Scan:
    """n_bar and g2(0) of the Kerr model along a grid of couplings ``g``.

    At each point the stable root of smallest photon number is used.
    """
    g_grid = np.asarray(g_grid, dtype=float)
    if g_grid.size == 0:
        raise ValueError("empty g grid")
    d = np.diff(g_grid)
    if not (np.all(d > 0) or np.all(d < 0)):
        raise ValueError("g grid must be strictly monotone")
    if n_th is None:
        n_th = thermal_occupation(p.omega_c, p.T) if p.T > 0 else 0.0
    cfg = cfg or SolverConfig()
    points = [p.replace(g=float(g)) for g in g_grid]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_g2_point, points, [p.kappa] * len(points),
                                  [n_th] * len(points), [cfg] * len(points)))
    else:
        results = [_g2_point(q, p.kappa, n_th, cfg) for q in points]

    n = len(g_grid)
    out = G2Scan(g=g_grid, n0=np.full(n, np.nan), C12=np.full(n, np.nan),
                 C11=np.full(n, np.nan, dtype=complex), n_bar=np.full(n, np.nan),
                 g2_0=np.full(n, np.nan), alpha0=np.full(n, np.nan, dtype=complex),
                 stability=[], flags=[])
    for i, (state, km, flag) in enumerate(results):
        if state is None:
            out.stability.append("none")
            out.flags.append(flag)
            continue
        out.alpha0[i] = state.alpha0
        out.n0[i] = state.n0
        out.stability.append(state.stability)
        if state.n0 == 0:
            out.C12[i] = 0.0
            out.C11[i] = 0.0
            out.n_bar[i] = 0.0
            out.flags.append("zero_photon_number")
            continue
        res = analyze(km, p.kappa, state.alpha0, n_th)
        out.C12[i] = res.C12
        out.C11[i] = res.C11
        out.n_bar[i] = res.n_bar
        out.g2_0[i] = res.g2_0
        out.flags.append(flag)
    return out
