"""Exact truncated-Fock Lindblad steady states.

Density matrices are vectorized column-major (``vec(rho)[i + j*d] = rho[i, j]``),
so ``vec(A rho B) = (B^T kron A) vec(rho)``.

A dissipator with *amplitude rate* ``r`` on operator ``L`` means
``r (2 L rho L^dag - L^dag L rho - rho L^dag L)``; the mean of ``L`` then
decays at rate ``r``.  The one-mode oracle uses the master-equation
convention (amplitude rate ``kappa``), the two-mode oracle the half-rate
Langevin convention (amplitude rates ``kappa/2`` and ``gamma/2``).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

logger = logging.getLogger(__name__)

__all__ = [
    "DegenerateSteadyStateError",
    "TruncationError",
    "OneModeSpec",
    "TwoModeSpec",
    "SteadyDensity",
    "Expectations",
    "TwoModeResult",
    "destroy",
    "build_liouvillian",
    "steady_density",
    "expectations",
    "solve_one_mode",
    "two_mode_oracle",
    "truncation_check",
]

# direct LU is faster than ILU + lgmres well past this size; the iterative
# route is for systems whose LU fill would not fit in memory
ITERATIVE_DIM = 250_000


class DegenerateSteadyStateError(RuntimeError):
    pass


class TruncationError(RuntimeError):
    pass


@dataclass(frozen=True)
class OneModeSpec:
    """``H = detuning c^dag c + kerr c^dag2 c^2 + (drive c + mu c^2 + zeta c^dag c^2 + h.c.)``."""

    detuning: float
    kerr: float = 0.0
    zeta: float = 0.0
    mu: float = 0.0
    drive: complex = 0.0
    kappa: float = 1.0
    n_th: float = 0.0
    N_max: int = 20

    def __post_init__(self):
        if self.N_max < 4:
            raise ValueError(f"N_max must be >= 4, got {self.N_max}")
        for name in ("detuning", "kerr", "zeta", "mu", "kappa", "n_th"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if not np.isfinite(complex(self.drive)):
            raise ValueError("drive must be finite")
        if self.kappa < 0 or self.n_th < 0:
            raise ValueError("kappa and n_th must be non-negative")

    @classmethod
    def from_kerr(cls, m, kappa, n_th=0.0, N_max=20):
        return cls(detuning=m.delta_eff_k, kerr=m.chi_kerr, zeta=m.zeta, mu=0.0,
                   drive=m.F_prime, kappa=kappa, n_th=n_th, N_max=N_max)

    @classmethod
    def from_squeeze(cls, m, kappa, N_max=20):
        # the squeezing model's Langevin damping kappa/2 is amplitude rate kappa/2 here
        return cls(detuning=m.delta_eff_s, kerr=0.0, zeta=m.zeta, mu=m.mu,
                   drive=m.F_dprime, kappa=kappa / 2, n_th=0.0, N_max=N_max)


@dataclass(frozen=True)
class TwoModeSpec:
    """Cavity + collective mode, ``H = Dc c^dag c + Db B^dag B + (G c B^dag + chi B + h.c.)``."""

    delta_c: float
    delta_b: float
    G: float
    chi: float
    kappa: float = 1.0
    gamma: float = 100.0
    cavity_cutoff: int = 12
    collective_cutoff: int = 4

    def __post_init__(self):
        if self.cavity_cutoff < 2 or self.collective_cutoff < 2:
            raise ValueError("cutoffs must be >= 2")
        if self.kappa < 0 or self.gamma < 0:
            raise ValueError("decay rates must be non-negative")

    @property
    def predicted_n(self) -> float:
        """Photon number of the adiabatically eliminated linear model."""
        f = -self.G * self.chi / self.delta_b
        shift = self.G**2 / self.delta_b
        return f**2 / ((self.delta_c - shift) ** 2 + self.kappa**2 / 4)


@dataclass
class SteadyDensity:
    rho: np.ndarray
    trace: float
    min_eigenvalue: float
    residual: float
    hermiticity_error: float
    dims: tuple


@dataclass(frozen=True)
class Expectations:
    n: float
    g2_0: float
    mean: complex
    g2_defined: bool


@dataclass
class TwoModeResult:
    cavity: Expectations
    n_collective: float
    predicted_n: float
    relative_error: float
    density: SteadyDensity


def destroy(d: int) -> sp.csr_matrix:
    return sp.diags(np.sqrt(np.arange(1, d, dtype=float)), 1, shape=(d, d), format="csr")


def _hamiltonian_part(H):
    d = H.shape[0]
    eye = sp.identity(d, format="csr")
    return -1j * (sp.kron(eye, H) - sp.kron(H.T, eye))


def _dissipator(L, rate):
    d = L.shape[0]
    eye = sp.identity(d, format="csr")
    LdL = (L.conj().T @ L).tocsr()
    return rate * (2 * sp.kron(L.conj(), L) - sp.kron(eye, LdL) - sp.kron(LdL.T, eye))


def build_liouvillian(spec: OneModeSpec) -> sp.csr_matrix:
    d = spec.N_max + 1
    a = destroy(d).astype(complex)
    ad = a.conj().T
    drive = complex(spec.drive)
    H = (spec.detuning * (ad @ a) + spec.kerr * (ad @ ad @ a @ a)
         + drive * a + np.conj(drive) * ad
         + spec.mu * (a @ a) + np.conj(spec.mu) * (ad @ ad)
         + spec.zeta * (ad @ a @ a) + np.conj(spec.zeta) * (ad @ ad @ a))
    L = _hamiltonian_part(H)
    if spec.kappa > 0:
        L = L + _dissipator(a, spec.kappa * (spec.n_th + 1))
        if spec.n_th > 0:
            L = L + _dissipator(ad, spec.kappa * spec.n_th)
    return L.tocsr()


def _two_mode_liouvillian(spec: TwoModeSpec):
    dc, db = spec.cavity_cutoff + 1, spec.collective_cutoff + 1
    c = sp.kron(destroy(dc), sp.identity(db)).astype(complex).tocsr()
    B = sp.kron(sp.identity(dc), destroy(db)).astype(complex).tocsr()
    cd, Bd = c.conj().T, B.conj().T
    H = (spec.delta_c * (cd @ c) + spec.delta_b * (Bd @ B)
         + spec.G * (c @ Bd + cd @ B) + spec.chi * (B + Bd))
    L = _hamiltonian_part(H)
    if spec.kappa > 0:
        L = L + _dissipator(c, spec.kappa / 2)
    if spec.gamma > 0:
        L = L + _dissipator(B, spec.gamma / 2)
    return L.tocsc(), (dc, db)


def _trace_row(d):
    return np.eye(d).ravel(order="F")


def steady_density(L, dims=None, iterative_dim: int = ITERATIVE_DIM) -> SteadyDensity:
    """Solve ``L vec(rho) = 0`` with the first row replaced by ``Tr rho = 1``.

    Above ``iterative_dim`` an ILU-preconditioned lgmres solve is tried first,
    falling back to direct LU if it fails.
    """
    n = L.shape[0]
    d = int(round(math.sqrt(n)))
    if d * d != n:
        raise ValueError("Liouvillian dimension is not a perfect square")
    dims = tuple(dims) if dims is not None else (d,)
    t = _trace_row(d)
    M = sp.lil_matrix(L, dtype=complex)
    M[0, :] = t
    M = M.tocsc()
    b = np.zeros(n, dtype=complex)
    b[0] = 1.0
    x = None
    if n > iterative_dim:
        try:
            ilu = spla.spilu(M, drop_tol=1e-6, fill_factor=20)
            pre = spla.LinearOperator(M.shape, ilu.solve)
            x, info = spla.lgmres(M, b, M=pre, rtol=1e-13, atol=0.0, maxiter=100)
            if info != 0:
                logger.info("lgmres did not converge (info=%d); using direct LU", info)
                x = None
        except RuntimeError as exc:
            logger.info("ILU failed (%s); using direct LU", exc)
            x = None
    if x is None:
        try:
            x = spla.splu(M).solve(b)
        except RuntimeError as exc:
            raise DegenerateSteadyStateError(_degeneracy_report(L, str(exc))) from exc
    if not np.all(np.isfinite(x)):
        raise DegenerateSteadyStateError(_degeneracy_report(L, "non-finite solution"))
    rho = x.reshape((d, d), order="F")
    res = L @ x
    Lnorm = spla.norm(L, np.inf)
    residual = float(np.max(np.abs(res)) / max(Lnorm * np.max(np.abs(x)), 1e-300))
    if residual > 1e-8:
        raise DegenerateSteadyStateError(_degeneracy_report(L, f"residual {residual:.2e}"))
    herm = float(np.max(np.abs(rho - rho.conj().T)))
    evals = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
    return SteadyDensity(rho=rho, trace=float(np.trace(rho).real), min_eigenvalue=float(evals.min()),
                         residual=residual, hermiticity_error=herm, dims=dims)


def _degeneracy_report(L, reason):
    n = L.shape[0]
    if n <= 2500:
        s = np.linalg.svd(L.toarray(), compute_uv=False)
        null = int(np.sum(s <= 1e-10 * s.max()))
        return f"steady state not unique ({reason}); Liouvillian dimension {n}, null-space dimension {null}"
    return f"steady state not unique ({reason}); Liouvillian dimension {n}"


def _mode_op(dims, mode):
    ops = [sp.identity(d, format="csr") for d in dims]
    ops[mode] = destroy(dims[mode])
    out = ops[0]
    for o in ops[1:]:
        out = sp.kron(out, o, format="csr")
    return out.astype(complex)


def expectations(sd: SteadyDensity, mode: int = 0) -> Expectations:
    rho = sd.rho / sd.trace
    a = _mode_op(sd.dims, mode)
    ad = a.conj().T
    n = float(np.real(np.sum((ad @ a).toarray() * rho.T)))
    nn = float(np.real(np.sum((ad @ ad @ a @ a).toarray() * rho.T)))
    mean = complex(np.sum(a.toarray() * rho.T))
    if n < 1e-14:
        return Expectations(n=n, g2_0=float("nan"), mean=mean, g2_defined=False)
    return Expectations(n=n, g2_0=nn / n**2, mean=mean, g2_defined=True)


def solve_one_mode(spec: OneModeSpec):
    sd = steady_density(build_liouvillian(spec))
    return sd, expectations(sd)


def two_mode_oracle(spec: TwoModeSpec) -> TwoModeResult:
    if not spec.gamma > 0:
        raise ValueError("two-mode oracle needs gamma > 0")
    L, dims = _two_mode_liouvillian(spec)
    sd = steady_density(L, dims)
    cav = expectations(sd, 0)
    coll = expectations(sd, 1)
    pred = spec.predicted_n
    rel = abs(cav.n - pred) / pred if pred > 0 else abs(cav.n)
    return TwoModeResult(cavity=cav, n_collective=coll.n, predicted_n=pred,
                         relative_error=rel, density=sd)


def _observe(spec, observable):
    if isinstance(spec, TwoModeSpec):
        ex = two_mode_oracle(spec).cavity
    else:
        ex = solve_one_mode(spec)[1]
    if callable(observable):
        return float(observable(ex))
    return float(getattr(ex, observable))


def truncation_check(spec, observable: str | Callable = "n", start: int = 4,
                     growth: float = 1.5, cap: int = 120, rtol: float = 1e-8):
    """Grow the Fock cutoff geometrically until the observable settles.

    Returns ``(cutoff, value)`` for the first cutoff whose value agrees with
    the next larger cutoff to ``rtol`` (relative).
    """
    attr = "cavity_cutoff" if isinstance(spec, TwoModeSpec) else "N_max"
    cut = max(start, 4 if attr == "N_max" else 2)
    prev = _observe(replace(spec, **{attr: cut}), observable)
    while True:
        nxt = min(cap, int(math.ceil(cut * growth)))
        if nxt <= cut:
            raise TruncationError(f"cutoff cap {cap} reached without convergence (last value {prev!r})")
        val = _observe(replace(spec, **{attr: nxt}), observable)
        if abs(val - prev) <= rtol * max(abs(val), abs(prev)) or (val == prev):
            return cut, prev
        cut, prev = nxt, val
