"""Mean-field steady states of the Kerr and squeezing models.

Kerr model (master-equation damping ``kappa``)::

    E - k' a - 2 chi'' |a|^2 a - zeta' (a^2 + 2 |a|^2) = 0,
    k' = kappa + i Delta, chi'' = i chi_kerr, zeta' = i zeta, E = -i F'

Squeezing model (Langevin damping ``kappa/2``)::

    -(kappa/2 + i Delta) c - 2 i mu c* - i zeta (2 |c|^2 + c^2) - i F'' = 0
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .fluctuations import drift_matrix, squeeze_drift_matrix
from .model import KerrModel, SqueezeModel, SystemParams, derive_nonlinear_model
from .roots import ConjugateMap, SolverConfig, find_roots, residual_norm, trace_branch

logger = logging.getLogger(__name__)

__all__ = [
    "SteadyState",
    "BranchCurve",
    "STABILITY_EPS",
    "kerr_map",
    "squeeze_map",
    "kerr_steady_states",
    "squeeze_steady_states",
    "classify_stability",
    "scan_drive",
    "trace_drive_branch",
]

STABILITY_EPS = 1e-8


@dataclass(frozen=True)
class SteadyState:
    alpha0: complex
    n0: float
    residual: float
    stability: str


def _max_positive_root(coeffs) -> float:
    c = np.asarray(coeffs, dtype=float)
    c = c / np.max(np.abs(c))
    with np.errstate(all="ignore"):
        try:
            r = np.roots(c)
        except np.linalg.LinAlgError:
            return np.inf
    if not np.all(np.isfinite(r)):
        return np.inf
    r = r[np.abs(r.imag) <= 1e-9 * np.maximum(1.0, np.abs(r))].real
    r = r[r > 0]
    return float(r.max()) if r.size else 0.0


def kerr_map(m: KerrModel, kappa: float) -> ConjugateMap:
    kp = complex(kappa, m.delta_eff_k)
    chi = m.chi_kerr
    zeta = m.zeta
    E = -1j * m.F_prime

    def value(a):
        n = (a * np.conj(a)).real
        return E - kp * a - 2j * chi * n * a - 1j * zeta * (a * a + 2 * n)

    def dz(a):
        n = (a * np.conj(a)).real
        return -kp - 4j * chi * n - 2j * zeta * (a + np.conj(a))

    def dzbar(a):
        return -2j * chi * a * a - 2j * zeta * a

    # |nonlinear part| >= 2|chi| r^3 - 3|zeta| r^2 on |a| = r
    if chi != 0:
        bound = _max_positive_root([2 * abs(chi), -3 * abs(zeta), -abs(kp), -abs(E)])
    elif zeta != 0:
        bound = _max_positive_root([abs(zeta), -abs(kp), -abs(E)])
    else:
        bound = abs(E) / abs(kp) if kp != 0 else np.inf
    return ConjugateMap(value, dz, dzbar, radius_bound=bound)


def squeeze_map(m: SqueezeModel, kappa: float) -> ConjugateMap:
    k = complex(kappa / 2, m.delta_eff_s)
    mu = m.mu
    zeta = m.zeta
    F = m.F_dprime

    def value(c):
        n = (c * np.conj(c)).real
        return -k * c - 2j * mu * np.conj(c) - 1j * zeta * (2 * n + c * c) - 1j * F

    def dz(c):
        return -k - 2j * zeta * (c + np.conj(c))

    def dzbar(c):
        return -2j * mu - 2j * zeta * c

    # |zeta (2|c|^2 + c^2)| >= |zeta| r^2
    if zeta != 0:
        bound = _max_positive_root([abs(zeta), -(abs(k) + 2 * abs(mu)), -abs(F)])
    else:
        gap = abs(k) - 2 * abs(mu)
        bound = abs(F) / gap if gap > 0 else np.inf
    return ConjugateMap(value, dz, dzbar, radius_bound=bound)


def classify_stability(s: SteadyState | None, A: np.ndarray, eps: float = STABILITY_EPS) -> str:
    """``stable`` if every eigenvalue of the drift matrix has real part above ``eps``."""
    re_min = float(np.linalg.eigvals(np.asarray(A)).real.min())
    if re_min > eps:
        return "stable"
    if re_min < -eps:
        return "unstable"
    return "marginal"


def _states(fmap, roots, drift):
    out = []
    for z in roots:
        A = drift(z)
        out.append(SteadyState(alpha0=complex(z), n0=abs(z) ** 2,
                               residual=residual_norm(fmap, z),
                               stability=classify_stability(None, A)))
    return out


def kerr_steady_states(m: KerrModel, kappa: float, cfg: SolverConfig | None = None) -> list:
    cfg = cfg or SolverConfig()
    fmap = kerr_map(m, kappa)
    hint = 10 * abs(m.F_prime) / kappa if kappa > 0 else 0.0
    roots = find_roots(fmap, cfg, r_hint=hint)
    if not roots:
        logger.info("Kerr steady state: no root converged for %r", m)
    return _states(fmap, roots, lambda z: drift_matrix(m, kappa, z))


def squeeze_steady_states(m: SqueezeModel, kappa: float, cfg: SolverConfig | None = None) -> list:
    cfg = cfg or SolverConfig()
    fmap = squeeze_map(m, kappa)
    hint = 10 * abs(m.F_dprime) / (kappa / 2) if kappa > 0 else 0.0
    roots = find_roots(fmap, cfg, r_hint=hint)
    if not roots:
        logger.info("squeeze steady state: no root converged for %r", m)
    return _states(fmap, roots, lambda z: squeeze_drift_matrix(m, kappa, z))


_FAMILIES = {
    "kerr": (lambda nl: nl.reduce_kerr(), kerr_steady_states, kerr_map),
    "squeeze": (lambda nl: nl.reduce_squeeze(), squeeze_steady_states, squeeze_map),
}


def _family(name):
    try:
        return _FAMILIES[name]
    except KeyError:
        raise ValueError(f"unknown model family {name!r}; expected one of {sorted(_FAMILIES)}") from None


def _solve_point(family, p, cfg):
    reduce, solve, _ = _family(family)
    return solve(reduce(derive_nonlinear_model(p)), p.kappa, cfg)


@dataclass
class BranchCurve:
    """Root sets along a sweep, with continuation-based branch labels.

    ``labels[i][j]`` is the branch id of ``roots[i][j]``.  ``paper_branch`` is
    the branch that starts from the smallest photon number at the first grid
    point (the one carried into downstream calculations).
    """

    parameter: str
    grid: np.ndarray
    roots: list
    labels: list
    paper_branch: int | None = None
    gaps: dict = field(default_factory=dict)

    def counts(self) -> np.ndarray:
        return np.array([len(r) for r in self.roots])

    def branch(self, label: int):
        idx, states = [], []
        for i, (rs, ls) in enumerate(zip(self.roots, self.labels)):
            for s, l in zip(rs, ls):
                if l == label:
                    idx.append(i)
                    states.append(s)
        return np.array(idx, dtype=int), states

    def branch_ids(self) -> list:
        return sorted({l for ls in self.labels for l in ls})

    def rows(self):
        for i, (rs, ls) in enumerate(zip(self.roots, self.labels)):
            for s, l in sorted(zip(rs, ls), key=lambda t: t[1]):
                yield {
                    self.parameter: self.grid[i],
                    "branch": l,
                    "re_alpha": s.alpha0.real,
                    "im_alpha": s.alpha0.imag,
                    "n": s.n0,
                    "stability": s.stability,
                    "n_roots": len(rs),
                    "paper_branch": int(l == self.paper_branch),
                    "residual": s.residual,
                }


def _rel_dist(a, b):
    return abs(a - b) / max(1.0, abs(a), abs(b))


def _label(root_sets, match_bound, memory):
    labels = []
    last_seen = {}  # label -> (grid index, amplitude)
    next_label = 0
    gaps: dict = {}
    for i, states in enumerate(root_sets):
        cand = [l for l, (j, _) in last_seen.items() if i - j <= memory]
        cur = [s.alpha0 for s in states]
        lab = [None] * len(cur)
        if cand and cur:
            cost = np.array([[_rel_dist(last_seen[l][1], z) for z in cur] for l in cand])
            # prefer the most recently seen branch when distances tie
            age = np.array([[i - last_seen[l][0] for _ in cur] for l in cand])
            r, c = linear_sum_assignment(cost + 1e-6 * age)
            for ri, ci in zip(r, c):
                if cost[ri, ci] < match_bound:
                    lab[ci] = cand[ri]
                    j = last_seen[cand[ri]][0]
                    if i - j > 1:
                        gaps.setdefault(cand[ri], []).extend(range(j + 1, i))
        for k in range(len(cur)):
            if lab[k] is None:
                lab[k] = next_label
                next_label += 1
        for l, z in zip(lab, cur):
            last_seen[l] = (i, z)
        labels.append(lab)
    return labels, gaps


def scan_drive(family: str, p: SystemParams, omega_grid, cfg: SolverConfig | None = None,
               workers: int = 1, match_bound: float = 0.5, memory: int = 3) -> BranchCurve:
    """All steady states along a grid of drive strengths ``Omega``.

    Each grid point is solved independently (so results do not depend on the
    worker count); branch labels are assigned afterwards by optimal matching
    of relative amplitude distance between neighbouring points.
    """
    _family(family)
    grid = np.asarray(omega_grid, dtype=float)
    if grid.size == 0:
        raise ValueError("empty drive grid")
    d = np.diff(grid)
    if not (np.all(d > 0) or np.all(d < 0)):
        raise ValueError("drive grid must be strictly monotone")
    cfg = cfg or SolverConfig()
    points = [p.replace(Omega=float(om)) for om in grid]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as ex:
            root_sets = list(ex.map(_solve_point, [family] * len(points), points,
                                    [cfg] * len(points)))
    else:
        root_sets = [_solve_point(family, q, cfg) for q in points]
    labels, gaps = _label(root_sets, match_bound, memory)
    main = None
    for rs, ls in zip(root_sets, labels):
        if rs:
            main = ls[int(np.argmin([s.n0 for s in rs]))]
            break
    return BranchCurve(parameter="Omega", grid=grid, roots=root_sets, labels=labels,
                       paper_branch=main, gaps=gaps)


def trace_drive_branch(family: str, p: SystemParams, alpha0: complex, omega_stop: float,
                       ds: float = 0.02, max_steps: int = 5000):
    """Follow one steady-state branch in ``Omega`` by pseudo-arclength continuation."""
    reduce, _, make_map = _family(family)

    def map_at(om):
        return make_map(reduce(derive_nonlinear_model(p.replace(Omega=float(om)))), p.kappa)

    return trace_branch(map_at, complex(alpha0), p.Omega, omega_stop, ds=ds, max_steps=max_steps)
