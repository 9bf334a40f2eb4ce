"""Root finding for complex maps that depend on both ``z`` and ``conj(z)``.

The steady-state equations of the cavity models are polynomial in the real
and imaginary parts of one complex amplitude.  A map is described by a
:class:`ConjugateMap`: its value ``f(z)`` and the two Wirtinger derivatives
``p = df/dz`` and ``q = df/dz*``.  With those the real 2x2 Newton step is
available in closed form,

    dz = (q f* - p* f) / (|p|^2 - |q|^2),

and ``|p|^2 - |q|^2`` is the determinant of the real Jacobian.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

logger = logging.getLogger(__name__)

__all__ = ["ConjugateMap", "SolverConfig", "newton", "polish", "find_roots",
           "residual_norm", "trace_branch"]


@dataclass(frozen=True)
class ConjugateMap:
    """``value(z)``, ``dz(z)`` and ``dzbar(z)`` must accept ndarrays of any complex dtype."""

    value: Callable[[np.ndarray], np.ndarray]
    dz: Callable[[np.ndarray], np.ndarray]
    dzbar: Callable[[np.ndarray], np.ndarray]
    radius_bound: float = np.inf


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-10
    n_radii: int = 32
    n_phases: int = 24
    r_min: float = 1e-4
    max_iter: int = 200
    merge_atol: float = 1e-8
    merge_rtol: float = 1e-8
    deflation_rounds: int = 4
    deflation_seeds: int = 16
    scan_radii: int = 400
    scan_phases: int = 180

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be > 0")
        if self.n_radii < 1 or self.n_phases < 1 or self.max_iter < 1:
            raise ValueError("n_radii, n_phases and max_iter must be positive")


def residual_norm(fmap: ConjugateMap, z) -> float:
    """Max-norm of the real and imaginary parts of ``f(z)``, in extended precision."""
    f = fmap.value(np.asarray(z, dtype=np.clongdouble))
    return float(np.max(np.maximum(np.abs(f.real), np.abs(f.imag))))


def _step(fmap, z):
    f = fmap.value(z)
    p = fmap.dz(z)
    q = fmap.dzbar(z)
    det = (p * np.conj(p)).real - (q * np.conj(q)).real
    with np.errstate(divide="ignore", invalid="ignore"):
        dz = (q * np.conj(f) - np.conj(p) * f) / det
    return dz, f, det


def newton(fmap: ConjugateMap, seeds, max_iter: int = 200, xtol: float = 1e-13):
    """Vectorized damped Newton from every seed; returns final points and a converged mask."""
    z = np.array(seeds, dtype=complex, copy=True).ravel()
    active = np.ones(z.shape, dtype=bool)
    converged = np.zeros(z.shape, dtype=bool)
    bound = fmap.radius_bound
    with np.errstate(all="ignore"):
        for _ in range(max_iter):
            if not active.any():
                break
            za = z[active]
            dz, _, det = _step(fmap, za)
            bad = ~np.isfinite(dz) | (det == 0)
            # cap step length at the current scale to keep far seeds from jumping wildly
            scale = np.abs(za) + 1.0
            big = np.abs(dz) > scale
            dz = np.where(big, dz / np.abs(dz) * scale, dz)
            znew = za + dz
            done = (np.abs(dz) <= xtol * scale) & ~big
            escaped = np.abs(znew) > 4.0 * bound + 1.0
            idx = np.flatnonzero(active)
            z[idx] = np.where(bad, za, znew)
            converged[idx[done & ~bad]] = True
            active[idx[done | bad | escaped]] = False
    return z, converged


def polish(fmap: ConjugateMap, z0: complex, iters: int = 8) -> complex:
    """A few Newton steps in extended precision; returns the double-rounded root."""
    z = np.array([z0], dtype=np.clongdouble)
    with np.errstate(all="ignore"):
        for _ in range(iters):
            dz, _, det = _step(fmap, z)
            if not np.all(np.isfinite(dz)) or det[0] == 0:
                break
            z = z + dz
            if abs(dz[0]) <= 1e-19 * (abs(z[0]) + 1):
                break
    return complex(z[0])


def _seed_grid(fmap: ConjugateMap, cfg: SolverConfig, r_hint: float) -> np.ndarray:
    r_hi = max(fmap.radius_bound if np.isfinite(fmap.radius_bound) else 0.0, r_hint, 1.0)
    r_lo = min(cfg.r_min, 1e-3 * r_hi)
    radii = np.geomspace(r_lo, 1.05 * r_hi, cfg.n_radii)
    phases = np.exp(2j * np.pi * (np.arange(cfg.n_phases) + 0.5) / cfg.n_phases)
    return np.concatenate([[0.0], (radii[:, None] * phases[None, :]).ravel()])


def _residual_minima(fmap: ConjugateMap, cfg: SolverConfig, r_hint: float) -> np.ndarray:
    """Local minima of |f| on a fine polar grid; catches narrow basins near folds."""
    if cfg.scan_radii < 3 or cfg.scan_phases < 3:
        return np.empty(0, dtype=complex)
    r_hi = max(fmap.radius_bound if np.isfinite(fmap.radius_bound) else 0.0, r_hint, 1.0)
    r_lo = min(cfg.r_min, 1e-3 * r_hi)
    radii = np.geomspace(r_lo, 1.05 * r_hi, cfg.scan_radii)
    phases = np.exp(2j * np.pi * np.arange(cfg.scan_phases) / cfg.scan_phases)
    z = radii[:, None] * phases[None, :]
    with np.errstate(all="ignore"):
        # scale by the radius so the linear growth of f does not mask minima
        f = np.abs(fmap.value(z)) / (1.0 + radii[:, None])
    f = np.where(np.isfinite(f), f, np.inf)
    inner = f[1:-1]
    is_min = ((inner <= f[:-2]) & (inner <= f[2:])
              & (inner <= np.roll(inner, 1, axis=1)) & (inner <= np.roll(inner, -1, axis=1)))
    return z[1:-1][is_min]


def _same(a, b, cfg):
    return abs(a - b) <= cfg.merge_atol + cfg.merge_rtol * max(abs(a), abs(b))


def _add_root(roots, z, cfg):
    for r in roots:
        if _same(r, z, cfg):
            return False
    roots.append(z)
    return True


def _accept(fmap, z, cfg):
    z = polish(fmap, z)
    if not np.isfinite(z.real) or not np.isfinite(z.imag):
        return None
    if residual_norm(fmap, z) > cfg.tol:
        return None
    return z


def _deflated_newton(fmap, seeds, known, max_iter, shift=1.0):
    """Newton on ``M(z) f(z)`` with ``M = prod(1/|z-r|^2 + shift)`` over known roots."""
    z = np.array(seeds, dtype=complex, copy=True)
    known = np.asarray(known, dtype=complex)
    ok = np.zeros(z.shape, dtype=bool)
    with np.errstate(all="ignore"):
        for _ in range(max_iter):
            dz, f, _ = _step(fmap, z)
            diff = z[:, None] - known[None, :]
            d2 = (diff * np.conj(diff)).real
            m = 1.0 / d2 + shift
            # gradient of log M as a complex number (x-part + i y-part)
            grad = np.sum((-2.0 * diff / d2**2) / m, axis=1)
            wdot = (np.conj(grad) * dz).real
            tau = 1.0 / (1.0 - wdot)
            step = tau * dz
            scale = np.abs(z) + 1.0
            step = np.where(np.abs(step) > scale, step / np.abs(step) * scale, step)
            good = np.isfinite(step)
            z = np.where(good, z + step, z)
            ok = good & (np.abs(step) <= 1e-14 * scale)
            if np.all(ok | ~good):
                break
    return z, ok


def find_roots(fmap: ConjugateMap, cfg: SolverConfig | None = None, extra_seeds=(),
               r_hint: float = 0.0) -> list:
    """All distinct roots found by polar-grid multistart Newton plus deflation.

    Roots are returned sorted by modulus.  Never fabricates a root: every
    returned point has extended-precision residual below ``cfg.tol``.
    """
    cfg = cfg or SolverConfig()
    seeds = np.concatenate([_seed_grid(fmap, cfg, r_hint), _residual_minima(fmap, cfg, r_hint),
                            np.asarray(extra_seeds, dtype=complex)])
    z, conv = newton(fmap, seeds, cfg.max_iter)
    roots: list = []
    for cand in z[conv]:
        if any(_same(r, cand, cfg) for r in roots):
            continue
        acc = _accept(fmap, complex(cand), cfg)
        if acc is not None:
            _add_root(roots, acc, cfg)

    if roots and cfg.deflation_rounds > 0:
        rng_seeds = seeds[np.linspace(0, len(seeds) - 1, cfg.deflation_seeds).astype(int)]
        for _ in range(cfg.deflation_rounds):
            zd, okd = _deflated_newton(fmap, rng_seeds, roots, cfg.max_iter)
            found = False
            for cand in zd[okd]:
                if any(_same(r, cand, cfg) for r in roots):
                    continue
                acc = _accept(fmap, complex(cand), cfg)
                if acc is not None and _add_root(roots, acc, cfg):
                    logger.debug("deflation recovered root %r", acc)
                    found = True
            if not found:
                break
    if not roots:
        logger.info("no converged root among %d seeds", len(seeds))
    return sorted(roots, key=lambda r: (abs(r), np.angle(r)))


def trace_branch(map_at: Callable[[float], ConjugateMap], z0: complex, p0: float,
                 p_stop: float, ds: float = 0.05, max_steps: int = 2000,
                 dp: float = 1e-7, tol: float = 1e-10):
    """Pseudo-arclength continuation of one root branch in ``(Re z, Im z, p)``.

    ``map_at(p)`` returns the steady-state map at parameter ``p``.  Tracing
    passes through folds; it stops once ``p`` leaves the interval between
    ``p0`` and ``p_stop`` or after ``max_steps``.  Returns arrays ``(p, z)``.
    """

    def residual(u):
        m = map_at(u[2])
        f = m.value(np.array([u[0] + 1j * u[1]]))[0]
        return np.array([f.real, f.imag])

    def jac(u):
        m = map_at(u[2])
        zz = np.array([u[0] + 1j * u[1]])
        p = m.dz(zz)[0]
        q = m.dzbar(zz)[0]
        fx = p + q
        fy = 1j * (p - q)
        h = dp * max(1.0, abs(u[2]))
        fp = (residual(u + [0, 0, h]) - residual(u - [0, 0, h])) / (2 * h)
        return np.array([[fx.real, fy.real, fp[0]], [fx.imag, fy.imag, fp[1]]])

    lo, hi = sorted((p0, p_stop))
    u = np.array([z0.real, z0.imag, p0], dtype=float)
    t = np.linalg.svd(jac(u))[2][-1]
    if t[2] * (p_stop - p0) < 0:
        t = -t
    ps, zs = [p0], [z0]
    ds_max = ds
    steps = 0
    while steps < max_steps:
        steps += 1
        # scaled coordinates keep large amplitudes from stalling the parameter
        s = np.array([1.0 + abs(complex(u[0], u[1])), 1.0 + abs(complex(u[0], u[1])), 1.0 + abs(u[2])])
        ts = t / s
        ts /= np.linalg.norm(ts)
        pred = u + ds * s * ts
        v = pred.copy()
        for _ in range(30):
            F = np.concatenate([residual(v), [np.dot(ts, (v - pred) / s)]])
            Jv = np.vstack([jac(v), ts / s])
            try:
                dv = np.linalg.solve(Jv, -F)
            except np.linalg.LinAlgError:
                break
            v = v + dv
            if np.linalg.norm(dv / s) < 1e-14:
                break
        zv = complex(v[0], v[1])
        if not np.all(np.isfinite(v)) or np.max(np.abs(residual(v))) > tol * max(1.0, abs(zv)):
            ds *= 0.5
            if ds < 1e-9:
                break
            continue
        tn = np.linalg.svd(jac(v))[2][-1]
        if np.dot(tn, t) < 0:
            tn = -tn
        u, t = v, tn
        ds = min(ds_max, 1.5 * ds)
        if not lo <= u[2] <= hi:
            break
        ps.append(u[2])
        zs.append(zv)
    return np.array(ps), np.array(zs)
