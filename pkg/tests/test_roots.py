import numpy as np
import pytest

from indirect_qed.roots import ConjugateMap, SolverConfig, find_roots, newton, residual_norm, trace_branch


def poly_map(coeffs):
    """Holomorphic polynomial f(z) = sum c_k z^k, so df/dz* = 0."""
    c = np.asarray(coeffs, dtype=complex)

    def value(z):
        return np.polyval(c[::-1], z)

    def dz(z):
        return np.polyval(np.polyder(c[::-1]), z)

    def dzbar(z):
        return np.zeros_like(np.asarray(z, dtype=complex))

    bound = 1 + np.max(np.abs(c[:-1] / c[-1]))
    return ConjugateMap(value, dz, dzbar, radius_bound=bound)


def test_finds_all_polynomial_roots():
    roots = [0.5, -2.0 + 1.0j, 3.0j, -1.0 - 1.0j]
    c = np.poly(roots)[::-1]
    found = find_roots(poly_map(c), SolverConfig())
    assert len(found) == 4
    for r in roots:
        assert min(abs(f - r) for f in found) < 1e-10


def test_non_holomorphic_map():
    # f = z* - 1 has the single root z = 1; Newton must use the z* derivative
    m = ConjugateMap(lambda z: np.conj(z) - 1, lambda z: np.zeros_like(z),
                     lambda z: np.ones_like(z), radius_bound=1.0)
    found = find_roots(m)
    assert len(found) == 1 and abs(found[0] - 1) < 1e-12


def test_newton_vectorized():
    m = poly_map([-1.0, 0.0, 1.0])
    z, ok = newton(m, np.array([2.0 + 0.1j, -3.0 + 0.2j]))
    assert ok.all()
    assert np.allclose(z, [1.0, -1.0], atol=1e-12)


def test_no_roots_gives_empty():
    m = ConjugateMap(lambda z: np.ones_like(z), lambda z: np.zeros_like(z),
                     lambda z: np.zeros_like(z))
    assert find_roots(m) == []


def test_residual_norm():
    m = poly_map([-1.0, 1.0])
    assert residual_norm(m, 1.0) == 0.0
    assert residual_norm(m, 2.0 + 3.0j) == pytest.approx(3.0)


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(tol=0.0)
    with pytest.raises(ValueError):
        SolverConfig(n_radii=0)


def test_trace_branch_through_fold():
    # z^2 + p = 0 on the real axis: the branch z = sqrt(-p) folds at p = 0
    def map_at(p):
        return ConjugateMap(lambda z: z * z + p, lambda z: 2 * z, lambda z: np.zeros_like(z))

    ps, zs = trace_branch(map_at, 1.0 + 0j, -1.0, 1.0, ds=0.05, max_steps=400)
    assert np.max(ps) < 1e-3
    assert zs[-1].real < -0.5
    assert np.allclose(zs**2 + ps, 0, atol=1e-9)
