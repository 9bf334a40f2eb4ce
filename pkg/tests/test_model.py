import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from indirect_qed.model import (
    SingularDetuningError,
    SystemParams,
    derive_linear_model,
    derive_nonlinear_model,
    thermal_occupation,
    validity_report,
)


def P(**kw):
    base = dict(delta_c=0.0, delta_b=60.0, g=1.0, Omega=0.1, N=10_000)
    base.update(kw)
    return SystemParams.from_detunings(**base)


class TestSystemParams:
    def test_rejects_bad_values(self):
        with pytest.raises(ValueError):
            P(N=0)
        with pytest.raises(ValueError):
            P(kappa=0.0)
        with pytest.raises(ValueError):
            P(gamma=-1.0)
        with pytest.raises(ValueError):
            P(T=-0.1)
        with pytest.raises(ValueError):
            P(g=float("inf"))
        with pytest.raises(TypeError):
            P(g=1j)
        with pytest.raises(TypeError):
            P(N=2.5)

    def test_integral_float_N_accepted(self):
        assert P(N=1e4).N == 10_000

    def test_detunings(self):
        p = SystemParams(omega_c=3.0, omega_a=10.0, omega_f=1.0, g=0.1, Omega=0.2, N=5)
        assert p.delta_c == 2.0 and p.delta_b == 9.0 and p.omega_ac == 7.0

    def test_replace_revalidates(self):
        with pytest.raises(ValueError):
            P().replace(kappa=-1.0)


class TestThermal:
    def test_zero_temperature(self):
        assert thermal_occupation(1.0, 0.0) == 0.0

    def test_high_temperature(self):
        assert thermal_occupation(1.0, 1e6) == pytest.approx(1e6 - 0.5, rel=1e-2)

    def test_ln2(self):
        assert thermal_occupation(1.0, 1 / math.log(2)) == pytest.approx(1.0, rel=1e-12)

    def test_domain(self):
        with pytest.raises(ValueError):
            thermal_occupation(0.0, 1.0)
        with pytest.raises(ValueError):
            thermal_occupation(-1.0, 1.0)

    @given(st.floats(0.01, 10), st.floats(0.01, 10), st.floats(0.01, 10))
    def test_monotone(self, w, t1, t2):
        lo, hi = sorted((t1, t2))
        assert thermal_occupation(w, lo) <= thermal_occupation(w, hi)
        assert thermal_occupation(w, lo) >= thermal_occupation(2 * w, lo)


class TestLinearModel:
    def test_linear_shift(self):
        p = SystemParams(omega_c=0.0, omega_a=5e4, omega_f=0.0, g=1.0, Omega=1.0, N=10_000)
        m = derive_linear_model(p)
        assert m.delta_shift == pytest.approx(0.2, abs=1e-12)
        assert m.f == pytest.approx(-0.2, abs=1e-12)
        assert m.omega_eff0 == pytest.approx(-0.2, abs=1e-12)

    def test_no_coupling(self):
        m = derive_linear_model(P(g=0.0))
        assert m.f == 0.0 and m.delta_shift == 0.0

    def test_collective(self):
        m = derive_linear_model(P(g=0.3, Omega=0.7, N=400))
        assert m.G == pytest.approx(6.0) and m.chi == pytest.approx(14.0)
        assert m.f == pytest.approx(-m.G * m.chi / 60.0)

    def test_singular(self):
        with pytest.raises(SingularDetuningError):
            derive_linear_model(P(delta_b=0.0))
        with pytest.raises(SingularDetuningError):
            derive_nonlinear_model(P(delta_b=0.0))


class TestNonlinearModel:
    def test_antibunching_coefficients(self):
        m = derive_nonlinear_model(P())
        assert m.chi_kerr == pytest.approx(4.6296e-2, rel=1e-4)
        assert m.mu == pytest.approx(4.6296e-4, rel=1e-4)
        assert m.zeta == pytest.approx(9.2593e-3, rel=1e-4)
        assert m.F == pytest.approx(-16.662, abs=1e-3)

    def test_zero_drive(self):
        m = derive_nonlinear_model(P(Omega=0.0))
        assert m.mu == 0 and m.zeta == 0 and m.F == 0
        assert m.chi_kerr == pytest.approx(1e4 / 60**3)

    def test_delta_eff1_reconstructs(self):
        p = P(delta_c=0.3, Omega=2.0)
        m = derive_nonlinear_model(p)
        assert m.delta_eff1 == pytest.approx(0.3 - 1e4 / 60 + m.chi_kerr + 4 * m.mu, rel=1e-14)

    def test_reduce_kerr(self):
        k = derive_nonlinear_model(P()).reduce_kerr()
        assert k.delta_eff_k == pytest.approx(-166.620, abs=1e-3)
        assert k.F_prime == pytest.approx(-1e4 * 0.1 / 60 + k.zeta / 2)
        assert derive_nonlinear_model(P(Omega=0.0)).reduce_kerr().F_prime == 0.0

    def test_reduce_squeeze(self):
        s = derive_nonlinear_model(P(g=0.1, Omega=10.0, delta_c=1.0)).reduce_squeeze()
        assert s.mu == pytest.approx(4.6296e-2, rel=1e-4)
        assert s.delta_eff_s == pytest.approx(-0.4815, abs=1e-4)
        s0 = derive_nonlinear_model(P(Omega=0.0, delta_c=1.0)).reduce_squeeze()
        assert s0.F_dprime == 0.0 and s0.delta_eff_s == pytest.approx(1 - 1e4 / 60)

    def test_no_coupling_all_zero(self):
        s = derive_nonlinear_model(P(g=0.0, delta_c=1.0)).reduce_squeeze()
        assert (s.mu, s.zeta, s.F_dprime) == (0.0, 0.0, 0.0)
        assert s.delta_eff_s == 1.0

    @settings(max_examples=200)
    @given(st.floats(0.01, 3), st.floats(0.01, 20), st.floats(5, 1e4), st.integers(1, 10**6),
           st.floats(0.1, 10))
    def test_identities(self, g, Om, db, N, s):
        p = P(g=g, Omega=Om, delta_b=db, N=N)
        m = derive_nonlinear_model(p)
        lin = derive_linear_model(p)
        assert lin.G**2 == pytest.approx(N * g**2, rel=1e-12)
        assert m.zeta**2 == pytest.approx(4 * m.chi_kerr * m.mu, rel=1e-12)
        # every coefficient is homogeneous of degree 1 in (g, Omega, delta_b)
        q = derive_nonlinear_model(P(g=s * g, Omega=s * Om, delta_b=s * db, N=N))
        assert q.linear_shift == pytest.approx(s * m.linear_shift, rel=1e-12)
        assert q.linear_drive == pytest.approx(s * m.linear_drive, rel=1e-12)
        for k in ("chi_kerr", "mu", "zeta"):
            assert getattr(q, k) == pytest.approx(s * getattr(m, k), rel=1e-12)
        # sign flip of delta_b
        r = derive_nonlinear_model(P(g=g, Omega=Om, delta_b=-db, N=N))
        rl = derive_linear_model(P(g=g, Omega=Om, delta_b=-db, N=N))
        assert rl.delta_shift == pytest.approx(-lin.delta_shift) and rl.f == pytest.approx(-lin.f)
        for k in ("chi_kerr", "mu", "zeta"):
            assert getattr(r, k) == pytest.approx(-getattr(m, k), rel=1e-12)


class TestValidity:
    def test_mixed_flags(self):
        r = validity_report(P(gamma=100.0))
        assert r.passed["gamma_over_kappa"]
        assert r.passed["delta_b_over_Omega"]
        assert not r.passed["delta_b_over_G"]
        assert r.failures() == ["delta_b_over_gamma", "delta_b_over_G"]

    def test_no_gamma(self):
        assert not validity_report(P(gamma=0.0)).passed["gamma_over_kappa"]

    def test_dispersive_limit(self):
        r = validity_report(P(delta_b=1e5, g=0.001, Omega=1.0, gamma=100.0))
        assert r.all_passed

    def test_custom_thresholds(self):
        r = validity_report(P(gamma=100.0), {"delta_b_over_G": 0.5})
        assert r.passed["delta_b_over_G"]
        with pytest.raises(KeyError):
            validity_report(P(), {"nonsense": 1.0})

    def test_ratio_values(self):
        r = validity_report(P(gamma=100.0))
        assert r.ratios["delta_b_over_G"] == pytest.approx(0.6)
        assert r.ratios["excitation_fraction"] == pytest.approx(0.01 / 3600)
        assert np.isinf(validity_report(P(gamma=0.0)).ratios["delta_b_over_gamma"])
