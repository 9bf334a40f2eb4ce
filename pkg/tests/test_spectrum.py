import numpy as np
import pytest

from indirect_qed.model import SqueezeModel, SystemParams, derive_linear_model, derive_nonlinear_model
from indirect_qed.spectrum import (
    DEFAULT_OMEGA_GRID,
    UnstableSteadyStateError,
    full_width_half_maximum,
    linear_response_spectrum,
    local_minima,
    output_intensity_spectrum,
    peak_position,
    spectrum_coefficients,
)
from indirect_qed.steady import squeeze_steady_states

SQUEEZE = SystemParams.from_detunings(delta_c=1.0, delta_b=100.0, g=0.1, Omega=10.0, N=10_000)


def stable_root(m, kappa=1.0):
    return min((s for s in squeeze_steady_states(m, kappa) if s.stability == "stable"),
               key=lambda s: s.n0)


class TestLinearResponse:
    def test_shift_and_width(self):
        p = SystemParams(omega_c=0.0, omega_a=5e4, omega_f=0.0, g=1.0, Omega=1.0, N=10_000)
        c = linear_response_spectrum(derive_linear_model(p), 1.0, np.linspace(-2, 2, 4001))
        assert peak_position(c) == pytest.approx(-0.2, abs=1e-6)
        assert full_width_half_maximum(c) == pytest.approx(1.0, abs=1e-5)
        assert c.values.max() == pytest.approx(1.0, abs=1e-6)

    def test_no_coupling_at_bare_cavity(self):
        p = SystemParams(omega_c=0.3, omega_a=5e4, omega_f=0.0, g=0.0, Omega=1.0, N=10_000)
        c = linear_response_spectrum(derive_linear_model(p), 1.0, np.linspace(-2, 2, 4001))
        assert peak_position(c) == pytest.approx(0.3, abs=1e-6)

    @pytest.mark.parametrize("kappa", [0.3, 1.0, 2.5])
    def test_width_is_kappa(self, kappa):
        p = SystemParams(omega_c=0.0, omega_a=5e4, omega_f=0.0, g=1.0, Omega=1.0, N=10_000, kappa=kappa)
        c = linear_response_spectrum(derive_linear_model(p), kappa, np.linspace(-8, 8, 16001))
        assert full_width_half_maximum(c) == pytest.approx(kappa, abs=1e-4)

    def test_bad_kappa(self):
        p = SystemParams(omega_c=0.0, omega_a=5e4, omega_f=0.0, g=1.0, Omega=1.0, N=10_000)
        with pytest.raises(ValueError):
            linear_response_spectrum(derive_linear_model(p), 0.0, [0.0])


class TestCoefficients:
    def test_linear_limit(self):
        m = SqueezeModel(0.7, 0.0, 0.0, 1.0)
        co = spectrum_coefficients(m, 1.0, 0.3j, np.array([0.0, 1.0]))
        assert co.B == 0
        assert co.A_w[0] == pytest.approx(0.5 + 0.7j)
        assert np.allclose(co.D_w, co.A_w * np.conj(1j * co.omega + 0.5 + 0.7j))

    def test_squeeze_point_finite(self):
        m = derive_nonlinear_model(SQUEEZE).reduce_squeeze()
        s = stable_root(m)
        co = spectrum_coefficients(m, 1.0, s.alpha0, DEFAULT_OMEGA_GRID)
        assert abs(co.B) > 0
        assert np.all(np.isfinite(co.D_w))


class TestIntensitySpectrum:
    @pytest.mark.parametrize("delta", [-3.0, 0.0, 0.4, 5.0])
    def test_vacuum_floor(self, delta):
        m = SqueezeModel(delta, 0.0, 0.0, 2.0)
        s = stable_root(m)
        c = output_intensity_spectrum(m, 1.0, s.alpha0)
        assert np.max(np.abs(c.values - 1)) < 1e-12
        assert np.max(np.abs(c.literal - 1)) < 1e-12
        assert len(c.omega) == 2001 and c.omega[0] == -10 and c.omega[-1] == 10

    def test_literal_matches_first_principles(self):
        for om in (6.0, 8.0, 10.0, 14.0):
            m = derive_nonlinear_model(SQUEEZE.replace(Omega=om)).reduce_squeeze()
            c = output_intensity_spectrum(m, 1.0, stable_root(m).alpha0)
            assert c.meta["max_literal_deviation"] < 1e-12
            assert np.all(c.values >= 0)

    def test_two_coefficient_evaluation(self):
        m = derive_nonlinear_model(SQUEEZE).reduce_squeeze()
        s = stable_root(m)
        w = DEFAULT_OMEGA_GRID
        c = output_intensity_spectrum(m, 1.0, s.alpha0, w)
        cm = output_intensity_spectrum(m, 1.0, s.alpha0, -w)
        direct = np.abs(c.u + np.exp(2j * c.phi) * np.conj(cm.v)) ** 2
        assert np.allclose(direct, c.values, rtol=0, atol=1e-12)

    def test_symmetric_case(self):
        # zero effective detuning in the rotating frame makes S(w) even
        m = SqueezeModel(delta_eff_s=0.0, mu=0.15, zeta=0.0, F_dprime=0.0)
        c = output_intensity_spectrum(m, 1.0, 0.0, phi=0.3)
        assert np.allclose(c.values, c.values[::-1], atol=1e-13)

    def test_threshold_deepening(self):
        # |B| -> |A(0)| = kappa/2 from below; probe the squeezed quadrature at w = 0
        depth = []
        for mu in (0.05, 0.1, 0.15, 0.2, 0.24):
            m = SqueezeModel(0.0, mu, 0.0, 0.0)
            c = output_intensity_spectrum(m, 1.0, 0.0, np.array([0.0]), phi=np.pi / 4)
            depth.append(c.values[0])
        assert np.all(np.diff(depth) < 0)
        assert depth[-1] < 0.01

    def test_default_phase(self):
        m = derive_nonlinear_model(SQUEEZE).reduce_squeeze()
        s = stable_root(m)
        c = output_intensity_spectrum(m, 1.0, s.alpha0)
        assert c.phi == pytest.approx(np.angle(s.alpha0))
        assert output_intensity_spectrum(SqueezeModel(1.0, 0.0, 0.0, 0.0), 1.0, 0.0).phi == 0.0

    def test_refuses_unstable(self):
        m = derive_nonlinear_model(SQUEEZE.replace(omega_a=60.0, Omega=30.0)).reduce_squeeze()
        bad = [s for s in squeeze_steady_states(m, 1.0) if s.stability == "unstable"]
        with pytest.raises(UnstableSteadyStateError):
            output_intensity_spectrum(m, 1.0, bad[0].alpha0)

    def test_resonance_deepest(self):
        depth = {}
        for dc in (-1.0, 0.0, 1.0, 2.0, 3.0):
            m = derive_nonlinear_model(SQUEEZE.replace(omega_c=dc)).reduce_squeeze()
            depth[dc] = output_intensity_spectrum(m, 1.0, stable_root(m).alpha0).values.min()
        assert min(depth, key=depth.get) == 1.0


def test_local_minima_helper():
    from indirect_qed.spectrum import SpectrumCurve

    x = np.linspace(-3, 3, 601)
    c = SpectrumCurve(omega=x, values=1 - 0.5 * np.exp(-((x - 1) ** 2)) - 0.5 * np.exp(-((x + 1) ** 2)))
    mins = local_minima(c, below=1.0)
    assert len(mins) == 2 and np.allclose(np.abs(mins), 1.0, atol=0.05)
