import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from elax.errors import DegenerateInputError, GridMismatchError, IllConditionedBasisError, UsageError
from elax.euler2d import FlowState2D, rk4_coupled
from elax.laxlab import (
    A2d,
    A3d_childress,
    A3d_ms,
    L2d,
    L3d_childress,
    L3d_ms,
    LaxState2D,
    LaxVector3D,
    commutation_check_2d,
    commutation_check_3d,
    eigen_probes,
    eigen_probes_3d,
    expand_vorticity,
    invariant_I_2d,
    invariant_I_3d,
    pushforward_check,
    sector_projection,
    transport_step_2d,
    transported_invariants_2d,
)
from elax.spectral import FourierField, GridSpec, seeded_smooth_field, sobolev_norm

from conftest import flow2d, flow3d, physical_field

# Bessel values J_k(1), frozen from scipy.special.jv
BESSEL_J_AT_1 = {0: 0.7651976865579666, 1: 0.44005058574493355, 2: 0.11490348493190049, 3: 0.019563353982668407}


class TestOperators2D:
    def test_L_on_shear_and_plane_wave(self, grid32):
        # {cos y, exp(ix)} = sin y * d/dx exp(ix) = i sin y exp(ix)
        x, y = grid32.coordinates()
        om = flow2d("shear", 32).omega
        out = L2d(om, FourierField.single_mode(grid32, (1, 0)))
        assert np.allclose(out.physical()[0], 1j * np.sin(y) * np.exp(1j * x), atol=1e-14)

    def test_constant_phi_or_omega_gives_zero(self, grid32):
        const = physical_field(grid32, np.full(grid32.shape, 2.5 + 1j))
        om = flow2d("random_smooth", 32).omega
        assert np.abs(L2d(om, const).coeffs).max() < 1e-14
        assert np.abs(L2d(const, FourierField.single_mode(grid32, (2, 1))).coeffs).max() < 1e-14

    def test_A_is_minus_L_for_shear(self, grid32):
        # psi = -cos y = -omega for the shear flow
        st_ = flow2d("shear", 32)
        phi = FourierField.single_mode(grid32, (1, 2))
        assert np.allclose(A2d(st_.psi, phi).coeffs, -L2d(st_.omega, phi).coeffs, atol=1e-15)

    def test_grid_mismatch(self, grid16, grid32):
        with pytest.raises(GridMismatchError):
            L2d(flow2d("shear", 32).omega, FourierField.single_mode(grid16, (1, 0)))


class TestTransport2D:
    def test_characteristics_oracle(self, grid32):
        # d/dt phi = sin y phi_x, phi0 = exp(ix) -> exp(i(x + t sin y)) = sum_k J_k(t) exp(i(x + k y))
        st_ = flow2d("shear", 32)
        phi = FourierField.single_mode(grid32, (1, 0))
        for _ in range(100):
            phi = transport_step_2d(phi, st_.psi, 0.01)
        for k, jk in BESSEL_J_AT_1.items():
            assert phi.coeffs[(0,) + grid32.index_of((1, k))] == pytest.approx(jk, abs=1e-10)
            assert phi.coeffs[(0,) + grid32.index_of((1, -k))] == pytest.approx((-1) ** k * jk, abs=1e-10)

    def test_constant_stays_constant(self, grid32):
        st_ = flow2d("random_smooth", 32)
        const = physical_field(grid32, np.full(grid32.shape, 1.0 - 2j))
        out = transport_step_2d(const, st_.psi, 0.05)
        assert np.abs(out.coeffs - const.coeffs).max() < 1e-15

    def test_stage_values_match_coupled_stepper(self, random32):
        grid = random32.grid
        phi = seeded_smooth_field(grid, 1, 9, 2.0).replace(seeded_smooth_field(grid, 1, 9, 2.0).coeffs, real=False)
        _, _, psis = rk4_coupled(grid, random32.omega.coeffs[0], np.zeros((0,) + grid.shape, complex), 0.02)
        from elax.euler2d import step_rk4_coupled

        _, (coupled,) = step_rk4_coupled(random32, [phi], 0.02)
        assert np.abs(transport_step_2d(phi, psis, 0.02).coeffs - coupled.coeffs).max() < 1e-15

    def test_wrong_stage_count(self, random32):
        with pytest.raises(UsageError):
            transport_step_2d(FourierField.single_mode(random32.grid, (1, 0)), [random32.psi] * 3, 0.1)

    def test_l2_norm_preserved(self, random32):
        phi = FourierField.single_mode(random32.grid, (1, 1))
        series = transported_invariants_2d(random32, [phi], 0.01, 1.0, output_every=0.25)[0]
        norms = np.array([r["norm_phi"] for r in series])
        assert np.abs(norms - 1.0).max() < 1e-8


class TestInvariant2D:
    def test_homogeneity(self, random32):
        phi = FourierField.single_mode(random32.grid, (2, -1))
        for s in (0, 1, 2):
            a = invariant_I_2d(random32.omega, phi, s)
            assert invariant_I_2d(random32.omega, phi * 10.0, s) == pytest.approx(a, rel=1e-12)

    def test_zero_phi_is_degenerate(self, random32):
        with pytest.raises(DegenerateInputError):
            invariant_I_2d(random32.omega, FourierField.zeros(random32.grid, real=False), 0)
        with pytest.raises(DegenerateInputError):
            LaxState2D(FourierField.zeros(random32.grid, real=False))

    def test_eigen_probe_matches_eigenvalue(self):
        st_ = flow2d("shear", 64)
        probes = eigen_probes(st_.omega, 16, sector=1, count=5)
        for p in probes:
            for s in (0, 1, 2):
                assert abs(invariant_I_2d(st_.omega, p.phi, s) - abs(p.lam)) <= p.residual * (1 + 1e-9) or s > 0
            assert abs(invariant_I_2d(st_.omega, p.phi, 0) - abs(p.lam)) <= p.residual + 1e-12

    def test_probe_residual_tolerance_enforced(self):
        st_ = flow2d("shear", 64)
        with pytest.raises(DegenerateInputError):
            eigen_probes(st_.omega, 8, sector=1, tolerance=1e-30)

    def test_probe_box_must_fit_grid(self):
        with pytest.raises(UsageError):
            eigen_probes(flow2d("shear", 16).omega, 8, sector=1)


class TestCommutation2D:
    def test_shear_residual_and_oracle(self, grid32):
        st_ = flow2d("shear", 32)
        res = commutation_check_2d(st_, FourierField.single_mode(grid32, (1, 0)), 0.01, 1.0, output_every=0.5)
        assert res.column("r_commutation").max() < 1e-12
        x, y = grid32.coordinates()
        phi, eta = res.final_fields
        exact_phi = np.exp(1j * (x + np.sin(y)))
        assert np.abs(phi.physical()[0] - exact_phi).max() < 1e-9
        # eta(t) = {cos y, phi(t)} = i sin y phi(t)
        assert np.abs(eta.physical()[0] - 1j * np.sin(y) * exact_phi).max() < 1e-9

    def test_columns(self, random32):
        res = commutation_check_2d(random32, FourierField.single_mode(random32.grid, (1, 0)), 0.05, 0.1, sobolev=(0, 1.5))
        assert set(res.records[0]) == {"t", "r_commutation", "I_s0", "I_s1.5", "norm_phi"}
        assert res.records[0]["r_commutation"] == 0.0

    def test_degenerate_phi_as_function_of_omega(self, random32):
        # {omega, omega^2} = 0
        om2 = physical_field(random32.grid, random32.omega.physical()[0].real ** 2, real=True)
        with pytest.raises(DegenerateInputError):
            commutation_check_2d(random32, om2, 0.01, 0.1)

    def test_random_flow_residual_small_and_drops_with_resolution(self):
        rs = []
        for n in (32, 64):
            st_ = flow2d("random_smooth", n)
            res = commutation_check_2d(st_, FourierField.single_mode(st_.grid, (1, 0)), 0.02, 0.2)
            rs.append(res.records[-1]["r_commutation"])
        assert rs[1] < 1e-6
        assert rs[1] < rs[0] / 5


class TestPushforward:
    @pytest.mark.parametrize("f", [lambda w: w**2, lambda w: w**3], ids=["square", "cube"])
    def test_powers_on_shear(self, grid64, f):
        st_ = flow2d("shear", 64)
        res = pushforward_check(st_, FourierField.single_mode(grid64, (1, 0)), f, 0.005, 1.0, output_every=1.0)
        assert res.records[-1]["residual"] < 1e-8

    def test_residual_is_time_discretisation_error(self, grid64):
        st_ = flow2d("shear", 64)
        phi = FourierField.single_mode(grid64, (1, 0))
        coarse, fine = (pushforward_check(st_, phi, lambda w: w**2, dt, 1.0).records[-1]["residual"] for dt in (0.02, 0.01))
        assert 12 < coarse / fine < 20

    def test_identity_is_exact(self, random32):
        res = pushforward_check(random32, FourierField.single_mode(random32.grid, (1, 1)), lambda w: w, 0.05, 0.5)
        assert max(r["residual"] for r in res.records) < 1e-13

    def test_constant(self, random32):
        res = pushforward_check(random32, FourierField.single_mode(random32.grid, (1, 1)), lambda w: 3.0 + 0 * w, 0.05, 0.5)
        assert max(r["residual"] for r in res.records) < 1e-12


class TestExpansion:
    def test_kx0_sector_of_shear(self, grid32):
        st_ = flow2d("shear", 32)
        probes = eigen_probes(st_.omega, 8, sector=0)
        assert len(probes) == 17
        rep = expand_vorticity(st_, probes, 0.05, 0.5, sector=0)
        assert rep.residuals[0] < 1e-12
        assert rep.residuals.max() < 1e-10
        assert rep.coefficient_drift.max() < 1e-10

    def test_single_scaled_vector(self, random32):
        rep = expand_vorticity(random32, [random32.omega * 3.0], 0.05, 0.2)
        assert rep.coefficients[0] == pytest.approx(1 / 3, abs=1e-15)
        assert rep.residuals.max() < 1e-13

    def test_generic_target_in_kx1_sector(self):
        st_ = flow2d("shear", 96)
        probes = eigen_probes(st_.omega, 12, sector=1)
        # smooth target inside the sector: exp(ix) * exp(cos y)
        x, y = st_.grid.coordinates()
        target = sector_projection(physical_field(st_.grid, np.exp(1j * x + np.cos(y))), 1)
        keep = np.abs(st_.grid.wavenumbers()[1]) <= 12
        target = target.replace(target.coeffs * keep, real=False)
        rep = expand_vorticity(st_, probes, 0.05, 0.5, target=target)
        assert rep.residuals[0] < 1e-12
        assert rep.residuals[-1] < 1e-8
        assert rep.coefficient_drift.max() < 1e-8

    def test_ill_conditioned_basis(self, random32):
        phi = FourierField.single_mode(random32.grid, (1, 0))
        with pytest.raises(IllConditionedBasisError):
            expand_vorticity(random32, [phi, phi * 2.0], 0.05, 0.1)

    def test_empty_basis(self, random32):
        with pytest.raises(UsageError):
            expand_vorticity(random32, [], 0.05, 0.1)


class TestOperators3D:
    def test_ms_on_shear(self, grid3d16):
        # (cos z d/dy) exp(iy) = i cos z exp(iy)
        x, y, z = grid3d16.coordinates()
        om = flow3d("shear", 16).omega
        out = L3d_ms(om, FourierField.single_mode(grid3d16, (0, 1, 0)))
        assert np.allclose(out.physical()[0], 1j * np.cos(z) * np.exp(1j * y) + 0 * x, atol=1e-14)

    def test_childress_of_omega_vanishes(self):
        om = flow3d("taylor_green", 16).omega
        assert np.abs(L3d_childress(om, om).coeffs).max() < 1e-14

    @pytest.mark.parametrize("op", [L3d_ms, L3d_childress, A3d_ms, A3d_childress])
    def test_constants_give_zero(self, grid3d16, op):
        a = physical_field(grid3d16, np.ones((3,) + grid3d16.shape), real=True)
        phi = physical_field(grid3d16, np.ones((3,) + grid3d16.shape) * (1 + 1j))
        if op in (L3d_ms, A3d_ms):
            phi = phi.replace(phi.coeffs[:1])
        assert np.abs(op(a, phi).coeffs).max() < 1e-15

    def test_childress_needs_vector(self, grid3d16):
        om = flow3d("shear", 16).omega
        with pytest.raises(UsageError):
            L3d_childress(om, FourierField.single_mode(grid3d16, (1, 0, 0)))
        with pytest.raises(UsageError):
            LaxVector3D(FourierField.single_mode(grid3d16, (1, 0, 0)))

    @settings(max_examples=10, deadline=None)
    @given(st.integers(0, 10_000), st.floats(0.1, 100.0))
    def test_invariant_homogeneity_3d(self, seed, c):
        grid = GridSpec(3, 8)
        om = flow3d("taylor_green", 8).omega
        phi = seeded_smooth_field(grid, 1, seed, 1.0)
        a = invariant_I_3d(om, phi, 0)
        assert invariant_I_3d(om, phi * c, 0) == pytest.approx(a, rel=1e-12)


class TestCommutation3D:
    def test_ms_shear_oracle(self, grid3d32):
        # u = (sin z, 0, 0); phi = exp(i(x + y - t sin z)); eta = i cos z phi
        st_ = flow3d("shear", 32)
        res = commutation_check_3d(st_, FourierField.single_mode(grid3d32, (1, 1, 0)), 0.02, 0.5, pair="ms", output_every=0.5)
        assert res.column("r_commutation").max() < 1e-12
        x, y, z = grid3d32.coordinates()
        exact = np.exp(1j * (x + y - 0.5 * np.sin(z)))
        phi, eta = res.final_fields
        assert np.abs(phi.physical()[0] - exact).max() < 1e-9
        assert np.abs(eta.physical()[0] - 1j * np.cos(z) * exact).max() < 1e-9
        i_s0 = res.column("I_s0")
        assert np.abs(i_s0 - i_s0[0]).max() < 1e-9

    def test_ms_degenerate_plane_wave(self, grid3d16):
        # (cos z d/dy) exp(ix) = 0
        with pytest.raises(DegenerateInputError):
            commutation_check_3d(flow3d("shear", 16), FourierField.single_mode(grid3d16, (1, 0, 0)), 0.05, 0.1)

    def test_unknown_pair(self, grid3d16):
        from elax.errors import ConfigurationError

        with pytest.raises(ConfigurationError):
            commutation_check_3d(flow3d("shear", 16), FourierField.single_mode(grid3d16, (1, 1, 0)), 0.05, 0.1, pair="ab")

    def test_childress_taylor_green_short(self, grid3d16):
        phi = FourierField.single_mode(grid3d16, (1, 1, 0))
        phi = FourierField(grid3d16, np.array([0.0, 0.0, 1.0])[:, None, None, None] * phi.coeffs, False)
        res = commutation_check_3d(flow3d("taylor_green", 16), phi, 0.05, 0.2, pair="childress")
        assert res.records[-1]["r_commutation"] < 1e-3

    def test_eigen_probe_3d(self):
        om = flow3d("shear", 32).omega
        probes = eigen_probes_3d(om, 8, sector=(1, 1), count=3)
        for p in probes:
            assert abs(invariant_I_3d(om, p.phi, 0) - abs(p.lam)) <= p.residual + 1e-12
