import numpy as np
import pytest

from _manufactured import manufactured_case, velocity_error_l2
from stokestransport.domain import (
    XFACE,
    DomainKind,
    DomainSpec,
    Forcing,
    ScalarField,
    expected_shape,
    make_grid,
    max_divergence,
)
from stokestransport.scenarios import make_density
from stokestransport.stokes import (
    StokesConfig,
    buoyancy_forcing,
    check_compatibility,
    flux_profile,
    momentum_residual,
    poiseuille,
    solve_buoyancy,
    solve_stokes_bounded,
    solve_stokes_strip,
    solver_stats_text,
)


class TestPoiseuille:
    def test_flux_profile_exact(self, strip):
        dom, grid = strip
        phi = 1.0
        sol = poiseuille(phi, grid, dom)
        prof = flux_profile(sol.u)
        assert prof.shape == (grid.nx,)
        assert np.max(np.abs(prof - phi)) <= 1e-12

    def test_momentum_residual_with_recorded_slope(self, strip):
        dom, grid = strip
        sol = poiseuille(2.5, grid, dom)
        res = momentum_residual(sol.u, sol.p, pressure_slope=sol.pressure_slope)
        assert res <= 1e-12 * 2.5

    def test_slope_closed_form(self, strip):
        # amplitude a = phi / (hz * sum z_c(1-z_c)) and the midpoint sum is
        # (2 nz^2 + 1) / (12 nz^2); slope = -2a.  At nz = 16 this equals
        # -2 * 12*16^2 / (2*16^2 + 1) = -11.976608187134502 (exact rational
        # 6144/513 = 2048/171).
        dom, grid = strip
        sol = poiseuille(1.0, grid, dom)
        assert grid.nz == 16
        assert sol.pressure_slope == pytest.approx(-11.976608187134502, abs=1e-12)

    def test_slope_approaches_reference_value(self):
        # |slope| = 12 phi * 2 nz^2 / (2 nz^2 + 1): the gap to 12 phi is
        # 12 phi / (2 nz^2 + 1), i.e. O(hz^2)
        dom = DomainSpec(DomainKind.STRIP, 8.0)
        phi = 3.0
        for nz in (16, 32, 64):
            grid = make_grid(dom, 64, nz)
            sol = poiseuille(phi, grid, dom)
            gap = abs(abs(sol.pressure_slope) - 12.0 * phi)
            assert gap == pytest.approx(12.0 * phi / (2 * nz**2 + 1), rel=1e-10)

    def test_requires_strip(self, rect):
        dom, grid = rect
        with pytest.raises(ValueError):
            poiseuille(1.0, grid, dom)

    def test_zero_flux_gives_zero_flow(self, strip):
        dom, grid = strip
        sol = poiseuille(0.0, grid, dom)
        assert np.max(np.abs(sol.u.u1.values)) == 0.0
        assert np.max(np.abs(sol.u.u2.values)) == 0.0


class TestHydrostatic:
    def test_rectangle(self, rect):
        dom, grid = rect
        rho = make_density("stratified", grid, dom)
        sol = solve_buoyancy(rho)
        assert np.max(np.abs(sol.u.u1.values)) <= 1e-12
        assert np.max(np.abs(sol.u.u2.values)) <= 1e-12

    def test_strip_exact_zero(self, strip):
        # x-independent forcing lands entirely in the m = 0 mode, whose
        # velocity block has zero data and zero flux target: exact zeros
        dom, grid = strip
        rho = make_density("stratified", grid, dom)
        sol = solve_buoyancy(rho)
        assert np.max(np.abs(sol.u.u1.values)) == 0.0
        assert np.max(np.abs(sol.u.u2.values)) == 0.0

    def test_pressure_is_hydrostatic_head(self, strip):
        # with u = 0 the momentum equation reduces to dp/dz = f2
        dom, grid = strip
        rho = make_density("stratified", grid, dom)
        sol = solve_buoyancy(rho)
        res = momentum_residual(sol.u, sol.p, buoyancy_forcing(rho),
                                pressure_slope=sol.pressure_slope)
        assert res <= 1e-11


class TestZeroFluxUniqueness:
    def test_unit_x_forcing(self, strip):
        dom, grid = strip
        f = Forcing(grid, dom,
                    np.ones(expected_shape(grid, dom, XFACE)),
                    np.zeros((grid.nx, grid.nz + 1)))
        sol = solve_stokes_strip(f)
        assert np.max(np.abs(sol.u.u1.values)) <= 1e-10
        assert np.max(np.abs(sol.u.u2.values)) <= 1e-10
        assert abs(sol.pressure_slope - 1.0) <= 1e-8

    def test_flux_constraint_is_honored(self, strip):
        dom, grid = strip
        f = Forcing(grid, dom,
                    np.ones(expected_shape(grid, dom, XFACE)),
                    np.zeros((grid.nx, grid.nz + 1)))
        sol = solve_stokes_strip(f, StokesConfig(flux_target=0.75))
        prof = flux_profile(sol.u)
        assert np.max(np.abs(prof - 0.75)) <= 1e-10


class TestManufactured:
    @pytest.mark.parametrize("kind,sizes", [
        (DomainKind.RECTANGLE, [(32, 32), (64, 64), (128, 128)]),
        (DomainKind.STRIP, [(64, 32), (128, 64), (256, 128)]),
    ])
    def test_velocity_convergence(self, kind, sizes):
        errs = []
        for nx, nz in sizes:
            grid, dom, force, ex1, ex2 = manufactured_case(kind, nx, nz)
            if kind is DomainKind.RECTANGLE:
                sol = solve_stokes_bounded(force)
            else:
                sol = solve_stokes_strip(force)
            # direct-solve roundoff scales with the forcing magnitude
            fmax = max(np.max(np.abs(force.f1)), np.max(np.abs(force.f2)))
            assert max_divergence(sol.u) <= 1e-11 * max(1.0, fmax)
            errs.append(velocity_error_l2(sol, ex1, ex2))
        orders = [np.log2(errs[i] / errs[i + 1]) for i in range(len(errs) - 1)]
        assert min(orders) >= 1.9, (errs, orders)

    def test_solution_report_is_consistent(self):
        grid, dom, force, ex1, ex2 = manufactured_case(DomainKind.RECTANGLE, 32, 32)
        sol = solve_stokes_bounded(force)
        recomputed = momentum_residual(sol.u, sol.p, force,
                                       pressure_slope=sol.pressure_slope)
        assert recomputed == pytest.approx(sol.residual_norm, rel=1e-9, abs=1e-13)
        text = solver_stats_text(sol)
        assert "residual" in text and "=" in text


class TestValidation:
    def test_config_rejects_bad_tolerance(self):
        with pytest.raises(ValueError):
            StokesConfig(linear_solver_tolerance=0.0)
        with pytest.raises(ValueError):
            StokesConfig(linear_solver_tolerance=1e-3)

    def test_config_rejects_nonfinite_flux(self):
        with pytest.raises(ValueError):
            StokesConfig(flux_target=float("nan"))

    def test_forcing_shape_checked(self, strip):
        dom, grid = strip
        with pytest.raises(ValueError):
            Forcing(grid, dom, np.zeros((grid.nx + 1, grid.nz)),
                    np.zeros((grid.nx, grid.nz + 1)))

    def test_compatibility_is_cell_integral(self, rect):
        dom, grid = rect
        g = ScalarField(grid, dom, np.full((grid.nx, grid.nz), 2.0))
        assert check_compatibility(g) == pytest.approx(2.0 * dom.x_extent, rel=1e-14)

    def test_solver_rejects_wrong_domain(self, rect, strip):
        rdom, rgrid = rect
        sdom, sgrid = strip
        f_rect = Forcing(rgrid, rdom,
                         np.zeros(expected_shape(rgrid, rdom, XFACE)),
                         np.zeros((rgrid.nx, rgrid.nz + 1)))
        with pytest.raises(ValueError):
            solve_stokes_strip(f_rect)
        f_strip = Forcing(sgrid, sdom,
                          np.zeros(expected_shape(sgrid, sdom, XFACE)),
                          np.zeros((sgrid.nx, sgrid.nz + 1)))
        with pytest.raises(ValueError):
            solve_stokes_bounded(f_strip)
