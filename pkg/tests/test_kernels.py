"""Backend agreement and sampling semantics for the hot kernels.

The numba and numpy backends implement textually identical arithmetic,
so everything here demands bitwise equality, not approximate closeness.
"""

import numpy as np
import pytest

from stokestransport import _kernels
from stokestransport.domain import VelocityField
from stokestransport.scenarios import make_density
from stokestransport.stokes import solve_buoyancy
from stokestransport.transport import TransportConfig, integrate_flow

needs_numba = pytest.mark.skipif(
    "numba" not in _kernels.available_backends(),
    reason="numba backend unavailable")


@pytest.fixture
def restore_backend():
    before = _kernels.backend_name()
    yield
    _kernels.set_backend(before)


def _sample_args(strip, seed=21):
    dom, grid = strip
    rng = np.random.default_rng(seed)
    u1 = rng.standard_normal((grid.nx, grid.nz))
    u2 = rng.standard_normal((grid.nx, grid.nz + 1))
    u2[:, 0] = u2[:, -1] = 0.0
    px = rng.uniform(-2 * dom.x_extent, 3 * dom.x_extent, size=500)
    pz = rng.uniform(-0.5, 1.5, size=500)
    return grid, dom, u1, u2, px, pz


class TestBackendParity:
    @needs_numba
    def test_point_samples_bitwise_equal(self, strip, restore_backend):
        grid, dom, u1, u2, px, pz = _sample_args(strip)
        out = {}
        for name in ("numpy", "numba"):
            _kernels.set_backend(name)
            out[name] = (
                _kernels.sample_u1(u1, px, pz, grid.hx, grid.hz, True, dom.x_extent),
                _kernels.sample_u2(u2, px, pz, grid.hx, grid.hz, True, dom.x_extent),
                _kernels.sample_center(u1, px, pz, grid.hx, grid.hz, True, dom.x_extent),
            )
        for a, b in zip(out["numpy"], out["numba"]):
            assert np.array_equal(a, b)

    @needs_numba
    @pytest.mark.parametrize("which", ["rect", "strip"])
    def test_flow_maps_bitwise_equal(self, which, rect, strip, restore_backend):
        dom, grid = rect if which == "rect" else strip
        rho = make_density("stratified_perturbed", grid, dom, eps=0.05)
        u = solve_buoyancy(rho).u
        cfg = TransportConfig(dt=0.05)
        out = {}
        for name in ("numpy", "numba"):
            _kernels.set_backend(name)
            out[name] = integrate_flow(u, 1.0, 0.0, cfg).displacement
        assert np.array_equal(out["numpy"], out["numba"])

    def test_set_backend_rejects_unknown(self):
        with pytest.raises(ValueError):
            _kernels.set_backend("fortran")


class TestSamplingSemantics:
    def test_periodic_x_offset_bitwise(self, strip):
        # offsets by the exact period reduce to the same wrapped abscissa
        grid, dom, u1, u2, px, pz = _sample_args(strip)
        pz = np.clip(pz, 0.0, 1.0)
        base = _kernels.sample_u1(u1, px, pz, grid.hx, grid.hz, True, dom.x_extent)
        moved = _kernels.sample_u1(u1, px + dom.x_extent, pz, grid.hx, grid.hz,
                                   True, dom.x_extent)
        assert np.array_equal(base, moved)

    def test_z_clamped_to_walls(self, strip):
        grid, dom, u1, u2, px, pz = _sample_args(strip)
        below = _kernels.sample_u2(u2, px, np.full_like(px, -3.0),
                                   grid.hx, grid.hz, True, dom.x_extent)
        at = _kernels.sample_u2(u2, px, np.zeros_like(px),
                                grid.hx, grid.hz, True, dom.x_extent)
        assert np.array_equal(below, at)
        assert np.all(at == 0.0)  # no-slip row

    def test_u1_vanishes_on_walls(self, strip):
        # tangential velocity blends linearly to zero inside the wall half-cell
        grid, dom, u1, u2, px, pz = _sample_args(strip)
        top = _kernels.sample_u1(u1, px, np.ones_like(px), grid.hx, grid.hz,
                                 True, dom.x_extent)
        assert np.all(top == 0.0)

    def test_center_extension_is_constant_beyond_walls(self, strip):
        grid, dom, u1, u2, px, pz = _sample_args(strip)
        c = np.arange(grid.nx * grid.nz, dtype=float).reshape(grid.nx, grid.nz)
        lo = _kernels.sample_center(c, px, np.full_like(px, -0.2), grid.hx,
                                    grid.hz, True, dom.x_extent)
        wall = _kernels.sample_center(c, px, np.zeros_like(px), grid.hx,
                                      grid.hz, True, dom.x_extent)
        assert np.array_equal(lo, wall)

    def test_rectangle_clamps_x(self, rect):
        dom, grid = rect
        rng = np.random.default_rng(3)
        c = rng.standard_normal((grid.nx, grid.nz))
        pz = np.full(8, 0.5)
        beyond = _kernels.sample_center(c, np.full(8, 2.0), pz, grid.hx,
                                        grid.hz, False, dom.x_extent)
        at = _kernels.sample_center(c, np.full(8, dom.x_extent), pz, grid.hx,
                                    grid.hz, False, dom.x_extent)
        assert np.array_equal(beyond, at)


class TestEnvSelection:
    def test_backend_name_reports_selection(self):
        assert _kernels.backend_name() in _kernels.available_backends()

    def test_numpy_always_available(self):
        assert "numpy" in _kernels.available_backends()
