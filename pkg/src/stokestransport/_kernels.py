"""Hot transport kernels: bilinear MAC sampling and RK4 seed stepping.

Two interchangeable backends live here.  The numba backend JIT-compiles the
per-seed scalar loops; the numpy backend vectorizes the same arithmetic over
whole point arrays.  Expressions are kept textually identical so the two
paths agree to the last bit.  Set ``ST_NUMBA=0`` to force the numpy path
(handy for debugging, and the fallback where numba is unavailable);
``set_backend("numpy"|"numba")`` switches at runtime, which is what the
benchmark uses.

Sampling conventions (shared by both backends):

* strip mode wraps x into [0, L) *before* any index arithmetic, so samples
  at x and x + L are bit-identical whenever x + L is exactly representable;
* z is clamped to [0, 1]; rectangle mode also clamps x to [0, Lx];
* u1 has no stored row on the walls z = 0, 1: within the last half cell the
  value is blended linearly against the wall value 0 (no-slip), and the
  same happens for u2 against the x-walls in rectangle mode;
* cell-centered data is extended by its boundary value across the outer
  half-cell band (constant extrapolation), keeping every interpolated value
  a convex combination of stored samples.
"""

from __future__ import annotations

import os
import warnings

import numpy as np

__all__ = [
    "backend_name",
    "available_backends",
    "set_backend",
    "sample_u1",
    "sample_u2",
    "sample_center",
    "rk4_step",
]

_WANT_NUMBA = os.environ.get("ST_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off")

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    if _WANT_NUMBA:
        warnings.warn("numba unavailable; transport kernels fall back to numpy")


# ---------------------------------------------------------------------------
# numpy backend
# ---------------------------------------------------------------------------


def _np_clip01(a):
    return np.minimum(np.maximum(a, 0.0), 1.0)


def _np_sample_u1(u1, px, pz, hx, hz, periodic, Lx):
    nf, nz = u1.shape
    pz = _np_clip01(pz)
    if periodic:
        px = px - Lx * np.floor(px / Lx)
        fx = px / hx
        i0 = np.floor(fx).astype(np.int64)
        tx = fx - i0
        ia = i0 % nf
        ib = (i0 + 1) % nf
    else:
        px = np.minimum(np.maximum(px, 0.0), Lx)
        fx = px / hx
        i0 = np.minimum(np.maximum(np.floor(fx).astype(np.int64), 0), nf - 2)
        tx = np.minimum(np.maximum(fx - i0, 0.0), 1.0)
        ia = i0
        ib = i0 + 1
    fz = pz / hz - 0.5
    j0 = np.minimum(np.maximum(np.floor(fz).astype(np.int64), 0), nz - 2)
    tz = np.minimum(np.maximum(fz - j0, 0.0), 1.0)
    ra = (1.0 - tx) * u1[ia, j0] + tx * u1[ib, j0]
    rb = (1.0 - tx) * u1[ia, j0 + 1] + tx * u1[ib, j0 + 1]
    mid = (1.0 - tz) * ra + tz * rb
    r_bot = (1.0 - tx) * u1[ia, 0] + tx * u1[ib, 0]
    r_top = (1.0 - tx) * u1[ia, nz - 1] + tx * u1[ib, nz - 1]
    bot = (pz / (0.5 * hz)) * r_bot
    top = ((1.0 - pz) / (0.5 * hz)) * r_top
    return np.where(fz <= 0.0, bot, np.where(fz >= nz - 1, top, mid))


def _np_sample_u2(u2, px, pz, hx, hz, periodic, Lx):
    nx, nzp = u2.shape
    pz = _np_clip01(pz)
    fz = pz / hz
    j0 = np.minimum(np.maximum(np.floor(fz).astype(np.int64), 0), nzp - 2)
    tz = np.minimum(np.maximum(fz - j0, 0.0), 1.0)
    if periodic:
        px = px - Lx * np.floor(px / Lx)
        fx = px / hx - 0.5
        i0 = np.floor(fx).astype(np.int64)
        tx = fx - i0
        ia = i0 % nx
        ib = (i0 + 1) % nx
        ca = (1.0 - tz) * u2[ia, j0] + tz * u2[ia, j0 + 1]
        cb = (1.0 - tz) * u2[ib, j0] + tz * u2[ib, j0 + 1]
        return (1.0 - tx) * ca + tx * cb
    px = np.minimum(np.maximum(px, 0.0), Lx)
    fx = px / hx - 0.5
    i0 = np.minimum(np.maximum(np.floor(fx).astype(np.int64), 0), nx - 2)
    tx = np.minimum(np.maximum(fx - i0, 0.0), 1.0)
    ca = (1.0 - tz) * u2[i0, j0] + tz * u2[i0, j0 + 1]
    cb = (1.0 - tz) * u2[i0 + 1, j0] + tz * u2[i0 + 1, j0 + 1]
    mid = (1.0 - tx) * ca + tx * cb
    c_left = (1.0 - tz) * u2[0, j0] + tz * u2[0, j0 + 1]
    c_right = (1.0 - tz) * u2[nx - 1, j0] + tz * u2[nx - 1, j0 + 1]
    left = (px / (0.5 * hx)) * c_left
    right = ((Lx - px) / (0.5 * hx)) * c_right
    return np.where(fx <= 0.0, left, np.where(fx >= nx - 1, right, mid))


def _np_sample_center(c, px, pz, hx, hz, periodic, Lx):
    nx, nz = c.shape
    pz = _np_clip01(pz)
    fz = np.minimum(np.maximum(pz / hz - 0.5, 0.0), nz - 1.0)
    j0 = np.minimum(np.floor(fz).astype(np.int64), nz - 2)
    tz = fz - j0
    if periodic:
        px = px - Lx * np.floor(px / Lx)
        fx = px / hx - 0.5
        i0 = np.floor(fx).astype(np.int64)
        tx = fx - i0
        ia = i0 % nx
        ib = (i0 + 1) % nx
    else:
        px = np.minimum(np.maximum(px, 0.0), Lx)
        fx = np.minimum(np.maximum(px / hx - 0.5, 0.0), nx - 1.0)
        i0 = np.minimum(np.floor(fx).astype(np.int64), nx - 2)
        tx = fx - i0
        ia = i0
        ib = i0 + 1
    v00 = c[ia, j0]
    v01 = c[ia, j0 + 1]
    v10 = c[ib, j0]
    v11 = c[ib, j0 + 1]
    ca = (1.0 - tz) * v00 + tz * v01
    cb = (1.0 - tz) * v10 + tz * v11
    res = (1.0 - tx) * ca + tx * cb
    # rounding can push the blend past the corner hull by an ulp; scalar
    # data carries an exact range-preservation contract, so clamp
    lo = np.minimum(np.minimum(v00, v01), np.minimum(v10, v11))
    hi = np.maximum(np.maximum(v00, v01), np.maximum(v10, v11))
    return np.minimum(np.maximum(res, lo), hi)


def _np_rk4_step(px, pz, h, u1a, u2a, u1b, u2b, u1c, u2c, hx, hz, periodic, Lx):
    k1x = _np_sample_u1(u1a, px, pz, hx, hz, periodic, Lx)
    k1z = _np_sample_u2(u2a, px, pz, hx, hz, periodic, Lx)
    x1 = px + 0.5 * h * k1x
    z1 = _np_clip01(pz + 0.5 * h * k1z)
    k2x = _np_sample_u1(u1b, x1, z1, hx, hz, periodic, Lx)
    k2z = _np_sample_u2(u2b, x1, z1, hx, hz, periodic, Lx)
    x2 = px + 0.5 * h * k2x
    z2 = _np_clip01(pz + 0.5 * h * k2z)
    k3x = _np_sample_u1(u1b, x2, z2, hx, hz, periodic, Lx)
    k3z = _np_sample_u2(u2b, x2, z2, hx, hz, periodic, Lx)
    x3 = px + h * k3x
    z3 = _np_clip01(pz + h * k3z)
    k4x = _np_sample_u1(u1c, x3, z3, hx, hz, periodic, Lx)
    k4z = _np_sample_u2(u2c, x3, z3, hx, hz, periodic, Lx)
    qx = px + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
    qz = _np_clip01(pz + (h / 6.0) * (k1z + 2.0 * k2z + 2.0 * k3z + k4z))
    if not periodic:
        qx = np.minimum(np.maximum(qx, 0.0), Lx)
    px[:] = qx
    pz[:] = qz


class _NumpyBackend:
    name = "numpy"
    sample_u1 = staticmethod(_np_sample_u1)
    sample_u2 = staticmethod(_np_sample_u2)
    sample_center = staticmethod(_np_sample_center)
    rk4_step = staticmethod(_np_rk4_step)


# ---------------------------------------------------------------------------
# numba backend: the same arithmetic as scalar loops
# ---------------------------------------------------------------------------

if numba is not None:

    @numba.njit(cache=True, inline="always")
    def _nb_point_u1(u1, x, z, hx, hz, periodic, Lx):
        nf, nz = u1.shape
        if z < 0.0:
            z = 0.0
        elif z > 1.0:
            z = 1.0
        if periodic:
            x = x - Lx * np.floor(x / Lx)
            fx = x / hx
            i0 = int(np.floor(fx))
            tx = fx - i0
            ia = i0 % nf
            ib = (i0 + 1) % nf
        else:
            if x < 0.0:
                x = 0.0
            elif x > Lx:
                x = Lx
            fx = x / hx
            i0 = int(np.floor(fx))
            if i0 < 0:
                i0 = 0
            elif i0 > nf - 2:
                i0 = nf - 2
            tx = fx - i0
            if tx < 0.0:
                tx = 0.0
            elif tx > 1.0:
                tx = 1.0
            ia = i0
            ib = i0 + 1
        fz = z / hz - 0.5
        if fz <= 0.0:
            r = (1.0 - tx) * u1[ia, 0] + tx * u1[ib, 0]
            return (z / (0.5 * hz)) * r
        if fz >= nz - 1:
            r = (1.0 - tx) * u1[ia, nz - 1] + tx * u1[ib, nz - 1]
            return ((1.0 - z) / (0.5 * hz)) * r
        j0 = int(fz)
        tz = fz - j0
        ra = (1.0 - tx) * u1[ia, j0] + tx * u1[ib, j0]
        rb = (1.0 - tx) * u1[ia, j0 + 1] + tx * u1[ib, j0 + 1]
        return (1.0 - tz) * ra + tz * rb

    @numba.njit(cache=True, inline="always")
    def _nb_point_u2(u2, x, z, hx, hz, periodic, Lx):
        nx, nzp = u2.shape
        if z < 0.0:
            z = 0.0
        elif z > 1.0:
            z = 1.0
        fz = z / hz
        j0 = int(np.floor(fz))
        if j0 < 0:
            j0 = 0
        elif j0 > nzp - 2:
            j0 = nzp - 2
        tz = fz - j0
        if tz < 0.0:
            tz = 0.0
        elif tz > 1.0:
            tz = 1.0
        if periodic:
            x = x - Lx * np.floor(x / Lx)
            fx = x / hx - 0.5
            i0 = int(np.floor(fx))
            tx = fx - i0
            ia = i0 % nx
            ib = (i0 + 1) % nx
            ca = (1.0 - tz) * u2[ia, j0] + tz * u2[ia, j0 + 1]
            cb = (1.0 - tz) * u2[ib, j0] + tz * u2[ib, j0 + 1]
            return (1.0 - tx) * ca + tx * cb
        if x < 0.0:
            x = 0.0
        elif x > Lx:
            x = Lx
        fx = x / hx - 0.5
        if fx <= 0.0:
            c = (1.0 - tz) * u2[0, j0] + tz * u2[0, j0 + 1]
            return (x / (0.5 * hx)) * c
        if fx >= nx - 1:
            c = (1.0 - tz) * u2[nx - 1, j0] + tz * u2[nx - 1, j0 + 1]
            return ((Lx - x) / (0.5 * hx)) * c
        i0 = int(fx)
        tx = fx - i0
        ca = (1.0 - tz) * u2[i0, j0] + tz * u2[i0, j0 + 1]
        cb = (1.0 - tz) * u2[i0 + 1, j0] + tz * u2[i0 + 1, j0 + 1]
        return (1.0 - tx) * ca + tx * cb

    @numba.njit(cache=True, inline="always")
    def _nb_point_center(c, x, z, hx, hz, periodic, Lx):
        nx, nz = c.shape
        if z < 0.0:
            z = 0.0
        elif z > 1.0:
            z = 1.0
        fz = z / hz - 0.5
        if fz < 0.0:
            fz = 0.0
        elif fz > nz - 1.0:
            fz = nz - 1.0
        j0 = int(fz)
        if j0 > nz - 2:
            j0 = nz - 2
        tz = fz - j0
        if periodic:
            x = x - Lx * np.floor(x / Lx)
            fx = x / hx - 0.5
            i0 = int(np.floor(fx))
            tx = fx - i0
            ia = i0 % nx
            ib = (i0 + 1) % nx
        else:
            if x < 0.0:
                x = 0.0
            elif x > Lx:
                x = Lx
            fx = x / hx - 0.5
            if fx < 0.0:
                fx = 0.0
            elif fx > nx - 1.0:
                fx = nx - 1.0
            i0 = int(fx)
            if i0 > nx - 2:
                i0 = nx - 2
            tx = fx - i0
            ia = i0
            ib = i0 + 1
        v00 = c[ia, j0]
        v01 = c[ia, j0 + 1]
        v10 = c[ib, j0]
        v11 = c[ib, j0 + 1]
        ca = (1.0 - tz) * v00 + tz * v01
        cb = (1.0 - tz) * v10 + tz * v11
        res = (1.0 - tx) * ca + tx * cb
        # same hull clamp as the vectorized path; keeps range preservation
        # exact and the two backends bitwise identical
        lo = min(min(v00, v01), min(v10, v11))
        hi = max(max(v00, v01), max(v10, v11))
        return min(max(res, lo), hi)

    @numba.njit(cache=True)
    def _nb_sample_u1(u1, px, pz, hx, hz, periodic, Lx):
        out = np.empty(px.size)
        for n in range(px.size):
            out[n] = _nb_point_u1(u1, px[n], pz[n], hx, hz, periodic, Lx)
        return out

    @numba.njit(cache=True)
    def _nb_sample_u2(u2, px, pz, hx, hz, periodic, Lx):
        out = np.empty(px.size)
        for n in range(px.size):
            out[n] = _nb_point_u2(u2, px[n], pz[n], hx, hz, periodic, Lx)
        return out

    @numba.njit(cache=True)
    def _nb_sample_center(c, px, pz, hx, hz, periodic, Lx):
        out = np.empty(px.size)
        for n in range(px.size):
            out[n] = _nb_point_center(c, px[n], pz[n], hx, hz, periodic, Lx)
        return out

    @numba.njit(cache=True)
    def _nb_rk4_step(px, pz, h, u1a, u2a, u1b, u2b, u1c, u2c, hx, hz, periodic, Lx):
        for n in range(px.size):
            x0 = px[n]
            z0 = pz[n]
            k1x = _nb_point_u1(u1a, x0, z0, hx, hz, periodic, Lx)
            k1z = _nb_point_u2(u2a, x0, z0, hx, hz, periodic, Lx)
            x1 = x0 + 0.5 * h * k1x
            z1 = z0 + 0.5 * h * k1z
            if z1 < 0.0:
                z1 = 0.0
            elif z1 > 1.0:
                z1 = 1.0
            k2x = _nb_point_u1(u1b, x1, z1, hx, hz, periodic, Lx)
            k2z = _nb_point_u2(u2b, x1, z1, hx, hz, periodic, Lx)
            x2 = x0 + 0.5 * h * k2x
            z2 = z0 + 0.5 * h * k2z
            if z2 < 0.0:
                z2 = 0.0
            elif z2 > 1.0:
                z2 = 1.0
            k3x = _nb_point_u1(u1b, x2, z2, hx, hz, periodic, Lx)
            k3z = _nb_point_u2(u2b, x2, z2, hx, hz, periodic, Lx)
            x3 = x0 + h * k3x
            z3 = z0 + h * k3z
            if z3 < 0.0:
                z3 = 0.0
            elif z3 > 1.0:
                z3 = 1.0
            k4x = _nb_point_u1(u1c, x3, z3, hx, hz, periodic, Lx)
            k4z = _nb_point_u2(u2c, x3, z3, hx, hz, periodic, Lx)
            qx = x0 + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
            qz = z0 + (h / 6.0) * (k1z + 2.0 * k2z + 2.0 * k3z + k4z)
            if qz < 0.0:
                qz = 0.0
            elif qz > 1.0:
                qz = 1.0
            if not periodic:
                if qx < 0.0:
                    qx = 0.0
                elif qx > Lx:
                    qx = Lx
            px[n] = qx
            pz[n] = qz

    class _NumbaBackend:
        name = "numba"
        sample_u1 = staticmethod(_nb_sample_u1)
        sample_u2 = staticmethod(_nb_sample_u2)
        sample_center = staticmethod(_nb_sample_center)
        rk4_step = staticmethod(_nb_rk4_step)

else:
    _NumbaBackend = None


_BACKENDS = {"numpy": _NumpyBackend}
if _NumbaBackend is not None:
    _BACKENDS["numba"] = _NumbaBackend

_active = _BACKENDS["numba" if (_WANT_NUMBA and "numba" in _BACKENDS) else "numpy"]


def available_backends():
    return tuple(sorted(_BACKENDS))


def backend_name() -> str:
    return _active.name


def set_backend(name: str) -> str:
    """Select the kernel backend ('numpy' or 'numba'); returns the old name."""
    global _active
    if name not in _BACKENDS:
        raise ValueError(f"unknown backend {name!r}; available: {available_backends()}")
    old = _active.name
    _active = _BACKENDS[name]
    return old


def _as_points(px, pz):
    px = np.ascontiguousarray(px, dtype=np.float64)
    pz = np.ascontiguousarray(pz, dtype=np.float64)
    if px.shape != pz.shape:
        raise ValueError("px and pz must have matching shapes")
    return px, pz


def sample_u1(u1, px, pz, hx, hz, periodic, Lx):
    px, pz = _as_points(px, pz)
    return _active.sample_u1(u1, px.ravel(), pz.ravel(), hx, hz, periodic, Lx).reshape(px.shape)


def sample_u2(u2, px, pz, hx, hz, periodic, Lx):
    px, pz = _as_points(px, pz)
    return _active.sample_u2(u2, px.ravel(), pz.ravel(), hx, hz, periodic, Lx).reshape(px.shape)


def sample_center(c, px, pz, hx, hz, periodic, Lx):
    px, pz = _as_points(px, pz)
    return _active.sample_center(c, px.ravel(), pz.ravel(), hx, hz, periodic, Lx).reshape(px.shape)


def rk4_step(px, pz, h, u1a, u2a, u1b, u2b, u1c, u2c, hx, hz, periodic, Lx):
    """Advance all seed positions by one RK4 step of size h, in place."""
    _active.rk4_step(px, pz, h, u1a, u2a, u1b, u2b, u1c, u2c, hx, hz, periodic, Lx)
