"""Z-buffer rasterizer for heightfield meshes (numba kernel).

The heightfield is tessellated into two triangles per unit cell, split
along the (i, j) -> (i+1, j+1) diagonal, and rasterized in image space.
Pixel (ii, jj) is sampled at its center (u, v) = (jj + 0.5, ii + 0.5);
the inside test is inclusive on all edges, and ties in depth keep the
first triangle in the fixed cell-major processing order, so the output
is deterministic for a given input.
"""

import numpy as np
from numba import njit

BACKGROUND = -1.0e30


@njit(cache=True, nogil=True)
def rasterize_mesh(u, v, s, wx, wy, out_h, out_w):
    """Rasterize the triangulated sample grid.

    u, v, s: per-sample image coords and depth-along-view, shape (H, W).
    wx, wy:  per-sample world coordinates (1D along each axis).
    Returns (depth, world_x, world_y) buffers of shape (out_h, out_w);
    pixels never covered hold BACKGROUND / NaN.
    """
    zbuf = np.full((out_h, out_w), BACKGROUND, dtype=np.float64)
    xbuf = np.full((out_h, out_w), np.nan, dtype=np.float64)
    ybuf = np.full((out_h, out_w), np.nan, dtype=np.float64)
    nrow, ncol = u.shape

    for i in range(nrow - 1):
        for j in range(ncol - 1):
            # triangle vertex index pairs for the two half-cells
            for tri in range(2):
                if tri == 0:
                    i0, j0, i1, j1, i2, j2 = i, j, i, j + 1, i + 1, j + 1
                else:
                    i0, j0, i1, j1, i2, j2 = i, j, i + 1, j + 1, i + 1, j
                u0 = u[i0, j0]; v0 = v[i0, j0]
                u1 = u[i1, j1]; v1 = v[i1, j1]
                u2 = u[i2, j2]; v2 = v[i2, j2]

                area2 = (u1 - u0) * (v2 - v0) - (v1 - v0) * (u2 - u0)
                if area2 == 0.0:
                    continue
                sgn = 1.0 if area2 > 0.0 else -1.0
                a2 = area2 * sgn

                umin = min(u0, min(u1, u2))
                umax = max(u0, max(u1, u2))
                vmin = min(v0, min(v1, v2))
                vmax = max(v0, max(v1, v2))
                jj_lo = int(np.ceil(umin - 0.5))
                jj_hi = int(np.floor(umax - 0.5))
                ii_lo = int(np.ceil(vmin - 0.5))
                ii_hi = int(np.floor(vmax - 0.5))
                if jj_lo < 0:
                    jj_lo = 0
                if ii_lo < 0:
                    ii_lo = 0
                if jj_hi > out_w - 1:
                    jj_hi = out_w - 1
                if ii_hi > out_h - 1:
                    ii_hi = out_h - 1
                if jj_lo > jj_hi or ii_lo > ii_hi:
                    continue

                s0 = s[i0, j0]; s1 = s[i1, j1]; s2 = s[i2, j2]
                x0 = wx[j0]; x1 = wx[j1]; x2 = wx[j2]
                y0 = wy[i0]; y1 = wy[i1]; y2 = wy[i2]

                for ii in range(ii_lo, ii_hi + 1):
                    vc = ii + 0.5
                    for jj in range(jj_lo, jj_hi + 1):
                        uc = jj + 0.5
                        w0 = ((u1 - uc) * (v2 - vc) - (v1 - vc) * (u2 - uc)) * sgn
                        if w0 < 0.0:
                            continue
                        w1 = ((u2 - uc) * (v0 - vc) - (v2 - vc) * (u0 - uc)) * sgn
                        if w1 < 0.0:
                            continue
                        w2 = ((u0 - uc) * (v1 - vc) - (v0 - vc) * (u1 - uc)) * sgn
                        if w2 < 0.0:
                            continue
                        b0 = w0 / a2
                        b1 = w1 / a2
                        b2 = w2 / a2
                        depth = b0 * s0 + b1 * s1 + b2 * s2
                        if depth > zbuf[ii, jj]:
                            zbuf[ii, jj] = depth
                            xbuf[ii, jj] = b0 * x0 + b1 * x1 + b2 * x2
                            ybuf[ii, jj] = b0 * y0 + b1 * y1 + b2 * y2
    return zbuf, xbuf, ybuf
