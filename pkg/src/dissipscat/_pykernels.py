"""Pure numpy versions of the compiled kernels (same signatures)."""
import numpy as np


def radon_planes(vol, origin, h, normals, e1, e2, s, radius, nthreads=1):
    vol = np.asarray(vol, dtype=float)
    nf, n0, n1, n2 = vol.shape
    flat = vol.reshape(nf, -1)
    m = int(np.ceil(radius / h))
    grid = np.arange(-m, m + 1) * h
    u, v = np.meshgrid(grid, grid, indexing="ij")
    u, v = u.ravel(), v.ravel()
    rr = u**2 + v**2
    dims = np.array([n0, n1, n2])
    out = np.zeros((nf, len(normals), len(s)))
    for o in range(len(normals)):
        for k, sk in enumerate(s):
            keep = rr <= radius**2 - sk**2
            if not keep.any():
                continue
            pts = (sk * normals[o] + u[keep, None] * e1[o] + v[keep, None] * e2[o])
            q = (pts - origin) / h
            i = np.floor(q).astype(np.int64)
            ok = np.all((i >= 0) & (i < dims - 1), axis=1)
            i, w = i[ok], q[ok] - i[ok]
            acc = np.zeros(nf)
            for c0 in (0, 1):
                for c1 in (0, 1):
                    for c2 in (0, 1):
                        wt = (np.where(c0, w[:, 0], 1 - w[:, 0])
                              * np.where(c1, w[:, 1], 1 - w[:, 1])
                              * np.where(c2, w[:, 2], 1 - w[:, 2]))
                        idx = ((i[:, 0] + c0) * n1 + i[:, 1] + c1) * n2 + i[:, 2] + c2
                        acc += flat[:, idx] @ wt
            out[:, o, k] = acc * h * h
    return out
