import os
import subprocess
import sys

import numpy as np
import pytest

from dissipscat import _pykernels, kernels
from dissipscat.translation_rep import _plane_frames, sphere_quadrature

ck = pytest.importorskip("dissipscat._ckernels")


def setup(n=24, nf=3, seed=0):
    rng = np.random.default_rng(seed)
    h = 0.25
    vol = rng.normal(size=(nf, n, n, n))
    origin = np.full(3, -0.5 * n * h)
    normals = np.ascontiguousarray(sphere_quadrature(4).nodes)
    e1, e2 = _plane_frames(normals)
    s = np.linspace(-1.5, 1.5, 13)
    return vol, origin, h, normals, e1, e2, s, 1.8


def test_backends_agree():
    args = setup()
    a = _pykernels.radon_planes(*args)
    b = ck.radon_planes(*args, 1)
    assert a.shape == b.shape == (3, len(args[3]), 13)
    assert np.abs(a - b).max() < 1e-12 * np.abs(a).max()


def test_thread_count_does_not_change_result():
    args = setup(seed=1)
    one = ck.radon_planes(*args, 1)
    many = ck.radon_planes(*args, 4)
    assert np.array_equal(one, many)


def test_constant_volume_gives_disc_area():
    vol, origin, h, normals, e1, e2, s, radius = setup()
    ones = np.ones_like(vol[:1])
    for fn in (_pykernels.radon_planes, ck.radon_planes):
        out = fn(ones, origin, h, normals, e1, e2, s, radius)
        area = np.pi * (radius**2 - s**2)
        assert np.abs(out[0] - area).max() < 0.05 * area.max()


def test_selector_and_fallback_env():
    assert kernels.BACKEND == "compiled"
    code = "from dissipscat import kernels; print(kernels.BACKEND)"
    env = dict(os.environ, DISSIPSCAT_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                         text=True, check=True)
    assert out.stdout.strip() == "python"


def test_thread_env(monkeypatch):
    monkeypatch.setenv("DISSIPSCAT_THREADS", "3")
    assert kernels.thread_count() == 3
    monkeypatch.delenv("DISSIPSCAT_THREADS")
    assert kernels.thread_count() >= 1
