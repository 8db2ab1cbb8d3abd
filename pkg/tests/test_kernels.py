import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from implicit_extremes import _kernels_py, kernels
from implicit_extremes.rng import RngStream

compiled_only = pytest.mark.skipif(
    "compiled" not in kernels.available_backends(), reason="compiled extension not built"
)

KINDS = sorted(kernels.KIND_CODES.items())


def _mixed_points(n, d, seed=1):
    gen = RngStream(seed).generator()
    x = np.exp(gen.normal(0.0, 2.0, size=(n, d)))
    x *= np.where(gen.random((n, d)) < 0.2, -1.0, 1.0)
    x[gen.random((n, d)) < 0.05] = 0.0
    return x


def test_backend_reported():
    assert kernels.BACKEND in kernels.available_backends()
    assert "python" in kernels.available_backends()


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.block_top_m(np.zeros((1, 3)), 1, backend="gpu")


@compiled_only
@pytest.mark.parametrize("name,code", KINDS)
@pytest.mark.parametrize("d", [1, 2, 5])
def test_builtin_loss_backends_agree(name, code, d):
    x = _mixed_points(2000, d)
    w = np.linspace(0.5, 2.0, d)
    a = kernels.builtin_loss(code, x, w, 3.0, 1.5, backend="compiled")
    b = kernels.builtin_loss(code, x, w, 3.0, 1.5, backend="python")
    # power-based families may differ by an ulp between libm and numpy
    np.testing.assert_allclose(a, b, rtol=1e-13, atol=0.0)
    assert np.all(a >= 0)


@compiled_only
@pytest.mark.parametrize("m", [1, 2, 7])
def test_top_m_backends_agree_with_ties(m):
    gen = RngStream(3).generator()
    losses = gen.integers(0, 5, size=(300, 40)).astype(np.float64)
    a = kernels.block_top_m(losses, m, backend="compiled")
    b = kernels.block_top_m(losses, m, backend="python")
    np.testing.assert_array_equal(a, b)


@pytest.mark.parametrize("backend", kernels.available_backends())
def test_top_m_tie_rule(backend):
    out = kernels.block_top_m(np.array([[3.0, 1.0, 3.0, 2.0]]), 4, backend=backend)
    assert out.tolist() == [[0, 2, 3, 1]]


@pytest.mark.parametrize("backend", kernels.available_backends())
def test_harmonic_values(backend):
    x = np.array([[2.0, 2.0], [1.0, 0.0], [-1.0, 3.0], [1.0, 3.0]])
    out = kernels.builtin_loss(kernels.KIND_CODES["harmonic"], x, backend=backend)
    np.testing.assert_allclose(out, [1.0, 0.0, 0.0, 0.75], rtol=1e-15)


@given(arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 30)),
              elements=st.floats(0, 100, allow_nan=False, width=32)),
       st.integers(1, 30))
@settings(max_examples=200, deadline=None)
def test_top_m_matches_stable_sort(losses, m):
    m = min(m, losses.shape[1])
    expected = np.argsort(-losses, axis=1, kind="stable")[:, :m]
    for backend in kernels.available_backends():
        np.testing.assert_array_equal(kernels.block_top_m(losses, m, backend=backend), expected)


def test_pure_module_kind_codes_shared():
    assert kernels.KIND_CODES is _kernels_py.KIND_CODES


def test_pure_fallback_selected_by_environment():
    import os
    import subprocess
    import sys

    env = dict(os.environ, IMPLICIT_EXTREMES_PURE="1")
    out = subprocess.run(
        [sys.executable, "-c", "from implicit_extremes import kernels; print(kernels.BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "python"
