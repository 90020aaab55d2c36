import os
import subprocess
import sys

import numpy as np
import pytest

from cvdiversity import kernels

py = kernels.python_backend
cy = kernels.compiled_backend
needs_compiled = pytest.mark.skipif(cy is None, reason="compiled extension not built")


def test_uniforms_range_and_partition():
    u = py.uniforms(3, 1, 0, 100_000)
    assert u.min() > 0 and u.max() < 1
    assert abs(u.mean() - 0.5) < 0.005
    assert np.array_equal(u[500:700], py.uniforms(3, 1, 500, 200))


def test_stream_key_validation():
    with pytest.raises(ValueError):
        kernels.stream_key(-1, 0)
    with pytest.raises(ValueError):
        kernels.stream_key(0, -1)
    assert kernels.stream_key(2**64 - 1, 5) != kernels.stream_key(2**64 - 1, 6)


@needs_compiled
@pytest.mark.parametrize("seed,stream,start", [(0, 0, 0), (7, 3, 10**9), (2**64 - 1, 11, 2**40)])
def test_uniforms_bit_identical(seed, stream, start):
    assert np.array_equal(py.uniforms(seed, stream, start, 5000), cy.uniforms(seed, stream, start, 5000))


@needs_compiled
@pytest.mark.parametrize("mode", [kernels.PASSIVE, kernels.POST_AMPLIFIED, kernels.PRE_AMPLIFIED])
@pytest.mark.parametrize("arms", [1, 2, 5])
def test_fidelity_backends_agree(mode, arms):
    rng = np.random.default_rng(arms * 10 + mode)
    T = rng.uniform(1e-6, 1, (2000, arms))
    w, s = rng.uniform(-1, 1, arms), rng.uniform(-1, 1, arms)
    g = rng.uniform(1, 10, arms)
    args = (w, s, g, mode, 0.37, 1.3, 0.8, -1.1)
    assert np.allclose(py.diversity_fidelity(T, *args), cy.diversity_fidelity(T, *args), rtol=1e-13, atol=1e-15)


@needs_compiled
@pytest.mark.parametrize("nu", [1, 2])
@pytest.mark.parametrize("paper_units", [False, True])
def test_key_rate_backends_agree(nu, paper_units):
    t = np.linspace(0, 1, 4001)
    for n in (0.0, 0.3, 0.8):
        kp, ep = py.key_rates(t, 12.0, n, 0.9, nu, paper_units)
        kc, ec = cy.key_rates(t, 12.0, n, 0.9, nu, paper_units)
        assert np.array_equal(np.isnan(kp), np.isnan(kc))
        ok = ~np.isnan(kp)
        assert np.allclose(kp[ok], kc[ok], rtol=1e-12, atol=1e-12)
        assert ep == pytest.approx(ec, abs=1e-12) or (np.isinf(ep) and np.isinf(ec))


def test_unknown_mode_rejected():
    with pytest.raises(ValueError):
        py.diversity_fidelity(np.ones((1, 1)), [1.0], [1.0], [1.0], 7, 0.0, 1.0, 1.0, 1.0)
    if cy is not None:
        with pytest.raises(ValueError):
            cy.diversity_fidelity(np.ones((1, 1)), [1.0], [1.0], [1.0], 7, 0.0, 1.0, 1.0, 1.0)


def _backend_in_subprocess(env_value):
    env = dict(os.environ)
    env["CVDIVERSITY_PURE_PYTHON"] = env_value
    out = subprocess.run(
        [sys.executable, "-c", "from cvdiversity import kernels; print(kernels.BACKEND_NAME)"],
        env=env, capture_output=True, text=True, check=True,
    )
    return out.stdout.strip()


def test_pure_python_switch():
    assert _backend_in_subprocess("1") == "python"
    assert _backend_in_subprocess("0") == ("compiled" if cy is not None else "python")
