"""Pure-numpy kernels.  Same signatures and semantics as ``_ckernels``."""

import numpy as np

PASSIVE, POST_AMPLIFIED, PRE_AMPLIFIED = 0, 1, 2

_M64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_STREAM_MULT = 0xD1B54A32D192ED03


def _mix_int(z: int) -> int:
    z &= _M64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
    return z ^ (z >> 31)


def stream_key(seed: int, stream: int) -> int:
    """64-bit key of one random stream; shared by both backends."""
    if not 0 <= seed <= _M64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    if stream < 0:
        raise ValueError(f"stream must be >= 0, got {stream}")
    return _mix_int(_mix_int(seed + _GOLDEN) ^ (((stream + 1) * _STREAM_MULT) & _M64))


def uniforms(seed, stream, start, count):
    """Counter-based uniforms in (0, 1): value ``k`` depends only on (seed, stream, start + k)."""
    key = np.uint64(stream_key(seed, stream))
    z = key + (np.arange(start, start + count, dtype=np.uint64) + np.uint64(1)) * np.uint64(_GOLDEN)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    z = z ^ (z >> np.uint64(31))
    return ((z >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def diversity_fidelity(T, weights, split, gains, mode, n_th, rescale, x, p):
    """Fidelity of the kept output mode against the coherent input, per realization.

    ``T`` has shape (samples, arms).  Arm ``i`` carries ``split[i]`` of the
    input amplitude, is amplified by ``gains[i]`` (before or after its loss
    channel, depending on ``mode``) and enters the kept mode with weight
    ``weights[i]``; the kept mean is finally multiplied by ``rescale``.
    """
    T = np.asarray(T, dtype=np.float64)
    env = n_th + 0.5
    lossy = 0.5 * T + (1.0 - T) * env
    if mode == PASSIVE:
        B = lossy
        amp = np.sqrt(T)
    elif mode == POST_AMPLIFIED:
        B = gains * lossy + 0.5 * (gains - 1.0)
        amp = np.sqrt(gains * T)
    elif mode == PRE_AMPLIFIED:
        B = (gains - 0.5) * T + (1.0 - T) * env
        amp = np.sqrt(gains * T)
    else:
        raise ValueError(f"unknown amplification mode {mode}")
    V = B @ (weights * weights)
    m = rescale * (amp @ (weights * split))
    S = V + 0.5
    d2 = (m - 1.0) ** 2 * (x * x + p * p)
    return np.exp(-0.5 * d2 / S) / S


def _g(x):
    safe = np.where(x > 0, x, 1.0)
    return (x + 1.0) * np.log2(x + 1.0) - np.where(x > 0, x * np.log2(safe), 0.0)


def key_rates(t_eff, v_in, n_th, beta, nu, paper_units):
    """Raw key rate ``beta*I - chi`` per effective transmittance.

    Returns ``(K, min_excess)`` where ``min_excess`` is the smallest
    symplectic eigenvalue minus the vacuum value over all entries.  Entries
    outside a formula's domain come back as NaN.
    """
    T = np.asarray(t_eff, dtype=np.float64)
    if paper_units:
        W, vac = n_th + 0.5, 0.5
    else:
        W, vac = 2.0 * n_th + 1.0, 1.0
    with np.errstate(invalid="ignore", divide="ignore"):
        denom = 1.0 + (1.0 / nu) * (1.0 - T) * (2.0 * n_th - 1.0)
        info = 0.5 * nu * np.log2(1.0 + nu * T * (v_in - 1.0) / denom)

        a = (1.0 - T) * v_in + T * W
        b = W
        c2 = T * (W * W - 1.0)
        z = np.sqrt((a + b) ** 2 - 4.0 * c2)
        nu_p = 0.5 * (z + (b - a))
        nu_m = 0.5 * (z - (b - a))

        h = T * (v_in - 1.0) + (W - 1.0) * (1.0 - T) + 1.0
        g2 = T * (v_in * v_in - 1.0)
        if nu == 2:
            nu_c = v_in - g2 / (h + 1.0)
        else:
            nu_c = np.sqrt(v_in * (v_in - g2 / h))

        excess = np.minimum(np.minimum(nu_p, nu_m), nu_c) - vac
        scale = 0.5 if not paper_units else 1.0
        chi = (
            _g(np.maximum(nu_p - vac, 0.0) * scale)
            + _g(np.maximum(nu_m - vac, 0.0) * scale)
            - _g(np.maximum(nu_c - vac, 0.0) * scale)
        )
        K = beta * info - chi
    bad = (denom <= 0) | (c2 < 0) | (h <= 0) | ~np.isfinite(K) | ~np.isfinite(excess)
    K = np.where(bad, np.nan, K)
    min_excess = float(np.min(np.where(bad, np.inf, excess))) if T.size else np.inf
    return K, min_excess
