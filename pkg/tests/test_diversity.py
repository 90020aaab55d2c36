import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cvdiversity.diversity import (
    CoherentInput,
    Placement,
    Realization,
    SchemeConfig,
    average_fidelity,
    closed_form_two_mode,
    combining_weights,
    compare_fidelity,
    crosstalk_ratio_grid,
    fidelity_ratio_grid,
    kept_mode_moments,
    resolve_gains,
    run_closed_form,
    run_primitive,
)
from cvdiversity.errors import DomainError
from cvdiversity.fading import ExpectationPlan, FadingModel, from_mean
from cvdiversity.gaussian import fidelity, symplectic_spectrum

PLACEMENTS = list(Placement)
ACTIVE = [Placement.POST_AMPLIFICATION, Placement.PRE_AMPLIFICATION]

transmittivity = st.floats(1e-4, 1.0)
occupation = st.floats(0.0, 2.0)
amp = st.floats(-3.0, 3.0)


def realization(placement, t1, t2, n, g1, g2):
    gains = (g1, g2) if placement is not Placement.NONE else (1.0, 1.0)
    return Realization((t1, t2), n, gains)


def test_resolve_gains_examples():
    cfg = SchemeConfig(Placement.PRE_AMPLIFICATION)
    assert resolve_gains(cfg, (1.0, 1.0)) == (1.0, 1.0)
    assert resolve_gains(cfg, (0.25, 0.5)) == (4.0, 2.0)
    assert resolve_gains(SchemeConfig(Placement.POSTPROCESSING), (0.25, 0.25)) == (2.0, 2.0)
    assert resolve_gains(SchemeConfig(Placement.NONE), (0.25, 0.5)) == (1.0, 1.0)
    fixed = SchemeConfig(Placement.POST_AMPLIFICATION, gains=(3.0, 1.5))
    assert resolve_gains(fixed, (0.2, 0.9)) == (3.0, 1.5)
    assert fixed.gain_policy == "fixed"
    with pytest.raises(DomainError):
        resolve_gains(cfg, (0.0, 0.5))
    with pytest.raises(DomainError):
        resolve_gains(cfg, (0.5,))


def test_config_validation():
    for kwargs in (
        {"combine_eta": 1.2},
        {"crosstalk_eta": -0.1},
        {"diversity_order": 0},
        {"gains": (2.0,)},
        {"gains": (0.5, 2.0)},
        {"placement": "sideways"},
    ):
        with pytest.raises((DomainError, ValueError)):
            SchemeConfig(**kwargs)
    with pytest.raises(DomainError):
        Realization((0.5, 1.2), 0.0, (1.0, 1.0))
    with pytest.raises(DomainError):
        Realization((0.5, 0.2), -1.0, (1.0, 1.0))


@pytest.mark.parametrize("placement", PLACEMENTS)
def test_lossless_two_arm_is_identity(placement):
    cfg = SchemeConfig(placement)
    inp = CoherentInput(0.8, -1.7)
    r = Realization((1.0, 1.0), 0.0, resolve_gains(cfg, (1.0, 1.0)))
    for out in (run_closed_form(cfg, r, inp), run_primitive(cfg, r, inp)):
        assert out.allclose(inp.state(), atol=1e-15)
        assert fidelity(out, inp.state()) == pytest.approx(1.0, abs=1e-15)


def test_single_arm_none_is_identity():
    cfg = SchemeConfig(Placement.NONE, diversity_order=1)
    inp = CoherentInput(2.0, 0.5)
    assert run_primitive(cfg, Realization((1.0,), 0.7, (1.0,)), inp).allclose(inp.state(), atol=0)


@given(transmittivity, amp, amp)
def test_postprocessing_balanced_restores_mean(T, x, p):
    cfg = SchemeConfig(Placement.POSTPROCESSING)
    r = Realization((T, T), 0.0, resolve_gains(cfg, (T, T)))
    out = run_closed_form(cfg, r, CoherentInput(x, p))
    assert np.allclose(out.mean, [x, p], atol=1e-12)
    assert np.allclose(out.cov, 0.5 * np.eye(2), atol=1e-15)


def test_postprocessing_unbalanced_block():
    cfg = SchemeConfig(Placement.POSTPROCESSING)
    r = Realization((0.5, 0.3), 0.9, (1.0, 1.0))
    # B1 = 0.95, B2 = 1.13, V3 = (B1 + B2)/2
    out = run_closed_form(cfg, r, CoherentInput())
    assert np.allclose(out.cov, 1.04 * np.eye(2), atol=1e-14)
    both = closed_form_two_mode(cfg, r, CoherentInput())
    assert both.cov[0, 2] == pytest.approx(0.5 * (0.95 - 1.13), abs=1e-14)


@pytest.mark.parametrize("placement", PLACEMENTS)
@given(t=transmittivity, n=occupation, g=st.floats(1.0, 10.0))
def test_balanced_arms_decouple(placement, t, n, g):
    cfg = SchemeConfig(placement)
    both = closed_form_two_mode(cfg, realization(placement, t, t, n, g, g), CoherentInput())
    assert both.cov[0, 2] == 0.0 and both.cov[1, 3] == 0.0


@pytest.mark.parametrize("placement", PLACEMENTS)
@pytest.mark.parametrize("crosstalk", [False, True])
@given(
    t1=transmittivity, t2=transmittivity, n=occupation, eta=st.floats(0.0, 1.0),
    g1=st.floats(1.0, 10.0), g2=st.floats(1.0, 10.0), ct=st.floats(0.0, 1.0), x=amp, p=amp,
)
def test_primitive_matches_closed_form(placement, crosstalk, t1, t2, n, eta, g1, g2, ct, x, p):
    cfg = SchemeConfig(placement, combine_eta=eta, crosstalk_eta=ct if crosstalk else None)
    r = realization(placement, t1, t2, n, g1, g2)
    inp = CoherentInput(x, p)
    assert run_primitive(cfg, r, inp).allclose(run_closed_form(cfg, r, inp), atol=1e-10)


@pytest.mark.parametrize("placement", PLACEMENTS)
@given(t1=transmittivity, t2=transmittivity, n=occupation, eta=st.floats(0.0, 1.0), g1=st.floats(1, 5), g2=st.floats(1, 5))
def test_unit_crosstalk_is_no_crosstalk(placement, t1, t2, n, eta, g1, g2):
    r = realization(placement, t1, t2, n, g1, g2)
    a = run_primitive(SchemeConfig(placement, eta, crosstalk_eta=1.0), r, CoherentInput())
    b = run_primitive(SchemeConfig(placement, eta), r, CoherentInput())
    assert a.allclose(b, atol=0)


@pytest.mark.parametrize("placement", ACTIVE + [Placement.NONE])
@given(t1=transmittivity, t2=transmittivity, n=occupation, eta=st.floats(0.0, 1.0), g1=st.floats(1, 5), g2=st.floats(1, 5))
def test_arm_swap_symmetry(placement, t1, t2, n, eta, g1, g2):
    a = run_closed_form(SchemeConfig(placement, eta), realization(placement, t1, t2, n, g1, g2), CoherentInput())
    b = run_closed_form(SchemeConfig(placement, 1 - eta), realization(placement, t2, t1, n, g2, g1), CoherentInput())
    # sqrt(1 - (1 - eta)) loses ~1e-11 near eta = 0
    assert a.allclose(b, atol=1e-9)


@given(t1=transmittivity, t2=transmittivity, n=occupation, eta=st.floats(0.0, 1.0), r=st.floats(1, 5))
def test_arm_swap_symmetry_postprocessing(t1, t2, n, eta, r):
    # the rescale acts on the kept output, so it swaps only when both means agree
    cfg = SchemeConfig(Placement.POSTPROCESSING, eta)
    a = run_closed_form(cfg, Realization((t1, t2), n, (r, r)), CoherentInput())
    b = run_closed_form(SchemeConfig(Placement.POSTPROCESSING, 1 - eta), Realization((t2, t1), n, (r, r)), CoherentInput())
    assert a.allclose(b, atol=1e-9)


@pytest.mark.parametrize("order", [1, 2, 3, 4, 5, 8])
def test_tree_is_constructive(order):
    u, s, root = combining_weights(SchemeConfig(diversity_order=order))
    assert np.dot(u, s) == pytest.approx(1.0, abs=1e-14)
    assert np.allclose(s * s, 1.0 / order)
    assert root == order - 1


@pytest.mark.parametrize("placement", PLACEMENTS)
@pytest.mark.parametrize("order", [3, 4, 5])
def test_general_order_matches_batched_moments(placement, order):
    rng = np.random.default_rng(order)
    for crosstalk in (None, 0.4):
        cfg = SchemeConfig(placement, crosstalk_eta=crosstalk, diversity_order=order)
        for _ in range(10):
            T = rng.uniform(0.01, 1.0, order)
            gains = resolve_gains(cfg, rng.uniform(0.05, 0.95, order))
            trace = []
            out = run_primitive(cfg, Realization(T, 0.4, gains), CoherentInput(1.0, -0.5), trace)
            V, m = kept_mode_moments(cfg, T[None, :], gains, 0.4)
            assert np.allclose(out.cov, V[0] * np.eye(2), atol=1e-12)
            assert np.allclose(out.mean, m[0] * np.array([1.0, -0.5]), atol=1e-12)
            assert all(symplectic_spectrum(s.cov)[-1] >= 0.5 - 1e-9 for s in trace)


def test_general_order_lossless_restores_input():
    for placement in PLACEMENTS:
        cfg = SchemeConfig(placement, diversity_order=5)
        r = Realization((1.0,) * 5, 0.3, resolve_gains(cfg, (1.0,) * 5))
        assert run_primitive(cfg, r, CoherentInput(1.0, 1.0)).allclose(CoherentInput(1.0, 1.0).state(), atol=1e-14)


def test_realization_size_mismatch():
    with pytest.raises(DomainError):
        run_primitive(SchemeConfig(diversity_order=3), Realization((0.5, 0.5), 0.0, (1, 1)), CoherentInput())
    with pytest.raises(DomainError):
        run_closed_form(SchemeConfig(diversity_order=3), Realization((0.5,) * 3, 0.0, (1,) * 3), CoherentInput())


def test_deterministic_lossless_average_fidelity():
    near_one = FadingModel(0.0, 1e-10)
    for placement in PLACEMENTS:
        res = average_fidelity(SchemeConfig(placement), near_one, 0.0)
        assert res.value == pytest.approx(1.0, abs=1e-8)
        assert compare_fidelity(SchemeConfig(placement), near_one, 0.0).log10_ratio == pytest.approx(0.0, abs=1e-8)


@pytest.mark.parametrize("T,n", [(0.3, 0.0), (0.6, 0.9), (0.1, 0.4)])
def test_single_channel_postprocessing_closed_form(T, n):
    x, p = 1.0, 1.0
    model = FadingModel(math.log(T), 1e-10)
    res = average_fidelity(SchemeConfig(Placement.POSTPROCESSING).baseline(), model, n, CoherentInput(x, p))
    # mean restored by 1/sqrt(T); variance T/2 + (1-T)(n+1/2)
    B = T / 2 + (1 - T) * (n + 0.5)
    assert res.value == pytest.approx(1.0 / (B + 0.5), abs=1e-9)


@pytest.mark.parametrize("placement", PLACEMENTS)
def test_average_fidelity_non_increasing_in_noise(placement):
    model = from_mean(0.4, 0.5)
    vals = [average_fidelity(SchemeConfig(placement), model, n).value for n in np.linspace(0, 1, 5)]
    assert np.all(np.diff(vals) <= 1e-15)


def test_average_fidelity_matches_primitive_monte_carlo():
    model = from_mean(0.5, 0.5)
    cfg = SchemeConfig(Placement.PRE_AMPLIFICATION, crosstalk_eta=0.8)
    plan = ExpectationPlan("mc", sample_count=400, seed=2)
    fast = average_fidelity(cfg, model, 0.3, CoherentInput(), plan).value
    from cvdiversity.fading import sample_block

    T = np.column_stack([sample_block(model, 2, 0, 400, k) for k in range(2)])
    gains = resolve_gains(cfg, (model.mean, model.mean))
    slow = np.mean([
        fidelity(run_primitive(cfg, Realization(tuple(t), 0.3, gains), CoherentInput()), CoherentInput().state())
        for t in T
    ])
    assert fast == pytest.approx(slow, abs=1e-12)


def test_grids_are_reproducible_and_parallel_safe():
    Tg, Ng = [0.1, 0.5, 0.9], [0.0, 0.5]
    a = fidelity_ratio_grid("postprocessing", Tg, Ng)
    b = fidelity_ratio_grid("postprocessing", Tg, Ng, workers=3)
    assert a.shape == (3, 2) and np.array_equal(a, b)
    plan = ExpectationPlan("mc", sample_count=5000, seed=4)
    c = crosstalk_ratio_grid("pre-amplification", Tg, [0.3, 1.0], 0.2, plan=plan)
    d = crosstalk_ratio_grid("pre-amplification", Tg, [0.3, 1.0], 0.2, plan=plan, workers=4)
    assert np.array_equal(c, d)


def test_baseline_keeps_strategy():
    cfg = SchemeConfig(Placement.POST_AMPLIFICATION, crosstalk_eta=0.5, gains=(2.0, 3.0))
    base = cfg.baseline()
    assert base.diversity_order == 1 and base.crosstalk_eta is None
    assert base.placement is cfg.placement and base.gains == (2.0,)
