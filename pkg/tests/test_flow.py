import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import shifted_pair, textured
from oracles import gradients_loop
from scenewatch.flow import FlowField, LkParams, flow_mask, gradients, lk_flow


def test_gradients_constant():
    a = np.full((6, 7), 0.4)
    for plane in gradients(a, a):
        assert (plane == 0).all()


def test_gradients_ramp():
    a = np.tile(np.arange(10) * 0.05, (6, 1))
    ix, iy, it = gradients(a, a)
    assert np.allclose(ix[:, 1:-1], 0.05)
    assert (iy == 0).all() and (it == 0).all()


def test_gradients_match_loop(rng):
    a = rng.random((9, 11))
    b = rng.random((9, 11))
    ref = gradients_loop(a.tolist(), b.tolist())
    for got, exp in zip(gradients(a, b), ref):
        assert np.allclose(got, np.array(exp), atol=1e-15)


def test_gradients_normalize_uint8():
    a = np.zeros((3, 3), np.uint8)
    b = np.full((3, 3), 255, np.uint8)
    _, _, it = gradients(a, b)
    assert (it == 1.0).all()


def test_identical_frames_zero_flow():
    a = np.floor(textured(1, 64, 0) + 0.5).astype(np.uint8)
    f = lk_flow(a, a)
    assert f.valid[4:-4, 4:-4].all()
    assert np.abs(f.u[f.valid]).max() == 0 and np.abs(f.v[f.valid]).max() == 0


def test_shift_2_1_recovered():
    a, b = shifted_pair(3, 2, 1)
    f = lk_flow(a, b)
    s = (slice(8, -8), slice(8, -8))
    ok = f.valid[s]
    err = np.hypot(f.u[s] - 2, f.v[s] - 1)[ok]
    assert ok.mean() > 0.9
    assert (err <= 0.5).mean() >= 0.9


def test_flat_image_all_invalid():
    a = np.full((32, 32), 90, np.uint8)
    f = lk_flow(a, a)
    assert not f.valid.any()
    assert (f.u == 0).all() and (f.v == 0).all()


def test_symmetry():
    a, b = shifted_pair(4, 1, -2)
    f = lk_flow(a, b)
    g = lk_flow(b, a)
    s = (slice(8, -8), slice(8, -8))
    both = f.valid[s] & g.valid[s]
    du = np.abs(f.u[s] + g.u[s])[both]
    dv = np.abs(f.v[s] + g.v[s])[both]
    assert both.mean() > 0.9
    assert np.percentile(np.maximum(du, dv), 95) <= 0.25


def test_invalid_pixels_have_zero_flow():
    a, b = shifted_pair(5, 1, 1, size=64)
    a[:, :20] = 128
    b[:, :20] = 128
    f = lk_flow(a, b)
    assert (~f.valid).any()
    assert (f.u[~f.valid] == 0).all() and (f.v[~f.valid] == 0).all()


def test_stride_two_close_to_full():
    a, b = shifted_pair(6, 2, 0)
    f = lk_flow(a, b, LkParams(stride=2))
    s = (slice(8, -8), slice(8, -8))
    assert f.u.shape == a.shape
    assert np.median(f.u[s][f.valid[s]]) == pytest.approx(2.0, abs=0.25)


def test_frame_too_small():
    with pytest.raises(ValueError):
        lk_flow(np.zeros((5, 5), np.uint8), np.zeros((5, 5), np.uint8))
    with pytest.raises(ValueError):
        lk_flow(np.zeros((9, 9), np.uint8), np.zeros((9, 8), np.uint8))


def test_params_validation():
    with pytest.raises(ValueError):
        LkParams(window_radius=0)
    with pytest.raises(ValueError):
        LkParams(pyramid_levels=0)


def test_flow_mask_zero_and_345():
    z = np.zeros((3, 3))
    valid = np.ones((3, 3), bool)
    assert not flow_mask(FlowField(z, z, valid), 0.5).any()
    u, v = z.copy(), z.copy()
    u[1, 1], v[1, 1] = 3.0, 4.0
    m = flow_mask(FlowField(u, v, valid), 4.9)
    assert m.sum() == 1 and m[1, 1]


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (6, 6), elements=st.floats(-20, 20)),
       arrays(np.float64, (6, 6), elements=st.floats(-20, 20)),
       arrays(np.bool_, (6, 6)), st.floats(0, 10))
def test_flow_mask_never_sets_invalid(u, v, valid, thr):
    m = flow_mask(FlowField(u, v, valid), thr)
    assert not (m & ~valid).any()
    assert (m == (valid & (np.sqrt(u * u + v * v) > thr))).all()
