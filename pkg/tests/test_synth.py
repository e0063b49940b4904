import numpy as np
import pytest

from scenewatch.detect import read_exchange
from scenewatch.synth import (PRESETS, ObjectSpec, Occluder, SceneSpec, frame_noise, preset,
                              render_frame, render_scene, spec_from_ini, spec_to_ini, write_scene)


def test_empty_scene_is_uniform():
    spec = SceneSpec(width=20, height=10, n_frames=5, background_level=77, noise_sigma=0)
    frames, gt = render_scene(spec)
    assert all((f.pixels == 77).all() for f in frames)
    assert gt.activity_intervals == []


def test_moving_block_matches_analytic_box():
    obj = ObjectSpec("thing", 200, (10, 10), ((0, 15.0, 20.0), (20, 35.0, 20.0)), (0, 20))
    spec = SceneSpec(width=64, height=40, n_frames=21, background_level=50, noise_sigma=0,
                     objects=(obj,))
    frames, gt = render_scene(spec)
    for t in range(21):
        box = (10 + t, 15, 10, 10)
        assert gt.frames[t][0].box == box
        px = frames[t].pixels
        x, y, w, h = box
        assert (px[y:y + h, x:x + w] == 200).all()
        assert (px == 200).sum() == 100


def test_render_is_deterministic():
    spec = preset("single_walker")
    a, _ = render_frame(spec, 77)
    b, _ = render_frame(spec, 77)
    assert a == b


def test_frames_render_in_any_order():
    spec = preset("three_objects")
    forward = [render_frame(spec, t)[0] for t in (3, 4, 5)]
    backward = [render_frame(spec, t)[0] for t in (5, 4, 3)][::-1]
    assert forward == backward


def test_noise_statistics():
    z = frame_noise(123, 7, 200_000)
    assert abs(z.std() - 1.0) < 0.05 and abs(z.mean()) < 0.02
    spec = SceneSpec(width=400, height=300, n_frames=1, background_level=128, noise_sigma=4.0)
    f, _ = render_frame(spec, 0)
    assert abs(f.pixels.astype(float).std() - 4.0) < 0.05 * 4.0


def test_preset_quiet():
    s = preset("quiet")
    assert s.n_frames == 300 and s.objects == ()


def test_preset_illumination_ramp():
    s = preset("illumination_ramp")
    gains = [s.gain(t) for t in range(s.n_frames)]
    assert s.objects == () and max(gains) == pytest.approx(1.3)
    assert gains[0] == 1.0 and gains[-1] == pytest.approx(1.0)


def test_unknown_preset_lists_names():
    with pytest.raises(ValueError) as exc:
        preset("nope")
    for name in PRESETS:
        assert name in str(exc.value)


def test_occlusion_fraction_by_rasterization():
    spec = preset("occlusion_crossing")
    _, gt = render_scene(spec)
    full = 0
    run = longest = 0
    for t, objs in enumerate(gt.frames):
        for o in objs:
            # brute-force pixel count of the overlap with active occluders
            cover = 0
            x, y, w, h = o.box
            for yy in range(y, y + h):
                for xx in range(x, x + w):
                    if any(oc.active(t) and oc.box[0] <= xx < oc.box[0] + oc.box[2]
                           and oc.box[1] <= yy < oc.box[1] + oc.box[3] for oc in spec.occluders):
                        cover += 1
            assert o.occluded_fraction == pytest.approx(cover / (w * h))
        occluded = any(o.occluded_fraction == 1.0 for o in objs)
        full += occluded
        run = run + 1 if occluded else 0
        longest = max(longest, run)
    assert full > 0
    assert 1 <= longest <= 10


def test_gt_visible_frames_inside_exactly_one_interval():
    for name in PRESETS:
        spec = preset(name)
        _, gt = render_scene(spec)
        iv = gt.activity_intervals
        assert iv == sorted(iv)
        assert all(b1 < a2 for (_, b1), (a2, _) in zip(iv, iv[1:]))
        for t, objs in enumerate(gt.frames):
            inside = sum(a <= t <= b for a, b in iv)
            assert inside == (1 if objs else 0)


def test_occluder_painted_over_objects():
    obj = ObjectSpec("o", 200, (10, 10), ((0, 10.0, 10.0), (1, 10.0, 10.0)), (0, 1))
    spec = SceneSpec(width=30, height=30, n_frames=1, background_level=0, noise_sigma=0,
                     objects=(obj,), occluders=(Occluder((5, 5, 5, 5), 99),))
    f, gt = render_frame(spec, 0)
    assert (f.pixels[5:10, 5:10] == 99).all()
    assert gt[0].occluded_fraction == pytest.approx(0.25)


def test_spec_ini_roundtrip():
    for name in PRESETS:
        s = preset(name)
        assert spec_from_ini(spec_to_ini(s)) == s


def test_write_scene_outputs(tmp_path):
    spec = SceneSpec(width=40, height=30, n_frames=12, noise_sigma=0, objects=(
        ObjectSpec("person", 200, (6, 8), ((0, 10.0, 10.0), (11, 30.0, 10.0)), (2, 9)),))
    gt = write_scene(spec, tmp_path)
    assert len(list((tmp_path / "frames").glob("*.pgm"))) == 12
    rows = read_exchange(tmp_path / "gt.txt")
    assert len(rows) == 8 and {r.track_id for r in rows} == {0}
    assert (tmp_path / "activity.txt").read_text() == "2,9\n"
    assert gt.activity_intervals == [(2, 9)]


def test_object_spec_validation():
    with pytest.raises(ValueError):
        ObjectSpec("o", 10, (1, 5), ((0, 0, 0),), (0, 0))
    with pytest.raises(ValueError):
        ObjectSpec("o", 10, (4, 4), ((3, 0, 0), (3, 1, 1)), (0, 3))
    with pytest.raises(ValueError):
        SceneSpec(illumination=((0, 0.0),))
