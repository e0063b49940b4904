import pytest

from scenewatch.config import ConfigError, PipelineConfig


def test_defaults():
    c = PipelineConfig()
    assert c.background.k == 3 and c.background.alpha == 0.005
    assert c.flow.window_radius == 3 and c.flow.stride == 1
    assert c.segmenter.fusion == "union" and c.segmenter.n_off == 30
    assert c.detect.levels == 3 and c.track.max_age == 30
    assert c.activity.window == 30 and c.input.frame_rate == 30.0


def test_parse_sections_and_comments():
    c = PipelineConfig.from_ini("""
# comment line
[flow]
stride = 2   # inline comment
[track]
lambda_iou = 0.5
[output]
save_masks = yes
""")
    assert c.flow.stride == 2 and c.track.lambda_iou == 0.5 and c.output.save_masks is True


def test_roundtrip():
    c = PipelineConfig.from_ini("[segmenter]\nt_on = 0.01\n[flow]\nstride = 2\n")
    assert PipelineConfig.from_ini(c.to_ini()) == c


@pytest.mark.parametrize("text,needle", [
    ("[nope]\nx = 1\n", "unknown section"),
    ("[flow]\nwindow = 3\n", "unknown key"),
    ("[flow]\nstride = two\n", "cannot parse"),
    ("[background]\nk = 9\n", "background"),
    ("[segmenter]\nt_on = 0.001\nt_off = 0.002\n", "segmenter"),
    ("[segmenter]\nfusion = xor\n", "fusion"),
    ("not an ini", "section"),
])
def test_rejections(text, needle):
    with pytest.raises(ConfigError) as exc:
        PipelineConfig.from_ini(text)
    assert needle in str(exc.value).lower()


def test_min_area_scales_with_resolution():
    s = PipelineConfig().segmenter
    assert s.scaled_min_area(320, 240) == 50
    assert s.scaled_min_area(640, 480) == 200
    assert s.scaled_min_area(32, 24) == 1
