"""Background model versus frame differencing under a lighting change.

The ``illumination_ramp`` preset has no objects; scene gain rises to 1.3
and falls back over 300 frames.  Differencing each frame against a fixed
reference flags most of the image at the peak.  The mixture model adapts
its means as the light drifts and stays quiet.

    python3 demos/03_illumination.py
"""

from scenewatch.background import GmmModel, frame_diff
from scenewatch.synth import preset, render_scene


def main():
    spec = preset("illumination_ramp")
    frames, _ = render_scene(spec)
    model = GmmModel(spec.width, spec.height)
    n = spec.width * spec.height
    print(f"{'frames':<10}{'gain':>6}{'gmm':>9}{'diff prev':>11}{'diff f0':>9}")
    block = {"gmm": 0, "prev": 0, "first": 0}
    for t, f in enumerate(frames):
        block["gmm"] += int(model.apply(f).sum())
        if t:
            block["prev"] += int(frame_diff(frames[t - 1], f, 15).sum())
        block["first"] += int(frame_diff(frames[0], f, 15).sum())
        if t % 30 == 29:
            k = 30 * n
            print(f"{t - 29:>3}-{t:<6}{spec.gain(t):>6.2f}{block['gmm'] / k:>9.4f}"
                  f"{block['prev'] / k:>11.4f}{block['first'] / k:>9.4f}")
            block = dict.fromkeys(block, 0)


if __name__ == "__main__":
    main()
