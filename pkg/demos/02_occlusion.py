"""How much does a pillar hurt the tracker?

The ``occlusion_crossing`` preset walks a person behind an occluder for a
few frames.  We track the scene twice, with and without the occluder, and
compare F1 and identity switches.  During the occlusion the track coasts
on its Kalman prediction and is picked up again on the far side.

    python3 demos/02_occlusion.py
"""

import tempfile
from pathlib import Path

from scenewatch.config import PipelineConfig
from scenewatch.detect import Detection
from scenewatch.evaluate import track_metrics
from scenewatch.pipeline import process
from scenewatch.synth import preset, render_scene


def run(spec, out):
    frames, gt = render_scene(spec)
    process(frames, spec.width, spec.height, out, PipelineConfig())
    rows = [Detection(t, box, 1.0, lab, track_id=oid) for t, oid, box, lab in gt.rows()]
    hidden = sum(1 for objs in gt.frames for o in objs if o.occluded_fraction >= 1)
    return track_metrics(rows, out / "tracks.txt"), hidden


def main():
    out = Path(tempfile.mkdtemp(prefix="occlusion_"))
    spec = preset("occlusion_crossing")
    with_occ, hidden = run(spec, out / "with")
    without, _ = run(spec.without_occluders(), out / "without")
    print(f"fully hidden object-frames: {hidden}")
    print(f"{'':<18}{'precision':>10}{'recall':>8}{'f1':>7}{'id sw':>7}")
    for name, m in (("no occluder", without), ("with occluder", with_occ)):
        print(f"{name:<18}{m.precision:>10.3f}{m.recall:>8.3f}{m.f1:>7.3f}{m.id_switches:>7}")
    print(f"F1 gap {without.f1 - with_occ.f1:.3f}")


if __name__ == "__main__":
    main()
