"""Motion-triggered video analysis: background modelling, optical flow,
clip segmentation, blob detection, multi-object tracking, activity labels
and a searchable event index."""

from .activity import ActivityMonitor, ActivityParams, RuleClassifier, TrackWindow
from .background import GmmModel, GmmParams, frame_diff
from .config import PipelineConfig
from .detect import Detection, detect_multiscale
from .evaluate import bench, det_metrics, match_frame, track_metrics
from .flow import FlowField, LkParams, lk_flow
from .frame_io import Frame, decode_pgm, open_input, open_y4m, write_pgm
from .motionseg import SegmenterParams, segment_scores
from .pipeline import Pipeline, process
from .store import EventRecord, QueryFilter, append_event, query, read_clip, write_clip
from .synth import SceneSpec, preset, render_scene
from .track import Tracker, TrackerParams, hungarian

__version__ = "0.1.0"

__all__ = [
    "ActivityMonitor", "ActivityParams", "RuleClassifier", "TrackWindow",
    "GmmModel", "GmmParams", "frame_diff", "PipelineConfig", "Detection",
    "detect_multiscale", "bench", "det_metrics", "match_frame", "track_metrics",
    "FlowField", "LkParams", "lk_flow", "Frame", "decode_pgm", "open_input",
    "open_y4m", "write_pgm", "SegmenterParams", "segment_scores", "Pipeline",
    "process", "EventRecord", "QueryFilter", "append_event", "query", "read_clip",
    "write_clip", "SceneSpec", "preset", "render_scene", "Tracker", "TrackerParams",
    "hungarian",
]
