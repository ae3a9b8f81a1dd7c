"""Training-pair construction: synthetic scenes, renders, label stitching and dataset files."""
from .dataset import build_sequence, drive, load_sequence, make_dataset, scene_seeds, split_of
from .render import homography_ipm, occlusion_mask, render_bev_truth, render_layers, render_scene
from .scene import BoxObject, Illumination, SceneRandomization, SceneSpec, layout, random_scene
from .stitch import DEFAULT_TRUST_DEPTH, EmptySequence, SequenceFrame, StitchResult, stitch_labels

__all__ = [
    "build_sequence", "drive", "load_sequence", "make_dataset", "scene_seeds", "split_of",
    "homography_ipm", "occlusion_mask", "render_bev_truth", "render_layers", "render_scene",
    "BoxObject", "Illumination", "SceneRandomization", "SceneSpec", "layout", "random_scene",
    "DEFAULT_TRUST_DEPTH", "EmptySequence", "SequenceFrame", "StitchResult", "stitch_labels",
]
