"""Training loop, evaluation metrics and checkpoint lifecycle."""
from .config import TrainConfig
from .data import ScenePair, geometry_of, load_pair, load_records, load_split
from .evaluate import (PSNR_CAP, SceneMetrics, aggregate, evaluate, evaluate_generator, infer, load_generator,
                       masked_l1, predict, psnr, scene_metrics)
from .trainer import (METRIC_COLUMNS, TrainingDiverged, TrainResult, checkpoint_arrays, mean_l1, read_metrics,
                      restore, train)

__all__ = [
    "TrainConfig", "ScenePair", "geometry_of", "load_pair", "load_records", "load_split",
    "PSNR_CAP", "SceneMetrics", "aggregate", "evaluate", "evaluate_generator", "infer", "load_generator",
    "masked_l1", "predict", "psnr", "scene_metrics",
    "METRIC_COLUMNS", "TrainingDiverged", "TrainResult", "checkpoint_arrays", "mean_l1", "read_metrics", "restore",
    "train",
]
