"""Checkpoint loading, held-out metrics against the clean BEV truth, and timed inference."""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from ..geometry import BevSpec, CameraRig
from ..neuralcore import load_checkpoint, no_grad
from ..stgan import Generator, GeneratorConfig, to_signed, to_unit
from .data import ScenePair, load_split

PSNR_CAP = 99.0


def masked_l1(pred: np.ndarray, truth: np.ndarray, mask: np.ndarray | None = None) -> float:
    """Mean absolute difference over the masked pixels and all channels (NaN for an empty mask)."""
    d = np.abs(np.asarray(pred, dtype=np.float64) - np.asarray(truth, dtype=np.float64))
    if mask is not None:
        d = d[mask]
    return float(d.mean()) if d.size else math.nan


def psnr(pred: np.ndarray, truth: np.ndarray, mask: np.ndarray | None = None) -> float:
    """Peak signal-to-noise ratio for a unit peak, capped so identical images give ``PSNR_CAP``."""
    d = np.asarray(pred, dtype=np.float64) - np.asarray(truth, dtype=np.float64)
    if mask is not None:
        d = d[mask]
    if not d.size:
        return math.nan
    mse = float(np.mean(d * d))
    return PSNR_CAP if mse == 0 else min(PSNR_CAP, 10 * math.log10(1.0 / mse))


def generator_state(arrays: dict) -> dict:
    return {k[2:]: v for k, v in arrays.items() if k.startswith("G.")}


def load_generator(checkpoint) -> tuple[Generator, dict]:
    """Rebuild the generator recorded in a training checkpoint."""
    arrays, meta = load_checkpoint(checkpoint)
    try:
        cfg = GeneratorConfig.from_dict(meta["generator"])
        rig, spec = CameraRig.from_dict(meta["rig"]), BevSpec.from_dict(meta["bev"])
    except KeyError as exc:
        raise ValueError(f"{checkpoint}: checkpoint meta lacks {exc}") from None
    G = Generator(cfg, rig, spec)
    G.load_state_dict(generator_state(arrays))
    return G, meta


def predict(G: Generator, frontal: np.ndarray) -> np.ndarray:
    """Boosted BEV (H, W, 3) in [0, 1] for one frontal image."""
    cfg = G.cfg
    if frontal.shape != (cfg.in_height, cfg.in_width, 3):
        raise ValueError(f"input is {frontal.shape}, the checkpoint expects "
                         f"({cfg.in_height}, {cfg.in_width}, 3)")
    with no_grad():
        return to_unit(G(to_signed(frontal)))[0].astype(np.float64)


@dataclass
class SceneMetrics:
    scene: int
    n_objects: int
    l1: float
    psnr: float
    l1_ipm: float
    psnr_ipm: float
    l1_occluded: float  # NaN when nothing is occluded
    l1_occluded_ipm: float
    l1_visible_ipm: float  # IPM on the ground it can actually see


def scene_metrics(pair: ScenePair, pred: np.ndarray) -> SceneMetrics:
    cov = pair.coverage
    occ = pair.occlusion & cov
    visible = cov & ~pair.occlusion & (pair.ipm.sum(axis=-1) > 0)
    return SceneMetrics(
        scene=pair.scene, n_objects=pair.n_objects,
        l1=masked_l1(pred, pair.truth, cov), psnr=psnr(pred, pair.truth, cov),
        l1_ipm=masked_l1(pair.ipm, pair.truth, cov), psnr_ipm=psnr(pair.ipm, pair.truth, cov),
        l1_occluded=masked_l1(pred, pair.truth, occ),
        l1_occluded_ipm=masked_l1(pair.ipm, pair.truth, occ),
        l1_visible_ipm=masked_l1(pair.ipm, pair.truth, visible),
    )


def _nanmean(values) -> float:
    v = np.array([x for x in values if not math.isnan(x)], dtype=np.float64)
    return float(v.mean()) if v.size else math.nan


def aggregate(per_scene: list[SceneMetrics]) -> dict:
    occluded = [m for m in per_scene if not math.isnan(m.l1_occluded)]
    wins = sum(m.l1_occluded < m.l1_occluded_ipm for m in occluded)
    return {
        "n_scenes": len(per_scene),
        "l1": _nanmean(m.l1 for m in per_scene),
        "psnr": _nanmean(m.psnr for m in per_scene),
        "l1_ipm": _nanmean(m.l1_ipm for m in per_scene),
        "psnr_ipm": _nanmean(m.psnr_ipm for m in per_scene),
        "n_occluded": len(occluded),
        "occluded_wins": wins,
        "occluded_win_rate": wins / len(occluded) if occluded else math.nan,
    }


def evaluate_generator(G: Generator, pairs: list[ScenePair]) -> dict:
    per_scene = [scene_metrics(p, predict(G, p.frontal)) for p in pairs]
    return {"per_scene": [asdict(m) for m in per_scene], **aggregate(per_scene)}


def evaluate(checkpoint, manifest, split: str = "test", limit: int = 0) -> dict:
    """L1 and PSNR against the clean truth over each scene's coverage mask, plus the IPM baseline."""
    G, _ = load_generator(checkpoint)
    return evaluate_generator(G, load_split(manifest, split, limit))


def infer(checkpoint, frontal: np.ndarray, out_path: str | Path | None = None) -> tuple[np.ndarray, float]:
    """One forward pass; returns the BEV image and the wall-clock latency of the pass in seconds."""
    from ..datasetforge.io import save_png

    G, _ = load_generator(checkpoint)
    t0 = time.perf_counter()
    bev = predict(G, np.asarray(frontal, dtype=np.float64))
    latency = time.perf_counter() - t0
    if out_path is not None:
        save_png(out_path, bev)
    return bev, latency
