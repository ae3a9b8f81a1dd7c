"""Adversarial training loop: one discriminator step then one generator step per batch."""
from __future__ import annotations

import csv
import math
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from ..neuralcore import MAGIC, Adam, Tensor, load_checkpoint, save_checkpoint
from ..stgan import STGAN
from .config import TrainConfig
from .data import ScenePair, geometry_of, load_records, load_split
from .evaluate import masked_l1, predict

METRIC_COLUMNS = ["iter", "loss_g", "loss_d", "loss_fm", "loss_vgg", "l1_eval", "loss_gan_g"]


class TrainingDiverged(RuntimeError):
    def __init__(self, iteration: int, what: str):
        super().__init__(f"non-finite {what} at iteration {iteration}")
        self.iteration = iteration


@dataclass
class TrainResult:
    checkpoint: Path
    metrics: Path
    iterations: int
    l1_start: float
    l1_end: float
    model: STGAN | None = None


def _nchw(img: np.ndarray) -> np.ndarray:
    return (np.asarray(img, dtype=np.float32).transpose(2, 0, 1) * 2 - 1)[None]


def mean_l1(G, pairs: list[ScenePair]) -> float:
    """Held-out L1 against the clean truth, averaged over scenes (coverage mask)."""
    if not pairs:
        return math.nan
    return float(np.mean([masked_l1(predict(G, p.frontal), p.truth, p.coverage) for p in pairs]))


def checkpoint_arrays(model: STGAN, opt_g: Adam, opt_d: Adam) -> dict[str, np.ndarray]:
    arrays = {f"G.{k}": v for k, v in model.G.state_dict().items()}
    arrays.update({f"D.{k}": v for k, v in model.D.state_dict().items()})
    arrays.update(opt_g.state_arrays("opt_g"))
    arrays.update(opt_d.state_arrays("opt_d"))
    return arrays


def write_checkpoint(path: Path, model: STGAN, opt_g: Adam, opt_d: Adam, cfg: TrainConfig,
                     rig, spec, iteration: int, epoch: int) -> None:
    meta = {
        "format": MAGIC.decode(), "iteration": iteration, "epoch": epoch, "seed": cfg.seed,
        "generator": asdict(cfg.generator), "losses": asdict(cfg.losses),
        "rig": asdict(rig), "bev": asdict(spec),
        "train": {k: v for k, v in asdict(cfg).items()
                  if k not in ("generator", "losses", "manifest", "out_dir", "resume")},
    }
    save_checkpoint(path, checkpoint_arrays(model, opt_g, opt_d), meta)


def restore(path, model: STGAN, opt_g: Adam, opt_d: Adam, per_epoch: int) -> tuple[int, int]:
    """Load a checkpoint into the model and optimizers; returns (iteration, epoch)."""
    arrays, meta = load_checkpoint(path)
    if meta.get("iteration") != meta.get("epoch", -1) * per_epoch:
        raise ValueError(f"{path}: iteration {meta.get('iteration')} is not an epoch boundary; "
                         "resume is epoch-granular")
    model.G.load_state_dict({k[2:]: v for k, v in arrays.items() if k.startswith("G.")})
    model.D.load_state_dict({k[2:]: v for k, v in arrays.items() if k.startswith("D.")})
    opt_g.load_state_arrays(arrays, "opt_g")
    opt_d.load_state_arrays(arrays, "opt_d")
    return meta["iteration"], meta["epoch"]


def train(cfg: TrainConfig, log=print) -> TrainResult:
    records = load_records(cfg.manifest)
    rig, spec = geometry_of(records)
    train_pairs = load_split(cfg.manifest, "train")
    eval_pairs = load_split(cfg.manifest, "test", cfg.eval_scenes)
    if not train_pairs and cfg.epochs and cfg.max_iterations != 0:
        raise ValueError(f"{cfg.manifest}: no training scenes")
    for line in cfg.deviations():
        log(f"deviation: {line}")

    frontal = np.concatenate([_nchw(p.frontal) for p in train_pairs]) if train_pairs else None
    ipm = np.concatenate([_nchw(p.ipm) for p in train_pairs]) if train_pairs else None
    label = np.concatenate([_nchw(p.label) for p in train_pairs]) if train_pairs else None

    model = STGAN(cfg.generator, rig, spec, cfg.losses, seed=cfg.seed)
    opt_g = Adam(model.G.parameters(), cfg.lr, cfg.beta1, cfg.beta2)
    opt_d = Adam(model.D.parameters(), cfg.lr, cfg.beta1, cfg.beta2)
    rng = np.random.default_rng(cfg.seed)

    n = len(train_pairs)
    total = cfg.epochs * math.ceil(n / cfg.batch_size)
    if cfg.max_iterations:
        total = min(total, cfg.max_iterations)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    metrics_path = out / "metrics.csv"
    (out / "train.cfg").write_text(cfg.to_config())

    it = epoch = 0
    if cfg.resume:
        it, epoch = restore(cfg.resume, model, opt_g, opt_d, math.ceil(n / cfg.batch_size))
        for _ in range(epoch):  # replay the shuffles of the finished epochs
            rng.permutation(n)
    l1_start = l1_end = mean_l1(model.G, eval_pairs)
    t0 = time.perf_counter()
    kept = []
    if cfg.resume and metrics_path.exists():  # drop rows past the resumed iteration
        with open(metrics_path, newline="") as fh:
            kept = [row for row in csv.reader(fh)][1:]
        kept = [row for row in kept if int(row[0]) <= it]
    with open(metrics_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRIC_COLUMNS)
        writer.writerows(kept)
        if not kept:
            writer.writerow([it, "", "", "", "", repr(l1_start), ""])
        log(f"iter {it}: l1_eval {l1_start:.4f}")
        while it < total:
            order = rng.permutation(n)
            for start in range(0, n, cfg.batch_size):
                if it >= total:
                    break
                idx = np.sort(order[start:start + cfg.batch_size]) if cfg.batch_size > 1 else order[start:start + 1]
                x, c, y = Tensor(frontal[idx]), Tensor(ipm[idx]), Tensor(label[idx])
                it += 1

                opt_d.zero_grad()
                loss_d = model.discriminator_loss(x, c, y)
                if not np.isfinite(loss_d.data):
                    raise TrainingDiverged(it, "discriminator loss")
                loss_d.backward()
                opt_d.step()

                opt_g.zero_grad()
                parts = model.generator_loss(x, c, y)
                if not np.isfinite(parts.total.data):
                    raise TrainingDiverged(it, "generator loss")
                parts.total.backward()
                opt_g.step()

                gan_g = sum(float(t.data) for t in parts.gan)
                fm = sum(float(t.data) for t in parts.fm)
                l1 = ""
                if it == total or (cfg.eval_every and it % cfg.eval_every == 0):
                    l1_end = mean_l1(model.G, eval_pairs)
                    l1 = repr(l1_end)
                    log(f"iter {it}: loss_g {float(parts.total.data):.4f} loss_d {float(loss_d.data):.4f} "
                        f"l1_eval {l1_end:.4f} ({time.perf_counter() - t0:.0f} s)")
                writer.writerow([it, repr(float(parts.total.data)), repr(float(loss_d.data)), repr(fm),
                                 repr(float(parts.vgg.data)), l1, repr(gan_g)])
                if cfg.checkpoint_every and it % cfg.checkpoint_every == 0:
                    write_checkpoint(out / f"ckpt_{it:06d}.bevf", model, opt_g, opt_d, cfg, rig, spec, it, epoch)
            epoch += 1

    final = out / "final.bevf"
    write_checkpoint(final, model, opt_g, opt_d, cfg, rig, spec, it, epoch)
    return TrainResult(final, metrics_path, it, l1_start, l1_end, model)


def read_metrics(path) -> list[dict]:
    """Metrics rows with empty cells as None and numbers parsed."""
    rows = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            rows.append({k: (None if v == "" else (int(v) if k == "iter" else float(v))) for k, v in row.items()})
    return rows
