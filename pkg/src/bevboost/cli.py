"""Command-line entry point: ``bevboost <subcommand> [flags]``.

Exit codes: 0 on success, 1 on a usage error, 2 on a runtime error.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .config import coerce, read_config, section
from .geometry import BevSpec, CameraRig, derive_ground_homography, normalize_homography
from .neuralcore import MAGIC
from .presets import desk_rig, desk_spec


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}\n{self.format_usage().strip()}")


def _rig_spec(args) -> tuple[CameraRig, BevSpec]:
    rig = CameraRig.from_file(args.rig) if args.rig else desk_rig()
    spec = BevSpec.from_file(args.bev) if args.bev else desk_spec()
    return rig, spec


def _config_value(value: str):
    if "," in value:
        return tuple(coerce(v) for v in value.split(","))
    return coerce(value)


def _finite(x):
    return None if isinstance(x, float) and math.isnan(x) else x


# subcommands

def cmd_derive_h(args) -> int:
    rig, spec = _rig_spec(args)
    h = normalize_homography(derive_ground_homography(rig, spec))
    print(" ".join(repr(float(v)) for v in h.ravel()))
    return 0


def cmd_warp(args) -> int:
    from .datasetforge.io import load_png, save_png
    from .warp import warp_image

    rig, spec = _rig_spec(args)
    img = load_png(args.input)
    if img.shape[:2] != (rig.height, rig.width):
        raise ValueError(f"{args.input} is {img.shape[1]}x{img.shape[0]}, the rig expects {rig.width}x{rig.height}")
    save_png(args.out, warp_image(img, derive_ground_homography(rig, spec), spec.height, spec.width))
    return 0


def cmd_gen_synth(args) -> int:
    from .datasetforge import SceneRandomization, make_dataset
    from .datasetforge.stitch import DEFAULT_TRUST_DEPTH

    rig, spec = _rig_spec(args)
    synth = {}
    if args.config:
        synth = {k: _config_value(v) for k, v in section(read_config(args.config), "synth").items()}
    n_scenes = args.n_scenes if args.n_scenes is not None else int(synth.pop("n_scenes", 200))
    synth.pop("n_scenes", None)
    trust = float(synth.pop("trust_depth", DEFAULT_TRUST_DEPTH))
    records = make_dataset(n_scenes, args.out, rig, spec, SceneRandomization.from_dict(synth),
                           seed=args.seed, workers=args.workers, trust_depth=trust)
    print(f"wrote {len(records)} scenes to {Path(args.out) / 'manifest.jsonl'}")
    return 0


def cmd_stitch(args) -> int:
    from .datasetforge import load_sequence, stitch_labels
    from .datasetforge.io import read_manifest, save_png

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    records = read_manifest(args.manifest)
    for rec in records:
        rig, spec = CameraRig.from_dict(rec["rig"]), BevSpec.from_dict(rec["bev"])
        trust = args.trust_depth if args.trust_depth is not None else rec.get("trust_depth", 6.0)
        res = stitch_labels(load_sequence(args.manifest, rec), rig, spec, trust)
        name = f"scene_{rec['scene']:04d}"
        save_png(out / f"{name}_label.png", res.label)
        save_png(out / f"{name}_coverage.png", res.coverage)
    print(f"stitched {len(records)} scenes into {out}")
    return 0


def cmd_train(args) -> int:
    from .harness import TrainConfig, train

    if not args.config and not args.manifest:
        args.parser.error("give --config or --manifest")
    overrides = dict(manifest=args.manifest, out_dir=args.out, seed=args.seed, resume=args.resume)
    if args.config:
        cfg = TrainConfig.from_file(args.config, **overrides)
    else:
        cfg = TrainConfig(**{k: v for k, v in overrides.items() if v is not None})
    res = train(cfg)
    print(f"checkpoint {res.checkpoint}; metrics {res.metrics}; "
          f"l1_eval {res.l1_start:.4f} -> {res.l1_end:.4f} after {res.iterations} iterations")
    return 0


def cmd_eval(args) -> int:
    from .harness import evaluate

    metrics = evaluate(args.checkpoint, args.manifest, args.split)
    summary = {k: _finite(v) for k, v in metrics.items() if k != "per_scene"}
    print(json.dumps(summary, sort_keys=True))
    if args.out:
        per_scene = [{k: _finite(v) for k, v in m.items()} for m in metrics["per_scene"]]
        Path(args.out).write_text(json.dumps({**summary, "per_scene": per_scene}, sort_keys=True, indent=1) + "\n")
    return 0


def cmd_infer(args) -> int:
    from .datasetforge.io import load_png
    from .harness import infer

    _, latency = infer(args.checkpoint, load_png(args.input), args.out)
    print(f"latency {1000 * latency:.1f} ms")
    return 0


def cmd_gradcheck(args) -> int:
    from .neuralcore.gradcheck import check_chain, run_suite

    results = run_suite(args.seed, args.n_seeds) + [check_chain(s) for s in range(args.seed, args.seed + args.n_seeds)]
    failed = [r for r in results if not r.passed]
    worst = {}
    for r in results:
        key = (r.op, np.dtype(r.dtype).name)
        worst[key] = max(worst.get(key, 0.0), r.rel_err)
    for (op, dtype), err in sorted(worst.items()):
        print(f"{op:24s} {dtype:8s} max rel err {err:.2e}")
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return 0 if not failed else 2


def build_parser() -> Parser:
    p = Parser(prog="bevboost", description="Boosted inverse perspective mapping toolkit.")
    p.add_argument("--version", action="version", version=MAGIC.decode(),
                   help="print the checkpoint format magic this build writes")
    sub = p.add_subparsers(dest="command", metavar="<command>", parser_class=Parser)

    def geometry(sp):
        sp.add_argument("--rig", help="camera rig config (default: desk rig)")
        sp.add_argument("--bev", help="BEV raster config (default: desk raster)")

    sp = sub.add_parser("derive-h", help="print the ground homography, 9 numbers row-major")
    geometry(sp)
    sp.set_defaults(func=cmd_derive_h)

    sp = sub.add_parser("warp", help="homography IPM of a frontal PNG")
    geometry(sp)
    sp.add_argument("--input", required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_warp)

    sp = sub.add_parser("gen-synth", help="render a synthetic dataset")
    geometry(sp)
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--n-scenes", type=int)
    sp.add_argument("--config", help="config file with a [synth] section")
    sp.add_argument("--workers", type=int, default=1)
    sp.set_defaults(func=cmd_gen_synth)

    sp = sub.add_parser("stitch", help="re-stitch the labels of every scene in a manifest")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--trust-depth", type=float)
    sp.set_defaults(func=cmd_stitch)

    sp = sub.add_parser("train", help="train the generator and discriminators")
    sp.add_argument("--config", help="config file with [train], [stgan] and [loss] sections")
    sp.add_argument("--manifest")
    sp.add_argument("--out")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--resume", help="checkpoint written at an epoch boundary to continue from")
    sp.set_defaults(func=cmd_train, parser=sp)

    sp = sub.add_parser("eval", help="held-out metrics of a checkpoint")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--split", default="test", choices=("train", "test", "all"))
    sp.add_argument("--out", help="write per-scene metrics as JSON")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("infer", help="boosted BEV of one frontal PNG")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--input", required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_infer)

    sp = sub.add_parser("gradcheck", help="finite-difference gradient checks of every op")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--n-seeds", type=int, default=1)
    sp.set_defaults(func=cmd_gradcheck)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(f"bevboost: error: a subcommand is required\n{parser.format_usage().strip()}")
        return args.func(args)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help and --version
        return int(exc.code or 0)
    except Exception as exc:
        print(f"bevboost: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
