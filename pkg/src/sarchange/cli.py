"""Command-line front end wiring the change-detection pipeline.

Subcommands cover the monolithic `run` plus stage-wise entry points
(`synth`, `preclassify`, `train`, `infer`, `eval`) and the patch-size
`sweep`. Stage-wise invocations reproduce `run` outputs bitwise because
every stage reads back the documented file formats and all randomness is
funneled through one root seed.

Exit codes: 0 ok; 2 input error; 3 preclassify failure; 4 training
failure; 5 write failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .evalmap import diff_overlay, map_from_raster, map_to_raster, score
from .imagery import PgmError, Raster, load_pgm, log_ratio, save_pgm
from .network import Mode, load_checkpoint, mode_from_name, save_checkpoint
from .preclassify import (
    PreclassifyError,
    draw_samples,
    hierarchical_trimap,
    trimap_from_raster,
    trimap_to_raster,
)
from .rng import Rng
from .synthgen import default_scene, generate
from .trainer import TrainConfig, TrainingError, infer_map, train

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_PRECLASSIFY = 3
EXIT_TRAIN = 4
EXIT_WRITE = 5

SAMPLE_FRACTION = 0.10


@dataclass(frozen=True)
class RunConfig:
    """Effective settings after merging defaults, config file, and flags."""

    image1: str | None = None
    image2: str | None = None
    truth: str | None = None
    out: str = "out"
    seed: int = 42
    r: int = 7
    mode: str = "both"
    epochs: int = 50
    batch: int = 64
    lr: float = 1e-3
    mask_width: int = 2
    verbosity: int = 0
    r_list: str = "5,7,9,11,13,15"


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}
_COERCE = {
    "image1": str, "image2": str, "truth": str, "out": str,
    "seed": int, "r": int, "mode": str, "epochs": int, "batch": int,
    "lr": float, "mask_width": int, "verbosity": int, "r_list": str,
}


class StageFailure(Exception):
    """Carries the failing stage name and the process exit code."""

    def __init__(self, stage: str, code: int, message: str):
        super().__init__(message)
        self.stage = stage
        self.code = code


def _fail(stage: str, code: int, exc: BaseException):
    raise StageFailure(stage, code, str(exc)) from exc


# --------------------------------------------------------------- config

def parse_config_file(path) -> dict:
    """Read a flat `key = value` file mirroring RunConfig fields."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        _fail("config", EXIT_INPUT, exc)
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if not sep or not key or not val:
            raise StageFailure("config", EXIT_INPUT,
                               f"{path}:{lineno}: expected `key = value`")
        if key not in _COERCE:
            known = ", ".join(sorted(_COERCE))
            raise StageFailure("config", EXIT_INPUT,
                               f"{path}:{lineno}: unknown key {key!r} (known: {known})")
        try:
            values[key] = _COERCE[key](val)
        except ValueError:
            raise StageFailure(
                "config", EXIT_INPUT,
                f"{path}:{lineno}: bad value {val!r} for {key}") from None
    return values


def effective_config(args: argparse.Namespace) -> RunConfig:
    """Merge precedence: defaults, then config file, then explicit flags."""
    cfg = RunConfig()
    if getattr(args, "config", None):
        cfg = replace(cfg, **parse_config_file(args.config))
    overrides = {}
    for name in _COERCE:
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    cfg = replace(cfg, **overrides)
    _validate_config(cfg)
    return cfg


def _validate_config(cfg: RunConfig) -> None:
    try:
        mode_from_name(cfg.mode)
    except ValueError as exc:
        _fail("config", EXIT_INPUT, exc)
    if cfg.r < 1 or cfg.r % 2 == 0:
        raise StageFailure("config", EXIT_INPUT,
                           f"patch size must be odd and positive, got {cfg.r}")
    if cfg.epochs < 0:
        raise StageFailure("config", EXIT_INPUT,
                           f"epochs must be >= 0, got {cfg.epochs}")
    if cfg.batch < 1:
        raise StageFailure("config", EXIT_INPUT,
                           f"batch size must be positive, got {cfg.batch}")
    if cfg.lr <= 0:
        raise StageFailure("config", EXIT_INPUT,
                           f"learning rate must be positive, got {cfg.lr}")
    if cfg.mask_width < 0:
        raise StageFailure("config", EXIT_INPUT,
                           f"mask width must be >= 0, got {cfg.mask_width}")
    if cfg.seed < 0:
        raise StageFailure("config", EXIT_INPUT,
                           f"seed must be >= 0, got {cfg.seed}")


def _announce(cfg: RunConfig) -> None:
    if cfg.verbosity >= 1:
        print("# effective config", file=sys.stderr)
        for f in fields(RunConfig):
            value = getattr(cfg, f.name)
            if value is not None:
                print(f"{f.name} = {value}", file=sys.stderr)


def _parse_r_list(text: str) -> list[int]:
    try:
        values = [int(tok) for tok in text.replace(",", " ").split()]
    except ValueError:
        raise StageFailure("config", EXIT_INPUT,
                           f"bad r list {text!r}; expected integers") from None
    if not values:
        raise StageFailure("config", EXIT_INPUT, "empty r list")
    return sorted(set(values))


# --------------------------------------------------------------- stages

def _read_raster(path, what: str) -> Raster:
    try:
        return load_pgm(path)
    except (OSError, PgmError, ValueError) as exc:
        _fail(f"load {what}", EXIT_INPUT, exc)


def _read_pair(cfg: RunConfig) -> tuple[Raster, Raster]:
    if not cfg.image1 or not cfg.image2:
        raise StageFailure("load images", EXIT_INPUT,
                           "image1 and image2 are required (flag or config)")
    return _read_raster(cfg.image1, "image1"), _read_raster(cfg.image2, "image2")


def _preclassify(i1: Raster, i2: Raster):
    try:
        di = log_ratio(i1, i2)
        trimap = hierarchical_trimap(di)
    except (PreclassifyError, ValueError) as exc:
        _fail("preclassify", EXIT_PRECLASSIFY, exc)
    return di, trimap


def _train(i1, i2, trimap, cfg: RunConfig):
    try:
        samples = draw_samples(trimap, i1, i2, cfg.r,
                               Rng(cfg.seed).derive("sample"), SAMPLE_FRACTION)
    except PreclassifyError as exc:
        _fail("preclassify", EXIT_PRECLASSIFY, exc)
    tc = TrainConfig(r=cfg.r, mode=mode_from_name(cfg.mode), epochs=cfg.epochs,
                     batch_size=cfg.batch, lr=cfg.lr, seed=cfg.seed,
                     mask_width=cfg.mask_width)
    try:
        params, report = train(samples, tc)
    except TrainingError as exc:
        _fail("train", EXIT_TRAIN, exc)
    if cfg.verbosity >= 1:
        print(report.text(), file=sys.stderr)
    return params, report


def _infer(i1, i2, trimap, params):
    try:
        return infer_map(i1, i2, trimap, params)
    except ValueError as exc:
        _fail("infer", EXIT_INPUT, exc)


def _write(action, what: str):
    try:
        return action()
    except OSError as exc:
        _fail(f"write {what}", EXIT_WRITE, exc)


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    _write(lambda: out.mkdir(parents=True, exist_ok=True), str(out))
    return out


def _write_text(path: Path, text: str):
    _write(lambda: path.write_text(text, encoding="utf-8"), path.name)


def _write_raster(path: Path, raster: Raster):
    _write(lambda: save_pgm(raster, path), path.name)


def _di_raster(di) -> Raster:
    return Raster(np.rint(di.values * 65535.0))


# ------------------------------------------------------------- commands

def cmd_synth(args) -> int:
    cfg = effective_config(args)
    _announce(cfg)
    print(f"root seed {cfg.seed}")
    out = _out_dir(cfg)
    i1, i2, truth = generate(default_scene(seed=cfg.seed))
    _write_raster(out / "i1.pgm", i1)
    _write_raster(out / "i2.pgm", i2)
    _write_raster(out / "truth.pgm", map_to_raster(truth))
    return EXIT_OK


def cmd_preclassify(args) -> int:
    cfg = effective_config(args)
    _announce(cfg)
    i1, i2 = _read_pair(cfg)
    di, trimap = _preclassify(i1, i2)
    out = _out_dir(cfg)
    _write_raster(out / "di.pgm", _di_raster(di))
    _write_raster(out / "trimap.pgm", trimap_to_raster(trimap))
    return EXIT_OK


def _read_trimap(path):
    raster = _read_raster(path, "trimap")
    try:
        return trimap_from_raster(raster)
    except ValueError as exc:
        _fail("load trimap", EXIT_INPUT, exc)


def cmd_train(args) -> int:
    cfg = effective_config(args)
    _announce(cfg)
    print(f"root seed {cfg.seed}")
    i1, i2 = _read_pair(cfg)
    out = _out_dir(cfg)
    trimap = _read_trimap(args.trimap or out / "trimap.pgm")
    params, report = _train(i1, i2, trimap, cfg)
    _write(lambda: save_checkpoint(params, out / "model.bin"), "model.bin")
    _write_text(out / "train.log", report.text())
    return EXIT_OK


def cmd_infer(args) -> int:
    cfg = effective_config(args)
    _announce(cfg)
    i1, i2 = _read_pair(cfg)
    out = _out_dir(cfg)
    trimap = _read_trimap(args.trimap or out / "trimap.pgm")
    try:
        params = load_checkpoint(args.model or out / "model.bin")
    except (OSError, ValueError) as exc:
        _fail("load model", EXIT_INPUT, exc)
    cmap = _infer(i1, i2, trimap, params)
    _write_raster(out / "changemap.pgm", map_to_raster(cmap))
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = effective_config(args)
    _announce(cfg)
    out = _out_dir(cfg)
    map_path = args.map or out / "changemap.pgm"
    if not cfg.truth:
        raise StageFailure("load truth", EXIT_INPUT,
                           "ground truth is required (flag or config)")
    predicted = map_from_raster(_read_raster(map_path, "change map"))
    truth = map_from_raster(_read_raster(cfg.truth, "truth"))
    try:
        metrics = score(predicted, truth)
    except ValueError as exc:
        _fail("eval", EXIT_INPUT, exc)
    overlay = diff_overlay(predicted, truth)
    _write_text(out / "metrics.txt", metrics.text())
    _write_raster(out / "overlay.pgm", overlay)
    from .report import save_map_panel
    _write(lambda: save_map_panel(out / "overlay.png", changemap=predicted,
                                  overlay=overlay.pixels), "overlay.png")
    print(metrics.text(), end="")
    return EXIT_OK


def _run_pipeline(cfg: RunConfig, out: Path, echo_summary: bool = True) -> int:
    """Shared body of `run`: the pipeline in memory, artifacts to `out`."""
    i1, i2 = _read_pair(cfg)
    truth = None
    if cfg.truth:
        truth = map_from_raster(_read_raster(cfg.truth, "truth"))
    di, trimap = _preclassify(i1, i2)
    _write_raster(out / "di.pgm", _di_raster(di))
    _write_raster(out / "trimap.pgm", trimap_to_raster(trimap))
    params, report = _train(i1, i2, trimap, cfg)
    _write(lambda: save_checkpoint(params, out / "model.bin"), "model.bin")
    _write_text(out / "train.log", report.text())
    cmap = _infer(i1, i2, trimap, params)
    _write_raster(out / "changemap.pgm", map_to_raster(cmap))

    from .report import save_loss_curve, save_map_panel
    _write(lambda: save_loss_curve(report, out / "loss.png"), "loss.png")
    overlay = None
    if truth is not None:
        try:
            metrics = score(cmap, truth)
        except ValueError as exc:
            _fail("eval", EXIT_INPUT, exc)
        overlay = diff_overlay(cmap, truth)
        _write_text(out / "metrics.txt", metrics.text())
        _write_raster(out / "overlay.pgm", overlay)
        if echo_summary:
            print(metrics.summary())
    _write(lambda: save_map_panel(
        out / "map.png", di=di, trimap=trimap, changemap=cmap,
        overlay=None if overlay is None else overlay.pixels), "map.png")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = effective_config(args)
    _announce(cfg)
    print(f"root seed {cfg.seed}")
    out = _out_dir(cfg)
    return _run_pipeline(cfg, out)


def cmd_sweep(args) -> int:
    cfg = effective_config(args)
    _announce(cfg)
    print(f"root seed {cfg.seed}")
    if not cfg.truth:
        raise StageFailure("load truth", EXIT_INPUT,
                           "sweep needs ground truth to score each run")
    r_values = _parse_r_list(cfg.r_list)
    out = _out_dir(cfg)
    rows = []
    first_failure = None
    for r in r_values:
        sub = replace(cfg, r=r, out=str(out / f"r{r}"))
        try:
            if r < 1 or r % 2 == 0:
                raise StageFailure("config", EXIT_INPUT,
                                   f"patch size must be odd and positive, got {r}")
            sub_out = _out_dir(sub)
            _run_pipeline(sub, sub_out, echo_summary=False)
        except StageFailure as failure:
            print(f"error in {failure.stage} (r={r}): {failure}", file=sys.stderr)
            if first_failure is None:
                first_failure = failure.code
            continue
        metrics_text = (sub_out / "metrics.txt").read_text(encoding="utf-8")
        values = dict(line.split() for line in metrics_text.splitlines() if line.strip())
        rows.append((r, float(values["pcc"]), float(values["kc"])))
    lines = [f"{r} {pcc:.4f} {kc:.4f}" for r, pcc, kc in rows]
    _write_text(out / "sweep.txt", "\n".join(lines) + ("\n" if lines else ""))
    for line in lines:
        print(line)
    if rows:
        from .report import save_sweep_curve
        _write(lambda: save_sweep_curve(rows, out / "sweep.png"), "sweep.png")
        return EXIT_OK
    return first_failure if first_failure is not None else EXIT_INPUT


# --------------------------------------------------------------- parser

def _add_common(sp, *, training=False):
    sp.add_argument("--config", metavar="PATH",
                    help="flat `key = value` config file")
    sp.add_argument("--out", metavar="DIR", help="output directory (default: out)")
    sp.add_argument("-v", "--verbose", action="count", dest="verbosity",
                    default=None,
                    help="print effective config and progress to stderr")
    if training:
        sp.add_argument("--seed", type=int, help="root seed (default: 42)")
        sp.add_argument("--r", type=int, help="odd patch size (default: 7)")
        sp.add_argument("--mode",
                        help="both | no-dct | no-mrc | plain-cnn (default: both)")
        sp.add_argument("--epochs", type=int, help="training epochs (default: 50)")
        sp.add_argument("--batch", type=int, help="batch size (default: 64)")
        sp.add_argument("--lr", type=float, help="learning rate (default: 0.001)")
        sp.add_argument("--mask-width", type=int, dest="mask_width",
                        help="zeroed border rows/columns in the stripe groups "
                             "(default: 2)")


def _add_pair(sp):
    sp.add_argument("image1", nargs="?", help="first acquisition (PGM)")
    sp.add_argument("image2", nargs="?", help="second acquisition (PGM)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sarchange",
        description="Unsupervised change detection for co-registered "
                    "speckled radar image pairs.")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("synth", help="write a synthetic scene pair plus truth")
    sp.add_argument("--seed", type=int, help="scene seed (default: 42)")
    _add_common(sp)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("preclassify",
                        help="write di.pgm and trimap.pgm for an image pair")
    _add_pair(sp)
    _add_common(sp)
    sp.set_defaults(func=cmd_preclassify)

    sp = sub.add_parser("train",
                        help="train on pseudo-labels; write model.bin and train.log")
    _add_pair(sp)
    sp.add_argument("--trimap", metavar="PATH",
                    help="preclassification map (default: OUT/trimap.pgm)")
    _add_common(sp, training=True)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("infer", help="classify intermediate pixels; "
                                      "write changemap.pgm")
    _add_pair(sp)
    sp.add_argument("--trimap", metavar="PATH",
                    help="preclassification map (default: OUT/trimap.pgm)")
    sp.add_argument("--model", metavar="PATH",
                    help="checkpoint (default: OUT/model.bin)")
    _add_common(sp)
    sp.set_defaults(func=cmd_infer)

    sp = sub.add_parser("eval", help="score a change map against ground truth")
    sp.add_argument("--map", metavar="PATH",
                    help="change map (default: OUT/changemap.pgm)")
    sp.add_argument("--truth", metavar="PATH", help="ground truth map")
    _add_common(sp)
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("run", help="full pipeline: preclassify, train, infer, "
                                    "and score when truth is given")
    _add_pair(sp)
    sp.add_argument("--truth", metavar="PATH", help="optional ground truth map")
    _add_common(sp, training=True)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("sweep", help="run the pipeline per patch size and "
                                      "tabulate r, PCC, KC")
    _add_pair(sp)
    sp.add_argument("--truth", metavar="PATH", help="ground truth map (required)")
    sp.add_argument("--r-list", dest="r_list", metavar="LIST",
                    help="comma-separated odd patch sizes "
                         "(default: 5,7,9,11,13,15)")
    _add_common(sp, training=True)
    sp.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except StageFailure as failure:
        print(f"error in {failure.stage}: {failure}", file=sys.stderr)
        return failure.code


if __name__ == "__main__":
    sys.exit(main())
