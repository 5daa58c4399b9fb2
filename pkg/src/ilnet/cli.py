"""``ilnet`` command-line interface.

Settings come from built-in defaults, then a run's saved ``run.cfg`` (next to
``--checkpoint``), then ``--config FILE``, then ``--override key=value``.
Config files hold one ``key = value`` per line; ``#`` starts a comment.

Exit codes: 0 success, 1 usage error, 2 runtime or data error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .dataio import (
    MASK_THRESHOLD,
    DataError,
    Sample,
    SynthConfig,
    load_manifest,
    read_gray,
    save_mask,
    synth_dataset,
    to_uint8,
    write_pgm,
)
from .metrics import evaluate, evaluate_masks, roc_csv, roc_sweep, roc_thresholds
from .model import ConfigError, ModelConfig, build_model, parse_triples
from .tensor import CheckpointError, Tensor, check_module, count_flops, count_params, load_checkpoint, no_grad
from .training import TrainConfig, TrainingError, predict, total_loss, train

log = logging.getLogger("ilnet")

RUN_CONFIG_NAME = "run.cfg"
EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    # model
    name: str = "S"  # preset: S, M or L
    stage_channels: str = ""  # 11 triples; empty means the preset's
    n: int = 2
    b: int = 2
    t: float = 1.0
    num_ipof_stages: int = 5
    use_rb: bool = True
    input_size: str = "64x64"
    # training
    epochs: int = 150
    batch_size: int = 4
    lr: float = 3e-3  # desk-scale default; the library TrainConfig keeps 1e-3
    weight_decay: float = 1e-4
    optimizer: str = "adam"
    decay_factor: float = 0.5
    decay_interval: int = 100
    seed: int = 0  # model initialisation and shuffle order
    # synthetic data, used when no --manifest is given
    synth_count: int = 16
    synth_seed: int = 0
    synth_min_targets: int = 1
    synth_max_targets: int = 3
    # evaluation
    threshold: float = 0.5
    # bench
    bench_runs: int = 100
    # gradcheck
    gradcheck_size: int = 32
    gradcheck_batch: int = 1
    gradcheck_coords: int = 10
    gradcheck_rtol: float = 1e-2
    gradcheck_eps: float = 1e-6
    # parameter noise; zero biases put ReLUs after a 1x1 batch norm exactly on their kink
    gradcheck_jitter: float = 0.05

    def size(self) -> Tuple[int, int]:
        return _parse_size(self.input_size)

    def model_config(self) -> ModelConfig:
        kw = dict(n=self.n, b=self.b, t=self.t, num_ipof_stages=self.num_ipof_stages, use_rb=self.use_rb,
                  input_size=self.size(), seed=self.seed)
        cfg = ModelConfig.preset(self.name, **kw)
        if self.stage_channels:
            cfg = cfg.with_(name="custom", stage_channels=parse_triples(self.stage_channels))
        return cfg

    def train_config(self) -> TrainConfig:
        return TrainConfig(epochs=self.epochs, batch_size=self.batch_size, lr=self.lr,
                           weight_decay=self.weight_decay, optimizer=self.optimizer,
                           decay_factor=self.decay_factor, decay_interval=self.decay_interval, seed=self.seed)

    def to_text(self) -> str:
        return "".join(f"{f.name} = {_format_value(getattr(self, f.name))}\n" for f in fields(self))


def _parse_size(text: str) -> Tuple[int, int]:
    parts = str(text).lower().replace("x", " ").replace(",", " ").split()
    if len(parts) == 1:
        parts = parts * 2
    if len(parts) != 2:
        raise ValueError(f"bad size {text!r}; use H or HxW")
    return int(parts[0]), int(parts[1])


def _format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key: str, raw: str):
    kind = _FIELD_TYPES[key]
    raw = raw.strip()
    if kind == "bool":
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{key}: expected a boolean, got {raw!r}")
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    return raw


def apply_settings(cfg: RunConfig, pairs: Sequence[Tuple[str, str]], source: str) -> RunConfig:
    updates = {}
    for key, raw in pairs:
        if key not in _FIELD_TYPES:
            raise UsageError(f"{source}: unknown config key {key!r}")
        try:
            updates[key] = _coerce(key, raw)
        except ValueError as exc:
            raise UsageError(f"{source}: bad value for {key}: {exc}") from None
    return dataclasses.replace(cfg, **updates)


def parse_config_text(text: str, source: str) -> List[Tuple[str, str]]:
    pairs = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{source}:{lineno}: expected key = value")
        key, value = line.split("=", 1)
        pairs.append((key.strip(), value.strip()))
    return pairs


def parse_override(text: str) -> Tuple[str, str]:
    if "=" not in text:
        raise UsageError(f"--override expects key=value, got {text!r}")
    key, value = text.split("=", 1)
    return key.strip(), value.strip()


def resolve_config(args) -> RunConfig:
    cfg = RunConfig()
    ckpt = getattr(args, "checkpoint", None)
    if ckpt:
        saved = Path(ckpt).parent / RUN_CONFIG_NAME
        if saved.exists():
            cfg = apply_settings(cfg, parse_config_text(saved.read_text(), str(saved)), str(saved))
    if args.config:
        path = Path(args.config)
        try:
            text = path.read_text()
        except OSError as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from None
        cfg = apply_settings(cfg, parse_config_text(text, str(path)), str(path))
    cfg = apply_settings(cfg, [parse_override(o) for o in args.override], "--override")
    try:
        cfg.model_config()
        cfg.train_config()
    except (ConfigError, ValueError) as exc:
        raise UsageError(f"invalid configuration: {exc}") from None
    return cfg


# ---------------------------------------------------------------- helpers


def _emit(text: str, out_dir: Optional[str], name: str) -> None:
    """Print ``text`` and, with ``--out``, also write it to ``out/name``."""
    sys.stdout.write(text)
    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(text)


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def load_dataset(args, cfg: RunConfig) -> List[Sample]:
    if args.manifest:
        manifest = load_manifest(args.manifest)
        if manifest.size != cfg.size():
            log.info("manifest size %s overrides input_size %s", manifest.size, cfg.size())
        return manifest.load_samples()
    samples, _ = synth_dataset(cfg.synth_count, cfg.size(), seed=cfg.synth_seed, config=_synth_config(cfg))
    return samples


def _synth_config(cfg: RunConfig) -> SynthConfig:
    return SynthConfig(targets_per_image=(cfg.synth_min_targets, cfg.synth_max_targets))


def load_trained(args, cfg: RunConfig):
    if not args.checkpoint:
        raise UsageError("this command needs --checkpoint")
    model = build_model(cfg.model_config())
    state = load_checkpoint(args.checkpoint)
    try:
        model.load_state_dict(state)
    except KeyError as exc:
        raise CheckpointError(f"{args.checkpoint} does not match the configured model: {exc}") from None
    return model


def _model_probs(args, cfg, samples):
    return predict(load_trained(args, cfg), [s.image for s in samples])


def _pred_dir_masks(pred_dir: str, samples: Sequence[Sample]) -> List[np.ndarray]:
    root = Path(pred_dir)
    masks = []
    for s in samples:
        for ext in (".pgm", ".png"):
            p = root / f"{s.id}{ext}"
            if p.exists():
                m = read_gray(p) > MASK_THRESHOLD
                break
        else:
            raise DataError(f"no prediction for {s.id} in {root}")
        if m.shape != s.mask.shape:
            raise DataError(f"prediction {p} is {m.shape}, ground truth is {s.mask.shape}")
        masks.append(m)
    return masks


# ---------------------------------------------------------------- commands


def cmd_synth(args, cfg: RunConfig) -> int:
    if not args.out:
        raise UsageError("synth needs --out")
    samples, manifest = synth_dataset(cfg.synth_count, cfg.size(), seed=cfg.synth_seed,
                                      config=_synth_config(cfg), out_dir=args.out)
    print(f"wrote {len(samples)} samples to {manifest.path}")
    return EXIT_OK


def cmd_train(args, cfg: RunConfig) -> int:
    if not args.out:
        raise UsageError("train needs --out")
    samples = load_dataset(args, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / RUN_CONFIG_NAME).write_text(cfg.to_text())
    model = build_model(cfg.model_config())
    result = train(model, samples, cfg.train_config(), out_dir=out, resume_from=args.checkpoint,
                   on_epoch=lambda r: print(f"epoch {r.epoch} lr {r.lr:.6f} loss {r.total:.6f}", flush=True))
    print(f"checkpoint {result.checkpoint}")
    print(f"loss log {result.loss_log}")
    return EXIT_OK


def cmd_eval(args, cfg: RunConfig) -> int:
    samples = load_dataset(args, cfg)
    gts = [s.mask for s in samples]
    if args.pred_dir:
        report = evaluate_masks(_pred_dir_masks(args.pred_dir, samples), gts, cfg.threshold)
    else:
        report = evaluate(_model_probs(args, cfg, samples), gts, cfg.threshold)
    _emit(report.to_json(), args.out, "metrics.json")
    return EXIT_OK


def cmd_roc(args, cfg: RunConfig) -> int:
    samples = load_dataset(args, cfg)
    points = roc_sweep(_model_probs(args, cfg, samples), [s.mask for s in samples], roc_thresholds(args.thresholds))
    _emit(roc_csv(points), args.out, "roc.csv")
    return EXIT_OK


def cmd_infer(args, cfg: RunConfig) -> int:
    if not args.out:
        raise UsageError("infer needs --out")
    samples = load_dataset(args, cfg)
    probs, sides = predict(load_trained(args, cfg), [s.image for s in samples], with_sides=True)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for s, p, side in zip(samples, probs, sides):
        write_pgm(out / f"{s.id}_prob.pgm", to_uint8(p))
        save_mask(out / f"{s.id}.pgm", p >= cfg.threshold)
        for i, sm in enumerate(side):
            write_pgm(out / f"{s.id}_side{i}.pgm", to_uint8(sm))
    print(f"wrote {len(samples)} predictions to {out}")
    return EXIT_OK


def bench_report(cfg: RunConfig, runs: Optional[int] = None) -> Dict:
    mcfg = cfg.model_config()
    model = build_model(mcfg)
    model.eval()
    h, w = mcfg.input_size
    runs = cfg.bench_runs if runs is None else runs
    if runs < 1:
        raise UsageError("bench_runs must be >= 1")
    x = Tensor(np.zeros((1, 3, h, w), dtype=np.float32))
    with no_grad():
        model(x)  # warm-up
        start = time.perf_counter()
        for _ in range(runs):
            model(x)
        elapsed = time.perf_counter() - start
    flops = count_flops(model, (1, 3, h, w))
    return {
        "config": mcfg.name,
        "input_size": [h, w],
        "params": count_params(model),
        "flops": flops,
        "gflops": round(flops / 1e9, 6),
        "runs": runs,
        "images_per_second": round(runs / elapsed, 6),
    }


def cmd_bench(args, cfg: RunConfig) -> int:
    _emit(_dumps(bench_report(cfg)), args.out, "bench.json")
    return EXIT_OK


def gradcheck_report(cfg: RunConfig, corrupt=None):
    size = cfg.gradcheck_size
    if size > 32 or size < 32 and size % 16:
        raise UsageError("gradcheck_size must be 32 or smaller and a multiple of 16")
    mcfg = cfg.model_config()
    model = build_model(mcfg)
    if cfg.gradcheck_batch < 1:
        raise UsageError("gradcheck_batch must be >= 1")
    if not cfg.gradcheck_eps > 0 or cfg.gradcheck_jitter < 0:
        raise UsageError("gradcheck_eps must be positive and gradcheck_jitter non-negative")
    rng = np.random.default_rng(cfg.seed)
    for _, p in model.named_parameters():
        p.data += (cfg.gradcheck_jitter * rng.standard_normal(p.shape)).astype(p.dtype)
    x = rng.random((cfg.gradcheck_batch, 3, size, size))
    gt = np.zeros((cfg.gradcheck_batch, 1, size, size))
    gt[..., size // 2 - 2 : size // 2 + 2, size // 2 - 2 : size // 2 + 2] = 1.0

    def loss_fn(m):
        logits, side = m(Tensor(x))
        return total_loss(side.sup_maps, logits, Tensor(gt)).total

    return check_module(model, loss_fn, coords_per_group=cfg.gradcheck_coords, eps=cfg.gradcheck_eps,
                        rtol=cfg.gradcheck_rtol,
                        seed=cfg.seed, corrupt=corrupt)


def cmd_gradcheck(args, cfg: RunConfig) -> int:
    report = gradcheck_report(cfg)
    _emit(_dumps(report.to_dict()), args.out, "gradcheck.json")
    return EXIT_OK if report.passed else EXIT_RUNTIME


COMMANDS = {
    "synth": (cmd_synth, "write a synthetic dataset and manifest"),
    "train": (cmd_train, "train a model; writes checkpoint, loss CSV and run.cfg"),
    "eval": (cmd_eval, "IoU / nIoU / Pd / Fa report as JSON"),
    "infer": (cmd_infer, "write probability maps, binary masks and side-output maps as PGM"),
    "roc": (cmd_roc, "threshold sweep as threshold,Pd,Fa CSV"),
    "bench": (cmd_bench, "parameters, FLOPs and batch-1 throughput as JSON"),
    "gradcheck": (cmd_gradcheck, "finite-difference check of network gradients"),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        sys.exit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ilnet", description="ILNet small-target segmentation")
    parser.add_argument("--version", action="version", version=f"ilnet {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="key = value settings file")
        p.add_argument("--override", action="append", default=[], metavar="K=V", help="repeatable")
        p.add_argument("--out", help="output directory")
        p.add_argument("--checkpoint", help="checkpoint to load (train: resume from)")
        p.add_argument("--manifest", help="dataset manifest; default is a synthetic set")
        p.add_argument("--thresholds", type=int, default=11, help="number of ROC thresholds")
        p.add_argument("--pred-dir", help="eval: score masks from this directory instead of a model")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _limit_threads():
    raw = os.environ.get("ILNET_THREADS")
    if not raw:
        return None
    try:
        n = int(raw)
        if n < 1:
            raise ValueError
    except ValueError:
        raise UsageError(f"ILNET_THREADS must be a positive integer, got {raw!r}") from None
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    func = COMMANDS[args.command][0]
    try:
        limiter = _limit_threads()
        cfg = resolve_config(args)
        try:
            return func(args, cfg)
        finally:
            if limiter is not None:
                limiter.restore_original_limits()
    except UsageError as exc:
        print(f"ilnet: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, CheckpointError, TrainingError, ConfigError, OSError, ValueError) as exc:
        print(f"ilnet: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
