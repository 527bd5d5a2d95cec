"""Command line front end: ``diffseg {generate,train,eval,plot,sweep}``.

Every command takes its settings from an INI experiment config plus explicit
flags; environment variables are never consulted. Exit status is 0 on
success, 2 for configuration errors and 1 for any other failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .baselines import class_means, nearest_prototype, permuted_labels
from .config import ConfigError, ExperimentConfig
from .metrics import evaluate_split, reports_to_csv
from .model import ModelConfig
from .pipeline import evaluate, load_model, train
from .plot import barcode_svg
from .synthdata import (
    GrammarError,
    SyntheticDataset,
    generate,
    read_dataset,
    read_labels,
    read_mapping,
    write_dataset,
    write_labels,
)

log = logging.getLogger("diffseg")


def _echo_config(cfg: ExperimentConfig, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.ini").write_text(cfg.to_ini())


def build_dataset(cfg: ExperimentConfig) -> SyntheticDataset:
    d = cfg.data
    counts = {"train": d.n_train, "test": d.n_test}
    if d.n_val:
        counts["val"] = d.n_val
    return generate(
        cfg.grammar.build(),
        counts,
        (d.length_min, d.length_max),
        seed=d.seed,
        feature_dim=d.feature_dim,
        noise_std=d.noise_std,
        blend_width=d.blend_width,
    )


def model_config(cfg: ExperimentConfig, ds: SyntheticDataset) -> ModelConfig:
    m = cfg.model
    return ModelConfig(
        input_dim=ds.feature_dim,
        num_classes=ds.num_classes,
        enc_layers=m.enc_layers,
        enc_width=m.enc_width,
        enc_taps=m.enc_taps,
        dec_layers=m.dec_layers,
        dec_width=m.dec_width,
        step_embed_dim=m.step_embed_dim,
        total_steps=cfg.schedule.steps,
        init_seed=m.init_seed,
    )


def cmd_generate(cfg: ExperimentConfig, out: Path) -> None:
    ds = build_dataset(cfg)
    write_dataset(ds, out)
    _echo_config(cfg, out)
    log.info("wrote %d videos to %s", len(ds.videos), out)


def cmd_train(
    cfg: ExperimentConfig, data: Path, out: Path, resume: Path | None = None, stop_after: int | None = None
) -> Path:
    ds = read_dataset(data)
    _echo_config(cfg, out)
    val = ds.split("val") if "val" in ds.splits else []
    state = train(
        ds.split("train"),
        model_config(cfg, ds),
        cfg.schedule.build(),
        cfg.train,
        cfg.loss,
        out_dir=out,
        resume=resume,
        val_videos=val,
        eval_cfg=cfg.eval,
        stop_after_epoch=stop_after,
        header={"config": cfg.as_dict()},
    )
    log.info("trained %d epochs (%d iterations) -> %s", state.epoch, state.iteration, out)
    return out / "final.ckpt"


def cmd_eval(
    cfg: ExperimentConfig,
    checkpoint: Path | None,
    data: Path,
    out: Path,
    oracle: bool = False,
    dump_trajectory: bool = False,
    baselines: bool = False,
) -> None:
    ds = read_dataset(data)
    videos = ds.split(cfg.eval.split)
    model = None
    if not oracle:
        if checkpoint is None:
            raise ValueError("eval needs --checkpoint unless --oracle is given")
        model, _ = load_model(checkpoint)
    result = evaluate(
        model, videos, cfg.schedule.build(), cfg.eval, cfg.train.boundary_std, ds.num_classes
    )
    _echo_config(cfg, out)
    (out / "metrics.csv").write_text(reports_to_csv([(cfg.eval.split, result.report)]))
    pred_dir = out / "predictions"
    pred_dir.mkdir(exist_ok=True)
    for vid, pred in result.predictions.items():
        write_labels(pred_dir / f"{vid}.txt", pred, ds.class_names)
    if dump_trajectory:
        traj_dir = out / "trajectories"
        traj_dir.mkdir(exist_ok=True)
        steps = _trajectory_steps(cfg)
        for vid, rows in result.trajectories.items():
            lines = [f"{s}\t" + " ".join(map(str, row)) for s, row in zip(steps, rows)]
            (traj_dir / f"{vid}.txt").write_text("\n".join(lines) + "\n")
    if baselines:
        gts = [v.labels for v in videos]
        means = class_means(ds.split("train"), ds.num_classes)
        rows = [
            ("nearest_prototype", evaluate_split([nearest_prototype(v, means) for v in videos], gts)),
            ("permuted_labels", evaluate_split([permuted_labels(v, cfg.eval.seed) for v in videos], gts)),
        ]
        (out / "baselines.csv").write_text(reports_to_csv(rows))
    log.info("%s: %s", cfg.eval.split, result.report)


def _trajectory_steps(cfg: ExperimentConfig) -> list[int]:
    from .schedule import make_skip_trajectory

    return make_skip_trajectory(cfg.schedule.steps, cfg.eval.steps)[:-1]


def cmd_plot(
    mapping: Path, gt: Path | None, preds: list[Path], out: Path, trajectory: Path | None = None
) -> None:
    names = read_mapping(mapping)
    rows, titles = [], []
    if trajectory is not None:
        for line in trajectory.read_text().splitlines():
            step, labels = line.split("\t")
            rows.append([int(t) for t in labels.split()])
            titles.append(f"s={step}")
    for p in preds:
        rows.append(read_labels(p, names))
        titles.append(p.stem)
    if gt is not None:
        rows.append(read_labels(gt, names))
        titles.append("ground truth")
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(barcode_svg(rows, titles))


def cmd_sweep(
    cfg: ExperimentConfig,
    data: Path,
    out: Path,
    mask_sets: list[str],
    steps: list[int],
    infer_masks: list[str],
) -> None:
    """Train once per mask subset, then evaluate every step count and inference mask."""
    summary = []
    for kinds in mask_sets:
        run_cfg = cfg.replace("train", mask_kinds=tuple(kinds))
        run_dir = out / f"train_{kinds}"
        ckpt = cmd_train(run_cfg, data, run_dir)
        for n in steps:
            for m in infer_masks:
                ecfg = run_cfg.replace("eval", steps=n, infer_mask=m)
                edir = run_dir / f"eval_steps{n}_mask{m}"
                cmd_eval(ecfg, ckpt, data, edir)
                row = (edir / "metrics.csv").read_text().splitlines()[1]
                summary.append(f"{kinds},{n},{m}," + row.split(",", 1)[1])
    header = "train_masks,steps,infer_mask,acc,edit,f1_10,f1_25,f1_50,avg\n"
    (out / "sweep.csv").write_text(header + "".join(s + "\n" for s in summary))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="diffseg", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic dataset")
    g.add_argument("--config", type=Path, required=True)
    g.add_argument("--out", type=Path, required=True)

    t = sub.add_parser("train", help="train encoder and decoder")
    t.add_argument("--config", type=Path, required=True)
    t.add_argument("--data", type=Path, required=True)
    t.add_argument("--out", type=Path, required=True)
    t.add_argument("--resume", type=Path, help="checkpoint to continue from")
    t.add_argument("--stop-after-epoch", type=int, help="stop early (simulates an interruption)")

    e = sub.add_parser("eval", help="denoise the evaluation split and score it")
    e.add_argument("--config", type=Path, required=True)
    e.add_argument("--data", type=Path, required=True)
    e.add_argument("--out", type=Path, required=True)
    e.add_argument("--checkpoint", type=Path)
    e.add_argument("--steps", type=int, help="override eval.steps")
    e.add_argument("--split", help="override eval.split")
    e.add_argument("--seed", type=int, help="override eval.seed")
    e.add_argument("--infer-mask", choices=["N", "P", "B", "R"], help="override eval.infer_mask")
    e.add_argument("--threads", type=int, help="override eval.threads")
    e.add_argument("--oracle", action="store_true", help="use the ground truth as the denoiser (testing)")
    e.add_argument("--dump-trajectory", action="store_true")
    e.add_argument("--baselines", action="store_true", help="also score reference predictors")

    p = sub.add_parser("plot", help="barcode SVG of label files")
    p.add_argument("--mapping", type=Path, required=True)
    p.add_argument("--gt", type=Path)
    p.add_argument("--pred", type=Path, nargs="*", default=[])
    p.add_argument("--trajectory", type=Path)
    p.add_argument("--out", type=Path, required=True)

    s = sub.add_parser("sweep", help="ablation sweeps over mask subsets, step counts, inference masks")
    s.add_argument("--config", type=Path, required=True)
    s.add_argument("--data", type=Path, required=True)
    s.add_argument("--out", type=Path, required=True)
    s.add_argument("--mask-sets", default="NPBR", help="comma separated, e.g. N,NP,NPBR")
    s.add_argument("--steps", default="25", help="comma separated step counts")
    s.add_argument("--infer-masks", default="N", help="comma separated inference masks")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s"
    )
    try:
        if args.command == "plot":
            if args.gt is None and not args.pred and args.trajectory is None:
                raise ValueError("plot needs --gt, --pred or --trajectory")
            cmd_plot(args.mapping, args.gt, args.pred, args.out, args.trajectory)
            return 0
        cfg = ExperimentConfig.load(args.config)
        if args.command == "generate":
            cmd_generate(cfg, args.out)
        elif args.command == "train":
            if not args.data.is_dir():
                raise FileNotFoundError(f"data directory {args.data} does not exist")
            cmd_train(cfg, args.data, args.out, args.resume, args.stop_after_epoch)
        elif args.command == "eval":
            overrides = {
                k: v
                for k, v in {
                    "steps": args.steps,
                    "split": args.split,
                    "seed": args.seed,
                    "infer_mask": args.infer_mask,
                    "threads": args.threads,
                }.items()
                if v is not None
            }
            if overrides:
                cfg = cfg.replace("eval", **overrides)
            cmd_eval(cfg, args.checkpoint, args.data, args.out, args.oracle, args.dump_trajectory, args.baselines)
        elif args.command == "sweep":
            cmd_sweep(
                cfg,
                args.data,
                args.out,
                [m.strip() for m in args.mask_sets.split(",") if m.strip()],
                [int(x) for x in args.steps.split(",")],
                [m.strip() for m in args.infer_masks.split(",") if m.strip()],
            )
    except (ConfigError, GrammarError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - surfaced as exit status
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
