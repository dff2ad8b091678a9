"""Command-line interface.

Subcommands:

* ``gen-data``  write a procedural toy dataset
* ``train``     fit a denoiser on a dataset, writing checkpoint + loss curve
* ``sample``    unconditional layouts on held-out floors
* ``complete``  layouts around fully pinned objects (scene completion)
* ``arrange``   layouts around pinned labels + sizes (furniture arrangement)
* ``eval``      metrics report for a directory of scene files
* ``render``    top-down SVGs of scene files

Every command honors ``--seed`` and single-threaded runs are byte-identical
across repeats. Outputs that depend on a run configuration embed its hash.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np
import torch

from . import checkpoint as ckpt
from . import sampler as smp
from . import toyrooms as tr
from .config import RunConfig, config_from_dict, load_config
from .denoiser import Denoiser
from .errors import MixdiffError, TrainingDiverged
from .metrics import evaluate_scenes
from .mixed import MixedProcess, TorchProcess, train_step
from .render import render_scene
from .scenes import encode_scene, scene_from_dict, scene_to_dict
from .toyrooms import ToyDataset, ToyRoomSpec, load_dataset


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=1) + "\n")


def _resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "threads", None) is not None:
        overrides["threads"] = args.threads
    if getattr(args, "epochs", None) is not None:
        overrides["epochs"] = args.epochs
    return cfg.with_overrides(**overrides)


def _dataset_tensors(dataset: ToyDataset, indices: list[int],
                     n_boundary: int) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    zs, xs, bs = [], [], []
    for i in indices:
        scene = dataset.scenes[i]
        z, x = encode_scene(scene, dataset.stats)
        zs.append(z)
        xs.append(x)
        bs.append(scene.floor.boundary_samples(n_boundary))
    return (torch.from_numpy(np.stack(zs)),
            torch.from_numpy(np.stack(xs)),
            torch.from_numpy(np.stack(bs)))


def cmd_gen_data(args) -> int:
    spec = ToyRoomSpec(room_type=args.room_type, count=args.count,
                       seed=args.seed if args.seed is not None else 0,
                       split_ratio=args.split_ratio)
    out = Path(args.out)
    dataset = tr.write_dataset(spec, out)
    print(f"wrote {len(dataset.scenes)} scenes "
          f"({len(dataset.train_indices)} train / {len(dataset.val_indices)} val) to {out}")
    return 0


def cmd_train(args) -> int:
    config = _resolve_config(args)
    torch.set_num_threads(config.threads)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dataset = load_dataset(args.data)

    process = config.make_process(dataset.vocab.n_labels)
    tproc = TorchProcess(process)
    torch.manual_seed(config.seed)   # weight init draws from the global RNG
    model = Denoiser(config.denoiser_config(), dataset.vocab.n_labels, dataset.n_slots)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.lr)

    start_epoch = 0
    if args.resume:
        bundle = ckpt.load_checkpoint(args.resume)
        if bundle.trainer_state is None:
            raise MixdiffError(f"checkpoint {args.resume} has no trainer state to resume")
        model = bundle.model
        optimizer = torch.optim.Adam(model.parameters(), lr=config.lr)
        start_epoch, gen = ckpt.restore_trainer_state(bundle.trainer_state, optimizer, model)
    else:
        gen = torch.Generator()
        gen.manual_seed(config.seed)
    model.train()
    model.set_dropout_generator(gen)

    z_all, x_all, b_all = _dataset_tensors(dataset, dataset.train_indices,
                                           config.n_boundary_points)
    n_train = z_all.shape[0]
    curve_path = out / "loss_curve.csv"
    rows = ["epoch,total,l_ddpm,l_d3pm_vb,l_d3pm_aux,lr\n"]
    if args.resume and curve_path.exists():
        prior = curve_path.read_text().splitlines(keepends=True)
        rows = prior[: 1 + start_epoch]

    t0 = time.monotonic()
    for epoch in range(start_epoch, config.epochs):
        if (config.lr_decay_every > 0 and epoch > 0
                and epoch % config.lr_decay_every == 0):
            for group in optimizer.param_groups:
                group["lr"] *= config.lr_decay_factor
        perm = torch.randperm(n_train, generator=gen)
        sums = np.zeros(4)
        n_batches = 0
        for lo in range(0, n_train, config.batch_size):
            idx = perm[lo: lo + config.batch_size]
            report = train_step(model, optimizer, tproc,
                                z_all[idx], x_all[idx], b_all[idx], gen)
            sums += (report.total, report.l_ddpm, report.l_d3pm_vb, report.l_d3pm_aux)
            n_batches += 1
        mean = sums / n_batches
        lr_now = optimizer.param_groups[0]["lr"]
        rows.append(f"{epoch},{mean[0]:.10e},{mean[1]:.10e},{mean[2]:.10e},"
                    f"{mean[3]:.10e},{lr_now:.10e}\n")
        if args.log_every and (epoch + 1) % args.log_every == 0:
            print(f"epoch {epoch + 1}/{config.epochs}  total {mean[0]:.4f}  "
                  f"ddpm {mean[1]:.4f}  vb {mean[2]:.4f}  aux {mean[3]:.4f}  "
                  f"[{time.monotonic() - t0:.1f}s]")

    curve_path.write_text("".join(rows))
    trainer_state = ckpt.pack_trainer_state(optimizer, model, config.epochs, gen)
    ckpt.save_checkpoint(out / "checkpoint.json", model, dataset.vocab, dataset.stats,
                         config.to_dict(), trainer_state)
    _write_json(out / "run.json", {
        "command": "train",
        "config": config.to_dict(),
        "config_hash": ckpt.config_hash(config.to_dict()),
        "data": str(args.data),
        "epochs_run": config.epochs - start_epoch,
        "final_loss": rows[-1].strip().split(",")[1] if len(rows) > 1 else None,
    })
    print(f"trained {config.epochs - start_epoch} epochs; "
          f"checkpoint at {out / 'checkpoint.json'}")
    return 0


def _load_bundle_and_process(args) -> tuple[ckpt.CheckpointBundle, MixedProcess, RunConfig]:
    bundle = ckpt.load_checkpoint(args.ckpt)
    config = config_from_dict(bundle.run_config) if bundle.run_config else RunConfig()
    if getattr(args, "seed", None) is not None:
        config = config.with_overrides(seed=args.seed)
    if getattr(args, "threads", None) is not None:
        config = config.with_overrides(threads=args.threads)
    torch.set_num_threads(config.threads)
    process = config.make_process(bundle.vocab.n_labels)
    return bundle, process, config


def _synthesize(args, mask_for) -> int:
    """Shared driver for sample / complete / arrange.

    ``mask_for(n_slots, bundle)`` builds the MaskSpec applied to every scene.
    """
    bundle, process, config = _load_bundle_and_process(args)
    dataset = load_dataset(args.data)
    if dataset.vocab != bundle.vocab:
        raise MixdiffError("dataset and checkpoint vocabularies differ")
    floors = [dataset.scenes[i].floor for i in dataset.val_indices] or \
             [dataset.scenes[i].floor for i in dataset.train_indices]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    mask = mask_for(dataset.n_slots, bundle)

    files = []
    for i in range(args.n):
        floor = floors[i % len(floors)]
        rng = np.random.Generator(np.random.PCG64(
            np.random.SeedSequence([config.seed, i])))
        scene = smp.sample_with_constraints(
            bundle.model, floor, mask, process, bundle.stats, bundle.vocab,
            rng, n_boundary_points=config.n_boundary_points,
            variance=config.variance, room_type=dataset.room_type)
        rel = f"scene_{i:05d}.json"
        _write_json(out / rel, scene_to_dict(scene, bundle.vocab))
        files.append(rel)
    _write_json(out / "run.json", {
        "command": args.command,
        "config_hash": ckpt.config_hash(config.to_dict()),
        "checkpoint": str(args.ckpt),
        "data": str(args.data),
        "n": args.n,
        "seed": config.seed,
        "scene_files": files,
    })
    print(f"wrote {len(files)} scenes to {out}")
    return 0


def cmd_sample(args) -> int:
    return _synthesize(args, lambda n_slots, bundle: smp.MaskSpec.empty(n_slots))


_ARRANGE_PARTS = ("label", "size")


def _constraint_mask(args, parts: tuple[str, ...] | None):
    entries = smp.load_constraints(args.constraints)
    if parts is not None:
        entries = [{k: v for k, v in e.items() if k == "slot" or k in parts}
                   for e in entries]

    def build(n_slots: int, bundle: ckpt.CheckpointBundle):
        return smp.MaskSpec.from_constraints(entries, bundle.vocab, bundle.stats, n_slots)

    return build


def cmd_complete(args) -> int:
    return _synthesize(args, _constraint_mask(args, None))


def cmd_arrange(args) -> int:
    return _synthesize(args, _constraint_mask(args, _ARRANGE_PARTS))


def cmd_eval(args) -> int:
    dataset = load_dataset(args.data)
    scenes = tr.load_scenes(args.scenes, dataset.vocab, dataset.n_slots)
    report = evaluate_scenes(scenes, dataset.ref_dist, dataset.vocab.empty_index)
    print(report.format_table())
    if args.out:
        _write_json(Path(args.out), {"command": "eval", "data": str(args.data),
                                     "scenes": str(args.scenes),
                                     "report": report.to_dict()})
    return 0


def cmd_render(args) -> int:
    src = Path(args.scenes)
    files = sorted(src.glob("scene_*.json")) if src.is_dir() else [src]
    if not files:
        raise MixdiffError(f"no scene files under {src}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    vocab = None
    if args.data:
        vocab = load_dataset(args.data).vocab
    for f in files:
        d = json.loads(f.read_text())
        v = vocab or tr.room_vocab(d["room_type"])
        scene = scene_from_dict(d, v)
        (out / (f.stem + ".svg")).write_text(render_scene(scene, v))
    print(f"rendered {len(files)} scenes to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mixdiff",
        description="Mixed discrete-continuous diffusion for scene layouts.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, default=None, help="JSON config file")
    common.add_argument("--seed", type=int, default=None, help="base seed override")
    common.add_argument("--threads", type=int, default=None, help="torch CPU threads")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", parents=[common], help="generate a toy dataset")
    p.add_argument("--room-type", required=True, choices=sorted(tr.ROOM_TYPES))
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--split-ratio", type=float, default=0.9)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", parents=[common], help="train a denoiser")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--resume", type=str, default=None, help="checkpoint to resume")
    p.add_argument("--epochs", type=int, default=None, help="epoch count override")
    p.add_argument("--log-every", type=int, default=10, help="epochs between log lines (0 = quiet)")
    p.set_defaults(func=cmd_train)

    for name, fn, extra in (
        ("sample", cmd_sample, False),
        ("complete", cmd_complete, True),
        ("arrange", cmd_arrange, True),
    ):
        p = sub.add_parser(name, parents=[common], help=f"{name} scenes from a checkpoint")
        p.add_argument("--ckpt", required=True)
        p.add_argument("--data", required=True, help="dataset directory (floors + vocab)")
        p.add_argument("--n", type=int, default=16, help="number of scenes")
        p.add_argument("--out", required=True)
        if extra:
            p.add_argument("--constraints", required=True, help="constraint JSON file")
        p.set_defaults(func=fn)

    p = sub.add_parser("eval", parents=[common], help="metrics for generated scenes")
    p.add_argument("--data", required=True, help="reference dataset directory")
    p.add_argument("--scenes", required=True, help="scene file or directory")
    p.add_argument("--out", type=str, default=None, help="metrics JSON path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("render", parents=[common], help="render scenes to SVG")
    p.add_argument("--scenes", required=True, help="scene file or directory")
    p.add_argument("--data", type=str, default=None, help="dataset directory for the vocab")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except MixdiffError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2 if isinstance(e, TrainingDiverged) else 1


if __name__ == "__main__":
    sys.exit(main())
