"""Command-line entry point: training, evaluation, T-sweeps, hardware cost
tables, datapath simulation, and encoder previews, all emitting CSV with a
comment row recording the resolved options and seed so any run can be
reproduced byte for byte.

Options may come from flags or from a declarative key-value spec file
(--spec experiment.cfg with lines like `epochs = 20`); explicit flags win.
SBNN_THREADS caps sweep parallelism.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import archsim, dataio, training
from .encoder import RngKind, StochasticConfig, make_bit_source, sample_presentations
from .errors import SbnnError
from .model import derive_seed, predict_conventional_batch, predict_stochastic_batch

SWEEP_T_GRID = (1, 2, 3, 5, 8, 16, 32, 64, 100)

_RNG_FLAGS = {"lfsr8": RngKind.LFSR8, "counter64": RngKind.COUNTER64, "os": RngKind.OS_ENTROPY}


def _spec_comment(args: argparse.Namespace, keys: list[str]) -> str:
    parts = [f"{k}={getattr(args, k)}" for k in sorted(keys) if getattr(args, k) is not None]
    return "# sbnn " + args.command + " " + " ".join(parts)


def _write_csv(path, comment: str, header: list[str], rows: list[list]):
    lines = [comment, ",".join(header)]
    lines += [",".join(str(v) for v in row) for row in rows]
    text = "\n".join(lines) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _load_spec_file(path) -> dict:
    values = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SbnnError(f"spec line without '=': {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


def _merge_spec(args: argparse.Namespace, defaults: dict):
    """Resolve each option as: explicit flag, then spec-file entry, then default."""
    spec = _load_spec_file(args.spec) if args.spec else {}
    for key, raw in spec.items():
        if getattr(args, key, None) is not None or not hasattr(args, key):
            continue
        fallback = defaults.get(key)
        cast = type(fallback) if fallback is not None else str
        if cast is bool:
            value = raw.lower() in ("1", "true", "yes")
        elif cast in (int, float):
            value = cast(raw)
        else:
            value = raw
        setattr(args, key, value)
    for key, fallback in defaults.items():
        if getattr(args, key, None) is None:
            setattr(args, key, fallback)


def _threads() -> int:
    env = os.environ.get("SBNN_THREADS")
    if env:
        return max(1, int(env))
    return min(8, os.cpu_count() or 1)


def _require(args, *names):
    for name in names:
        if getattr(args, name, None) is None:
            raise SbnnError(f"--{name.replace('_', '-')} is required for {args.command}")


def _load_test(args) -> dataio.Dataset:
    _require(args, "test_images", "test_labels")
    ds = dataio.load_idx(args.test_images, args.test_labels)
    if args.limit:
        ds = ds.subset(args.limit)
    return ds


def _stochastic_cfg(args, seed=None) -> StochasticConfig:
    return StochasticConfig(
        t=args.t,
        rng_kind=_RNG_FLAGS[args.rng],
        seed=args.seed if seed is None else seed,
        accumulation_layer=args.accumulate_at,
    )


def cmd_train(args) -> int:
    _merge_spec(
        args,
        dict(
            epochs=20, batch=100, t=1, seed=0, input_mode="grayscale", rng="counter64",
            hidden="128,128", dropout=0.2, alpha=1e-3, limit=0, out="model.sbnn",
        ),
    )
    _require(args, "train_images", "train_labels")
    train_ds = dataio.load_idx(args.train_images, args.train_labels)
    if args.limit:
        train_ds = train_ds.subset(args.limit)
    test_ds = None
    if args.test_images and args.test_labels:
        test_ds = dataio.load_idx(args.test_images, args.test_labels)

    hidden = [int(s) for s in str(args.hidden).split(",") if s]
    sizes = [train_ds.images.shape[1], *hidden, train_ds.n_classes]
    cfg = training.TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch,
        alpha=args.alpha,
        dropout=args.dropout,
        input_mode=training.InputMode(args.input_mode),
        t=args.t,
        rng_kind=_RNG_FLAGS[args.rng],
        seed=args.seed,
    )
    state = training.init_train_state(sizes, seed=args.seed)
    state, log = training.fit(state, train_ds, cfg, test=test_ds)
    model = training.export_model(state, cfg)

    out = Path(args.out)
    dataio.write_model(out, model)
    sidecar = {f"w_real_{k}": l.w_real for k, l in enumerate(state)}
    sidecar.update({f"bn_mean_{k}": l.bn_mean for k, l in enumerate(state)})
    sidecar.update({f"bn_std_{k}": l.bn_std for k, l in enumerate(state)})
    np.savez(out.with_suffix(out.suffix + ".weights.npz"), **sidecar)

    keys = ["epochs", "batch", "t", "seed", "input_mode", "rng", "hidden", "dropout", "alpha"]
    _write_csv(
        out.with_suffix(out.suffix + ".log.csv"),
        _spec_comment(args, keys),
        ["epoch", "train_acc", "test_acc", "loss"],
        [[e["epoch"], repr(e["train_acc"]), repr(e["test_acc"]), repr(e["loss"])] for e in log],
    )
    final = log[-1] if log else {"train_acc": float("nan"), "test_acc": float("nan")}
    print(f"trained {sizes} -> {out} (train_acc={final['train_acc']}, test_acc={final['test_acc']})")
    return 0


def cmd_eval(args) -> int:
    _merge_spec(args, dict(t=0, seed=0, rng="counter64", accumulate_at=1, limit=0, out=None))
    _require(args, "model")
    model = dataio.read_model(args.model)
    ds = _load_test(args)
    if args.t and args.t > 0:
        cfg = _stochastic_cfg(args)
        pred = predict_stochastic_batch(model, ds.images, cfg)
        mode = f"stochastic t={args.t} k*={args.accumulate_at} rng={args.rng} seed={args.seed}"
    else:
        pred = predict_conventional_batch(model, ds.images)
        mode = "conventional"
    acc = float(np.mean(pred == ds.labels))
    print(f"accuracy {acc:.4f} ({mode}, n={len(ds)})")
    if args.out:
        keys = ["model", "t", "seed", "rng", "accumulate_at", "limit"]
        _write_csv(args.out, _spec_comment(args, keys), ["accuracy", "n"], [[repr(acc), len(ds)]])
    return 0


def cmd_sweep_t(args) -> int:
    _merge_spec(
        args,
        dict(seeds=3, seed=0, rng="counter64", accumulate_at=1, limit=0, out=None,
             t_grid=",".join(str(t) for t in SWEEP_T_GRID)),
    )
    _require(args, "model")
    model = dataio.read_model(args.model)
    ds = _load_test(args)
    grid = [int(s) for s in str(args.t_grid).split(",") if s]

    def point(i_t_seed):
        i, t, seed_idx = i_t_seed
        cfg = StochasticConfig(
            t=t,
            rng_kind=_RNG_FLAGS[args.rng],
            seed=derive_seed(args.seed, 1000 * seed_idx + i),
            accumulation_layer=args.accumulate_at,
        )
        pred = predict_stochastic_batch(model, ds.images, cfg)
        return float(np.mean(pred == ds.labels))

    jobs = [(i, t, s) for i, t in enumerate(grid) for s in range(args.seeds)]
    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        accs = list(pool.map(point, jobs))
    by_t = {t: [] for t in grid}
    for (i, t, s), acc in zip(jobs, accs):
        by_t[t].append(acc)

    header = ["t", "acc_mean", "acc_std"] + [f"acc_seed{s}" for s in range(args.seeds)]
    rows = []
    for t in grid:
        vals = np.array(by_t[t])
        rows.append([t, repr(float(vals.mean())), repr(float(vals.std()))] + [repr(v) for v in by_t[t]])
    keys = ["model", "seeds", "seed", "rng", "accumulate_at", "t_grid", "limit"]
    _write_csv(args.out, _spec_comment(args, keys), header, rows)
    return 0


def cmd_simulate(args) -> int:
    _merge_spec(args, dict(t=3, seed=0, rng="lfsr8", index=0, limit=0, out=None))
    _require(args, "model")
    model = dataio.read_model(args.model)
    ds = _load_test(args)
    x = ds.images[args.index]
    placement = archsim.map_model(model)
    cfg = StochasticConfig(t=args.t, rng_kind=_RNG_FLAGS[args.rng], seed=args.seed)
    pres = sample_presentations(x, args.t, make_bit_source(cfg, x.size))
    report = archsim.simulate_inference(placement, pres, rng_kind=_RNG_FLAGS[args.rng])
    print(report.to_text())
    print(f"label: {ds.labels[args.index]}")
    if args.out:
        keys = ["model", "t", "seed", "rng", "index"]
        _write_csv(args.out, _spec_comment(args, keys), ["key", "value"],
                   [list(r) for r in report.csv_rows()])
    return 0


def cmd_cost(args) -> int:
    _merge_spec(
        args,
        dict(shape=",".join(str(s) for s in archsim.REFERENCE_SHAPE),
             t_grid=",".join(str(t) for t in SWEEP_T_GRID),
             rng="lfsr8", cost_config=None, out=None, seed=0),
    )
    cost = archsim.CostModel.from_file(args.cost_config) if args.cost_config else archsim.default_cost_model()
    shape = tuple(int(s) for s in str(args.shape).split(",") if s)
    rng_kind = _RNG_FLAGS[args.rng]
    grid = [int(s) for s in str(args.t_grid).split(",") if s]

    area_bin = archsim.estimate_area(shape, 1, rng_kind, cost)
    area_conv = archsim.estimate_area(shape, 8, rng_kind, cost)
    e_conv = archsim.estimate_energy(shape, 1, 8, rng_kind, cost)
    rows = []
    for t in grid:
        e_t = archsim.estimate_energy(shape, t, 1, rng_kind, cost)
        rows.append([t, repr(area_bin), repr(area_conv), repr(e_t), repr(e_conv), repr(e_conv / e_t)])
    keys = ["shape", "t_grid", "rng", "cost_config"]
    _write_csv(
        args.out,
        _spec_comment(args, keys),
        ["t", "area_binary_mm2", "area_8bit_mm2", "energy_stochastic_nj",
         "energy_8bit_nj", "energy_factor"],
        rows,
    )
    crossover = archsim.crossover_presentations(shape, rng_kind, cost)
    print(f"area saving: {100 * (1 - area_bin / area_conv):.1f}%  "
          f"(binary {area_bin:.4g} mm^2 vs 8-bit {area_conv:.4g} mm^2)")
    print(f"energy crossover at T={crossover}; "
          f"8-bit MLP arithmetic reference: {archsim.compare_nonbinarized(cost=cost):.4g} nJ")
    return 0


def cmd_encode_preview(args) -> int:
    _merge_spec(args, dict(t=4, seed=0, rng="counter64", index=0, limit=0,
                           format="pgm", out="preview"))
    ds = _load_test(args)
    x = ds.images[args.index]
    side = int(round(x.size**0.5))
    cfg = StochasticConfig(t=args.t, rng_kind=_RNG_FLAGS[args.rng], seed=args.seed)
    pres = sample_presentations(x, args.t, make_bit_source(cfg, x.size))
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)

    def write_pgm(path, img_u8, maxval):
        rowtxt = "\n".join(" ".join(str(v) for v in row) for row in img_u8)
        Path(path).write_text(f"P2\n{side} {side}\n{maxval}\n{rowtxt}\n")

    if args.format == "pgm":
        write_pgm(outdir / "input.pgm", (x.reshape(side, side) * 255).astype(int), 255)
        for k, p in enumerate(pres):
            write_pgm(outdir / f"presentation_{k:03d}.pgm",
                      p.to_bits().reshape(side, side).astype(int), 1)
        mean = np.mean([p.to_bits() for p in pres], axis=0)
        write_pgm(outdir / "mean.pgm", (mean.reshape(side, side) * 255).astype(int), 255)
    else:
        keys = ["t", "seed", "rng", "index", "format"]
        rows = [[k] + p.to_bits().tolist() for k, p in enumerate(pres)]
        _write_csv(outdir / "presentations.csv", _spec_comment(args, keys),
                   ["presentation"] + [f"px{j}" for j in range(x.size)], rows)
    print(f"wrote {args.t} presentations of image {args.index} to {outdir}/")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sbnn",
        description="Stochastic-computing binarized neural networks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, *, data=True):
        p.add_argument("--spec", help="key-value spec file; flags override")
        p.add_argument("--seed", type=int)
        p.add_argument("--out")
        if data:
            p.add_argument("--test-images")
            p.add_argument("--test-labels")
            p.add_argument("--limit", type=int, help="cap on evaluated images")

    p = sub.add_parser("train", help="train a BNN and write a model file")
    add_common(p)
    p.add_argument("--train-images")
    p.add_argument("--train-labels")
    p.add_argument("--hidden", help="comma-separated hidden layer sizes")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--input-mode", choices=["grayscale", "stochastic", "bw"])
    p.add_argument("--t", type=int, help="presentations per image (stochastic mode)")
    p.add_argument("--dropout", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--rng", choices=list(_RNG_FLAGS))
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="accuracy of a model file on a test set")
    add_common(p)
    p.add_argument("--model")
    p.add_argument("--t", type=int, help="presentations; omit for conventional")
    p.add_argument("--accumulate-at", type=int)
    p.add_argument("--rng", choices=list(_RNG_FLAGS))
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep-t", help="accuracy vs presentation count")
    add_common(p)
    p.add_argument("--model")
    p.add_argument("--seeds", type=int, help="seeds per grid point (>= 3)")
    p.add_argument("--t-grid")
    p.add_argument("--accumulate-at", type=int)
    p.add_argument("--rng", choices=list(_RNG_FLAGS))
    p.set_defaults(func=cmd_sweep_t)

    p = sub.add_parser("simulate", help="cycle/energy report of one inference")
    add_common(p)
    p.add_argument("--model")
    p.add_argument("--t", type=int)
    p.add_argument("--index", type=int)
    p.add_argument("--rng", choices=list(_RNG_FLAGS))
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("cost", help="area/energy tables of the cost model")
    add_common(p, data=False)
    p.add_argument("--shape", help="comma-separated layer sizes")
    p.add_argument("--t-grid")
    p.add_argument("--rng", choices=list(_RNG_FLAGS))
    p.add_argument("--cost-config", help="key-value cost model file")
    p.set_defaults(func=cmd_cost)

    p = sub.add_parser("encode-preview", help="dump sampled presentations")
    add_common(p)
    p.add_argument("--t", type=int)
    p.add_argument("--index", type=int)
    p.add_argument("--rng", choices=list(_RNG_FLAGS))
    p.add_argument("--format", choices=["pgm", "csv"])
    p.set_defaults(func=cmd_encode_preview)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SbnnError, OSError) as exc:
        print(f"sbnn {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
