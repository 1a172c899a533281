"""Command-line entry point.

Every command writes its artifacts atomically plus a ``*.manifest.json`` next
to them. Failures print one line ``hypertrust: error[<kind>]: <message>`` to
stderr and exit nonzero (2 for usage errors, 1 otherwise).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .data import DatasetError, atomic_write_text, csv_text, generate_synthetic, load_dataset, save_dataset
from .evaluation import (
    node_count_experiment,
    pca_2d,
    sensitivity_sweep,
    trust_cluster_ss,
    trust_distribution,
    trust_partition,
)
from .hypergraph import HypergraphError, RelationKind
from .relations import BuildConfig, build_all
from .serialize import (
    FormatError,
    file_sha256,
    fmt_float,
    load_checkpoint,
    save_checkpoint,
    save_embeddings,
    save_graph,
    save_metadata,
    save_rankings,
    save_rankings_json,
)
from .trainer import TrainConfig, TrainingError, infer_embeddings, init_params, train
from .trust import rank

CONFIG_ENV = "HYPERTRUST_CONFIG"
BUILD_PREFIX = "build."

log = logging.getLogger("hypertrust")


class CliError(Exception):
    def __init__(self, kind: str, message: str, code: int = 1):
        super().__init__(message)
        self.kind = kind
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError("usage", message, code=2)


# --- config --------------------------------------------------------------------------


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError("config", f"{source}:{lineno}: expected key=value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key] = value
    return values


def resolve_config(args) -> tuple[TrainConfig, BuildConfig]:
    """Defaults, then the config file (``--config`` or $HYPERTRUST_CONFIG), then ``--set`` overrides."""
    values: dict[str, str] = {}
    path = getattr(args, "config", None) or os.environ.get(CONFIG_ENV)
    if path:
        p = Path(path)
        if not p.is_file():
            raise CliError("input", f"config file {p} not found")
        values.update(parse_config_text(p.read_text(), str(p)))
    for item in getattr(args, "set", None) or []:
        values.update(parse_config_text(item, "--set"))

    build_values = {k[len(BUILD_PREFIX):]: v for k, v in values.items() if k.startswith(BUILD_PREFIX)}
    train_values = {k: v for k, v in values.items() if not k.startswith(BUILD_PREFIX)}
    try:
        cfg = TrainConfig.from_mapping(train_values)
        cfg.validate()
        build = BuildConfig()
        for key, raw in build_values.items():
            if key not in ("clusters", "seed", "max_iters"):
                raise ValueError(f"unknown config key {BUILD_PREFIX + key!r}")
            setattr(build, key, None if raw.lower() == "auto" else int(raw))
    except ValueError as exc:
        raise CliError("config", str(exc)) from None
    return cfg, build


def checkpoint_config(cfg: TrainConfig, build: BuildConfig) -> dict:
    out = cfg.as_dict()
    out.update({BUILD_PREFIX + k: v for k, v in asdict(build).items()})
    return out


def split_checkpoint_config(values: dict) -> tuple[TrainConfig, BuildConfig]:
    train_values = {k: v for k, v in values.items() if not k.startswith(BUILD_PREFIX)}
    build_values = {k[len(BUILD_PREFIX):]: v for k, v in values.items() if k.startswith(BUILD_PREFIX)}
    return TrainConfig(**train_values), BuildConfig(**build_values)


# --- manifest ------------------------------------------------------------------------


def write_manifest(path: Path, command: str, config: dict, inputs: dict, outputs: list[Path], seed, extra=None):
    doc = {
        "command": command,
        "version": __version__,
        "config": config,
        "seed": seed,
        "inputs": {k: str(v) for k, v in inputs.items()},
        "outputs": {str(p): file_sha256(p) for p in outputs},
        "created": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    if extra:
        doc.update(extra)
    save_metadata(path, doc)


def _manifest_for(out: Path) -> Path:
    return out / "manifest.json" if out.is_dir() else out.with_name(out.name + ".manifest.json")


# --- helpers -------------------------------------------------------------------------


def _load_data(path):
    try:
        return load_dataset(path)
    except DatasetError as exc:
        raise CliError("input", str(exc)) from None


def _load_model(checkpoint, data):
    try:
        params, values = load_checkpoint(checkpoint)
    except FileNotFoundError:
        raise CliError("input", f"checkpoint {checkpoint} not found") from None
    except FormatError as exc:
        raise CliError("format", str(exc)) from None
    cfg, build = split_checkpoint_config(values)
    ds = _load_data(data)
    graph = build_all(ds, build)
    if params.layers[0][0].shape[0] != graph.num_devices:
        raise CliError("input", f"checkpoint expects {params.layers[0][0].shape[0]} devices, dataset has {graph.num_devices}")
    return params, cfg, build, graph, values


def _initiators(text: str, n: int) -> list[int]:
    if text == "all":
        return list(range(n))
    try:
        ids = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise CliError("usage", f"bad initiator list {text!r}", code=2) from None
    bad = [i for i in ids if not 0 <= i < n]
    if bad or not ids:
        raise CliError("input", f"initiator(s) {bad or text!r} not in [0, {n})")
    return ids


def parse_grid(text: str) -> list[float]:
    """``lo:hi:step`` (inclusive) or a comma list."""
    try:
        if ":" in text:
            lo, hi, step = (float(t) for t in text.split(":"))
            if step <= 0 or hi < lo:
                raise ValueError
            count = int(round((hi - lo) / step)) + 1
            return [round(lo + i * step, 10) for i in range(count)]
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise CliError("usage", f"bad grid {text!r}; expected lo:hi:step or a comma list", code=2) from None


# --- commands ------------------------------------------------------------------------


def cmd_synth(args):
    if args.n < 2:
        raise CliError("usage", "--n must be at least 2", code=2)
    out = Path(args.out)
    ds = generate_synthetic(args.n, args.seed)
    save_dataset(ds, out)
    files = sorted(out.glob("*.csv"))
    write_manifest(out / "manifest.json", "synth", {"n": args.n}, {}, files, args.seed)
    print(f"wrote {ds.num_devices} devices to {out}")


def cmd_build(args):
    _, build = resolve_config(args)
    ds = _load_data(args.data)
    graph = build_all(ds, build)
    out = Path(args.out)
    save_graph(out, graph)
    counts = graph.kind_counts()
    for kind in RelationKind:
        print(f"{kind.value}\t{counts[kind.value]}")
    print(f"total\t{graph.num_hyperedges}")
    write_manifest(_manifest_for(out), "build", {BUILD_PREFIX + k: v for k, v in asdict(build).items()},
                   {"data": args.data}, [out], build.seed,
                   {"kind_counts": counts})


def cmd_train(args):
    cfg, build = resolve_config(args)
    ds = _load_data(args.data)
    graph = build_all(ds, build)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.init_only:
        params, history, duration = init_params(graph, cfg), [], 0.0
    else:
        try:
            report = train(graph, cfg)
        except TrainingError as exc:
            raise CliError("training", str(exc)) from None
        params, history, duration = report.params, report.history, report.duration

    ckpt = out / "checkpoint.bin"
    save_checkpoint(ckpt, params, checkpoint_config(cfg, build))
    loss_csv = out / "loss.csv"
    header = ("epoch", "inv_dev", "dec_dev", "inv_hyp", "dec_hyp", "reg", "total")
    rows = [[e + 1] + [fmt_float(v) for v in h.as_dict().values()] for e, h in enumerate(history)]
    atomic_write_text(loss_csv, csv_text(header, rows))
    emb = out / "embeddings.csv"
    save_embeddings(emb, infer_embeddings(graph, params).devices)
    report_path = out / "report.json"
    save_metadata(report_path, {
        "config": checkpoint_config(cfg, build),
        "epochs_run": len(history),
        "first_loss": history[0].as_dict() if history else None,
        "final_loss": history[-1].as_dict() if history else None,
        "num_devices": graph.num_devices,
        "num_hyperedges": graph.num_hyperedges,
    })
    write_manifest(out / "manifest.json", "train", checkpoint_config(cfg, build), {"data": args.data},
                   [ckpt, loss_csv, emb, report_path], cfg.seed, {"duration_s": duration})
    if history:
        print(f"epoch 1 loss {history[0].total:.6g}, epoch {len(history)} loss {history[-1].total:.6g}")
    print(f"wrote {ckpt}")


def cmd_rank(args):
    params, cfg, build, graph, values = _load_model(args.checkpoint, args.data)
    emb = infer_embeddings(graph, params).devices
    rankings = [rank(i, emb) for i in _initiators(args.initiator, graph.num_devices)]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    csv_path, json_path = out / "rankings.csv", out / "rankings.json"
    save_rankings(csv_path, rankings, args.top)
    meta = {"checkpoint": str(args.checkpoint), "checkpoint_sha256": file_sha256(args.checkpoint), "top": args.top}
    save_rankings_json(json_path, rankings, meta, args.top)
    write_manifest(out / "manifest.json", "rank", values, {"checkpoint": args.checkpoint, "data": args.data},
                   [csv_path, json_path], cfg.seed)
    for r in rankings:
        best, t = r.entries[0]
        print(f"initiator {r.initiator}: collaborator {best} (trust {t:.4f})")


def cmd_eval(args):
    params, cfg, build, graph, values = _load_model(args.checkpoint, args.data)
    emb = infer_embeddings(graph, params).devices
    initiator = _initiators(str(args.initiator), graph.num_devices)[0]
    out = Path(args.out)
    try:
        if args.what == "ss":
            ss = trust_cluster_ss(emb, initiator, args.k, space=args.space)
            text = csv_text(("initiator", "k", "space", "ss"), [(initiator, args.k, args.space, fmt_float(ss))])
            print(f"ss {ss:.6f}")
        elif args.what == "hist":
            rows = [(fmt_float(lo), fmt_float(hi), fmt_float(p)) for lo, hi, p in trust_distribution(emb, initiator)]
            text = csv_text(("bin_lo", "bin_hi", "proportion"), rows)
        else:
            xy = pca_2d(emb)
            groups = trust_partition(emb, initiator, args.k)
            rows = [(i, fmt_float(x), fmt_float(y), int(gr)) for i, ((x, y), gr) in enumerate(zip(xy, groups))]
            text = csv_text(("device_id", "x", "y", "group"), rows)
    except ValueError as exc:
        raise CliError("input", str(exc)) from None
    atomic_write_text(out, text)
    write_manifest(_manifest_for(out), f"eval {args.what}", values,
                   {"checkpoint": args.checkpoint, "data": args.data}, [out], cfg.seed,
                   {"initiator": initiator, "k": args.k, "space": args.space})


def cmd_sweep(args):
    cfg, build = resolve_config(args)
    ds = _load_data(args.data)
    p_values = parse_grid(args.grid)
    try:
        grid = sensitivity_sweep(ds, cfg, p_values, initiator=args.initiator, k=args.k, workers=args.workers,
                                 build=build, space=args.space)
    except ValueError as exc:
        raise CliError("input", str(exc)) from None
    out = Path(args.out)
    rows = [(fmt_float(pa), fmt_float(ph), fmt_float(ss)) for pa, ph, ss in grid.rows()]
    atomic_write_text(out, csv_text(("p_a", "p_h", "ss"), rows))
    write_manifest(_manifest_for(out), "sweep", checkpoint_config(cfg, build), {"data": args.data}, [out], cfg.seed,
                   {"grid": p_values, "cell_seeds": grid.seeds.tolist(), "initiator": args.initiator, "k": args.k})
    failed = int(np.isnan(grid.ss).sum())
    print(f"{grid.ss.size} cells, {failed} failed")


def cmd_scale(args):
    cfg, build = resolve_config(args)
    ds = _load_data(args.data)
    try:
        sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    except ValueError:
        raise CliError("usage", f"bad --sizes {args.sizes!r}", code=2) from None
    try:
        rows = node_count_experiment(ds, sizes, cfg, initiator=args.initiator, build=build)
    except ValueError as exc:
        raise CliError("input", str(exc)) from None
    out = Path(args.out)
    atomic_write_text(out, csv_text(("size", "selected_id", "trust"), [(s, b, fmt_float(t)) for s, b, t in rows]))
    write_manifest(_manifest_for(out), "scale", checkpoint_config(cfg, build), {"data": args.data}, [out], cfg.seed,
                   {"sizes": sizes, "initiator": args.initiator})
    for s, b, t in rows:
        print(f"{s}\t{b}\t{t:.4f}")


# --- parser --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hypertrust", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def config_flags(p):
        p.add_argument("--config", help=f"key=value config file (default: ${CONFIG_ENV})")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key")

    p = sub.add_parser("synth", help="write a synthetic dataset")
    p.add_argument("--n", type=int, default=76)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("build", help="build the relation hypergraph")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="graph JSON path")
    config_flags(p)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("train", help="train and write checkpoint, loss curve, embeddings")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--init-only", action="store_true", help="write the untrained initial parameters")
    config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("rank", help="rank collaborators by trust")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--initiator", default="5", help="id, comma list, or 'all'")
    p.add_argument("--top", type=int, default=None)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("eval", help="silhouette, trust histogram, or 2-D projection")
    p.add_argument("what", choices=("ss", "hist", "project"))
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--initiator", type=int, default=5)
    p.add_argument("--k", type=int, default=8)
    p.add_argument("--space", choices=("embedding", "pca"), default="embedding")
    p.add_argument("--out", required=True, help="CSV path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="masking-probability sensitivity grid")
    p.add_argument("--data", required=True)
    p.add_argument("--grid", default="0.1:0.9:0.1")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--initiator", type=int, default=5)
    p.add_argument("--k", type=int, default=8)
    p.add_argument("--space", choices=("embedding", "pca"), default="embedding")
    p.add_argument("--out", required=True, help="CSV path")
    config_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("scale", help="retrain on the first N devices for several N")
    p.add_argument("--data", required=True)
    p.add_argument("--sizes", default="30,40,50,60,70")
    p.add_argument("--initiator", type=int, default=5)
    p.add_argument("--out", required=True, help="CSV path")
    config_flags(p)
    p.set_defaults(func=cmd_scale)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        args.func(args)
    except CliError as exc:
        print(f"hypertrust: error[{exc.kind}]: {exc}", file=sys.stderr)
        return exc.code
    except (HypergraphError, ValueError, OSError) as exc:
        print(f"hypertrust: error[{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
