"""Command-line entry point.

Six subcommands: ingest, pretrain, extract, downstream, sweep, project.
Each writes its effective configuration (defaults + config file + flag
overrides) next to its outputs, so any run is reproducible from that file.

Exit codes: 0 success, 1 per-file ingest failures, 2 validation or parse
errors, 3 numeric failures.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .downstream import (DownstreamConfig, label_fraction_sweep,
                         render_sweep_table, train_supervised)
from .elements import category_of, z_to_symbol
from .embeddings import load_table, project_2d, save_table_csv, save_table_json
from .errors import (CrystalEmbedError, NumericsError, ParseError, ShapeError,
                     ValidationError)
from .ioutil import format_float17
from .periodic_graph import (NUM_MULTIPLICITY_CLASSES, build_periodic_graph,
                             multiplicity_targets)
from .structures import load_jsonl, parse_cif, save_jsonl
from .training import (PretrainConfig, extract_embeddings, load_state,
                       pretrain)

EXIT_OK = 0
EXIT_INGEST = 1
EXIT_VALIDATION = 2
EXIT_NUMERICS = 3


def _float_list(text: str):
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated float list: {text!r}")


def _load_config_file(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"{path}: cannot read config: {exc}")
    if not isinstance(data, dict):
        raise ParseError(f"{path}: config must be a JSON object")
    # Accept an effective-config file written by an earlier run as-is.
    if "command" in data and isinstance(data.get("config"), dict):
        return data["config"]
    return data


def _merge_config(cls, config_path, overrides: dict):
    data = {} if config_path is None else _load_config_file(config_path)
    data.update({k: v for k, v in overrides.items() if v is not None})
    return cls.from_dict(data)


def _write_effective(out_dir: Path, command: str, extras: dict,
                     config: dict | None = None) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {"command": command, **extras}
    if config is not None:
        payload["config"] = config
    path = out_dir / f"{command}_config.json"
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


def _load_structures(path):
    structures = load_jsonl(path)
    if not structures:
        raise ValidationError(f"{path}: no structures found")
    return structures


# -- subcommands ---------------------------------------------------------

def cmd_ingest(args) -> int:
    out_dir = Path(args.out)
    structures, failures = [], []
    for raw in args.inputs:
        path = Path(raw)
        try:
            if path.suffix.lower() == ".cif":
                structures.append(parse_cif(path.read_text(encoding="utf-8")))
            elif path.suffix.lower() == ".jsonl":
                structures.extend(load_jsonl(path))
            else:
                raise ParseError(f"unsupported input extension {path.suffix!r}")
        except (OSError, CrystalEmbedError) as exc:
            failures.append((str(path), str(exc)))
    for path, message in failures:
        print(f"ingest failed: {path}: {message}", file=sys.stderr)
    if not structures and not failures:
        raise ValidationError("no input files given")

    site_hist: dict = {}
    edge_counts = []
    mult_hist = np.zeros(NUM_MULTIPLICITY_CLASSES, dtype=np.int64)
    for s in structures:
        g = build_periodic_graph(s, args.cutoff)
        key = str(g.num_nodes)
        site_hist[key] = site_hist.get(key, 0) + 1
        edge_counts.append(g.num_edges)
        classes = multiplicity_targets(g).classes
        upper = classes[np.triu_indices(g.num_nodes)]
        mult_hist += np.bincount(upper, minlength=NUM_MULTIPLICITY_CLASSES)

    out_dir.mkdir(parents=True, exist_ok=True)
    save_jsonl(out_dir / "dataset.jsonl", structures)
    stats = {
        "num_structures": len(structures),
        "num_failed": len(failures),
        "site_count_histogram": dict(sorted(site_hist.items())),
        "edge_counts": {
            "min": int(min(edge_counts)) if edge_counts else 0,
            "max": int(max(edge_counts)) if edge_counts else 0,
            "mean": float(np.mean(edge_counts)) if edge_counts else 0.0,
        },
        "multiplicity_histogram": {
            str(c): int(n) for c, n in enumerate(mult_hist)
        },
    }
    (out_dir / "stats.json").write_text(
        json.dumps(stats, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    _write_effective(out_dir, "ingest",
                     {"inputs": list(args.inputs), "cutoff": args.cutoff})
    print(f"ingested {len(structures)} structures "
          f"({len(failures)} failed) -> {out_dir / 'dataset.jsonl'}")
    return EXIT_INGEST if failures else EXIT_OK


def cmd_pretrain(args) -> int:
    overrides = {key: getattr(args, key) for key in (
        "dim", "num_layers", "rbf_count", "cutoff", "alpha", "beta", "gamma",
        "lr", "batch_size", "epochs", "mask_ratio", "drop_ratio",
        "temperature", "node_loss_scope", "seed")}
    if args.class_weights is not None:
        overrides["class_weights"] = args.class_weights
    cfg = _merge_config(PretrainConfig, args.config, overrides)
    structures = _load_structures(args.data)
    graphs = [build_periodic_graph(s, cfg.cutoff) for s in structures]
    out_dir = Path(args.out)
    _write_effective(out_dir, "pretrain", {"data": str(args.data)},
                     cfg.to_dict())
    result = pretrain(graphs, cfg, out_dir, resume_from=args.resume)
    last = result.history[-1]
    print(f"pretrained {last['epoch']} epochs on {len(graphs)} graphs: "
          f"L_total={last['L_total']:.6f} -> {result.final_path}")
    return EXIT_OK


def cmd_extract(args) -> int:
    model, _, cfg, _, _ = load_state(args.checkpoint)
    structures = _load_structures(args.data)
    graphs = [build_periodic_graph(s, cfg.cutoff) for s in structures]
    table = extract_embeddings(model, graphs)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / f"embeddings.{args.format}"
    if args.format == "csv":
        save_table_csv(table, out_path)
    else:
        save_table_json(table, out_path)
    _write_effective(out_dir, "extract",
                     {"checkpoint": str(args.checkpoint),
                      "data": str(args.data), "format": args.format})
    print(f"extracted {int(table.present.sum())} element embeddings "
          f"(dim {table.dim}) -> {out_path}")
    return EXIT_OK


def cmd_downstream(args) -> int:
    overrides = {key: getattr(args, key) for key in (
        "mode", "dim", "num_layers", "rbf_count", "cutoff", "label_fraction",
        "epochs", "lr", "batch_size", "adapter_noise", "seed")}
    cfg = _merge_config(DownstreamConfig, args.config, overrides)
    table = None
    if cfg.mode == "pretrained":
        if args.table is None:
            raise ValidationError("pretrained mode requires --table")
        table = load_table(args.table)
    structures = _load_structures(args.data)
    out_dir = Path(args.out)
    _write_effective(out_dir, "downstream",
                     {"data": str(args.data),
                      "table": None if args.table is None else str(args.table)},
                     cfg.to_dict())
    _, report = train_supervised(structures, cfg, table)
    (out_dir / "report.json").write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n",
        encoding="utf-8")
    print(f"{cfg.mode} fraction={cfg.label_fraction} seed={cfg.seed}: "
          f"test MAE {report.mean:.6f} -> {out_dir / 'report.json'}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    overrides = {key: getattr(args, key) for key in (
        "dim", "num_layers", "rbf_count", "cutoff", "epochs", "lr",
        "batch_size", "adapter_noise")}
    cfg = _merge_config(DownstreamConfig, args.config, overrides)
    table = load_table(args.table)
    structures = _load_structures(args.data)
    out_dir = Path(args.out)
    _write_effective(out_dir, "sweep",
                     {"data": str(args.data), "table": str(args.table),
                      "fractions": list(args.fractions), "runs": args.runs,
                      "base_seed": args.base_seed},
                     cfg.to_dict())
    report = label_fraction_sweep(structures, cfg, table,
                                  fractions=tuple(args.fractions),
                                  n_runs=args.runs, base_seed=args.base_seed)
    (out_dir / "report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    text = render_sweep_table(report)
    (out_dir / "table.txt").write_text(text + "\n", encoding="utf-8")
    print(text)
    return EXIT_OK


def cmd_project(args) -> int:
    table = load_table(args.table)
    zs, coords = project_2d(table)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / "projection.csv"
    lines = ["Z,symbol,category,x,y"]
    for z, (x, y) in zip(zs, coords):
        lines.append(",".join([str(int(z)), z_to_symbol(int(z)),
                               category_of(int(z)), format_float17(x),
                               format_float17(y)]))
    out_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    _write_effective(out_dir, "project", {"table": str(args.table)})
    print(f"projected {len(zs)} elements -> {out_path}")
    return EXIT_OK


# -- parser ---------------------------------------------------------------

def _add_pretrain_flags(p):
    p.add_argument("--dim", type=int)
    p.add_argument("--num-layers", dest="num_layers", type=int)
    p.add_argument("--rbf-count", dest="rbf_count", type=int)
    p.add_argument("--cutoff", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--mask-ratio", dest="mask_ratio", type=float)
    p.add_argument("--drop-ratio", dest="drop_ratio", type=float)
    p.add_argument("--temperature", type=float)
    p.add_argument("--class-weights", dest="class_weights", type=_float_list)
    p.add_argument("--node-loss-scope", dest="node_loss_scope",
                   choices=("all", "masked"))
    p.add_argument("--seed", type=int)


def _add_downstream_flags(p, with_run_identity=True):
    p.add_argument("--dim", type=int)
    p.add_argument("--num-layers", dest="num_layers", type=int)
    p.add_argument("--rbf-count", dest="rbf_count", type=int)
    p.add_argument("--cutoff", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--adapter-noise", dest="adapter_noise", type=float)
    if with_run_identity:
        p.add_argument("--mode", choices=("baseline", "pretrained"))
        p.add_argument("--label-fraction", dest="label_fraction", type=float)
        p.add_argument("--seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crystalembed",
        description="Self-supervised pretraining of per-element embeddings "
                    "from periodic crystal graphs.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse CIF/JSONL files into a dataset")
    p.add_argument("inputs", nargs="+", help="input .cif or .jsonl files")
    p.add_argument("--cutoff", type=float, default=5.0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("pretrain", help="run dual-branch pretraining")
    p.add_argument("--data", required=True, help="dataset JSONL")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--resume", help="checkpoint to resume from")
    _add_pretrain_flags(p)
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("extract", help="export per-element embeddings")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True, help="dataset JSONL")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("downstream", help="one supervised regression run")
    p.add_argument("--data", required=True, help="labeled dataset JSONL")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--table", help="embedding table CSV/JSON")
    _add_downstream_flags(p)
    p.set_defaults(func=cmd_downstream)

    p = sub.add_parser("sweep", help="label-fraction sweep of both modes")
    p.add_argument("--data", required=True, help="labeled dataset JSONL")
    p.add_argument("--table", required=True, help="embedding table CSV/JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--fractions", type=_float_list, default=[1.0, 0.5, 0.25])
    p.add_argument("--runs", type=int, default=4)
    p.add_argument("--base-seed", dest="base_seed", type=int, default=0)
    _add_downstream_flags(p, with_run_identity=False)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("project", help="2-D PCA export of an embedding table")
    p.add_argument("--table", required=True, help="embedding table CSV/JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_project)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NumericsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICS
    except (ValidationError, ShapeError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
