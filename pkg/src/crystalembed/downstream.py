"""Supervised property regression on labeled crystals.

Two modes share one architecture (message-passing layers, mean pool, linear
head) and differ only in where initial atom features come from: a trainable
per-element lookup learned from scratch (baseline), or frozen rows of a
pretrained element embedding table passed through a small trainable linear
adapter (pretrained). The label-fraction sweep shrinks the training split
while leaving validation and test untouched, then compares the two modes.
"""

from dataclasses import dataclass, field, replace
import math

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .elements import MAX_Z, z_to_symbol
from .embeddings import ElementEmbeddingTable
from .encoder import LayerParams, apply_layers, init_layers
from .errors import FeaturizationError, ValidationError
from .optim import AdamState, adam_step
from .periodic_graph import PeriodicGraph, build_periodic_graph

MODES = ("baseline", "pretrained")


@dataclass
class DownstreamConfig:
    mode: str = "baseline"
    dim: int = 16
    num_layers: int = 1
    rbf_count: int = 4
    cutoff: float = 5.0
    label_fraction: float = 1.0
    epochs: int = 60
    lr: float = 1e-2
    batch_size: int = 16
    adapter_noise: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}")
        if not 0.0 < self.label_fraction <= 1.0:
            raise ValidationError("label_fraction must lie in (0, 1]")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValidationError("epochs and batch_size must be >= 1")
        if self.lr <= 0.0 or self.cutoff <= 0.0:
            raise ValidationError("lr and cutoff must be positive")
        if self.dim < 1 or self.num_layers < 0 or self.rbf_count < 1:
            raise ValidationError("bad encoder dimensions")
        if self.adapter_noise < 0.0:
            raise ValidationError("adapter_noise must be nonnegative")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, data: dict) -> "DownstreamConfig":
        extra = set(data) - set(cls.__dataclass_fields__)
        if extra:
            raise ValidationError(f"unknown config keys: {sorted(extra)}")
        return cls(**data)


def make_atom_featurizer(cfg: DownstreamConfig, rng: np.random.Generator,
                         table: ElementEmbeddingTable | None = None):
    """Initial-feature function plus its trainable tensors.

    baseline: a trainable 118 x d lookup, any table argument is ignored.
    pretrained: frozen table rows through a trainable near-identity adapter;
    an element missing from the table is a hard error naming the element.
    """
    if cfg.mode == "baseline":
        lookup = ag.parameter(rng.normal(size=(MAX_Z, cfg.dim)),
                              "downstream.lookup")

        def featurize(graph: PeriodicGraph) -> Tensor:
            return ag.row_gather(lookup, graph.atomic_numbers - 1)

        return featurize, [lookup]

    if table is None:
        raise ValidationError("pretrained mode requires an embedding table")
    if table.dim != cfg.dim:
        raise ValidationError(
            f"embedding table dim {table.dim} != configured dim {cfg.dim}")
    adapter_w = ag.parameter(
        np.eye(cfg.dim) + cfg.adapter_noise * rng.normal(size=(cfg.dim, cfg.dim)),
        "downstream.adapter_w")
    adapter_b = ag.parameter(np.zeros(cfg.dim), "downstream.adapter_b")
    frozen = table.vectors.copy()
    present = table.present.copy()

    def featurize(graph: PeriodicGraph) -> Tensor:
        missing = sorted(set(
            int(z) for z in graph.atomic_numbers if not present[z - 1]))
        if missing:
            names = ", ".join(f"{z_to_symbol(z)} (Z={z})" for z in missing)
            raise FeaturizationError(
                f"elements absent from embedding table: {names}")
        rows = ag.constant(frozen[graph.atomic_numbers - 1])
        return ag.add(ag.matmul(rows, adapter_w), adapter_b)

    return featurize, [adapter_w, adapter_b]


@dataclass
class DownstreamModel:
    cfg: DownstreamConfig
    featurize: object
    feat_tensors: list
    layers: list
    head_w: Tensor
    head_b: Tensor

    def predict(self, graph: PeriodicGraph) -> Tensor:
        h0 = self.featurize(graph)
        h = apply_layers(self.layers, graph, h0, self.cfg.rbf_count,
                         self.cfg.cutoff)
        pooled = ag.mean_rows(h)
        return ag.add(ag.matmul(pooled, self.head_w), self.head_b)

    def trainable(self) -> list:
        out = list(self.feat_tensors)
        for layer in self.layers:
            out.extend(layer.tensors())
        out.extend([self.head_w, self.head_b])
        return out


def init_downstream_model(cfg: DownstreamConfig, rng: np.random.Generator,
                          table: ElementEmbeddingTable | None = None
                          ) -> DownstreamModel:
    featurize, feat_tensors = make_atom_featurizer(cfg, rng, table)
    layers = init_layers(rng, cfg.dim, cfg.num_layers, cfg.rbf_count,
                         "downstream")
    head_w = ag.parameter(rng.normal(0.0, cfg.dim ** -0.5, size=(cfg.dim, 1)),
                          "downstream.head_w")
    head_b = ag.parameter(np.zeros(1), "downstream.head_b")
    return DownstreamModel(cfg, featurize, feat_tensors, layers, head_w, head_b)


def split_indices(n: int, seed: int):
    """80/10/10 train/val/test by seeded shuffle; remainder goes to test."""
    if n < 10:
        raise ValidationError("need at least 10 labeled structures to split")
    rng = np.random.default_rng(np.random.SeedSequence((seed & (2**63 - 1), 10)))
    order = rng.permutation(n)
    n_train = int(math.floor(0.8 * n))
    n_val = int(math.floor(0.1 * n))
    return (order[:n_train],
            order[n_train:n_train + n_val],
            order[n_train + n_val:])


def _batch_mae(model: DownstreamModel, graphs, labels) -> Tensor:
    preds = ag.concat([model.predict(g) for g in graphs], axis=0)
    target = ag.constant(np.asarray(labels, dtype=np.float64).reshape(-1, 1))
    return ag.mean_all(ag.abs_(ag.sub(preds, target)))


def evaluate_mae(model: DownstreamModel, graphs, labels) -> float:
    return float(_batch_mae(model, graphs, labels).data)


@dataclass
class EvalReport:
    dim: int
    fraction: float
    mode: str
    seeds: list
    maes: list
    mean: float
    std: float | None
    improvement_pct: float | None = None

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "fraction": self.fraction,
            "mode": self.mode,
            "seeds": list(self.seeds),
            "maes": list(self.maes),
            "mean": self.mean,
            "std": self.std,
            "improvement_pct": self.improvement_pct,
        }


def summarize_runs(dim, fraction, mode, seeds, maes,
                   improvement_pct=None) -> EvalReport:
    maes = [float(m) for m in maes]
    if len(maes) != len(seeds) or not maes:
        raise ValidationError("one MAE per seed required")
    std = float(np.std(maes, ddof=1)) if len(maes) >= 2 else None
    return EvalReport(dim=dim, fraction=float(fraction), mode=mode,
                      seeds=[int(s) for s in seeds], maes=maes,
                      mean=float(np.mean(maes)), std=std,
                      improvement_pct=improvement_pct)


def improvement_pct(baseline: float, method: float) -> float:
    """Relative MAE reduction in percent: positive means method wins."""
    if baseline == 0.0:
        raise ValidationError("baseline MAE of zero has no relative improvement")
    return (baseline - method) / baseline * 100.0


def train_supervised(structures, cfg: DownstreamConfig,
                     table: ElementEmbeddingTable | None = None):
    """Train one model; returns (model, single-run EvalReport).

    Test MAE is reported at the best-validation epoch, not the last one.
    """
    structures = list(structures)
    labels = []
    for s in structures:
        if s.label is None:
            raise ValidationError(f"structure {s.id!r} has no label")
        labels.append(float(s.label))
    graphs = [build_periodic_graph(s, cfg.cutoff) for s in structures]
    labels = np.asarray(labels)

    train_idx, val_idx, test_idx = split_indices(len(graphs), cfg.seed)
    keep = int(round(cfg.label_fraction * len(train_idx)))
    if keep < 1:
        raise ValidationError(
            f"label_fraction {cfg.label_fraction} leaves no training samples")
    train_idx = train_idx[:keep]

    rng = np.random.default_rng(np.random.SeedSequence((cfg.seed & (2**63 - 1), 11)))
    model = init_downstream_model(cfg, rng, table)
    params = model.trainable()
    opt = AdamState.for_params(params, lr=cfg.lr)

    val_graphs = [graphs[i] for i in val_idx]
    val_labels = labels[val_idx]
    best_val = float("inf")
    best_snapshot = [p.data.copy() for p in params]
    for epoch in range(1, cfg.epochs + 1):
        epoch_rng = np.random.default_rng(
            np.random.SeedSequence((cfg.seed & (2**63 - 1), 12, epoch)))
        order = epoch_rng.permutation(len(train_idx))
        for lo in range(0, len(order), cfg.batch_size):
            chunk = train_idx[order[lo:lo + cfg.batch_size]]
            loss = _batch_mae(model, [graphs[i] for i in chunk], labels[chunk])
            for p in params:
                p.zero_grad()
            loss.backward()
            adam_step(opt, params)
        val_mae = evaluate_mae(model, val_graphs, val_labels)
        if val_mae < best_val:
            best_val = val_mae
            best_snapshot = [p.data.copy() for p in params]
    for p, data in zip(params, best_snapshot):
        p.data = data
    test_mae = evaluate_mae(model, [graphs[i] for i in test_idx],
                            labels[test_idx])
    report = summarize_runs(cfg.dim, cfg.label_fraction, cfg.mode,
                            [cfg.seed], [test_mae])
    return model, report


def label_fraction_sweep(structures, cfg: DownstreamConfig,
                         table: ElementEmbeddingTable,
                         fractions=(1.0, 0.5, 0.25), n_runs: int = 4,
                         base_seed: int = 0) -> dict:
    """Both modes x all fractions x n_runs paired seeds.

    Within one (fraction, run) cell both modes share a split seed, so their
    MAEs are directly comparable.
    """
    if n_runs < 1:
        raise ValidationError("n_runs must be >= 1")
    records = []
    rows = []
    for fraction in fractions:
        per_mode = {}
        for mode in MODES:
            seeds, maes = [], []
            for run in range(n_runs):
                seed = base_seed + run
                run_cfg = replace(cfg, mode=mode, label_fraction=fraction,
                                  seed=seed)
                _, rep = train_supervised(
                    structures, run_cfg,
                    table if mode == "pretrained" else None)
                seeds.append(seed)
                maes.append(rep.maes[0])
            per_mode[mode] = (seeds, maes)
        base_seeds, base_maes = per_mode["baseline"]
        pre_seeds, pre_maes = per_mode["pretrained"]
        baseline_rep = summarize_runs(cfg.dim, fraction, "baseline",
                                      base_seeds, base_maes)
        pretrained_rep = summarize_runs(
            cfg.dim, fraction, "pretrained", pre_seeds, pre_maes,
            improvement_pct=improvement_pct(
                float(np.mean(base_maes)), float(np.mean(pre_maes))))
        records.extend([baseline_rep.to_dict(), pretrained_rep.to_dict()])
        rows.append({
            "fraction": float(fraction),
            "baseline": baseline_rep.to_dict(),
            "pretrained": pretrained_rep.to_dict(),
            "improvement_pct": pretrained_rep.improvement_pct,
            "pretrained_wins": int(sum(p < b for p, b
                                       in zip(pre_maes, base_maes))),
        })
    report = {"dim": cfg.dim, "n_runs": n_runs,
              "fractions": [float(f) for f in fractions],
              "records": records, "rows": rows}
    validate_report(report)
    return report


_RECORD_FIELDS = {
    "dim": int, "fraction": float, "mode": str, "seeds": list,
    "maes": list, "mean": float, "std": (float, type(None)),
    "improvement_pct": (float, type(None)),
}


def validate_report(report: dict) -> None:
    """Schema check for the sweep report; raises ValidationError."""
    for key in ("dim", "n_runs", "fractions", "records", "rows"):
        if key not in report:
            raise ValidationError(f"report missing key {key!r}")
    for record in report["records"]:
        if set(record) != set(_RECORD_FIELDS):
            raise ValidationError(
                f"record keys {sorted(record)} != {sorted(_RECORD_FIELDS)}")
        for key, types in _RECORD_FIELDS.items():
            if not isinstance(record[key], types):
                raise ValidationError(f"record field {key!r} has wrong type")
        if record["mode"] not in MODES:
            raise ValidationError(f"bad mode {record['mode']!r}")
        if len(record["maes"]) != len(record["seeds"]):
            raise ValidationError("maes/seeds length mismatch")
    for row in report["rows"]:
        for key in ("fraction", "baseline", "pretrained", "improvement_pct",
                    "pretrained_wins"):
            if key not in row:
                raise ValidationError(f"row missing key {key!r}")


def render_sweep_table(report: dict) -> str:
    """Plain-text table: Dim | %Labeled | Baseline | Pretrained | Improv.%"""
    def cell(rec):
        if rec["std"] is None:
            return f"{rec['mean']:.4f}"
        return f"{rec['mean']:.4f} ± {rec['std']:.4f}"

    header = f"{'Dim':>4}  {'%Labeled':>8}  {'Baseline':>19}  " \
             f"{'Pretrained':>19}  {'Improv.%':>9}"
    lines = [header, "-" * len(header)]
    for row in report["rows"]:
        lines.append(
            f"{report['dim']:>4}  {row['fraction'] * 100:>7.0f}%  "
            f"{cell(row['baseline']):>19}  {cell(row['pretrained']):>19}  "
            f"{row['improvement_pct']:>+8.2f}%"
        )
    return "\n".join(lines)
