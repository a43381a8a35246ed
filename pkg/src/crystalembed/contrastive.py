"""Graph-level projection head and the InfoNCE objective.

A graph embedding is the mean of its node embeddings pushed through a
two-layer SiLU MLP. The batch loss treats the two augmented views of the
same structure as a positive pair and every other view in the batch as a
negative; similarity is cosine, scaled by a temperature.
"""

from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .errors import ValidationError


@dataclass
class ProjectorParams:
    w1: Tensor  # (d, d_h)
    b1: Tensor  # (d_h,)
    w2: Tensor  # (d_h, d_z)
    b2: Tensor  # (d_z,)
    temperature: float = 0.1

    def __post_init__(self):
        if self.w1.data.ndim != 2 or self.w2.data.ndim != 2:
            raise ValidationError("projector weights must be matrices")
        if self.w1.data.shape[1] != self.b1.data.shape[0]:
            raise ValidationError("projector hidden bias mismatch")
        if self.w1.data.shape[1] != self.w2.data.shape[0]:
            raise ValidationError("projector layer dims do not chain")
        if self.w2.data.shape[1] != self.b2.data.shape[0]:
            raise ValidationError("projector output bias mismatch")
        if not self.temperature > 0.0:
            raise ValidationError("temperature must be positive")

    def tensors(self) -> list[Tensor]:
        return [self.w1, self.b1, self.w2, self.b2]


def init_projector(
    rng: np.random.Generator,
    dim: int,
    hidden: int | None = None,
    out: int | None = None,
    temperature: float = 0.1,
) -> ProjectorParams:
    hidden = dim if hidden is None else hidden
    out = dim if out is None else out
    return ProjectorParams(
        w1=ag.parameter(rng.normal(0.0, dim ** -0.5, size=(dim, hidden)),
                        "projector.w1"),
        b1=ag.parameter(np.zeros(hidden), "projector.b1"),
        w2=ag.parameter(rng.normal(0.0, hidden ** -0.5, size=(hidden, out)),
                        "projector.w2"),
        b2=ag.parameter(np.zeros(out), "projector.b2"),
        temperature=temperature,
    )


def project(h: Tensor, params: ProjectorParams) -> Tensor:
    """Mean-pool node embeddings and apply the MLP; returns a (1, d_z) row."""
    if h.data.ndim != 2 or h.data.shape[0] < 1:
        raise ValidationError("projection needs at least one node embedding")
    pooled = ag.mean_rows(h)
    hidden = ag.silu(ag.add(ag.matmul(pooled, params.w1), params.b1))
    return ag.add(ag.matmul(hidden, params.w2), params.b2)


def _check_pairing(partner: np.ndarray, rows: int) -> None:
    if partner.shape != (rows,):
        raise ValidationError("pairing must assign one partner per row")
    if partner.min() < 0 or partner.max() >= rows:
        raise ValidationError("pairing index out of range")
    if np.any(partner == np.arange(rows)):
        raise ValidationError("a row cannot be its own positive")
    if not np.array_equal(partner[partner], np.arange(rows)):
        raise ValidationError("pairing must be an involution")


def info_nce(z: Tensor, partner, temperature: float) -> Tensor:
    """Contrastive loss over 2N projected views; mean over all 2N anchors.

    Per anchor i with positive j = partner[i]:
        -log( exp(sim_ij / t) / sum_{k != i} exp(sim_ik / t) )
    with sim = cosine similarity.
    """
    if not temperature > 0.0:
        raise ValidationError("temperature must be positive")
    rows = z.data.shape[0]
    if rows < 4 or rows % 2 != 0:
        raise ValidationError(
            "contrastive batch needs at least two view pairs (4 rows)"
        )
    partner = np.asarray(partner, dtype=np.int64)
    _check_pairing(partner, rows)

    zn = ag.l2_normalize_rows(z)
    sims = ag.scale(ag.matmul(zn, ag.transpose(zn)), 1.0 / temperature)
    anchors = np.arange(rows, dtype=np.int64)
    pos = ag.take(sims, anchors, partner)
    # every column except the diagonal, flattened row by row
    off_rows = np.repeat(anchors, rows - 1)
    off_cols = np.concatenate(
        [np.concatenate([anchors[:i], anchors[i + 1:]]) for i in range(rows)]
    )
    denom = ag.logsumexp_rows(
        ag.reshape(ag.take(sims, off_rows, off_cols), (rows, rows - 1))
    )
    return ag.scale(ag.sum_all(ag.sub(denom, pos)), 1.0 / rows)


def paired_batch_partners(num_pairs: int) -> np.ndarray:
    """Pairing for a batch laid out as [a0, b0, a1, b1, ...]."""
    idx = np.arange(2 * num_pairs)
    return idx ^ 1
