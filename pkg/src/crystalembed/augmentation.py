"""Stochastic graph corruption: node masking and edge dropping.

Views record exactly what was hidden, so the clean reconstruction targets
and the original edge multiset stay recoverable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .periodic_graph import PeriodicGraph, _lex_order


@dataclass
class DroppedEdges:
    """Directed edges removed from a view (both halves of each unordered pair)."""

    src: np.ndarray
    dst: np.ndarray
    offsets: np.ndarray
    distances: np.ndarray
    directions: np.ndarray

    def __len__(self):
        return len(self.src)


@dataclass
class AugmentedView:
    graph: PeriodicGraph
    masked_nodes: np.ndarray  # sorted node indices
    dropped: DroppedEdges
    seed: int

    @property
    def masked_set(self) -> frozenset:
        return frozenset(int(i) for i in self.masked_nodes)


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def augment(
    g: PeriodicGraph, mask_ratio: float, drop_ratio: float, seed: int
) -> AugmentedView:
    """One corrupted view of g, deterministic for a fixed seed.

    round(mask_ratio * N) nodes are flagged as masked (at least one whenever
    mask_ratio > 0); round(drop_ratio * unordered-edge-count) unordered edges
    are removed together with their mirrors.
    """
    for name, r in (("mask_ratio", mask_ratio), ("drop_ratio", drop_ratio)):
        if not (0.0 <= r < 1.0):
            raise ValidationError(f"{name} must lie in [0, 1), got {r}")
    rng = np.random.default_rng(int(seed) & (2**64 - 1))

    n_mask = _round_half_up(mask_ratio * g.num_nodes)
    if mask_ratio > 0.0 and n_mask == 0:
        n_mask = 1
    masked = np.sort(rng.choice(g.num_nodes, size=n_mask, replace=False))

    if g.num_edges:
        keys = g.unordered_keys()
        groups, inverse = np.unique(keys, axis=0, return_inverse=True)
        n_groups = len(groups)
        n_drop = _round_half_up(drop_ratio * n_groups)
        drop_ids = rng.choice(n_groups, size=n_drop, replace=False)
        keep = ~np.isin(inverse, drop_ids)
    else:
        keep = np.zeros(0, dtype=bool)

    view_graph = PeriodicGraph(
        num_nodes=g.num_nodes,
        atomic_numbers=g.atomic_numbers.copy(),
        src=g.src[keep],
        dst=g.dst[keep],
        offsets=g.offsets[keep],
        distances=g.distances[keep],
        directions=g.directions[keep],
        cutoff=g.cutoff,
    )
    dropped = DroppedEdges(
        src=g.src[~keep],
        dst=g.dst[~keep],
        offsets=g.offsets[~keep],
        distances=g.distances[~keep],
        directions=g.directions[~keep],
    )
    return AugmentedView(
        graph=view_graph,
        masked_nodes=masked.astype(np.int64),
        dropped=dropped,
        seed=int(seed),
    )


def two_views(
    g: PeriodicGraph, mask_ratio: float, drop_ratio: float, seed: int
) -> tuple[AugmentedView, AugmentedView]:
    """Two independent views from deterministic sub-seeds of `seed`."""
    words = np.random.SeedSequence(int(seed) & (2**64 - 1)).generate_state(
        2, dtype=np.uint64
    )
    return (
        augment(g, mask_ratio, drop_ratio, int(words[0])),
        augment(g, mask_ratio, drop_ratio, int(words[1])),
    )


def identity_view(g: PeriodicGraph) -> AugmentedView:
    """Uncorrupted view: nothing masked, nothing dropped."""
    return augment(g, 0.0, 0.0, seed=0)


def reconstruct_original(view: AugmentedView) -> PeriodicGraph:
    """Merge the dropped edges back; returns the original graph exactly."""
    g = view.graph
    src = np.concatenate([g.src, view.dropped.src])
    dst = np.concatenate([g.dst, view.dropped.dst])
    offsets = np.concatenate([g.offsets, view.dropped.offsets])
    distances = np.concatenate([g.distances, view.dropped.distances])
    directions = np.concatenate([g.directions, view.dropped.directions])
    order = _lex_order(src, dst, offsets)
    return PeriodicGraph(
        num_nodes=g.num_nodes,
        atomic_numbers=g.atomic_numbers.copy(),
        src=src[order],
        dst=dst[order],
        offsets=offsets[order],
        distances=distances[order],
        directions=directions[order],
        cutoff=g.cutoff,
    )
