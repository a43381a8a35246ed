import numpy as np
import pytest
from helpers import (
    brute_force_edges,
    brute_force_multiplicities,
    cubic_structure,
    random_structure,
    rocksalt_structure,
)

from crystalembed.errors import ValidationError
from crystalembed.periodic_graph import (
    all_unordered_pairs,
    build_periodic_graph,
    multiplicity_targets,
)


class TestBuildPeriodicGraph:
    def test_short_cutoff_yields_no_edges(self):
        g = build_periodic_graph(cubic_structure(a=1.0), cutoff=0.5)
        assert g.num_edges == 0

    def test_simple_cubic_six_self_edges(self):
        s = cubic_structure(a=1.0)
        g = build_periodic_graph(s, cutoff=1.05)
        assert g.edge_multiset() == brute_force_edges(s, 1.05)
        assert g.num_edges == 6
        assert np.allclose(g.distances, 1.0)
        offsets = {tuple(o) for o in g.offsets}
        assert offsets == {
            (1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1),
        }

    def test_rocksalt_cross_edges(self):
        s = rocksalt_structure(a=1.0)
        g = build_periodic_graph(s, cutoff=0.9)
        assert g.edge_multiset() == brute_force_edges(s, 0.9)
        na_cl = (g.src == 0) & (g.dst == 1)
        cl_na = (g.src == 1) & (g.dst == 0)
        assert na_cl.sum() == 8 and cl_na.sum() == 8
        assert np.allclose(g.distances, np.sqrt(3.0) / 2.0)

    def test_direction_unit_norm(self):
        g = build_periodic_graph(rocksalt_structure(), cutoff=0.9)
        assert np.allclose(np.linalg.norm(g.directions, axis=1), 1.0, atol=1e-9)

    def test_reversal_closure(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            s = random_structure(rng, max_sites=4)
            g = build_periodic_graph(s, cutoff=4.0)
            edges = g.edge_multiset()
            mirrored = {(j, i, tuple(-x for x in o)): c for (i, j, o), c in edges.items()}
            assert edges == mirrored

    def test_matches_oracle_on_random_cells(self):
        rng = np.random.default_rng(7)
        for k in range(10):
            s = random_structure(rng, max_sites=4, skewed=(k % 2 == 0))
            g = build_periodic_graph(s, cutoff=3.5)
            assert g.edge_multiset() == brute_force_edges(s, 3.5), s.lattice

    def test_bad_cutoff_rejected(self):
        with pytest.raises(ValidationError):
            build_periodic_graph(cubic_structure(), cutoff=0.0)
        with pytest.raises(ValidationError):
            build_periodic_graph(cubic_structure(), cutoff=-2.0)


class TestMultiplicityTargets:
    def test_cubic_self_class_three(self):
        g = build_periodic_graph(cubic_structure(a=1.0), cutoff=1.05)
        t = multiplicity_targets(g)
        assert t.classes[0, 0] == 3

    def test_rocksalt_clamped_to_five(self):
        g = build_periodic_graph(rocksalt_structure(a=1.0), cutoff=0.9)
        t = multiplicity_targets(g)
        assert t.classes[0, 1] == 5 and t.classes[1, 0] == 5

    def test_empty_graph_all_zero(self):
        g = build_periodic_graph(cubic_structure(a=1.0), cutoff=0.5)
        assert np.array_equal(multiplicity_targets(g).classes, np.zeros((1, 1), int))

    def test_matches_oracle_counts(self):
        rng = np.random.default_rng(13)
        for _ in range(8):
            s = random_structure(rng, max_sites=5)
            g = build_periodic_graph(s, cutoff=3.0)
            expected = brute_force_multiplicities(
                brute_force_edges(s, 3.0), s.num_sites
            )
            assert np.array_equal(multiplicity_targets(g).classes, expected)

    def test_symmetry_always(self):
        rng = np.random.default_rng(17)
        for _ in range(5):
            s = random_structure(rng, max_sites=6, skewed=True)
            t = multiplicity_targets(build_periodic_graph(s, cutoff=3.0))
            assert np.array_equal(t.classes, t.classes.T)
            assert t.classes.max() <= 5


def test_all_unordered_pairs_order():
    assert all_unordered_pairs(3) == [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)]


def test_unordered_keys_pair_up():
    g = build_periodic_graph(rocksalt_structure(a=1.0), cutoff=0.9)
    keys = [tuple(k) for k in g.unordered_keys()]
    from collections import Counter

    counts = Counter(keys)
    assert all(c == 2 for c in counts.values())
    assert len(counts) == g.num_edges // 2
