import math

import numpy as np
import pytest

from crystalembed import autograd as ag
from crystalembed.augmentation import augment, identity_view
from crystalembed.encoder import (
    EncoderParams,
    edge_features,
    encode,
    encode_graph,
    init_encoder_params,
    initial_embeddings,
    message_passing,
)
from crystalembed.errors import ValidationError
from crystalembed.periodic_graph import PeriodicGraph, build_periodic_graph
from crystalembed.structures import CrystalStructure

from helpers import cubic_structure


def small_params(seed=0, dim=4, num_layers=2, rbf_count=4, cutoff=4.0):
    rng = np.random.default_rng(seed)
    return init_encoder_params(rng, dim, num_layers, rbf_count, cutoff)


class TestEdgeFeatures:
    def test_peak_at_center(self):
        # centers for K=4, cutoff=4 are 0, 4/3, 8/3, 4
        out = edge_features(np.array([4.0 / 3.0]), np.array([[1.0, 0.0, 0.0]]),
                            rbf_count=4, cutoff=4.0)
        assert out.shape == (1, 7)
        assert abs(out[0, 1] - 1.0) < 1e-15

    def test_direction_passthrough(self):
        out = edge_features(np.array([1.0]), np.array([[0.0, 0.0, 1.0]]),
                            rbf_count=4, cutoff=4.0)
        assert np.array_equal(out[0, -3:], [0.0, 0.0, 1.0])

    def test_hand_evaluation_k4(self):
        # sigma = 1, centers 0, 4/3, 8/3, 4; distance 1
        out = edge_features(np.array([1.0]), np.array([[1.0, 0.0, 0.0]]),
                            rbf_count=4, cutoff=4.0)
        expected = [
            math.exp(-0.5),
            math.exp(-((1.0 - 4.0 / 3.0) ** 2) / 2.0),
            math.exp(-((1.0 - 8.0 / 3.0) ** 2) / 2.0),
            math.exp(-4.5),
        ]
        assert np.allclose(out[0, :4], expected, atol=1e-15)

    def test_out_of_range_distance_rejected(self):
        with pytest.raises(ValidationError):
            edge_features(np.array([4.5]), np.zeros((1, 3)), 4, 4.0)
        with pytest.raises(ValidationError):
            edge_features(np.array([0.0]), np.zeros((1, 3)), 4, 4.0)

    def test_cutoff_boundary_allowed(self):
        out = edge_features(np.array([4.0]), np.array([[0.0, 1.0, 0.0]]), 4, 4.0)
        assert abs(out[0, 3] - 1.0) < 1e-15  # last center sits at the cutoff


class TestInitialEmbeddings:
    def test_rows_come_from_table(self):
        p = small_params()
        h = initial_embeddings(p, np.array([1, 5, 118]))
        assert np.array_equal(h.data[0], p.atom_table.data[0])
        assert np.array_equal(h.data[1], p.atom_table.data[4])
        assert np.array_equal(h.data[2], p.atom_table.data[117])

    def test_masked_row_is_mask_vector(self):
        p = small_params()
        h = initial_embeddings(p, np.array([8, 9, 10]), masked_nodes=[1])
        assert np.array_equal(h.data[1], p.mask_vector.data)
        assert np.array_equal(h.data[0], p.atom_table.data[7])

    def test_mask_vector_receives_gradient(self):
        p = small_params()
        h = initial_embeddings(p, np.array([8, 9]), masked_nodes=[0])
        ag.sum_all(h).backward()
        assert np.array_equal(p.mask_vector.grad, np.ones(p.dim))
        assert np.array_equal(p.atom_table.grad[7], np.zeros(p.dim))
        assert np.array_equal(p.atom_table.grad[8], np.ones(p.dim))

    def test_bad_inputs(self):
        p = small_params()
        with pytest.raises(ValidationError):
            initial_embeddings(p, np.array([0]))
        with pytest.raises(ValidationError):
            initial_embeddings(p, np.array([119]))
        with pytest.raises(ValidationError):
            initial_embeddings(p, np.array([1, 2]), masked_nodes=[5])


class TestEncode:
    def test_no_edges_leaves_initial_state(self):
        p = small_params()
        g = PeriodicGraph(
            num_nodes=2,
            atomic_numbers=np.array([6, 7]),
            src=np.zeros(0, dtype=np.int64),
            dst=np.zeros(0, dtype=np.int64),
            offsets=np.zeros((0, 3), dtype=np.int64),
            distances=np.zeros(0),
            directions=np.zeros((0, 3)),
            cutoff=p.cutoff,
        )
        h = encode_graph(p, g)
        h0 = initial_embeddings(p, g.atomic_numbers)
        assert np.array_equal(h.data, h0.data)

    def test_isolated_node_keeps_initial_state(self):
        # a = 10 puts both atoms out of range of everything
        p = small_params(cutoff=4.0)
        s = cubic_structure(10.0, numbers=(6, 7),
                            coords=[[0.0, 0.0, 0.0], [0.5, 0.5, 0.5]])
        g = build_periodic_graph(s, cutoff=4.0)
        assert g.src.size == 0
        h = encode_graph(p, g)
        assert np.array_equal(h.data, initial_embeddings(p, g.atomic_numbers).data)

    def test_permutation_equivariance(self):
        p = small_params(seed=3)
        lattice = 4.0 * np.eye(3)
        frac = np.array([
            [0.0, 0.0, 0.0],
            [0.45, 0.1, 0.2],
            [0.2, 0.6, 0.3],
            [0.7, 0.7, 0.9],
        ])
        numbers = np.array([6, 8, 11, 17])
        perm = np.array([2, 0, 3, 1])
        s1 = CrystalStructure(lattice, frac, numbers)
        s2 = CrystalStructure(lattice, frac[perm], numbers[perm])
        h1 = encode_graph(p, build_periodic_graph(s1, cutoff=4.0))
        h2 = encode_graph(p, build_periodic_graph(s2, cutoff=4.0))
        # h2 row k describes original site perm[k]; summation order over
        # incoming edges differs, so compare to addition roundoff
        assert np.max(np.abs(h2.data - h1.data[perm])) < 1e-12

    def test_symmetric_cell_equal_embeddings(self):
        # two identical atoms on interpenetrating cubic sublattices; each
        # sees the same environment, so their embeddings must agree
        p = small_params(seed=5)
        s = CrystalStructure(
            4.0 * np.eye(3),
            np.array([[0.0, 0.0, 0.0], [0.5, 0.5, 0.5]]),
            np.array([11, 11]),
        )
        h = encode_graph(p, build_periodic_graph(s, cutoff=4.0))
        assert np.max(np.abs(h.data[0] - h.data[1])) < 1e-9

    def test_masking_changes_output(self):
        p = small_params(seed=1)
        g = build_periodic_graph(cubic_structure(3.0, numbers=(11,)), cutoff=4.0)
        plain = encode_graph(p, g)
        masked = encode_graph(p, g, masked_nodes=[0])
        assert not np.allclose(plain.data, masked.data)

    def test_encode_view_matches_encode_graph(self):
        p = small_params(seed=2)
        s = CrystalStructure(
            4.0 * np.eye(3),
            np.array([[0.0, 0.0, 0.0], [0.5, 0.5, 0.5], [0.25, 0.25, 0.75]]),
            np.array([11, 17, 8]),
        )
        g = build_periodic_graph(s, cutoff=4.0)
        view = augment(g, mask_ratio=0.4, drop_ratio=0.2, seed=9)
        assert np.array_equal(
            encode(p, view).data,
            encode_graph(p, view.graph, view.masked_nodes).data,
        )

    def test_identity_view_encodes_like_plain_graph(self):
        p = small_params(seed=2)
        g = build_periodic_graph(cubic_structure(3.0, numbers=(26,)), cutoff=4.0)
        assert np.array_equal(encode(p, identity_view(g)).data,
                              encode_graph(p, g).data)

    def test_deterministic_init_and_encode(self):
        g = build_periodic_graph(cubic_structure(3.0, numbers=(13,)), cutoff=4.0)
        a = encode_graph(small_params(seed=7), g).data
        b = encode_graph(small_params(seed=7), g).data
        assert np.array_equal(a, b)

    def test_shape_and_finiteness(self):
        p = small_params()
        s = CrystalStructure(
            3.5 * np.eye(3),
            np.array([[0.0, 0.0, 0.0], [0.5, 0.5, 0.0], [0.0, 0.5, 0.5]]),
            np.array([3, 9, 9]),
        )
        h = encode_graph(p, build_periodic_graph(s, cutoff=4.0))
        assert h.data.shape == (3, p.dim)
        assert np.all(np.isfinite(h.data))


class TestEncoderGradients:
    def test_grad_check_three_atom_graph(self):
        p = small_params(seed=11, dim=3, num_layers=2, rbf_count=4, cutoff=4.0)
        s = CrystalStructure(
            3.0 * np.eye(3),
            np.array([[0.0, 0.0, 0.0], [0.5, 0.5, 0.0], [0.1, 0.2, 0.6]]),
            np.array([6, 8, 14]),
        )
        g = build_periodic_graph(s, cutoff=4.0)
        mix = np.random.default_rng(0).normal(size=(3, 3))

        def f():
            return ag.sum_all(ag.mul(encode_graph(p, g, masked_nodes=[1]),
                                     ag.constant(mix)))

        err = ag.grad_check(f, p.tensors(), h=1e-5, floor=1e-3)
        assert err < 1e-4, err

    def test_message_passing_rejects_bad_h0(self):
        p = small_params()
        g = build_periodic_graph(cubic_structure(3.0, numbers=(11,)), cutoff=4.0)
        with pytest.raises(ValidationError):
            message_passing(p, g, ag.constant(np.zeros((2, p.dim))))


class TestParamValidation:
    def test_wrong_table_shape_rejected(self):
        rng = np.random.default_rng(0)
        with pytest.raises(ValidationError):
            EncoderParams(
                atom_table=ag.parameter(rng.normal(size=(117, 4)), "t"),
                mask_vector=ag.parameter(rng.normal(size=4), "m"),
                layers=[],
                dim=4,
            )

    def test_init_shapes(self):
        p = small_params(dim=5, num_layers=3, rbf_count=6, cutoff=5.0)
        assert p.num_layers == 3
        assert p.edge_dim == 9
        assert p.atom_table.data.shape == (118, 5)
        in_dim = 2 * 5 + 9
        for layer in p.layers:
            assert layer.msg_w1.data.shape == (in_dim, 5)
            assert layer.gate_w2.data.shape == (5, 5)
        names = [t.name for t in p.tensors()]
        assert len(names) == len(set(names))
