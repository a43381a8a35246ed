import json

import numpy as np
import pytest

from crystalembed.checkpoint import load_checkpoint
from crystalembed.errors import ParseError, ValidationError
from crystalembed.model import init_model_params
from crystalembed.optim import AdamState
from crystalembed.periodic_graph import build_periodic_graph
from crystalembed.synthetic import make_pretraining_structures
from crystalembed.training import (
    PretrainConfig,
    extract_embeddings,
    load_state,
    pretrain,
    pretrain_losses,
    pretrain_step,
    save_state,
)

from helpers import cubic_structure, rocksalt_structure

FAST = dict(dim=8, num_layers=1, rbf_count=4, cutoff=5.0, batch_size=4)


def fast_cfg(**overrides):
    kwargs = {**FAST, "epochs": 3, "seed": 7, **overrides}
    return PretrainConfig(**kwargs)


def fast_model(cfg, seed=0):
    return init_model_params(
        np.random.default_rng(seed), cfg.dim, cfg.num_layers, cfg.rbf_count,
        cfg.cutoff, cfg.temperature, cfg.class_weights,
    )


@pytest.fixture(scope="module")
def graphs():
    structs = make_pretraining_structures(8, seed=1)
    return [build_periodic_graph(s, 5.0) for s in structs]


class TestConfig:
    def test_defaults_match_published_recipe(self):
        cfg = PretrainConfig()
        assert (cfg.alpha, cfg.beta, cfg.gamma) == (225.0, 4.0, 3.0)
        assert cfg.lr == 3e-2
        assert cfg.batch_size == 128
        assert cfg.epochs == 100

    def test_round_trip(self):
        cfg = fast_cfg(alpha=1.5, class_weights=(0.2, 1, 1, 1, 1, 2))
        assert PretrainConfig.from_dict(cfg.to_dict()) == cfg

    def test_rejections(self):
        with pytest.raises(ValidationError):
            fast_cfg(alpha=-1.0)
        with pytest.raises(ValidationError):
            fast_cfg(batch_size=1)
        with pytest.raises(ValidationError):
            fast_cfg(epochs=0)
        with pytest.raises(ValidationError):
            fast_cfg(mask_ratio=1.0)
        with pytest.raises(ValidationError):
            fast_cfg(node_loss_scope="some")
        with pytest.raises(ValidationError):
            fast_cfg(node_loss_scope="masked", mask_ratio=0.0)
        with pytest.raises(ValidationError):
            PretrainConfig.from_dict({"dim": 8, "bogus": 1})


class TestPretrainStep:
    def test_zero_weights_leave_params_unchanged(self, graphs):
        cfg = fast_cfg(alpha=0.0, beta=0.0, gamma=0.0)
        model = fast_model(cfg)
        opt = AdamState.for_params(model.tensors(), lr=cfg.lr)
        before = {n: t.data.copy() for n, t in model.named().items()}
        losses = pretrain_step(graphs[:2], model, opt, cfg, [0, 1])
        assert losses["L_total"] == 0.0
        for n, t in model.named().items():
            assert np.array_equal(t.data, before[n]), n

    def test_total_is_weighted_sum(self, graphs):
        cfg = fast_cfg()
        model = fast_model(cfg)
        ln, la, li, total = pretrain_losses(graphs[:3], model, cfg, [5, 6, 7])
        expected = 225.0 * ln.data + 4.0 * la.data + 3.0 * li.data
        assert abs(total.data - expected) < 1e-12

    def test_deterministic_given_seeds(self, graphs):
        cfg = fast_cfg()

        def run():
            model = fast_model(cfg, seed=3)
            opt = AdamState.for_params(model.tensors(), lr=cfg.lr)
            return pretrain_step(graphs[:4], model, opt, cfg, [9, 8, 7, 6])

        assert run() == run()

    def test_batch_of_one_rejected(self, graphs):
        cfg = fast_cfg()
        model = fast_model(cfg)
        opt = AdamState.for_params(model.tensors(), lr=cfg.lr)
        with pytest.raises(ValidationError):
            pretrain_step(graphs[:1], model, opt, cfg, [0])

    def test_masked_scope_runs(self, graphs):
        cfg = fast_cfg(node_loss_scope="masked", mask_ratio=0.5)
        model = fast_model(cfg)
        opt = AdamState.for_params(model.tensors(), lr=cfg.lr)
        losses = pretrain_step(graphs[:2], model, opt, cfg, [0, 1])
        assert np.isfinite(losses["L_total"])


class TestPretrain:
    def test_single_batch_single_epoch_is_one_step(self, graphs, tmp_path):
        cfg = fast_cfg(epochs=1, batch_size=64)
        res = pretrain(graphs, cfg, tmp_path / "run")
        assert res.opt.step == 1

    def test_log_and_history_shapes(self, graphs, tmp_path):
        cfg = fast_cfg(epochs=3)
        res = pretrain(graphs, cfg, tmp_path / "run")
        lines = [json.loads(x) for x in open(res.log_path)]
        assert [rec["epoch"] for rec in lines] == [1, 2, 3]
        for rec in lines:
            assert set(rec) == {"epoch", "L_node", "L_adj", "L_infonce",
                                "L_total", "wall_ms"}
        assert all("wall_ms" not in rec for rec in res.history)
        assert len(res.history) == 3

    def test_loss_decreases_on_tiny_corpus(self, graphs, tmp_path):
        cfg = fast_cfg(epochs=10)
        res = pretrain(graphs, cfg, tmp_path / "run")
        assert res.history[-1]["L_total"] < res.history[0]["L_total"]

    def test_checkpoints_round_trip(self, graphs, tmp_path):
        cfg = fast_cfg()
        res = pretrain(graphs, cfg, tmp_path / "run")
        model, opt, cfg2, epoch, history = load_state(res.final_path)
        assert epoch == cfg.epochs
        assert cfg2 == cfg
        assert history == res.history
        assert opt.step == res.opt.step
        for name, t in res.model.named().items():
            assert np.array_equal(model.named()[name].data, t.data)
            assert np.array_equal(opt.m[name], res.opt.m[name])

    def test_resume_reproduces_uninterrupted_run(self, graphs, tmp_path):
        full = pretrain(graphs, fast_cfg(epochs=6), tmp_path / "full")
        part = pretrain(graphs, fast_cfg(epochs=3), tmp_path / "part")
        resumed = pretrain(graphs, fast_cfg(epochs=6), tmp_path / "resumed",
                           resume_from=part.final_path)
        assert resumed.history == full.history
        assert (open(resumed.final_path, "rb").read()
                == open(full.final_path, "rb").read())

    def test_resume_rejects_changed_config(self, graphs, tmp_path):
        part = pretrain(graphs, fast_cfg(epochs=2), tmp_path / "part")
        with pytest.raises(ValidationError):
            pretrain(graphs, fast_cfg(epochs=4, lr=1e-3), tmp_path / "bad",
                     resume_from=part.final_path)

    def test_two_runs_identical_logs(self, graphs, tmp_path):
        cfg = fast_cfg(epochs=4)
        a = pretrain(graphs, cfg, tmp_path / "a")
        b = pretrain(graphs, cfg, tmp_path / "b")

        def stripped(path):
            recs = [json.loads(x) for x in open(path)]
            for rec in recs:
                rec.pop("wall_ms")
            return recs

        assert stripped(a.log_path) == stripped(b.log_path)
        assert (open(a.final_path, "rb").read()
                == open(b.final_path, "rb").read())

    def test_empty_and_singleton_dataset_rejected(self, graphs, tmp_path):
        with pytest.raises(ValidationError):
            pretrain([], fast_cfg(), tmp_path / "x")
        with pytest.raises(ValidationError):
            pretrain(graphs[:1], fast_cfg(), tmp_path / "y")

    def test_trailing_singleton_folded_into_last_batch(self, graphs, tmp_path):
        # 5 graphs with batch 2 -> batches of 2, 2+1
        cfg = fast_cfg(epochs=1, batch_size=2)
        res = pretrain(graphs[:5], cfg, tmp_path / "run")
        assert res.opt.step == 2


class TestSaveLoadState:
    def test_corrupt_header_rejected(self, tmp_path):
        path = tmp_path / "bad.ckpt"
        path.write_bytes(b"not json\n\x00\x01")
        with pytest.raises(ParseError):
            load_state(path)

    def test_truncated_body_rejected(self, graphs, tmp_path):
        cfg = fast_cfg(epochs=1)
        res = pretrain(graphs, cfg, tmp_path / "run")
        raw = open(res.final_path, "rb").read()
        clipped = tmp_path / "clipped.ckpt"
        clipped.write_bytes(raw[:-16])
        with pytest.raises(ParseError):
            load_state(clipped)

    def test_missing_array_rejected(self, tmp_path, graphs):
        cfg = fast_cfg(epochs=1)
        model = fast_model(cfg)
        opt = AdamState.for_params(model.tensors(), lr=cfg.lr)
        path = tmp_path / "s.ckpt"
        save_state(path, model, opt, cfg, 1, [])
        ck = load_checkpoint(path)
        assert "encoder.atom_table" in ck.arrays


class TestExtractEmbeddings:
    def test_unit_rows_and_counts(self, graphs):
        cfg = fast_cfg()
        model = fast_model(cfg)
        table = extract_embeddings(model, graphs)
        present = table.present
        zs = np.concatenate([g.atomic_numbers for g in graphs])
        expected_counts = np.bincount(zs - 1, minlength=118)
        assert np.array_equal(table.counts, expected_counts)
        norms = np.linalg.norm(table.vectors[present], axis=1)
        assert np.max(np.abs(norms - 1.0)) < 1e-9
        assert np.all(table.vectors[~present] == 0.0)

    def test_single_occurrence_row(self):
        cfg = fast_cfg()
        model = fast_model(cfg)
        g = build_periodic_graph(rocksalt_structure(3.0), cutoff=4.0)
        from crystalembed.encoder import encode_graph

        table = extract_embeddings(model, [g])
        h = encode_graph(model.encoder, g).data
        for node, z in enumerate(g.atomic_numbers):
            expected = h[node] / np.linalg.norm(h[node])
            assert np.allclose(table.row(int(z)), expected, atol=1e-12)

    def test_identical_occurrences_mean(self):
        cfg = fast_cfg()
        model = fast_model(cfg)
        g = build_periodic_graph(cubic_structure(3.0, numbers=(29,)), cutoff=4.0)
        table = extract_embeddings(model, [g, g])
        assert table.counts[28] == 2
        from crystalembed.encoder import encode_graph

        h = encode_graph(model.encoder, g).data[0]
        assert np.allclose(table.row(29), h / np.linalg.norm(h), atol=1e-12)

    def test_empty_dataset_rejected(self):
        cfg = fast_cfg()
        with pytest.raises(ValidationError):
            extract_embeddings(fast_model(cfg), [])
