"""Optimizer trace oracle, prototype lifecycle, and the training loop."""

import numpy as np
import pytest

from prototraj.embedding import CacheProvider, HashProvider
from prototraj.errors import CacheMissError, DataError, NumericError
from prototraj.ingest import Document, LabeledCorpus, multi_hot
from prototraj.losses import LossBreakdown, LossConfig
from prototraj.metrics import pairwise_distances
from prototraj.model import ModelState, parameter_dict, predict_embedded
from prototraj.prototypes import PrototypeSet, SimilarityConfig
from prototraj.synthetic import SynthSpec, generate
from prototraj.trainer import (
    AdamState,
    TrainConfig,
    adam_step,
    embed_unique,
    init_prototypes,
    project_prototypes,
    score_prototype_sentiments,
    train,
)
from prototraj import backbone as bb

# Hand-derived with 50-digit decimal arithmetic: theta_0 = 0.5, lr = 1e-4,
# default betas/epsilon, gradient sequence below, one value per step.
ADAM_GRADS = [0.3, -0.2, 0.5, -0.4, 0.1]
ADAM_TRACE = [
    0.49990000000333334,
    0.4998855479509286,
    0.4998271877955938,
    0.499818745104805,
    0.4998043114081868,
]


def corpus_from_sentences(groups, labels, num_classes=2):
    docs = [
        Document(list(sentences), multi_hot(label, num_classes), source_id=f"d{i}")
        for i, (sentences, label) in enumerate(zip(groups, labels))
    ]
    return LabeledCorpus(documents=docs, num_classes=num_classes)


class TestAdam:
    def test_create_initializes_zero_moments(self):
        params = {"a": np.ones((2, 2)), "b": np.zeros(3)}
        state = AdamState.create(params, lr=0.01)
        assert state.t == 0
        assert not state.m["a"].any() and not state.v["b"].any()
        assert state.m["a"].shape == (2, 2)

    def test_validation(self):
        with pytest.raises(NumericError):
            AdamState(lr=-1.0)
        with pytest.raises(NumericError):
            AdamState(beta1=1.0)
        with pytest.raises(NumericError):
            AdamState(epsilon=0.0)

    def test_zero_gradient_leaves_parameters_unchanged(self):
        params = {"w": np.array([1.0, -2.0, 3.0])}
        state = AdamState.create(params, lr=0.5)
        adam_step(params, {"w": np.zeros(3)}, state)
        assert params["w"].tolist() == [1.0, -2.0, 3.0]
        assert state.t == 1

    def test_first_step_magnitude_is_learning_rate(self):
        params = {"w": np.array([0.5])}
        state = AdamState.create(params, lr=1e-4)
        adam_step(params, {"w": np.array([0.3])}, state)
        delta = 0.5 - params["w"][0]
        assert abs(delta - 1e-4) <= 1e-4 * 1e-6

    def test_five_step_trace_matches_decimal_oracle(self):
        params = {"w": np.array([0.5])}
        state = AdamState.create(params, lr=1e-4)
        for g, want in zip(ADAM_GRADS, ADAM_TRACE):
            adam_step(params, {"w": np.array([g])}, state)
            assert abs(params["w"][0] - want) < 1e-12

    def test_moments_decay_after_zero_gradient(self):
        params = {"w": np.array([0.5])}
        state = AdamState.create(params)
        adam_step(params, {"w": np.array([0.3])}, state)
        assert state.m["w"][0] == pytest.approx(0.03, abs=1e-15)
        adam_step(params, {"w": np.array([0.0])}, state)
        assert state.m["w"][0] == pytest.approx(0.027, abs=1e-15)

    def test_updates_apply_in_place(self):
        arr = np.array([1.0, 2.0])
        params = {"w": arr}
        state = AdamState.create(params, lr=0.1)
        adam_step(params, {"w": np.array([1.0, -1.0])}, state)
        assert params["w"] is arr
        assert arr[0] < 1.0 < 2.0 < arr[1] + 0.2


class TestTrainConfig:
    def test_defaults_valid(self):
        cfg = TrainConfig()
        assert cfg.lr == 1e-4 and cfg.patience == 10

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"epochs": 0},
            {"batch_size": 0},
            {"projection_period": 0},
            {"num_prototypes": 1},
            {"validation_fraction": 1.0},
            {"dropout": 1.0},
            {"lr": -0.1},
            {"proto_sample": 0},
        ],
    )
    def test_rejects_bad_values(self, kwargs):
        with pytest.raises(NumericError):
            TrainConfig(**kwargs)


class TestEmbedUnique:
    def test_deduplicates(self):
        provider = HashProvider(dim=8, seed=0)
        table = embed_unique(["a b", "c d", "a b"], provider)
        assert sorted(table) == ["a b", "c d"]
        assert np.array_equal(table["a b"], provider.embed("a b"))

    def test_reports_every_miss_at_once(self):
        provider = CacheProvider({"known": np.zeros(4)}, dim=4)
        with pytest.raises(CacheMissError) as exc:
            embed_unique(["known", "lost one", "lost two", "lost one"], provider)
        assert exc.value.sentences == ["lost one", "lost two"]


class TestInitPrototypes:
    def test_exact_cover_when_k_equals_sentences(self):
        entries = {
            "alpha": np.array([0.0, 0.0]),
            "beta": np.array([10.0, 0.0]),
            "gamma": np.array([0.0, 10.0]),
        }
        provider = CacheProvider(entries, dim=2)
        corpus = corpus_from_sentences([["alpha"], ["beta"], ["gamma"]], [0, 1, 0])
        p = init_prototypes(corpus, provider, k=3, seed=0)
        got = {tuple(v) for v in p.vectors}
        assert got == {(0.0, 0.0), (10.0, 0.0), (0.0, 10.0)}
        assert sorted(p.texts) == ["alpha", "beta", "gamma"]

    def test_two_blobs_one_medoid_each(self):
        entries = {}
        groups = []
        rng = np.random.default_rng(7)
        for i in range(6):
            entries[f"low {i}"] = np.array([0.0, 0.0]) + rng.uniform(-0.01, 0.01, 2)
            entries[f"high {i}"] = np.array([10.0, 10.0]) + rng.uniform(-0.01, 0.01, 2)
            groups.append([f"low {i}"])
            groups.append([f"high {i}"])
        provider = CacheProvider(entries, dim=2)
        corpus = corpus_from_sentences(groups, [0, 1] * 6)
        p = init_prototypes(corpus, provider, k=2, seed=3)
        sides = sorted(v[0] > 5 for v in p.vectors)
        assert sides == [False, True]

    def test_seed_determinism(self):
        corpus = generate(SynthSpec(num_documents=20, seed=1))
        provider = HashProvider(dim=16, seed=0)
        a = init_prototypes(corpus, provider, k=4, seed=9)
        b = init_prototypes(corpus, provider, k=4, seed=9)
        assert np.array_equal(a.vectors, b.vectors)
        assert a.texts == b.texts

    def test_prototypes_are_sentence_embeddings(self):
        corpus = generate(SynthSpec(num_documents=15, seed=2))
        provider = HashProvider(dim=16, seed=0)
        p = init_prototypes(corpus, provider, k=5, seed=0)
        for vec, text in zip(p.vectors, p.texts):
            assert np.array_equal(vec, provider.embed(text))

    def test_k_larger_than_corpus(self):
        corpus = corpus_from_sentences([["alpha"], ["beta"]], [0, 1])
        provider = HashProvider(dim=8, seed=0)
        with pytest.raises(DataError):
            init_prototypes(corpus, provider, k=3, seed=0)


class TestProjection:
    def _setup(self, rng, n=10, k=3, dim=4):
        embeddings = rng.standard_normal((n, dim))
        texts = [f"s{i}" for i in range(n)]
        p = PrototypeSet(rng.standard_normal((k, dim)), texts=["x"] * k)
        return p, embeddings, texts

    def test_matches_exhaustive_search(self, rng):
        p, embeddings, texts = self._setup(rng)
        before = p.vectors.copy()
        project_prototypes(p, embeddings, texts)
        for row, vec in enumerate(before):
            best = min(
                range(len(texts)),
                key=lambda i: (float(np.linalg.norm(vec - embeddings[i])), i),
            )
            assert np.array_equal(p.vectors[row], embeddings[best])
            assert p.texts[row] == texts[best]

    def test_fixed_point(self, rng):
        p, embeddings, texts = self._setup(rng)
        p.vectors[1] = embeddings[4]
        project_prototypes(p, embeddings, texts)
        assert np.array_equal(p.vectors[1], embeddings[4])
        assert p.texts[1] == "s4"

    def test_idempotent(self, rng):
        p, embeddings, texts = self._setup(rng)
        project_prototypes(p, embeddings, texts)
        once = p.vectors.copy()
        project_prototypes(p, embeddings, texts)
        assert np.array_equal(p.vectors, once)

    def test_ties_take_lowest_sentence_index(self):
        v = np.array([1.0, 1.0])
        embeddings = np.stack([v, v, np.array([5.0, 5.0])])
        p = PrototypeSet(np.array([[1.1, 1.0], [4.9, 5.0]]))
        project_prototypes(p, embeddings, ["first", "twin", "far"])
        assert p.texts == ["first", "far"]

    def test_count_mismatch(self, rng):
        p, embeddings, texts = self._setup(rng)
        with pytest.raises(DataError):
            project_prototypes(p, embeddings, texts[:-1])


def small_model(rng, k=3, dim=4, with_texts=True):
    vectors = rng.standard_normal((k, dim))
    texts = [f"proto {i}" for i in range(k)] if with_texts else None
    p = PrototypeSet(vectors, texts=texts)
    net = bb.init_backbone(k, 4, 1, 2, rng)
    return ModelState(p, net, SimilarityConfig(), LossConfig(), metadata={"positive_class": 1})


class TestSentimentScoring:
    def test_scores_match_single_sentence_predictions(self, rng):
        model = small_model(rng)
        scores = score_prototype_sentiments(model)
        assert scores.shape == (3,)
        assert np.all((scores >= 0) & (scores <= 1))
        for k in range(3):
            y_hat, _ = predict_embedded(model, model.prototypes.vectors[k : k + 1])
            assert scores[k] == y_hat[1]
        assert np.array_equal(model.prototypes.sentiment_scores, scores)

    def test_requires_texts(self, rng):
        model = small_model(rng, with_texts=False)
        with pytest.raises(DataError):
            score_prototype_sentiments(model)

    def test_positive_class_out_of_range(self, rng):
        model = small_model(rng)
        model.metadata["positive_class"] = 5
        with pytest.raises(DataError):
            score_prototype_sentiments(model)


def quick_cfg(**overrides):
    base = dict(
        epochs=2,
        batch_size=8,
        projection_period=10,
        num_prototypes=2,
        seed=0,
        patience=3,
        validation_fraction=0.0,
        lr=1e-3,
        hidden_size=4,
        num_layers=1,
        dropout=0.0,
    )
    base.update(overrides)
    return TrainConfig(**base)


class TestTrain:
    provider = HashProvider(dim=16, seed=0)

    def _corpus(self, n=16, seed=0):
        return generate(SynthSpec(num_documents=n, min_sentences=2, max_sentences=3, seed=seed))

    def test_returns_model_and_history(self):
        model, history = train(self._corpus(), self.provider, quick_cfg())
        assert model.num_classes == 2
        assert len(history) == 2
        for row in history:
            assert set(row) == {"epoch", "acc", "div", "proto", "total", "train_acc", "val_acc"}
            for term in ("acc", "div", "proto", "total", "train_acc"):
                assert np.isfinite(row[term])
            assert row["val_acc"] is None
        assert model.metadata["epochs_run"] == 2
        assert model.metadata["history"] == history

    def test_seed_determinism(self):
        corpus = self._corpus()
        a, hist_a = train(corpus, self.provider, quick_cfg(dropout=0.5))
        b, hist_b = train(corpus, self.provider, quick_cfg(dropout=0.5))
        assert hist_a == hist_b
        pa, pb = parameter_dict(a), parameter_dict(b)
        for name in pa:
            assert np.array_equal(pa[name], pb[name])
        assert a.prototypes.texts == b.prototypes.texts

    def test_seed_changes_outcome(self):
        corpus = self._corpus()
        a, _ = train(corpus, self.provider, quick_cfg(seed=1))
        b, _ = train(corpus, self.provider, quick_cfg(seed=2))
        pa, pb = parameter_dict(a), parameter_dict(b)
        assert any(not np.array_equal(pa[name], pb[name]) for name in pa)

    def test_zero_lr_keeps_initialization(self):
        corpus = self._corpus()
        cfg = quick_cfg(lr=0.0, epochs=1)
        model, _ = train(corpus, self.provider, cfg)

        children = np.random.SeedSequence(cfg.seed).spawn(6)
        split_rng = np.random.default_rng(children[0])
        init_seed = int(children[1].generate_state(1)[0])
        net_rng = np.random.default_rng(children[2])
        order = split_rng.permutation(len(corpus.documents))
        train_docs = [corpus.documents[i] for i in order]
        replica = LabeledCorpus(documents=train_docs, num_classes=2)
        want_protos = init_prototypes(replica, self.provider, cfg.num_prototypes, init_seed)
        want_net = bb.init_backbone(cfg.num_prototypes, cfg.hidden_size, cfg.num_layers, 2, net_rng)

        assert np.array_equal(model.prototypes.vectors, want_protos.vectors)
        assert np.array_equal(model.backbone.layers[0].w_x, want_net.layers[0].w_x)
        assert np.array_equal(model.backbone.head_w, want_net.head_w)

    def test_zero_lr_insensitive_to_epoch_count(self):
        corpus = self._corpus()
        a, _ = train(corpus, self.provider, quick_cfg(lr=0.0, epochs=1))
        b, _ = train(corpus, self.provider, quick_cfg(lr=0.0, epochs=3))
        pa, pb = parameter_dict(a), parameter_dict(b)
        for name in pa:
            assert np.array_equal(pa[name], pb[name])

    def test_final_prototypes_sit_on_training_sentences(self):
        corpus = self._corpus(n=20)
        model, _ = train(corpus, self.provider, quick_cfg(num_prototypes=3))
        table = {s: self.provider.embed(s) for s in corpus.all_sentences()}
        pool = np.stack(list(table.values()))
        for vec, text in zip(model.prototypes.vectors, model.prototypes.texts):
            assert np.array_equal(vec, table[text])
        dists = pairwise_distances(model.prototypes.vectors, pool, "euclidean")
        assert np.all(dists.min(axis=1) == 0.0)

    def test_sentiment_scores_populated(self):
        model, _ = train(self._corpus(), self.provider, quick_cfg())
        scores = model.prototypes.sentiment_scores
        assert scores is not None and scores.shape == (2,)
        assert np.all((scores >= 0) & (scores <= 1))

    def test_too_many_prototypes(self):
        corpus = self._corpus(n=3)
        with pytest.raises(DataError):
            train(corpus, self.provider, quick_cfg(num_prototypes=50))

    def test_positive_class_validated(self):
        with pytest.raises(DataError):
            train(self._corpus(), self.provider, quick_cfg(positive_class=7))

    def test_early_stopping_with_validation(self):
        corpus = self._corpus(n=30)
        cfg = quick_cfg(epochs=40, validation_fraction=0.2, patience=1, lr=1e-5)
        model, history = train(corpus, self.provider, cfg)
        assert model.metadata["epochs_run"] < 40
        assert 1 <= model.metadata["best_epoch"] <= model.metadata["epochs_run"]
        assert all(row["val_acc"] is not None for row in history)

    def test_nonfinite_loss_aborts_with_term_name(self, monkeypatch):
        def bad_loss(*args, **kwargs):
            return LossBreakdown(float("nan"), 0.0, 0.0, float("nan")), None, None

        monkeypatch.setattr("prototraj.trainer.total_loss", bad_loss)
        with pytest.raises(NumericError, match="acc"):
            train(self._corpus(), self.provider, quick_cfg())

    def test_prototypes_usually_stay_separated(self):
        hits = 0
        delta = 0.1
        for seed in range(10):
            corpus = self._corpus(seed=seed)
            loss_cfg = LossConfig(alpha=1.0, delta=delta)
            model, _ = train(corpus, self.provider, quick_cfg(seed=seed), loss_cfg=loss_cfg)
            d = pairwise_distances(model.prototypes.vectors, model.prototypes.vectors, "euclidean")
            np.fill_diagonal(d, np.inf)
            if d.min() >= delta:
                hits += 1
        assert hits >= 9
