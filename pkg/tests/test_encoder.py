import pytest
import torch

from multirep.backends import TinyTransformerEncoder
from multirep.chunker import ChunkPlan, chunk
from multirep.encoder import (
    ChunkTooLongError,
    DimensionMismatchError,
    EncoderConfig,
    FeatureLayout,
    assemble_features,
    build_encoder,
    encode_content,
    encode_context,
)


@pytest.fixture
def backend():
    return TinyTransformerEncoder(
        vocab_size=256, hidden_dim=32, layers=2, heads=4, max_positions=64, seed=5
    )


def token_chunks(backend, n_tokens, window=20, overlap=4, max_chunks=None):
    text = " ".join(f"word{i}" for i in range(n_tokens))
    ids = backend.tokenize(text)
    return chunk(ids, ChunkPlan(window, overlap, max_chunks))


class TestEncoderConfig:
    def test_defaults_describe_base_scale(self):
        cfg = EncoderConfig()
        assert (cfg.layers, cfg.hidden_dim, cfg.max_positions) == (12, 768, 512)

    def test_validation(self):
        with pytest.raises(ValueError):
            EncoderConfig(layers=0)

    def test_build_scratch(self):
        enc = build_encoder(EncoderConfig(layers=1, hidden_dim=16, heads=2, vocab=128))
        assert enc.hidden_dim == 16
        assert enc.trainable

    def test_build_frozen(self):
        enc = build_encoder(EncoderConfig(layers=1, hidden_dim=16, heads=2, vocab=128, trainable=False))
        assert not enc.trainable

    def test_pretrained_dispatch(self, monkeypatch):
        import multirep.backends as backends

        captured = {}

        class Stub:
            def __init__(self, name, trainable):
                captured["name"] = name
                captured["trainable"] = trainable

        monkeypatch.setattr(backends, "PretrainedEncoder", Stub)
        build_encoder(EncoderConfig(vocab="hf:some-checkpoint", trainable=False))
        assert captured == {"name": "some-checkpoint", "trainable": False}


class TestEncodeContent:
    def test_single_chunk_dimension(self, backend):
        chunks = token_chunks(backend, 10)
        vectors = encode_content(chunks, backend)
        assert len(vectors) == 1
        assert vectors[0].shape == (32,)

    def test_block_cap(self, backend):
        chunks = token_chunks(backend, 100)  # 101 ids -> 7 windows of 20/4
        assert len(chunks) > 4
        vectors = encode_content(chunks, backend, n_blocks=4)
        assert len(vectors) == 4

    def test_deterministic_in_eval_mode(self, backend):
        backend.eval()
        chunks = token_chunks(backend, 30)
        a = encode_content(chunks, backend)
        b = encode_content(chunks, backend)
        for x, y in zip(a, b):
            assert torch.equal(x, y)

    def test_identical_chunks_identical_vectors(self, backend):
        backend.eval()
        ids = backend.tokenize("the same words")
        from multirep.chunker import ChunkSet

        chunks = ChunkSet(chunks=[ids, list(ids)], offsets=[0, 1])
        a, b = encode_content(chunks, backend)
        assert torch.equal(a, b)

    def test_later_chunks_get_sentinel(self, backend):
        backend.eval()
        chunks = token_chunks(backend, 40, window=20, overlap=4)
        assert chunks.chunks[1][0] != backend.cls_id
        vectors = encode_content(chunks, backend)
        manual = backend.encode([[backend.cls_id] + chunks.chunks[1]])[0]
        assert torch.equal(vectors[1], manual)

    def test_oversized_chunk_names_offender(self, backend):
        chunks = token_chunks(backend, 80, window=70, overlap=0)
        with pytest.raises(ChunkTooLongError, match="chunk 0"):
            encode_content(chunks, backend)


class TestEncodeContext:
    def test_frozen_stability_across_steps(self, backend):
        backend.set_trainable(False)
        text = "context stays the same"
        before = encode_context(text, backend)
        # a hundred optimizer steps on an unrelated module must not move it
        other = torch.nn.Linear(4, 4)
        opt = torch.optim.AdamW(other.parameters(), lr=0.1)
        for _ in range(100):
            loss = other(torch.randn(2, 4)).sum()
            opt.zero_grad()
            loss.backward()
            opt.step()
        after = encode_context(text, backend)
        assert torch.equal(before, after)

    def test_empty_text_is_fixed_constant(self, backend):
        a = encode_context("", backend)
        b = encode_context("", backend)
        assert torch.equal(a, b)
        assert a.shape == (32,)

    def test_truncation_matches_manual_prefix(self, backend):
        long_text = " ".join(f"tok{i}" for i in range(200))
        ids = backend.tokenize(long_text)
        assert len(ids) > backend.max_positions
        auto = encode_context(long_text, backend)
        backend.eval()
        with torch.no_grad():
            manual = backend.encode([ids[: backend.max_positions]])[0]
        assert torch.equal(auto, manual)

    def test_no_gradient_reaches_frozen_encoder(self, backend):
        backend.set_trainable(False)
        vec = encode_context("a few words", backend)
        assert not vec.requires_grad
        assert all(p.grad is None for p in backend.parameters())


class TestFeatureLayout:
    def test_default_dimension(self):
        assert FeatureLayout().dim == 4 * 768 + 768 + 1 == 3841

    def test_slices_cover_exactly(self):
        layout = FeatureLayout(n_blocks=3, hidden_dim=8, n_numeric=2)
        spans = [layout.content_slice(i) for i in range(3)] + [
            layout.context_slice, layout.numeric_slice,
        ]
        covered = []
        for s in spans:
            covered.extend(range(s.start, s.stop))
        assert covered == list(range(layout.dim))


class TestAssembleFeatures:
    layout = FeatureLayout(n_blocks=4, hidden_dim=8, n_numeric=1)

    def test_full_blocks(self):
        content = [torch.full((8,), float(i + 1)) for i in range(4)]
        out = assemble_features(content, torch.full((8,), 9.0), [3.0], self.layout)
        assert out.shape == (self.layout.dim,)
        assert out[-1].item() == 3.0

    def test_zero_padding_region(self):
        content = [torch.ones(8), torch.ones(8)]
        out = assemble_features(content, torch.ones(8), [1.0], self.layout)
        assert torch.equal(out[self.layout.content_slice(2)], torch.zeros(8))
        assert torch.equal(out[self.layout.content_slice(3)], torch.zeros(8))
        assert torch.equal(out[self.layout.context_slice], torch.ones(8))

    def test_no_numeric_features(self):
        layout = FeatureLayout(n_blocks=4, hidden_dim=768, n_numeric=0)
        out = assemble_features(
            [torch.zeros(768)] * 4, torch.zeros(768), [], layout
        )
        assert out.shape == (5 * 768,)

    def test_dimension_errors(self):
        with pytest.raises(DimensionMismatchError):
            assemble_features([torch.zeros(8)] * 5, torch.zeros(8), [0.0], self.layout)
        with pytest.raises(DimensionMismatchError):
            assemble_features([torch.zeros(7)], torch.zeros(8), [0.0], self.layout)
        with pytest.raises(DimensionMismatchError):
            assemble_features([torch.zeros(8)], torch.zeros(9), [0.0], self.layout)
        with pytest.raises(DimensionMismatchError):
            assemble_features([torch.zeros(8)], torch.zeros(8), [0.0, 1.0], self.layout)

    def test_gradients_flow_through_content_only(self, backend):
        trainable = backend
        frozen = TinyTransformerEncoder(
            vocab_size=256, hidden_dim=32, layers=1, heads=4, max_positions=64, seed=6
        )
        frozen.set_trainable(False)
        chunks = token_chunks(trainable, 12)
        content = encode_content(chunks, trainable)
        context = encode_context("some context", frozen)
        layout = FeatureLayout(n_blocks=4, hidden_dim=32, n_numeric=1)
        features = assemble_features(content, context, [2.0], layout)
        features.sum().backward()
        assert any(
            p.grad is not None and p.grad.abs().sum() > 0 for p in trainable.parameters()
        )
        assert all(p.grad is None for p in frozen.parameters())
