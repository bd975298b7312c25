import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pathanon.dsp import ASV_PRESET, MelSpectrogram, compute_log_mel
from pathanon.embedding import (
    SpeakerEmbedding,
    cosine_score,
    embed_utterance,
    enroll_speaker,
    load_embeddings,
    write_embeddings,
)
from pathanon.errors import DataError


def _mel(frames):
    return MelSpectrogram(np.asarray(frames, dtype=float), ASV_PRESET, "u")


def test_constant_spectrogram():
    e = embed_utterance(_mel(np.full((10, 40), -3.0)))
    assert e.dim == 80
    assert np.all(e.vector[40:] == 0)
    assert np.linalg.norm(e.vector) == pytest.approx(1.0)


def test_permutation_invariant(rng):
    frames = rng.standard_normal((30, 40))
    a = embed_utterance(_mel(frames)).vector
    b = embed_utterance(_mel(frames[rng.permutation(30)])).vector
    assert np.allclose(a, b, atol=1e-14)


def test_needs_two_frames():
    with pytest.raises(DataError):
        embed_utterance(_mel(np.zeros((1, 40)) + 1))


def test_same_speaker_closer():
    from pathanon.experiment.synth import generate_corpus

    manifest, clips = generate_corpus(4, 3, seed=3)
    emb = {u.utterance_id: embed_utterance(compute_log_mel(clips[u.utterance_id])) for u in manifest.utterances}
    spk = {u.utterance_id: u.speaker_id for u in manifest.utterances}
    same, diff = [], []
    ids = sorted(emb)
    for i, a in enumerate(ids):
        for b in ids[i + 1:]:
            (same if spk[a] == spk[b] else diff).append(cosine_score(emb[a], emb[b]))
    assert np.mean(same) > np.mean(diff)


def test_cosine_examples():
    a = SpeakerEmbedding(np.array([1.0, 0.0]), "a")
    b = SpeakerEmbedding(np.array([0.0, 3.0]), "b")
    c = SpeakerEmbedding(np.array([math.sqrt(0.5), math.sqrt(0.5)]), "c")
    assert cosine_score(a, a) == 1.0
    assert cosine_score(a, b) == 0.0
    assert cosine_score(a, c) == pytest.approx(0.70710678, abs=1e-8)
    with pytest.raises(DataError):
        cosine_score(a, SpeakerEmbedding(np.ones(3), "x"))


def test_degenerate():
    with pytest.raises(DataError, match="degenerate embedding"):
        SpeakerEmbedding(np.zeros(4), "a")


def test_enroll_examples():
    e1 = SpeakerEmbedding(np.array([1.0, 0.0]), "s")
    e2 = SpeakerEmbedding(np.array([0.0, 1.0]), "s")
    assert np.allclose(enroll_speaker([e1]).vector, e1.vector)
    assert np.allclose(enroll_speaker([e1, e1]).vector, e1.vector)
    assert np.allclose(enroll_speaker([e1, e2]).vector, [math.sqrt(0.5)] * 2)
    with pytest.raises(DataError):
        enroll_speaker([])
    with pytest.raises(DataError):
        enroll_speaker([e1, SpeakerEmbedding(np.array([1.0, 1.0]), "t")])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 8))
def test_enroll_order_invariant_and_cosine_symmetric(seed, n):
    rng = np.random.default_rng(seed)
    embs = [SpeakerEmbedding(rng.standard_normal(6) + 0.1, "s") for _ in range(n)]
    a = enroll_speaker(embs).vector
    b = enroll_speaker([embs[i] for i in rng.permutation(n)]).vector
    assert np.array_equal(a, b)
    assert cosine_score(embs[0], embs[-1]) == cosine_score(embs[-1], embs[0])
    assert cosine_score(embs[0], embs[0]) == pytest.approx(1.0, abs=1e-12)


def test_csv_roundtrip(tmp_path, rng):
    embs = [SpeakerEmbedding(rng.standard_normal(5), f"s{i % 2}", f"u{i}") for i in range(3)]
    path = tmp_path / "e.csv"
    write_embeddings(embs, path)
    back = load_embeddings(path)
    assert len(back) == 3 and {e.dim for e in back} == {5}
    for a, b in zip(embs, back):
        assert a.speaker_id == b.speaker_id and a.utterance_id == b.utterance_id
        assert np.allclose(a.vector, b.vector, atol=1e-11)


@pytest.mark.parametrize("body,msg", [
    ("u1,s,1,2,3\nu2,s,1,2\n", "inconsistent dimension"),
    ("u1,s,0,0,0\n", "degenerate embedding"),
    ("u1,s,1,x,3\n", "non-numeric"),
    ("u1,s,1,2,3\nu1,s,1,2,3\n", "duplicate utterance_id"),
])
def test_csv_errors(tmp_path, body, msg):
    path = tmp_path / "bad.csv"
    path.write_text("utterance_id,speaker_id,v1,v2,v3\n" + body)
    with pytest.raises(DataError, match=msg):
        load_embeddings(path)
