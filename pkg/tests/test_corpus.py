# -*- coding: utf-8 -*-
"""Unit tests for functions in humsearch._corpus."""

import json

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

import humsearch

from .helpers import dominant_frequency


@pytest.fixture(scope="module")
def small_corpus():
    spec = humsearch.CorpusSpec(n_songs=2, motifs_per_song=2, motif_s=5.0,
                                seed=9)
    return humsearch.synth_corpus(spec, covers_per_song=1)


def test_note_frequency():
    assert_allclose(humsearch._corpus.note_frequency(12),
                    2 * humsearch._classes.F_MIN)
    assert_allclose(humsearch._corpus.note_frequency(0),
                    humsearch._classes.F_MIN)


def test_random_motif_duration():
    motif = humsearch.random_motif(np.random.default_rng(0), 10.0)
    assert_allclose(motif.duration_s, 10.0, atol=1e-9)
    assert all(24 <= b <= 52 for b, _ in motif.notes)


def test_synth_motif_length():
    motif = humsearch.MotifSpec([(40, 0.5), (45, 0.25)])
    w = humsearch.synth_motif(motif)
    assert w.n_samples == 12000
    assert np.max(np.abs(w.samples)) <= 0.5 + 1e-12


def test_synth_song_boundaries():
    rng = np.random.default_rng(1)
    motifs = [humsearch.random_motif(rng, 10.0) for _ in range(3)]
    w, boundaries = humsearch.synth_song(motifs, [2.0, 2.0])
    assert_allclose(boundaries, [(0.0, 10.0), (12.0, 22.0), (24.0, 34.0)],
                    atol=0.01)
    assert_allclose(w.duration_s, 34.0, atol=0.01)
    gap = slice(int(round(boundaries[0][1] * 16000)),
                int(round(boundaries[1][0] * 16000)))
    assert not np.any(w.samples[gap])


def test_synth_song_deterministic():
    rng = np.random.default_rng(2)
    motifs = [humsearch.random_motif(rng, 3.0) for _ in range(2)]
    first, _ = humsearch.synth_song(motifs, [1.0], seed=4)
    second, _ = humsearch.synth_song(motifs, [1.0], seed=4)
    third, _ = humsearch.synth_song(motifs, [1.0], seed=5)
    assert_array_equal(first.samples, second.samples)
    assert not np.array_equal(first.samples, third.samples)


def test_synth_song_errors():
    motif = humsearch.MotifSpec([(40, 1.0)])
    with pytest.raises(ValueError):
        humsearch.synth_song([], [])
    with pytest.raises(ValueError):
        humsearch.synth_song([motif, motif], [])


def test_pitch_stretch_transposes():
    motif = humsearch.MotifSpec([(45, 2.0)], harmonics=(1.0,))
    w = humsearch.synth_motif(motif)
    shifted = humsearch._corpus.pitch_stretch(w, 2, 1.0)
    expected = humsearch._corpus.note_frequency(45) * 2.0 ** (2 / 12.0)
    assert_allclose(dominant_frequency(shifted), expected, rtol=0.01)
    assert abs(shifted.n_samples - w.n_samples) <= 0.01 * w.n_samples


def test_pitch_stretch_duration():
    w = humsearch.synth_motif(humsearch.MotifSpec([(45, 2.0)]))
    stretched = humsearch._corpus.pitch_stretch(w, 0, 1.25)
    assert abs(stretched.n_samples - w.n_samples / 1.25) <= 512


def test_identity_cover():
    w = humsearch.synth_motif(humsearch.MotifSpec([(45, 1.0)]))
    cover, transform = humsearch.synth_cover(w)
    assert transform.is_identity
    assert_array_equal(cover.samples, w.samples)


def test_cover_lead_silence():
    w = humsearch.synth_motif(humsearch.MotifSpec([(45, 1.0)]))
    transform = humsearch.CoverTransform(lead_silence_s=0.5)
    cover, actual = humsearch.synth_cover(w, transform)
    assert not np.any(cover.samples[:8000])
    assert_array_equal(cover.samples[8000:], w.samples)
    assert actual.map_time(0.25) == 0.75


def test_cover_transform_map_time():
    transform = humsearch.CoverTransform(stretch=1.25, lead_silence_s=2.0)
    assert_allclose(transform.map_time(10.0), 10.0)


def test_cover_transform_ranges():
    with pytest.raises(ValueError):
        humsearch.CoverTransform(shift=5)
    with pytest.raises(ValueError):
        humsearch.CoverTransform(stretch=1.5)


def test_corpus_spec_ranges():
    with pytest.raises(ValueError):
        humsearch.CorpusSpec(shift_range=(-6.0, 0.0))


def test_synth_corpus(small_corpus):
    assert [song_id for song_id, _, _ in small_corpus.songs] == [0, 1]
    assert all(len(small_corpus.covers[s]) == 1 for s in (0, 1))
    assert len(small_corpus.queries) == 2
    for query_id, query, transform, start in small_corpus.queries:
        song_id = small_corpus.truth[query_id]
        assert start in [b[0] for b in small_corpus.boundaries[song_id]]
        assert transform.shift == int(transform.shift)
        assert abs(query.duration_s - 5.0 / transform.stretch) < 0.1


def test_synth_corpus_deterministic(small_corpus):
    spec = humsearch.CorpusSpec(n_songs=2, motifs_per_song=2, motif_s=5.0,
                                seed=9)
    again = humsearch.synth_corpus(spec, covers_per_song=1)
    for (_, _, a), (_, _, b) in zip(small_corpus.songs, again.songs):
        assert_array_equal(a.samples, b.samples)
    assert small_corpus.truth == again.truth


def test_ground_truth_round_trip(tmp_path, small_corpus):
    path = tmp_path / "truth.json"
    humsearch.write_ground_truth(path, small_corpus)
    document = humsearch.read_ground_truth(path)
    assert document == humsearch._corpus.ground_truth(small_corpus)
    cover = document["songs"][0]["covers"][0]
    assert cover["offset_map"]["rate"] == cover["transform"]["stretch"]


def test_ground_truth_malformed(tmp_path):
    path = tmp_path / "truth.json"
    path.write_text(json.dumps({"songs": []}))
    with pytest.raises(humsearch.FormatError):
        humsearch.read_ground_truth(path)


def test_synthetic_groups():
    groups = humsearch.synthetic_groups(n_groups=2, members=3,
                                        duration_s=3.5, seed=0)
    assert len(groups) == 2
    for group in groups:
        assert len(group.members) == 3
        assert abs(group.n_frames - 110) <= 1
