# -*- coding: utf-8 -*-
"""Unit tests for functions in humsearch._alignment."""

import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose, assert_array_equal

import humsearch

from .helpers import constant_sequence, vectors_with_gram
from .data import (rms_values,
                   silent_at_30_db,
                   silent_at_60_db,
                   merge_input_1,
                   merge_output_1,
                   merge_input_2,
                   merge_output_2,
                   dedup_gram,
                   dedup_fragments,
                   match_correlations,
                   relevant_correlations,
                   uncertain_correlations)

SHORT = humsearch.profile_config("short")


@pytest.fixture(scope="module")
def motif():
    spec = humsearch.random_motif(np.random.default_rng(21), 10.0)
    return humsearch.synth_motif(spec)


@pytest.fixture(scope="module")
def song():
    rng = np.random.default_rng(22)
    motifs = [humsearch.random_motif(rng, 10.0) for _ in range(3)]
    return humsearch.synth_song(motifs, [2.0, 2.0], seed=5)


# Silence

def test_silence_mask_thresholds():
    env = humsearch.RmsEnvelope(rms_values)
    assert_array_equal(humsearch.find_silence_mask(env, 30).silent,
                       silent_at_30_db)
    assert_array_equal(humsearch.find_silence_mask(env, 60).silent,
                       silent_at_60_db)


def test_silence_mask_all_zero():
    env = humsearch.RmsEnvelope(np.zeros(5))
    assert humsearch.find_silence_mask(env, 60).silent.all()


def test_split_by_silence():
    w = humsearch.Waveform(np.zeros(4 * 512 + 2048))
    mask = humsearch.SilenceMask([True, False, False, True, False])
    fragments = humsearch.split_by_silence(w, mask, "song")
    assert fragments == [humsearch.Fragment("song", 512 / 16000.0,
                                            3072 / 16000.0),
                         humsearch.Fragment("song", 2048 / 16000.0,
                                            4096 / 16000.0)]


def test_split_by_silence_all_silent():
    w = humsearch.Waveform(np.zeros(4096))
    mask = humsearch.SilenceMask([True] * 5)
    assert humsearch.split_by_silence(w, mask) == []


# Merging and deduplication

def test_merge_fragments():
    assert humsearch.merge_fragments(merge_input_1, 0.5, 8.0, 20.0) == \
        merge_output_1


def test_merge_fragments_pause_too_long():
    assert humsearch.merge_fragments(merge_input_1, 0.3, 8.0, 20.0) == []


def test_merge_fragments_respects_maximum():
    merged = humsearch.merge_fragments(merge_input_2, 0.5, 8.0, 20.0)
    assert merged == merge_output_2
    assert all(f.duration_s <= 20.0 for f in merged)


def test_dedup_fragments_greedy():
    vectors = vectors_with_gram(dedup_gram)
    prints = [constant_sequence(v, 10) for v in vectors]
    kept = humsearch.dedup_fragments(dedup_fragments, prints, 0.8)
    assert kept == [dedup_fragments[0], dedup_fragments[2]]


def test_dedup_fragments_keeps_all_below_threshold():
    vectors = vectors_with_gram(dedup_gram)
    prints = [constant_sequence(v, 10) for v in vectors]
    assert humsearch.dedup_fragments(dedup_fragments, prints, 0.95) == \
        dedup_fragments


def test_dedup_fragments_needs_prints():
    with pytest.raises(ValueError):
        humsearch.dedup_fragments(dedup_fragments, [], 0.8)


def test_dedup_fragments_idempotent():
    vectors = vectors_with_gram(dedup_gram)
    prints = [constant_sequence(v, 10) for v in vectors]
    kept = humsearch.dedup_fragments(dedup_fragments, prints, 0.8)
    kept_prints = [p for f, p in zip(dedup_fragments, prints) if f in kept]
    assert humsearch.dedup_fragments(kept, kept_prints, 0.8) == kept


def test_repeated_motif_is_kept_once():
    rng = np.random.default_rng(23)
    first, second = (humsearch.random_motif(rng, 10.0) for _ in range(2))
    w, boundaries = humsearch.synth_song([first, second, first], [2.0, 2.0],
                                         seed=6)
    result = humsearch.best_fragmentation(w, humsearch.PipelineConfig(),
                                          humsearch.BaselineEncoder())
    assert len(result.fragments) == 2
    for fragment, (start, end) in zip(result.fragments, boundaries[:2]):
        assert abs(fragment.start_s - start) < 0.2
        assert abs(fragment.end_s - end) < 0.2


# Match filtering

def test_filter_matches():
    candidates = [(humsearch.Fragment("cover", k, k + 10.0, "cover"), c)
                  for k, c in enumerate(match_correlations)]
    relevant, uncertain = humsearch.filter_matches(candidates, 0.5, 0.3)
    assert [m.correlation for m in relevant] == relevant_correlations
    assert [m.correlation for m in uncertain] == uncertain_correlations
    assert all(m.status == "relevant" for m in relevant)
    assert all(m.status == "uncertain" for m in uncertain)


@settings(max_examples=1000, deadline=None)
@given(st.lists(st.floats(min_value=-1.0, max_value=1.0), max_size=30),
       st.floats(min_value=0.0, max_value=0.5),
       st.floats(min_value=0.0, max_value=0.5))
def test_filter_matches_partition(correlations, beta_irrel, gap):
    beta_rel = beta_irrel + gap
    candidates = [(humsearch.Fragment("cover", k, k + 10.0, "cover"), c)
                  for k, c in enumerate(correlations)]
    relevant, uncertain = humsearch.filter_matches(candidates, beta_rel,
                                                   beta_irrel)
    assert len(relevant) == sum(c >= beta_rel for c in correlations)
    assert len(relevant) + len(uncertain) == \
        sum(c >= beta_rel or c > beta_irrel for c in correlations)
    assert all(beta_irrel < m.correlation < beta_rel for m in uncertain)


# Matching fragments in covers

def test_match_cover_with_leading_silence(motif):
    cover = humsearch.Waveform(np.concatenate([np.zeros(160000),
                                               motif.samples]))
    fragment = humsearch.Fragment("song", 0.0, motif.duration_s)
    prints = humsearch.fingerprint_waveform(motif, SHORT,
                                            humsearch.BaselineEncoder())
    candidates = humsearch.match_cover(fragment, prints, cover,
                                       humsearch.BaselineEncoder(),
                                       humsearch.PipelineConfig())
    best, correlation = candidates[0]
    assert abs(best.start_s - 10.0) <= SHORT.hop_s
    assert_allclose(best.duration_s, fragment.duration_s)
    assert best.end_s <= cover.duration_s + 1e-9
    assert correlation >= 0.5


def test_match_cover_with_noise(motif):
    cover = humsearch.Waveform(np.concatenate([np.zeros(32000),
                                               motif.samples]))
    cover = humsearch.augment_noise(cover, 20.0, rng=0)
    fragment = humsearch.Fragment("song", 0.0, motif.duration_s)
    encoder = humsearch.BaselineEncoder()
    prints = humsearch.fingerprint_waveform(motif, SHORT, encoder)
    candidates = humsearch.match_cover(fragment, prints, cover, encoder,
                                       humsearch.PipelineConfig())
    best, correlation = candidates[0]
    assert abs(best.start_s - 2.0) <= SHORT.hop_s
    assert correlation >= 0.5


def test_match_cover_finds_repeated_motif(motif):
    gap = 5.0
    cover = humsearch.Waveform(np.concatenate([
        np.zeros(32000), motif.samples, np.zeros(int(gap * 16000)),
        motif.samples]))
    fragment = humsearch.Fragment("song", 0.0, motif.duration_s)
    encoder = humsearch.BaselineEncoder()
    prints = humsearch.fingerprint_waveform(motif, SHORT, encoder)
    candidates = humsearch.match_cover(fragment, prints, cover, encoder,
                                       humsearch.PipelineConfig())
    strong = sorted(f.start_s for f, c in candidates if c >= 0.5)
    assert len(strong) == 2
    assert abs(strong[0] - 2.0) <= SHORT.hop_s
    assert abs(strong[1] - strong[0] - (motif.duration_s + gap)) <= \
        SHORT.hop_s


def test_match_cover_too_short(motif):
    fragment = humsearch.Fragment("song", 0.0, motif.duration_s)
    prints = humsearch.fingerprint_waveform(motif, SHORT,
                                            humsearch.BaselineEncoder())
    short_cover = humsearch.Waveform(motif.samples[:16000])
    with pytest.raises(humsearch.MatchingError):
        humsearch.match_cover(fragment, prints, short_cover,
                              humsearch.BaselineEncoder(),
                              humsearch.PipelineConfig())


# Grid search and group extraction

def test_best_fragmentation(song):
    w, boundaries = song
    result = humsearch.best_fragmentation(w, humsearch.PipelineConfig(),
                                          humsearch.BaselineEncoder())
    assert result.status == "ok"
    assert len(result.fragments) == len(boundaries)
    for fragment, (start, end) in zip(result.fragments, boundaries):
        assert abs(fragment.start_s - start) < 0.2
        assert abs(fragment.end_s - end) < 0.2
    assert result.d_p in humsearch.PipelineConfig().pause_set


def test_best_fragmentation_five_motifs():
    rng = np.random.default_rng(24)
    motifs = [humsearch.random_motif(rng, 10.0) for _ in range(5)]
    w, boundaries = humsearch.synth_song(motifs, [2.0] * 4, seed=7)
    result = humsearch.best_fragmentation(w, humsearch.PipelineConfig(),
                                          humsearch.BaselineEncoder())
    assert len(result.fragments) == 5
    for fragment, (start, end) in zip(result.fragments, boundaries):
        assert abs(fragment.start_s - start) < 0.2
        assert abs(fragment.end_s - end) < 0.2


def test_best_fragmentation_beats_every_cell(song):
    w, _ = song
    config = humsearch.PipelineConfig()
    encoder = humsearch.BaselineEncoder()
    result = humsearch.best_fragmentation(w, config, encoder)
    env = humsearch.rms_envelope(w)
    counts = {(d_p, l_db): len(humsearch.evaluate_combination(
        w, env, d_p, l_db, config, encoder))
        for d_p in config.pause_set for l_db in config.db_set}
    assert len(counts) == 15
    assert len(result.fragments) == max(counts.values())
    assert counts[(result.d_p, result.l_db)] == len(result.fragments)
    first = min(cell for cell, n in counts.items()
                if n == len(result.fragments))
    assert (result.d_p, result.l_db) == first


def test_best_fragmentation_silence():
    w = humsearch.Waveform(np.zeros(16000 * 20))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        result = humsearch.best_fragmentation(w, humsearch.PipelineConfig(),
                                              humsearch.BaselineEncoder())
    assert result.status == "empty"
    assert result.fragments == ()
    assert any("No unique fragments" in str(w.message) for w in caught)


def test_best_fragmentation_parallel_agrees(song):
    w, _ = song
    config = humsearch.PipelineConfig(pause_set=(0.5, 1.0),
                                      db_set=(52, 60))
    encoder = humsearch.BaselineEncoder()
    assert humsearch.best_fragmentation(w, config, encoder) == \
        humsearch.best_fragmentation(w, config, encoder, n_processes=2)


def test_evaluate_combination(song):
    w, boundaries = song
    fragments = humsearch.evaluate_combination(
        w, humsearch.rms_envelope(w), 1.0, 60, humsearch.PipelineConfig(),
        humsearch.BaselineEncoder())
    assert len(fragments) == len(boundaries)
    assert all(8.0 <= f.duration_s <= 20.0 for f in fragments)


def test_evaluate_combination_pause_merges_everything(song):
    w, _ = song
    config = humsearch.PipelineConfig(d_max=40.0)
    fragments = humsearch.evaluate_combination(
        w, humsearch.rms_envelope(w), 3.0, 60, config,
        humsearch.BaselineEncoder())
    assert len(fragments) == 1
    assert fragments[0].duration_s > 30.0


def test_extract_aligned_groups(song):
    w, boundaries = song
    lead = 3.0
    cover = humsearch.Waveform(np.concatenate([np.zeros(int(lead * 16000)),
                                               w.samples]))
    groups = humsearch.extract_aligned_groups(w, [cover],
                                              humsearch.PipelineConfig(),
                                              humsearch.BaselineEncoder(),
                                              cover_ids=["cover"])
    assert len(groups) == len(boundaries)
    for group in groups:
        best = max(group.relevant, key=lambda m: m.correlation)
        assert best.fragment.source_id == "cover"
        assert abs(best.fragment.start_s - (group.original.start_s + lead)) \
            <= SHORT.hop_s
        assert_allclose(best.fragment.duration_s, group.original.duration_s)


def test_extract_aligned_groups_needs_covers(song):
    with pytest.raises(ValueError):
        humsearch.extract_aligned_groups(song[0], [],
                                         humsearch.PipelineConfig(),
                                         humsearch.BaselineEncoder())
