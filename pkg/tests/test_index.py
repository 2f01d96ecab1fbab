# -*- coding: utf-8 -*-
"""Unit tests for functions in humsearch._index."""

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

import humsearch

from .helpers import clustered_rows, song_record, unit_rows
from .data import (ranked_truth,
                   hit_rate_at_10,
                   mrr,
                   ranking_with_truth_at)


@pytest.fixture(scope="module")
def records():
    rng = np.random.default_rng(0)
    return [song_record(song_id, unit_rows(rng, 40)) for song_id in range(5)]


@pytest.fixture(scope="module")
def index(records):
    return humsearch.build_index(records, "short", nlist=4, seed=0)


@pytest.fixture(scope="module")
def corpus():
    return humsearch.synth_corpus(humsearch.CorpusSpec(n_songs=3, seed=4),
                                  covers_per_song=0)


@pytest.fixture(scope="module")
def database(corpus):
    return humsearch.build_database(corpus.songs,
                                    humsearch.BaselineEncoder())


def excerpt(corpus, song_id, motif):
    song = corpus.songs[song_id][2]
    start, end = corpus.boundaries[song_id][motif]
    return humsearch.Waveform(song.samples[int(start * 16000):
                                           int(end * 16000)])


# Coarse index

def test_build_index_layout(index):
    assert index.nlist == 4
    assert index.n_entries == 200
    assert index.nprobe == 1
    assert index.bucket_offsets[0] == 0
    assert index.bucket_offsets[-1] == 200
    for j in range(index.nlist):
        rows = index.bucket(j)
        keys = list(zip(index.song_ids[rows], index.offsets[rows]))
        assert keys == sorted(keys)


def test_build_index_default_nlist(records):
    assert humsearch.build_index(records, "short").nlist == 14


def test_build_index_too_many_lists(records):
    with pytest.raises(humsearch.SearchIndexError):
        humsearch.build_index(records[:1], "short", nlist=41)


def test_build_index_missing_profile(records):
    with pytest.raises(humsearch.SearchIndexError):
        humsearch.build_index(records, "long")


def _keys(results):
    return [(entry.song_id, entry.frame_offset, distance)
            for entry, distance in results]


def test_all_small_lists_equal_exact_search(index):
    rng = np.random.default_rng(1)
    for query in unit_rows(rng, 5):
        assert _keys(humsearch.ann_search(index, query, 10, nprobe=4)) == \
            _keys(humsearch.exact_search(index, query, 10))


def test_exact_search_finds_stored_vector(index):
    query = index.vectors[17]
    entry, distance = humsearch.exact_search(index, query, 1)[0]
    assert (entry.song_id, entry.frame_offset) == \
        (index.song_ids[17], index.offsets[17])
    assert distance == 0.0


def test_exact_search_tie_breaking():
    rng = np.random.default_rng(2)
    shared = unit_rows(rng, 1)[0]
    prints_0, prints_1 = unit_rows(rng, 6), unit_rows(rng, 6)
    prints_0[[2, 4]] = shared
    prints_1[0] = shared
    index = humsearch.build_index([song_record(1, prints_1),
                                   song_record(0, prints_0)], "short",
                                  nlist=2)
    results = humsearch.exact_search(index, shared, 3)
    assert [(e.song_id, e.frame_offset) for e, _ in results] == \
        [(0, 2), (0, 4), (1, 0)]


def test_ann_search_bad_nprobe(index):
    with pytest.raises(humsearch.SearchIndexError):
        humsearch.ann_search(index, index.vectors[0], 5, nprobe=5)


def test_index_round_trip(index):
    blob = humsearch._index.index_to_bytes(index)
    assert blob[:5] == b"CHIX\x01"
    loaded = humsearch._index.index_from_bytes(blob)
    assert loaded.profile == index.profile
    assert loaded.nprobe == index.nprobe
    assert_array_equal(loaded.centroids, index.centroids)
    assert_array_equal(loaded.vectors, index.vectors)
    assert_array_equal(loaded.song_ids, index.song_ids)
    assert_array_equal(loaded.offsets, index.offsets)
    assert_array_equal(loaded.bucket_offsets, index.bucket_offsets)


def test_index_truncated(index):
    blob = humsearch._index.index_to_bytes(index)
    with pytest.raises(humsearch.FormatError):
        humsearch._index.index_from_bytes(blob[:-1])


# Metrics

def test_top_n_hit_rate():
    results = {q: ranking_with_truth_at(rank)
               for q, rank in ranked_truth.items()}
    truth = {q: 1000 for q in ranked_truth}
    assert_allclose(humsearch.top_n_hit_rate(results, truth, 10),
                    hit_rate_at_10)
    assert humsearch.top_n_hit_rate(results, truth, 1) == 1.0 / 3
    assert humsearch.top_n_hit_rate(results, truth, 100) == 1.0


def test_mean_reciprocal_rank():
    results = {q: ranking_with_truth_at(rank)
               for q, rank in ranked_truth.items()}
    truth = {q: 1000 for q in ranked_truth}
    assert_allclose(humsearch.mean_reciprocal_rank(results, truth), mrr)


def test_metrics_unranked_truth():
    results = {'q': [(1, 0.9, 0), (2, 0.8, 0)]}
    assert humsearch.top_n_hit_rate(results, {'q': 3}, 10) == 0.0
    assert humsearch.mean_reciprocal_rank(results, {'q': 3}) == 0.0


def test_metrics_missing_truth():
    with pytest.raises(ValueError):
        humsearch.top_n_hit_rate({'q': []}, {}, 1)


# Queries

def test_database_profiles(database):
    assert len(database) == 3
    assert set(database.indexes) == {"short", "long"}


def test_query_exact_excerpt(corpus, database):
    encoder = humsearch.BaselineEncoder()
    for song_id in range(3):
        result = humsearch.query_song(database, excerpt(corpus, song_id, 1),
                                      encoder)
        assert result.profile == "short"
        assert result.ranking[0][0] == song_id
        assert result.rank_of(song_id) == 1
        assert result.ann_s >= 0.0 and result.rerank_s >= 0.0


def test_query_offset(corpus, database):
    result = humsearch.query_song(database, excerpt(corpus, 2, 1),
                                  humsearch.BaselineEncoder())
    song_id, score, offset = result.ranking[0]
    # The second motif starts at 12 s, 375 frames or about 47 steps
    assert abs(offset - 375 / 8.0) <= 1
    assert score > 0.9


def test_query_dtw_rerank(corpus, database):
    result = humsearch.query_song(database, excerpt(corpus, 0, 2),
                                  humsearch.BaselineEncoder(), rerank="dtw")
    assert result.ranking[0][0] == 0


def test_query_transposed(corpus, database):
    query = humsearch._corpus.pitch_stretch(excerpt(corpus, 1, 0), 2, 1.0)
    result = humsearch.query_song(database, query,
                                  humsearch.BaselineEncoder())
    assert result.ranking[0][0] == 1


def test_query_untransposed_misses_shift(corpus, database):
    query = humsearch._corpus.pitch_stretch(excerpt(corpus, 1, 0), 2, 1.0)
    shifted = humsearch.query_song(database, query,
                                   humsearch.BaselineEncoder())
    plain = humsearch.query_song(database, query,
                                 humsearch.BaselineEncoder(), key_shifts=(0,))
    plain_scores = {s: score for s, score, _ in plain.ranking}
    assert shifted.ranking[0][1] > plain_scores.get(1, -1.0)


def test_query_too_short(database):
    with pytest.raises(humsearch.WindowError, match="query too short"):
        humsearch.query_song(database,
                             humsearch.Waveform(np.ones(32000) * 0.1),
                             humsearch.BaselineEncoder())


def test_query_unknown_rerank(corpus, database):
    with pytest.raises(ValueError):
        humsearch.query_song(database, excerpt(corpus, 0, 0),
                             humsearch.BaselineEncoder(), rerank="cosine")


def test_exact_rerank_agrees(corpus, database):
    encoder = humsearch.BaselineEncoder()
    query = excerpt(corpus, 1, 2)
    prints = humsearch.fingerprint_waveform(
        query, humsearch.profile_config("short"), encoder)
    exact = humsearch.exact_rerank(database, prints, "short")
    result = humsearch.query_song(database, query, encoder, key_shifts=(0,))
    assert exact[0][0] == result.ranking[0][0] == 1
    assert_allclose(exact[0][1], result.ranking[0][1], atol=1e-9)


def test_bench_single_query(corpus, database):
    rows = humsearch.bench_query(database, [excerpt(corpus, 0, 0)],
                                 humsearch.BaselineEncoder())
    assert [row[0] for row in rows] == ["ann", "rerank"]
    assert all(row[1] >= 0.0 and row[2] == 0.0 for row in rows)


def test_write_bench_csv(tmp_path):
    path = tmp_path / "bench.csv"
    humsearch.write_bench_csv(path, [("ann", 0.5, 0.0), ("rerank", 1.0,
                                                         0.25)])
    assert path.read_text().splitlines() == ["step,mean_s,std_s",
                                             "ann,0.500000,0.000000",
                                             "rerank,1.000000,0.250000"]


def test_database_round_trip(tmp_path, corpus, database):
    humsearch.save_database(database, tmp_path)
    assert (tmp_path / "songs.json").exists()
    assert (tmp_path / "index_short.chix").exists()
    loaded = humsearch.load_database(tmp_path)
    assert sorted(loaded.songs) == sorted(database.songs)
    for song_id, song in database.songs.items():
        assert loaded.songs[song_id].title == song.title
        for profile, sequence in song.prints.items():
            assert_array_equal(loaded.songs[song_id].prints[profile].prints,
                               sequence.prints)
    encoder = humsearch.BaselineEncoder()
    query = excerpt(corpus, 2, 0)
    assert humsearch.query_song(loaded, query, encoder).ranking == \
        humsearch.query_song(database, query, encoder).ranking


def test_load_database_bad_registry(tmp_path):
    (tmp_path / "songs.json").write_text("{not json")
    with pytest.raises(humsearch.FormatError):
        humsearch.load_database(tmp_path)


def test_query_shorter_than_one_frame(database):
    with pytest.raises(humsearch.WindowError, match="query too short"):
        humsearch.query_song(database, humsearch.Waveform(np.ones(300) * 0.1),
                             humsearch.BaselineEncoder())


def test_query_deterministic(corpus, database):
    encoder = humsearch.BaselineEncoder()
    query = humsearch._corpus.pitch_stretch(excerpt(corpus, 0, 1), -1, 1.05)
    first = humsearch.query_song(database, query, encoder)
    second = humsearch.query_song(database, query, encoder)
    assert first.ranking == second.ranking
    assert first.n_candidates == second.n_candidates > 0


# Larger stores

@pytest.fixture(scope="module")
def clustered_store():
    rows, labels = clustered_rows(np.random.default_rng(11), 100, 100)
    songs = [song_record(s, rows[s * 2000:(s + 1) * 2000]) for s in range(5)]
    return humsearch.build_index(songs, "short", seed=0), rows


def test_clustered_store_layout(clustered_store):
    index, _ = clustered_store
    assert index.n_entries == 10000
    assert index.nlist == 100
    assert index.nprobe == 25


@pytest.mark.parametrize("k", [1, 10, 100, 5000])
def test_all_lists_equals_exact_search(clustered_store, k):
    index, rows = clustered_store
    rng = np.random.default_rng(k)
    for query in unit_rows(rng, 2):
        assert _keys(humsearch.ann_search(index, query, k,
                                          nprobe=index.nlist)) == \
            _keys(humsearch.exact_search(index, query, k))
    query = rows[4321] + 0.01 * rng.standard_normal(rows.shape[1])
    assert _keys(humsearch.ann_search(index, query, k, nprobe=index.nlist)) \
        == _keys(humsearch.exact_search(index, query, k))


def test_recall_at_100(clustered_store):
    index, rows = clustered_store
    rng = np.random.default_rng(12)
    recalls = []
    for row in rng.choice(len(rows), 20, replace=False):
        query = rows[row] + 0.02 * rng.standard_normal(rows.shape[1])
        query /= np.linalg.norm(query)
        exact = {(e.song_id, e.frame_offset)
                 for e, _ in humsearch.exact_search(index, query, 100)}
        approximate = {(e.song_id, e.frame_offset)
                       for e, _ in humsearch.ann_search(
                           index, query, 100, nprobe=index.nlist // 4)}
        recalls.append(len(exact & approximate) / 100.0)
    assert np.mean(recalls) >= 0.9


def test_two_clusters_fill_two_lists():
    rng = np.random.default_rng(13)
    rows, labels = clustered_rows(rng, 2, 500, noise=0.02)
    index = humsearch.build_index([song_record(0, rows)], "short", nlist=2)
    for j in range(2):
        members = labels[index.offsets[index.bucket(j)]]
        assert len(members) > 0
        assert np.bincount(members, minlength=2).max() >= \
            0.95 * len(members)


# Retrieval over a 200 song corpus

@pytest.fixture(scope="module")
def large_corpus():
    return humsearch.synth_corpus(humsearch.CorpusSpec(n_songs=200, seed=7),
                                  covers_per_song=0, n_queries=50)


@pytest.fixture(scope="module")
def large_database(large_corpus):
    return humsearch.build_database(large_corpus.songs,
                                    humsearch.BaselineEncoder())


@pytest.fixture(scope="module")
def large_results(large_corpus, large_database):
    encoder = humsearch.BaselineEncoder()
    return {query_id: humsearch.query_song(large_database, query, encoder)
            for query_id, query, _, _ in large_corpus.queries}


def test_transformed_queries_hit_rates(large_corpus, large_results):
    assert humsearch.top_n_hit_rate(large_results, large_corpus.truth,
                                    10) >= 0.9
    assert humsearch.top_n_hit_rate(large_results, large_corpus.truth,
                                    1) >= 0.7


def test_hit_rate_monotone_in_n(large_corpus, large_results):
    rates = [humsearch.top_n_hit_rate(large_results, large_corpus.truth, n)
             for n in (1, 3, 5, 10)]
    assert rates == sorted(rates)


def test_query_latency(large_results):
    totals = [r.ann_s + r.rerank_s for r in large_results.values()]
    assert np.mean(totals) < 2.0


def test_rerank_cost_follows_candidates(large_corpus, large_database):
    encoder = humsearch.BaselineEncoder()
    queries = [query for _, query, _, _ in large_corpus.queries[:5]]
    small = [humsearch.query_song(large_database, q, encoder, top_k=500)
             for q in queries]
    large = [humsearch.query_song(large_database, q, encoder, top_k=5000)
             for q in queries]
    assert all(a.n_candidates <= b.n_candidates
               for a, b in zip(small, large))
    per_candidate = [sum(r.rerank_s for r in results) /
                     sum(r.n_candidates for r in results)
                     for results in (small, large)]
    assert per_candidate[1] < 5 * per_candidate[0]
