#  -*- coding: utf-8 -*-
"""Song database, coarse fingerprint index and two-step query search.

A query is encoded with the profile picked by its duration, every query
fingerprint retrieves its nearest stored fingerprints, the hits vote for
``(song, start offset)`` candidates, and each candidate song is rescored by
comparing the whole query sequence with the aligned stored block.
"""

import csv
import json
import logging
import os
import warnings
from time import perf_counter

import numpy as np
from sklearn.cluster import KMeans

from . import _execution
from ._audio import cqt, resample
from ._classes import (IndexEntry, QueryResult, SongRecord, EMBEDDING_DIM,
                       PROFILES, SAMPLE_RATE)
from ._exceptions import (AudioError, FormatError, MatchingError,
                          SearchIndexError, WindowError)
from ._fingerprint import (encode_sequence, load_fingerprints, profile_config,
                           save_fingerprints, select_profile, window_count)
from ._helpers import (mean_std, pack_header, read_array, to_le_bytes,
                       unpack_header)
from ._matching import best_pearson, dtw_distance, max_pearson_with_offset

logger = logging.getLogger(__name__)

DEFAULT_TOP_K = 5000
DEFAULT_KEY_SHIFTS = (-2, -1, 0, 1, 2)
OFFSET_SLACK = 2
RERANK_METHODS = ("corr", "dtw")

_INDEX_MAGIC = b"CHIX"
_INDEX_HEADER = "BHIII"
_REGISTRY = "songs.json"


def _entry_dtype(dim):
    return np.dtype([("vector", "<f4", (dim,)), ("song_id", "<u4"),
                     ("offset", "<u4")])


class CoarseIndex(object):
    """Inverted-file index over fingerprints.

    Entries are stored grouped by their k-means list; list ``j`` holds rows
    ``bucket_offsets[j]:bucket_offsets[j + 1]``, ordered by
    ``(song_id, offset)``.

    Parameters
    ----------
    profile : str
    centroids : numpy.ndarray
        ``(nlist, 128)``
    vectors : numpy.ndarray
        ``(N, 128)``, grouped by list
    song_ids : numpy.ndarray
    offsets : numpy.ndarray
    bucket_offsets : numpy.ndarray
        ``nlist + 1`` row boundaries
    nprobe : int, optional
        Lists scanned by default, ``max(1, nlist // 4)`` when omitted
    """

    def __init__(self, profile, centroids, vectors, song_ids, offsets,
                 bucket_offsets, nprobe=None):
        self.profile = profile
        self.centroids = np.asarray(centroids, dtype=np.float32)
        self.vectors = np.asarray(vectors, dtype=np.float32)
        self.song_ids = np.asarray(song_ids, dtype=np.int64)
        self.offsets = np.asarray(offsets, dtype=np.int64)
        self.bucket_offsets = np.asarray(bucket_offsets, dtype=np.int64)
        if len(self.bucket_offsets) != len(self.centroids) + 1 or \
                self.bucket_offsets[-1] != len(self.vectors):
            raise ValueError("Bucket offsets do not partition the entries")
        self.nprobe = nprobe or max(1, self.nlist // 4)
        self._vectors64 = self.vectors.astype(np.float64)
        self._centroids64 = self.centroids.astype(np.float64)

    @property
    def nlist(self):
        return len(self.centroids)

    @property
    def n_entries(self):
        return len(self.vectors)

    def bucket(self, j):
        """Row range of list ``j``."""
        return np.arange(self.bucket_offsets[j], self.bucket_offsets[j + 1])

    def entry(self, row):
        return IndexEntry(self.vectors[row], int(self.song_ids[row]),
                          int(self.offsets[row]), self.profile)

    def rank_rows(self, rows, query, k):
        """The ``k`` rows nearest to ``query`` with their distances.

        Ties are broken by ``(song_id, offset)``.
        """

        diff = self._vectors64[rows] - np.asarray(query, dtype=np.float64)
        distances = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        order = np.lexsort((self.offsets[rows], self.song_ids[rows],
                            distances))[:k]
        return rows[order], distances[order]

    def __repr__(self):
        return "CoarseIndex(profile={p!r}, nlist={n}, entries={e})"\
            .format(p=self.profile, n=self.nlist, e=self.n_entries)


def build_index(songs, profile, nlist=None, seed=0, nprobe=None):
    """Cluster the fingerprints of one profile into an inverted-file index.

    Parameters
    ----------
    songs : Iterable[SongRecord]
    profile : str
    nlist : int, optional
        Number of k-means lists, ``round(sqrt(N))`` when omitted
    seed : int, optional
    nprobe : int, optional

    Returns
    -------
    CoarseIndex
    """

    vectors, song_ids, offsets = [], [], []
    for song in songs:
        if profile not in song.prints:
            continue
        prints = song.prints[profile].prints
        vectors.append(prints)
        song_ids.append(np.full(len(prints), song.song_id, dtype=np.int64))
        offsets.append(np.arange(len(prints), dtype=np.int64))
    if not vectors:
        raise SearchIndexError("empty database for profile {p!r}"
                               .format(p=profile))

    vectors = np.concatenate(vectors).astype(np.float32)
    song_ids = np.concatenate(song_ids)
    offsets = np.concatenate(offsets)
    n = len(vectors)
    nlist = nlist or max(1, int(round(np.sqrt(n))))
    if not 1 <= nlist <= n:
        raise SearchIndexError("nlist must lie in [1, {n}], got {k}"
                               .format(n=n, k=nlist))
    if nprobe is not None and not 1 <= nprobe <= nlist:
        raise SearchIndexError("nprobe must lie in [1, {n}]".format(n=nlist))

    n_distinct = len(np.unique(vectors, axis=0))
    if n_distinct < nlist:
        warnings.warn("Only {d} distinct fingerprints for {k} lists"
                      .format(d=n_distinct, k=nlist))
    kmeans = KMeans(n_clusters=nlist, n_init=1, max_iter=25,
                    random_state=seed).fit(vectors.astype(np.float64))
    centroids = kmeans.cluster_centers_.astype(np.float32)
    assignments = kmeans.labels_

    order = np.lexsort((offsets, song_ids, assignments))
    bucket_offsets = np.concatenate(
        [[0], np.cumsum(np.bincount(assignments, minlength=nlist))])
    logger.info("Built %s index: %d entries in %d lists", profile, n, nlist)
    return CoarseIndex(profile, centroids, vectors[order], song_ids[order],
                       offsets[order], bucket_offsets, nprobe)


def _check_k(k):
    if k < 1:
        raise SearchIndexError("k must be at least 1")


def exact_search(index, query, k):
    """Exhaustive Euclidean nearest-neighbour search.

    Parameters
    ----------
    index : CoarseIndex
    query : numpy.ndarray
        A 128-d fingerprint
    k : int

    Returns
    -------
    List[(IndexEntry, float)]
        Nearest entries with their distances
    """

    _check_k(k)
    rows, distances = index.rank_rows(np.arange(index.n_entries), query, k)
    return [(index.entry(r), float(d)) for r, d in zip(rows, distances)]


def _scanned_rows(index, query, nprobe):
    nprobe = index.nprobe if nprobe is None else nprobe
    if not 1 <= nprobe <= index.nlist:
        raise SearchIndexError("nprobe must lie in [1, {n}], got {p}"
                               .format(n=index.nlist, p=nprobe))
    distances = np.linalg.norm(index._centroids64 - query, axis=1)
    lists = np.argsort(distances, kind="stable")[:nprobe]
    return np.concatenate([index.bucket(j) for j in lists])


def ann_search(index, query, k=DEFAULT_TOP_K, nprobe=None):
    """Nearest entries among the ``nprobe`` lists closest to the query.

    Parameters
    ----------
    index : CoarseIndex
    query : numpy.ndarray
    k : int, optional
    nprobe : int, optional

    Returns
    -------
    List[(IndexEntry, float)]
    """

    _check_k(k)
    query = np.asarray(query, dtype=np.float64)
    rows, distances = index.rank_rows(_scanned_rows(index, query, nprobe),
                                      query, k)
    return [(index.entry(r), float(d)) for r, d in zip(rows, distances)]


class SongDatabase(object):
    """Song records with one coarse index per available profile.

    Parameters
    ----------
    songs : Dict[int, SongRecord]
    indexes : Dict[str, CoarseIndex]
    """

    def __init__(self, songs, indexes):
        self.songs = dict(songs)
        self.indexes = dict(indexes)

    @classmethod
    def from_records(cls, records, nlist=None, seed=0):
        records = list(records)
        if not records:
            raise SearchIndexError("empty database")
        indexes = {}
        for profile in PROFILES:
            if any(profile in r.prints for r in records):
                indexes[profile] = build_index(records, profile, nlist, seed)
        return cls({r.song_id: r for r in records}, indexes)

    def __len__(self):
        return len(self.songs)

    def index(self, profile):
        if profile not in self.indexes:
            raise SearchIndexError("no {p} index in the database"
                                   .format(p=profile))
        return self.indexes[profile]


def make_song_record(song_id, title, w, encoder):
    """Fingerprint a song with every profile its duration allows."""
    if w.sample_rate != SAMPLE_RATE:
        w = resample(w, SAMPLE_RATE)
    features = cqt(w)
    prints = {}
    for profile in PROFILES:
        config = profile_config(profile)
        if not encoder.accepts(config):
            continue
        if window_count(features.n_frames, config) > 0:
            prints[profile] = encode_sequence(features, config, encoder,
                                              song_id)
    if not prints:
        raise WindowError.default(features.n_frames,
                                  profile_config("short").window_frames)
    return SongRecord(song_id, title, prints, w.duration_s)


def build_database(songs, encoder, nlist=None, seed=0, n_processes=1):
    """Fingerprint songs in parallel and index them.

    Parameters
    ----------
    songs : Sequence[(int, str, Waveform)]
        Song id, title and audio
    encoder : Encoder
    nlist : int, optional
    seed : int, optional
    n_processes : int, optional

    Returns
    -------
    SongDatabase
    """

    tasks = {song_id: (make_song_record, (song_id, title, w, encoder),
                       float(w.n_samples))
             for song_id, title, w in songs}
    records = _execution.unwrap(_execution.run(tasks, n_processes))
    return SongDatabase.from_records(
        [records[song_id] for song_id, _, _ in songs], nlist, seed)


def _shift_bins(data, shift):
    out = np.zeros_like(data)
    if shift >= 0:
        out[shift:] = data[:len(data) - shift]
    else:
        out[:shift] = data[-shift:]
    return out


def _too_short(n_frames, config):
    return WindowError("query too short ({n} frames < {w})"
                       .format(n=n_frames, w=config.window_frames))


def _encode_query(query, config, encoder, key_shifts):
    try:
        features = cqt(query)
    except AudioError:
        raise _too_short(0, config)
    if window_count(features.n_frames, config) == 0:
        raise _too_short(features.n_frames, config)
    return [encode_sequence(
        features.with_data(_shift_bins(features.data, int(shift))), config,
        encoder) for shift in key_shifts]


def _candidate_starts(index, sequence, top_k, nprobe):
    """Start offsets per song voted for by the nearest stored prints."""
    song_ids, starts = [], []
    for i, vector in enumerate(sequence.prints):
        query = np.asarray(vector, dtype=np.float64)
        rows, _ = index.rank_rows(_scanned_rows(index, query, nprobe), query,
                                  top_k)
        song_ids.append(index.song_ids[rows])
        starts.append(index.offsets[rows] - i)
    return np.concatenate(song_ids), np.concatenate(starts)


def _group_starts(song_ids, starts):
    if len(song_ids) == 0:
        return {}
    pairs = np.unique(np.column_stack([song_ids, starts]), axis=0)
    groups = np.split(pairs, np.flatnonzero(np.diff(pairs[:, 0])) + 1)
    return {int(g[0, 0]): g[:, 1] for g in groups}


def _crop(query, length):
    if query.n_prints <= length:
        return query
    return query._replace(prints=query.prints[:length])


def _rerank_offsets(starts, last):
    slack = np.arange(-OFFSET_SLACK, OFFSET_SLACK + 1)
    return np.unique(np.clip(np.add.outer(starts, slack), 0, last))


def _score_song(queries, stored, offsets, rerank):
    if rerank == "corr":
        try:
            return best_pearson(queries, stored, offsets)[:2]
        except MatchingError:
            return None
    best = None
    length = queries[0].n_prints
    for offset in offsets:
        block = stored._replace(
            prints=stored.prints[offset:offset + length])
        for query in queries:
            score = 1.0 - dtw_distance(query, block)
            if best is None or score > best[0]:
                best = (score, int(offset))
    return best


def _query_profile(db, duration_s, encoder):
    preferred = select_profile(duration_s)
    usable = [p for p in PROFILES if p in db.indexes and
              encoder.accepts(profile_config(p))]
    if preferred in usable or not usable:
        return preferred
    return usable[0]


def query_song(db, query, encoder, n_results=10, top_k=DEFAULT_TOP_K,
               nprobe=None, rerank="corr", key_shifts=DEFAULT_KEY_SHIFTS,
               profile=None):
    """Two-step search for the songs most similar to a query recording.

    Candidate offsets found for any transposition are pooled per song and
    every transposition is rescored at all of them.

    Parameters
    ----------
    db : SongDatabase
    query : Waveform
    encoder : Encoder
    n_results : int, optional
    top_k : int, optional
        Neighbours retrieved per query fingerprint
    nprobe : int, optional
    rerank : str, optional
        ``"corr"`` (Pearson over aligned blocks) or ``"dtw"``
        (``1 - DTW distance``)
    key_shifts : Iterable[int], optional
        Transpositions of the query in CQT bins, two semitones either way
        by default; each song keeps its best score over all of them
    profile : str, optional
        Overrides the duration rule (short below 15 s, otherwise the
        profile the encoder and database support)

    Returns
    -------
    QueryResult

    Raises
    ------
    WindowError
        When the query is shorter than one analysis window
    """

    if len(db) == 0:
        raise SearchIndexError("empty database")
    if rerank not in RERANK_METHODS:
        raise ValueError("rerank must be one of {m}".format(m=RERANK_METHODS))
    key_shifts = tuple(key_shifts)
    if not key_shifts:
        raise ValueError("key_shifts must not be empty")
    _check_k(top_k)

    if query.sample_rate != SAMPLE_RATE:
        query = resample(query, SAMPLE_RATE)
    profile = profile or _query_profile(db, query.duration_s, encoder)
    index = db.index(profile)
    sequences = _encode_query(query, profile_config(profile), encoder,
                              key_shifts)

    ann_start = perf_counter()
    hits = [_candidate_starts(index, s, top_k, nprobe) for s in sequences]
    candidates = _group_starts(np.concatenate([h[0] for h in hits]),
                               np.concatenate([h[1] for h in hits]))
    ann_s = perf_counter() - ann_start

    rerank_start = perf_counter()
    best, n_candidates = {}, 0
    for song_id in sorted(candidates):
        stored = db.songs[song_id].prints[profile]
        queries = [_crop(s, stored.n_prints) for s in sequences]
        offsets = _rerank_offsets(candidates[song_id],
                                  stored.n_prints - queries[0].n_prints)
        n_candidates += len(offsets)
        scored = _score_song(queries, stored, offsets, rerank)
        if scored is not None:
            best[song_id] = scored
    ranking = sorted(((song_id, score, offset)
                      for song_id, (score, offset) in best.items()),
                     key=lambda r: (-r[1], r[0]))[:n_results]
    rerank_s = perf_counter() - rerank_start

    logger.debug("Query (%s): %d candidate songs, %d offsets, ann %.4f s, "
                 "rerank %.4f s", profile, len(best), n_candidates, ann_s,
                 rerank_s)
    return QueryResult(ranking, ann_s, rerank_s, profile, n_candidates)


def exact_rerank(db, query_prints, profile):
    """Rank every song by Pearson correlation over all offsets.

    Parameters
    ----------
    db : SongDatabase
    query_prints : FingerprintSequence
    profile : str

    Returns
    -------
    List[(int, float, int)]
    """

    ranking = []
    for song_id, song in db.songs.items():
        if profile not in song.prints:
            continue
        stored = song.prints[profile]
        try:
            score, offset = max_pearson_with_offset(
                _crop(query_prints, stored.n_prints), stored)
        except MatchingError:
            continue
        ranking.append((song_id, score, offset))
    return sorted(ranking, key=lambda r: (-r[1], r[0]))


def _ranking(result):
    return result.ranking if isinstance(result, QueryResult) else result


def _truth_ranks(results, truth):
    ranks = []
    for query_id, result in results.items():
        if query_id not in truth:
            raise ValueError("No ground truth for query {q!r}"
                             .format(q=query_id))
        ranks.append(next((k + 1 for k, row in enumerate(_ranking(result))
                           if row[0] == truth[query_id]), None))
    return ranks


def top_n_hit_rate(results, truth, n):
    """Fraction of queries whose true song is ranked within the top ``n``.

    Parameters
    ----------
    results : Dict[Hashable, Union[QueryResult, List[(int, float, int)]]]
    truth : Dict[Hashable, int]
    n : int

    Returns
    -------
    float
    """

    ranks = _truth_ranks(results, truth)
    if not ranks:
        raise ValueError("No queries")
    return sum(1 for r in ranks if r is not None and r <= n) / \
        float(len(ranks))


def mean_reciprocal_rank(results, truth):
    """Mean of ``1 / rank`` of the true song, 0 when it is not ranked."""
    ranks = _truth_ranks(results, truth)
    if not ranks:
        raise ValueError("No queries")
    return sum(1.0 / r for r in ranks if r is not None) / len(ranks)


def bench_query(db, queries, encoder, repetitions=1, **kwargs):
    """Time both search steps over queries and repetitions.

    Parameters
    ----------
    db : SongDatabase
    queries : Sequence[Waveform]
    encoder : Encoder
    repetitions : int, optional
    kwargs
        Passed on to :func:`query_song`

    Returns
    -------
    List[(str, float, float)]
        ``(step, mean_s, std_s)`` for the ``ann`` and ``rerank`` steps
    """

    if not queries:
        raise ValueError("Need at least one query")
    ann, rerank = [], []
    for _ in range(repetitions):
        for query in queries:
            result = query_song(db, query, encoder, **kwargs)
            ann.append(result.ann_s)
            rerank.append(result.rerank_s)
    return [("ann",) + mean_std(ann), ("rerank",) + mean_std(rerank)]


def write_bench_csv(path, rows):
    """Write timing rows with header ``step,mean_s,std_s``."""
    with open(str(path), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("step", "mean_s", "std_s"))
        for step, mean, std in rows:
            writer.writerow((step, "{m:.6f}".format(m=mean),
                             "{s:.6f}".format(s=std)))


def index_to_bytes(index):
    """Serialize a coarse index as a CHIX blob."""
    dim = index.vectors.shape[1]
    entries = np.empty(index.n_entries, dtype=_entry_dtype(dim))
    entries["vector"] = index.vectors
    entries["song_id"] = index.song_ids
    entries["offset"] = index.offsets
    return pack_header(_INDEX_MAGIC, _INDEX_HEADER,
                       PROFILES.index(index.profile), dim, index.nlist,
                       index.n_entries, index.nprobe) + \
        to_le_bytes(index.centroids, np.float32) + \
        to_le_bytes(index.bucket_offsets, np.uint32) + entries.tobytes()


def index_from_bytes(blob):
    """Parse a CHIX blob."""
    (profile, dim, nlist, count, nprobe), offset = \
        unpack_header(blob, _INDEX_MAGIC, _INDEX_HEADER, "index")
    if profile >= len(PROFILES) or dim != EMBEDDING_DIM:
        raise FormatError.default("index", "profile {p}, dim {d}"
                                  .format(p=profile, d=dim))
    centroids, offset = read_array(blob, offset, np.float32, nlist * dim,
                                   "index")
    bucket_offsets, offset = read_array(blob, offset, np.uint32, nlist + 1,
                                        "index")
    dtype = _entry_dtype(dim)
    if offset + dtype.itemsize * count != len(blob):
        raise FormatError.default("index", "payload size mismatch")
    entries = np.frombuffer(blob, dtype=dtype, count=count, offset=offset)
    try:
        return CoarseIndex(PROFILES[profile], centroids.reshape(nlist, dim),
                           entries["vector"], entries["song_id"],
                           entries["offset"], bucket_offsets, nprobe)
    except ValueError as e:
        raise FormatError.default("index", str(e))


def save_database(db, directory):
    """Write the song registry, fingerprint files and index files.

    Parameters
    ----------
    db : SongDatabase
    directory : str or pathlib.Path
    """

    directory = str(directory)
    os.makedirs(directory, exist_ok=True)
    registry = []
    for song_id in sorted(db.songs):
        song = db.songs[song_id]
        files = {}
        for profile, sequence in sorted(song.prints.items()):
            files[profile] = "song_{i:06d}_{p}.chfp".format(i=song_id,
                                                            p=profile)
            save_fingerprints(os.path.join(directory, files[profile]),
                              sequence)
        registry.append({"song_id": song_id, "title": song.title,
                         "duration_s": song.duration_s,
                         "fingerprint_file": files})
    with open(os.path.join(directory, _REGISTRY), "w") as fh:
        json.dump(registry, fh, indent=2, sort_keys=True)
    for profile, index in db.indexes.items():
        path = os.path.join(directory, "index_{p}.chix".format(p=profile))
        with open(path, "wb") as fh:
            fh.write(index_to_bytes(index))


def load_database(directory):
    """Read a database written by :func:`save_database`."""
    directory = str(directory)
    try:
        with open(os.path.join(directory, _REGISTRY)) as fh:
            registry = json.load(fh)
        songs = {}
        for item in registry:
            prints = {profile: load_fingerprints(os.path.join(directory, f),
                                                 item["song_id"])
                      for profile, f in item["fingerprint_file"].items()}
            songs[item["song_id"]] = SongRecord(item["song_id"],
                                                item["title"], prints,
                                                item["duration_s"])
    except (ValueError, KeyError, TypeError) as e:
        raise FormatError.default("registry", str(e))

    indexes = {}
    for profile in PROFILES:
        path = os.path.join(directory, "index_{p}.chix".format(p=profile))
        if os.path.exists(path):
            with open(path, "rb") as fh:
                indexes[profile] = index_from_bytes(fh.read())
    return SongDatabase(songs, indexes)
