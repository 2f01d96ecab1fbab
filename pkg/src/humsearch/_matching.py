#  -*- coding: utf-8 -*-
"""Similarity primitives over fingerprint sequences.

Correlation of two fingerprint sequences at a lag is the mean dot product of
the overlapping fingerprints, so for unit-norm prints every score lies in
[-1, 1] and is directly comparable to the relevance thresholds.
"""

import math

import librosa
import numpy as np
import scipy.signal

from ._classes import CorrelationCurve, Peak
from ._exceptions import MatchingError

_DTW_STEPS = np.array([[1, 1], [1, 0], [0, 1]])
_PEARSON_CHUNK = 256


def _prints(seq):
    prints = np.asarray(seq.prints, dtype=np.float64)
    if prints.shape[0] == 0:
        raise MatchingError("empty sequence")
    return prints


def _check_configs(a, b):
    if (a.config.window_frames, a.config.step_frames) != \
            (b.config.window_frames, b.config.step_frames):
        raise MatchingError("config mismatch: {a} vs {b}"
                            .format(a=a.config.profile, b=b.config.profile))


def min_overlap(m, n, min_overlap_frac):
    """Smallest admissible overlap for sequences of lengths ``m`` and ``n``."""
    return max(1, int(math.ceil(min_overlap_frac * min(m, n) - 1e-9)))


def seq_cross_correlation(a, b, min_overlap_frac=0.8, contained=False):
    """Normalized cross-correlation of two fingerprint sequences.

    ``score(l) = mean_t a[t] . b[t + l]`` over the overlapping indices.

    Parameters
    ----------
    a : FingerprintSequence
    b : FingerprintSequence
    min_overlap_frac : float, optional
        Lags whose overlap is shorter than this fraction of the shorter
        sequence are excluded.
    contained : bool, optional
        Only consider lags where ``a`` lies entirely inside ``b`` (matching a
        fragment against a full recording). ``a`` must not be longer than
        ``b``.

    Returns
    -------
    CorrelationCurve
    """

    _check_configs(a, b)
    x, y = _prints(a), _prints(b)
    m, n = len(x), len(y)

    if contained:
        if m > n:
            raise MatchingError("query longer than the sequence it is "
                                "matched against ({m} > {n})".format(m=m, n=n))
        lo, hi = 0, n - m
    else:
        k = min_overlap(m, n, min_overlap_frac)
        lo, hi = -(m - k), n - k

    dots = x @ y.T
    lags = np.arange(lo, hi + 1)
    sums = np.array([np.trace(dots, offset=lag) for lag in lags])
    overlaps = np.minimum(m, n - lags) - np.maximum(0, -lags)
    scores = np.clip(sums / overlaps, -1.0, 1.0)
    return CorrelationCurve(scores, -lo, a.config.hop_s)


def max_cross_correlation(a, b, min_overlap_frac=0.8):
    """Maximum of :func:`seq_cross_correlation` over all admissible lags."""
    return float(np.max(seq_cross_correlation(a, b, min_overlap_frac).scores))


def correlation_matrix(sequences, min_overlap_frac=0.8):
    """Symmetric matrix of maximum cross-correlations.

    Parameters
    ----------
    sequences : List[FingerprintSequence]
    min_overlap_frac : float, optional

    Returns
    -------
    numpy.ndarray
    """

    n = len(sequences)
    matrix = np.eye(n)
    for i in range(n):
        for j in range(i + 1, n):
            matrix[i, j] = matrix[j, i] = max_cross_correlation(
                sequences[i], sequences[j], min_overlap_frac)
    return matrix


def _pearson_scores(queries, blocks):
    """Pearson coefficients of each flattened query against each block.

    Returns a ``(len(blocks), len(queries))`` array; blocks or queries with
    zero variance yield NaN.
    """

    q = queries - queries.mean(axis=1, keepdims=True)
    q_norms = np.linalg.norm(q, axis=1)
    sums = blocks.sum(axis=1)
    squares = np.einsum("ij,ij->i", blocks, blocks)
    x_var = squares - sums ** 2 / blocks.shape[1]
    x_norms = np.sqrt(np.maximum(x_var, 0.0))
    # q is centered, so the block mean drops out of the dot product
    with np.errstate(invalid="ignore", divide="ignore"):
        scores = (blocks @ q.T) / np.outer(x_norms, q_norms)
    flat = x_var <= 1e-10 * np.maximum(squares, 1e-300)
    scores[flat, :] = np.nan
    scores[:, q_norms < 1e-12] = np.nan
    return np.clip(scores, -1.0, 1.0)


def best_pearson(queries, c, offsets=None):
    """Best Pearson coefficient of equally long queries against ``c``.

    Every query is compared with the ``|q| x 128`` block of ``c`` starting
    at each offset, both flattened. Cost grows linearly with the number of
    offsets.

    Parameters
    ----------
    queries : Sequence[FingerprintSequence]
        Sequences of one common length, e.g. transpositions of one query
    c : FingerprintSequence
    offsets : Iterable[int], optional
        Offsets to try; all offsets ``0 .. |c| - |q|`` when omitted.
        Offsets outside that range are ignored.

    Returns
    -------
    float
        The maximum coefficient
    int
        The offset where it occurs
    int
        Index of the query reaching it; ties go to the smallest offset,
        then the smallest query index
    """

    x = np.stack([_prints(q) for q in queries])
    y = _prints(c)
    m, n = x.shape[1], len(y)
    if m > n:
        raise MatchingError("query longer than candidate ({m} > {n})"
                            .format(m=m, n=n))

    if offsets is None:
        offsets = np.arange(n - m + 1)
    else:
        offsets = np.unique(np.asarray(list(offsets), dtype=np.int64))
        offsets = offsets[(offsets >= 0) & (offsets <= n - m)]

    flat_queries = x.reshape(len(x), -1)
    steps = np.arange(m)
    best = (-np.inf, None, None)
    for start in range(0, len(offsets), _PEARSON_CHUNK):
        chunk = offsets[start:start + _PEARSON_CHUNK]
        blocks = y[chunk[:, None] + steps].reshape(len(chunk), -1)
        scores = _pearson_scores(flat_queries, blocks)
        if np.all(np.isnan(scores)):
            continue
        k, j = np.unravel_index(int(np.nanargmax(scores)), scores.shape)
        if scores[k, j] > best[0]:
            best = (float(scores[k, j]), int(chunk[k]), int(j))

    if best[1] is None:
        raise MatchingError("no offset with non-zero variance")
    return best


def max_pearson_with_offset(q, c, offsets=None):
    """Best Pearson coefficient of ``q`` against aligned blocks of ``c``.

    Parameters
    ----------
    q : FingerprintSequence
    c : FingerprintSequence
    offsets : Iterable[int], optional
        See :func:`best_pearson`

    Returns
    -------
    float
        The maximum coefficient
    int
        The offset where it occurs (first one on ties)
    """

    score, offset, _ = best_pearson([q], c, offsets)
    return score, offset


def max_pearson(q, c, offsets=None):
    """Maximum Pearson correlation of ``q`` over its alignments in ``c``.

    Parameters
    ----------
    q : FingerprintSequence
    c : FingerprintSequence
    offsets : Iterable[int], optional

    Returns
    -------
    float
    """

    return max_pearson_with_offset(q, c, offsets)[0]


def dtw_distance(q, c):
    """Path-length normalized DTW distance with cosine cost.

    Cost of a cell is ``1 - cos(q_i, c_j)``; steps are (1, 1), (1, 0) and
    (0, 1) with unit weights, and the path runs from the first to the last
    cell of the grid.

    Parameters
    ----------
    q : FingerprintSequence
    c : FingerprintSequence

    Returns
    -------
    float
    """

    x, y = _prints(q), _prints(c)
    x = x / np.linalg.norm(x, axis=1, keepdims=True)
    y = y / np.linalg.norm(y, axis=1, keepdims=True)
    cost = np.maximum(1.0 - x @ y.T, 0.0)
    accumulated, path = librosa.sequence.dtw(C=cost,
                                             step_sizes_sigma=_DTW_STEPS,
                                             backtrack=True)
    return float(accumulated[-1, -1]) / len(path)


def detect_peaks(curve, min_height, min_separation):
    """Local maxima of a correlation curve, strongest first.

    Peaks below ``min_height`` are ignored; of two peaks closer than
    ``min_separation`` lags the weaker one is suppressed. A flat top counts
    as a single peak at its middle and the curve ends count as peaks when
    they exceed their only neighbour.

    Parameters
    ----------
    curve : CorrelationCurve
    min_height : float
    min_separation : int

    Returns
    -------
    List[Peak]
        Sorted by descending score; ``lag_index`` is the lag in fingerprint
        steps.
    """

    if min_separation < 1:
        raise ValueError("min_separation must be at least 1")

    scores = np.asarray(curve.scores, dtype=np.float64)
    padded = np.concatenate([[-np.inf], scores, [-np.inf]])
    indices, _ = scipy.signal.find_peaks(padded, height=min_height,
                                         distance=min_separation)
    indices = indices - 1
    order = sorted(indices, key=lambda i: (-scores[i], i))

    peaks = []
    for i in order:
        lag = int(i) - curve.lag_zero_index
        peaks.append(Peak(lag, float(scores[i]), lag * curve.hop_s))
    return peaks
