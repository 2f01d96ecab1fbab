#  -*- coding: utf-8 -*-
"""Extraction of groups of time-aligned fragments.

An original song is split at silences, adjacent pieces are merged and
filtered by length, and near-duplicate fragments are removed. The
silence parameters are chosen by grid search to maximize the number of
unique fragments. Each fragment is then located in every cover by
cross-correlating fingerprint sequences.
"""

import logging
import warnings

import librosa
import numpy as np

from . import _execution
from ._audio import cqt, resample, rms_envelope
from ._classes import (AlignedGroup, EncoderConfig, Fragment,
                       FragmentationResult, Match, SilenceMask,
                       RELEVANT, SAMPLE_RATE, UNCERTAIN)
from ._exceptions import MatchingError, WindowError
from ._fingerprint import encode_sequence, fingerprint_waveform
from ._matching import detect_peaks, max_cross_correlation, \
    seq_cross_correlation

logger = logging.getLogger(__name__)


def find_silence_mask(env, l_db):
    """Flag frames more than ``l_db`` dB below the loudest frame.

    Parameters
    ----------
    env : RmsEnvelope
    l_db : float

    Returns
    -------
    SilenceMask
    """

    values = env.values
    peak = float(values.max()) if len(values) else 0.0
    if peak == 0.0:
        silent = np.ones(len(values), dtype=bool)
    else:
        level = librosa.amplitude_to_db(values, ref=peak, amin=1e-10,
                                        top_db=None)
        silent = level < -l_db
    return SilenceMask(silent, env.frame_length, env.hop, env.sample_rate)


def split_by_silence(w, mask, source_id=None):
    """Turn maximal runs of non-silent frames into fragments.

    A run of frames ``t0 .. t1`` covers samples
    ``[t0 * hop, t1 * hop + frame_length)``; a run reaching the last frame
    extends to the end of the waveform.

    Parameters
    ----------
    w : Waveform
    mask : SilenceMask
    source_id : Hashable, optional

    Returns
    -------
    List[Fragment]
    """

    voiced = np.concatenate([[0], (~mask.silent).astype(np.int8), [0]])
    edges = np.diff(voiced)
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1) - 1
    last = len(mask.silent) - 1

    fragments = []
    for t0, t1 in zip(starts, ends):
        begin = t0 * mask.hop
        end = w.n_samples if t1 == last else \
            min(w.n_samples, t1 * mask.hop + mask.frame_length)
        fragments.append(Fragment(source_id, begin / float(w.sample_rate),
                                  end / float(w.sample_rate)))
    return fragments


def merge_fragments(frags, d_p, d_min, d_max):
    """Greedily merge neighbours separated by less than ``d_p`` seconds.

    A merge is skipped when the result would exceed ``d_max``. Fragments
    outside ``[d_min, d_max]`` are dropped afterwards.

    Parameters
    ----------
    frags : Sequence[Fragment]
        Sorted by start and non-overlapping
    d_p : float
    d_min : float
    d_max : float

    Returns
    -------
    List[Fragment]
    """

    merged = []
    for fragment in frags:
        if merged:
            current = merged[-1]
            if fragment.start_s - current.end_s < d_p and \
                    fragment.end_s - current.start_s <= d_max:
                merged[-1] = current._replace(end_s=fragment.end_s)
                continue
        merged.append(fragment)
    return [f for f in merged if d_min <= f.duration_s <= d_max]


def dedup_fragments(frags, prints, alpha_corr, min_overlap_frac=0.8):
    """Keep fragments in order unless they correlate with a kept one.

    A fragment is kept when its maximum cross-correlation with every
    fragment kept so far is at most ``alpha_corr``.

    Parameters
    ----------
    frags : Sequence[Fragment]
    prints : Sequence[FingerprintSequence]
        One sequence per fragment
    alpha_corr : float
    min_overlap_frac : float, optional

    Returns
    -------
    List[Fragment]
    """

    if len(frags) != len(prints):
        raise ValueError("Need one fingerprint sequence per fragment")
    kept = []
    for fragment, sequence in zip(frags, prints):
        if all(max_cross_correlation(sequence, other, min_overlap_frac)
               <= alpha_corr for _, other in kept):
            kept.append((fragment, sequence))
    return [fragment for fragment, _ in kept]


def fragment_prints(features, fragment, encoder_config, encoder):
    """Fingerprints of a fragment cut from a song's feature matrix."""
    start = int(round(fragment.start_s * features.frame_rate))
    end = int(round(fragment.end_s * features.frame_rate))
    return encode_sequence(features.with_data(features.data[:, start:end]),
                           encoder_config, encoder, fragment)


def _prepare(w):
    if w.sample_rate != SAMPLE_RATE:
        w = resample(w, SAMPLE_RATE)
    return w


def evaluate_combination(w, env, d_p, l_db, config, encoder,
                         encoder_config=None, features=None,
                         source_id="original"):
    """Unique fragments for one ``(d_p, l_db)`` grid point.

    Runs silence masking, splitting, merging and deduplication.

    Parameters
    ----------
    w : Waveform
    env : RmsEnvelope
    d_p : float
    l_db : float
    config : PipelineConfig
    encoder : Encoder
    encoder_config : EncoderConfig, optional
        Defaults to the short profile
    features : FeatureMatrix, optional
        CQT of ``w`` if already computed
    source_id : Hashable, optional

    Returns
    -------
    List[Fragment]
    """

    encoder_config = encoder_config or EncoderConfig.short()
    fragments = merge_fragments(
        split_by_silence(w, find_silence_mask(env, l_db), source_id),
        d_p, config.d_min, config.d_max)
    if not fragments:
        return []

    if features is None:
        features = cqt(_prepare(w))
    usable, prints = [], []
    for fragment in fragments:
        try:
            prints.append(fragment_prints(features, fragment,
                                          encoder_config, encoder))
        except WindowError:
            logger.debug("Fragment %s shorter than one window", fragment)
            continue
        usable.append(fragment)
    return dedup_fragments(usable, prints, config.alpha_corr)


def best_fragmentation(w, config, encoder, encoder_config=None,
                       n_processes=1, source_id="original"):
    """Grid search for the silence parameters with most unique fragments.

    Combinations are visited in ascending ``(d_p, l_db)`` order and the
    first one reaching the maximal count wins.

    Parameters
    ----------
    w : Waveform
    config : PipelineConfig
    encoder : Encoder
    encoder_config : EncoderConfig, optional
    n_processes : int, optional
    source_id : Hashable, optional

    Returns
    -------
    FragmentationResult
    """

    w = _prepare(w)
    env = rms_envelope(w)
    features = cqt(w)
    grid = [(d_p, l_db) for d_p in config.pause_set for l_db in config.db_set]
    tasks = {(d_p, l_db): (evaluate_combination,
                           dict(w=w, env=env, d_p=d_p, l_db=l_db,
                                config=config, encoder=encoder,
                                encoder_config=encoder_config,
                                features=features, source_id=source_id),
                           1.0)
             for d_p, l_db in grid}
    results = _execution.unwrap(_execution.run(tasks, n_processes))

    best = grid[0]
    for combination in grid:
        logger.debug("d_p=%s l_db=%s: %d fragments", combination[0],
                     combination[1], len(results[combination]))
        if len(results[combination]) > len(results[best]):
            best = combination

    fragments = results[best]
    if not fragments:
        warnings.warn("No unique fragments found in {s}".format(s=source_id))
        return FragmentationResult((), best[0], best[1], "empty")
    logger.info("%s: %d unique fragments with d_p=%s l_db=%s", source_id,
                len(fragments), best[0], best[1])
    return FragmentationResult(fragments, best[0], best[1])


def _match_prints(fragment, prints, cover_prints, cover_duration_s, cover_id,
                  beta_irrel):
    if cover_duration_s < fragment.duration_s:
        raise MatchingError("cover shorter than fragment ({c:.2f} s < "
                            "{f:.2f} s)".format(c=cover_duration_s,
                                                f=fragment.duration_s))
    curve = seq_cross_correlation(prints, cover_prints, contained=True)
    peaks = detect_peaks(curve, beta_irrel, max(1, prints.n_prints // 2))

    candidates = []
    for peak in peaks:
        if peak.score <= beta_irrel:
            continue
        start = min(peak.start_s, cover_duration_s - fragment.duration_s)
        candidates.append((Fragment(cover_id, start,
                                    start + fragment.duration_s, "cover"),
                           peak.score))
    return candidates


def match_cover(fragment, prints, cover, encoder, config, cover_id="cover"):
    """Locate a fragment in a cover by cross-correlation peak picking.

    Parameters
    ----------
    fragment : Fragment
    prints : FingerprintSequence
        Fingerprints of the fragment
    cover : Waveform
    encoder : Encoder
    config : PipelineConfig
    cover_id : Hashable, optional

    Returns
    -------
    List[(Fragment, float)]
        Candidate cover fragments of the fragment's duration with their
        correlation, strongest first
    """

    if cover.duration_s < fragment.duration_s:
        raise MatchingError("cover shorter than fragment ({c:.2f} s < "
                            "{f:.2f} s)".format(c=cover.duration_s,
                                                f=fragment.duration_s))
    cover_prints = fingerprint_waveform(cover, prints.config, encoder,
                                        cover_id)
    return _match_prints(fragment, prints, cover_prints, cover.duration_s,
                         cover_id, config.beta_irrel)


def filter_matches(candidates, beta_rel, beta_irrel):
    """Split candidates into relevant and uncertain matches.

    Parameters
    ----------
    candidates : Iterable[(Fragment, float)]
    beta_rel : float
    beta_irrel : float

    Returns
    -------
    List[Match]
        Correlation at least ``beta_rel``
    List[Match]
        Correlation strictly between the thresholds
    """

    relevant, uncertain = [], []
    for fragment, correlation in candidates:
        if correlation >= beta_rel:
            relevant.append(Match(fragment, correlation, RELEVANT))
        elif correlation > beta_irrel:
            uncertain.append(Match(fragment, correlation, UNCERTAIN))
    return relevant, uncertain


def extract_aligned_groups(original, covers, config, encoder,
                           encoder_config=None, n_processes=1,
                           original_id="original", cover_ids=None):
    """Aligned fragment groups of an original song and its covers.

    Parameters
    ----------
    original : Waveform
    covers : Sequence[Waveform]
    config : PipelineConfig
    encoder : Encoder
    encoder_config : EncoderConfig, optional
        Defaults to the short profile
    n_processes : int, optional
    original_id : Hashable, optional
    cover_ids : Sequence[Hashable], optional
        Defaults to ``"cover0"``, ``"cover1"``, ...

    Returns
    -------
    List[AlignedGroup]
        One group per unique fragment, in chronological order
    """

    if len(covers) == 0:
        raise ValueError("Need at least one cover")
    if cover_ids is None:
        cover_ids = ["cover{k}".format(k=k) for k in range(len(covers))]
    if len(cover_ids) != len(covers):
        raise ValueError("Need one id per cover")
    encoder_config = encoder_config or EncoderConfig.short()

    original = _prepare(original)
    fragmentation = best_fragmentation(original, config, encoder,
                                       encoder_config, n_processes,
                                       original_id)
    if not fragmentation.fragments:
        return []

    features = cqt(original)
    prints = [fragment_prints(features, f, encoder_config, encoder)
              for f in fragmentation.fragments]
    covers = [_prepare(c) for c in covers]
    cover_prints = [fingerprint_waveform(c, encoder_config, encoder, cid)
                    for c, cid in zip(covers, cover_ids)]

    tasks = {}
    for i, (fragment, sequence) in enumerate(zip(fragmentation.fragments,
                                                 prints)):
        for k, cover in enumerate(covers):
            tasks[(i, k)] = (_match_prints,
                             (fragment, sequence, cover_prints[k],
                              cover.duration_s, cover_ids[k],
                              config.beta_irrel),
                             float(cover_prints[k].n_prints))
    results = _execution.unwrap(_execution.run(tasks, n_processes))

    groups = []
    for i, fragment in enumerate(fragmentation.fragments):
        matches = []
        for k in range(len(covers)):
            relevant, uncertain = filter_matches(results[(i, k)],
                                                 config.beta_rel,
                                                 config.beta_irrel)
            matches.extend(sorted(relevant + uncertain,
                                  key=lambda m: m.fragment.start_s))
        groups.append(AlignedGroup(fragment, matches))

    logger.info("groups=%d relevant=%d uncertain=%d", len(groups),
                sum(len(g.relevant) for g in groups),
                sum(len(g.uncertain) for g in groups))
    return groups
