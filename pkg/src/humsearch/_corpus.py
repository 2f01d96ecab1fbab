#  -*- coding: utf-8 -*-
"""Synthetic songs, covers and queries with exact ground truth.

Songs are sequences of tone motifs separated by true silence. Each note is
a sine with two decaying overtones so that its CQT energy sits in a few
bins. Covers and queries are transposed, time-stretched, noisy copies whose
time mapping back to the song is known exactly.
"""

import json
import logging
from fractions import Fraction

import librosa
import numpy as np
import scipy.signal

from ._audio import cqt
from ._classes import (CoverTransform, FragmentGroup, MotifSpec, SynthCorpus,
                       Waveform, F_MIN, SAMPLE_RATE)
from ._exceptions import FormatError
from ._helpers import as_rng
from ._learning import augment_noise

logger = logging.getLogger(__name__)

VOCAL_BINS = (24, 52)
NOTE_RANGE_S = (0.25, 0.75)


def note_frequency(cqt_bin):
    """Frequency in Hz of the centre of a CQT bin."""
    return F_MIN * 2.0 ** (cqt_bin / 12.0)


def synth_motif(spec, sample_rate=SAMPLE_RATE, rng=None):
    """Render a motif.

    Parameters
    ----------
    spec : MotifSpec
    sample_rate : int, optional
    rng : numpy.random.Generator, optional
        Source of the harmonic phases, seeded from ``spec.seed`` when
        omitted

    Returns
    -------
    Waveform
    """

    rng = as_rng(spec.seed if rng is None else rng)
    weights = np.asarray(spec.harmonics, dtype=np.float64)
    pieces = []
    for cqt_bin, duration in spec.notes:
        n = int(round(duration * sample_rate))
        t = np.arange(n) / float(sample_rate)
        phases = rng.uniform(0.0, 2 * np.pi, size=len(weights))
        f0 = note_frequency(cqt_bin)
        tone = sum(a * np.sin(2 * np.pi * f0 * (h + 1) * t + phi)
                   for h, (a, phi) in enumerate(zip(weights, phases)))

        envelope = np.ones(n)
        attack = min(n, int(round(spec.attack_s * sample_rate)))
        release = min(n - attack, int(round(spec.release_s * sample_rate)))
        if attack:
            envelope[:attack] = np.linspace(0.0, 1.0, attack, endpoint=False)
        if release:
            envelope[n - release:] = np.linspace(1.0, 0.0, release)
        pieces.append(spec.amplitude * tone * envelope / weights.sum())
    return Waveform(np.concatenate(pieces), sample_rate)


def random_motif(rng, duration_s=10.0, low_bin=VOCAL_BINS[0],
                 high_bin=VOCAL_BINS[1]):
    """Draw a motif of random notes lasting exactly ``duration_s``.

    Parameters
    ----------
    rng : numpy.random.Generator
    duration_s : float, optional
    low_bin : int, optional
    high_bin : int, optional
        Inclusive range of note bins

    Returns
    -------
    MotifSpec
    """

    rng = as_rng(rng)
    notes, total = [], 0.0
    while total < duration_s - 1e-9:
        duration = min(rng.uniform(*NOTE_RANGE_S), duration_s - total)
        notes.append((int(rng.integers(low_bin, high_bin + 1)), duration))
        total += duration
    return MotifSpec(notes, seed=int(rng.integers(2 ** 31)))


def synth_song(motifs, gaps, seed=0, sample_rate=SAMPLE_RATE):
    """Concatenate motifs separated by silent gaps.

    Parameters
    ----------
    motifs : Sequence[MotifSpec]
    gaps : Sequence[float]
        One gap in seconds between each pair of consecutive motifs
    seed : int, optional
    sample_rate : int, optional

    Returns
    -------
    Waveform
    List[(float, float)]
        Start and end of each motif in seconds
    """

    if len(motifs) == 0:
        raise ValueError("A song needs at least one motif")
    if len(gaps) != len(motifs) - 1:
        raise ValueError("Need one gap between each pair of motifs")

    pieces, boundaries, position = [], [], 0
    for k, motif in enumerate(motifs):
        if k:
            gap = np.zeros(int(round(gaps[k - 1] * sample_rate)))
            pieces.append(gap)
            position += len(gap)
        rng = np.random.default_rng([seed, motif.seed])
        samples = synth_motif(motif, sample_rate, rng).samples
        pieces.append(samples)
        boundaries.append((position / float(sample_rate),
                           (position + len(samples)) / float(sample_rate)))
        position += len(samples)
    return Waveform(np.concatenate(pieces), sample_rate), boundaries


def pitch_stretch(w, shift, stretch):
    """Transpose by ``shift`` semitones and play back at rate ``stretch``.

    The transposition resamples the waveform and the phase vocoder
    restores the duration, combined with the requested stretch into a
    single vocoder pass.

    Parameters
    ----------
    w : Waveform
    shift : float
    stretch : float

    Returns
    -------
    Waveform
        About ``len(w) / stretch`` samples
    """

    samples = w.samples
    ratio = Fraction(1.0)
    if shift != 0:
        ratio = Fraction(2.0 ** (-shift / 12.0)).limit_denominator(1000)
        samples = scipy.signal.resample_poly(samples, ratio.numerator,
                                             ratio.denominator)
    rate = stretch * float(ratio)
    if rate != 1.0:
        samples = librosa.effects.time_stretch(samples, rate=rate)
    return Waveform(np.clip(samples, -1.0, 1.0), w.sample_rate)


def synth_cover(song, transform=CoverTransform(), seed=0):
    """A transformed copy of ``song`` and its time mapping.

    Parameters
    ----------
    song : Waveform
    transform : CoverTransform, optional
    seed : int, optional
        Seed of the added noise

    Returns
    -------
    Waveform
    CoverTransform
        ``map_time`` converts song time to cover time
    """

    if transform.is_identity:
        return Waveform(song.samples.copy(), song.sample_rate), transform

    cover = pitch_stretch(song, transform.shift, transform.stretch)
    if transform.snr_db is not None and np.any(cover.samples):
        cover = augment_noise(cover, transform.snr_db, seed)
    lead = int(round(transform.lead_silence_s * song.sample_rate))
    samples = np.concatenate([np.zeros(lead), cover.samples])
    return Waveform(samples, song.sample_rate), \
        transform._replace(lead_silence_s=lead / float(song.sample_rate))


def _random_transform(rng, spec, lead_range=(0.0, 0.0)):
    return CoverTransform(int(rng.integers(int(np.ceil(spec.shift_range[0])),
                                           int(np.floor(spec.shift_range[1]))
                                           + 1)),
                          rng.uniform(*spec.stretch_range), spec.snr_db,
                          rng.uniform(*lead_range))


def synth_corpus(spec, covers_per_song=2, n_queries=None,
                 lead_range=(0.0, 5.0)):
    """Generate songs, covers and queries from corpus parameters.

    Transpositions are whole semitones drawn from ``spec.shift_range``.
    Each query is one transformed motif of a random song.

    Parameters
    ----------
    spec : CorpusSpec
    covers_per_song : int, optional
    n_queries : int, optional
        Defaults to one per song
    lead_range : (float, float), optional
        Range of the silence prepended to covers

    Returns
    -------
    SynthCorpus
    """

    rng = as_rng(spec.seed)
    n_queries = spec.n_songs if n_queries is None else n_queries

    songs, boundaries, covers = [], {}, {}
    for song_id in range(spec.n_songs):
        motifs = [random_motif(rng, spec.motif_s)
                  for _ in range(spec.motifs_per_song)]
        song, bounds = synth_song(motifs,
                                  [spec.gap_s] * (len(motifs) - 1),
                                  seed=song_id)
        songs.append((song_id, "song {i:04d}".format(i=song_id), song))
        boundaries[song_id] = bounds
        covers[song_id] = []
        for k in range(covers_per_song):
            cover, transform = synth_cover(
                song, _random_transform(rng, spec, lead_range),
                seed=int(rng.integers(2 ** 31)))
            covers[song_id].append(("{s}-cover{k}".format(s=song_id, k=k),
                                    cover, transform))

    queries, truth = [], {}
    for q in range(n_queries):
        song_id = int(rng.integers(spec.n_songs))
        start, end = boundaries[song_id][int(rng.integers(
            spec.motifs_per_song))]
        song = songs[song_id][2]
        excerpt = Waveform(song.samples[int(round(start * song.sample_rate)):
                                        int(round(end * song.sample_rate))],
                           song.sample_rate)
        query, transform = synth_cover(excerpt, _random_transform(rng, spec),
                                       seed=int(rng.integers(2 ** 31)))
        query_id = "query{q:04d}".format(q=q)
        queries.append((query_id, query, transform, start))
        truth[query_id] = song_id

    logger.info("Synthesized %d songs, %d covers, %d queries", len(songs),
                sum(len(c) for c in covers.values()), len(queries))
    return SynthCorpus(songs, boundaries, covers, queries, truth)


def _fit_frames(features, n_frames):
    data = features.data[:, :n_frames]
    return features.with_data(np.pad(data, ((0, 0),
                                            (0, n_frames - data.shape[1]))))


def synthetic_groups(n_groups=20, members=4, duration_s=4.0, seed=0,
                     shift_range=(-2, 2), stretch_range=(0.9, 1.1)):
    """Training groups of CQT fragments of transformed motifs.

    Every group holds a rendered random motif and ``members - 1`` copies
    transposed by whole semitones and time-stretched, all cropped or
    padded to the frame count of the motif.

    Parameters
    ----------
    n_groups : int, optional
    members : int, optional
    duration_s : float, optional
    seed : int, optional
    shift_range : (int, int), optional
    stretch_range : (float, float), optional

    Returns
    -------
    List[FragmentGroup]
    """

    rng = as_rng(seed)
    groups = []
    for g in range(n_groups):
        motif = synth_motif(random_motif(rng, duration_s))
        base = cqt(motif)
        fragments = [base]
        for _ in range(members - 1):
            variant = pitch_stretch(motif,
                                    int(rng.integers(shift_range[0],
                                                     shift_range[1] + 1)),
                                    rng.uniform(*stretch_range))
            fragments.append(_fit_frames(cqt(variant), base.n_frames))
        groups.append(FragmentGroup("motif{g:03d}".format(g=g), fragments))
    return groups


def _transform_dict(transform):
    return {"shift": transform.shift, "stretch": transform.stretch,
            "snr_db": transform.snr_db,
            "lead_silence_s": transform.lead_silence_s}


def ground_truth(corpus):
    """JSON-ready ground truth of a corpus."""
    songs = []
    for song_id, title, _ in corpus.songs:
        songs.append({
            "song_id": song_id, "title": title,
            "boundaries": [list(b) for b in corpus.boundaries[song_id]],
            "covers": [{"cover_id": cover_id,
                        "transform": _transform_dict(transform),
                        "offset_map": {"lead_s": transform.lead_silence_s,
                                       "rate": transform.stretch}}
                       for cover_id, _, transform in corpus.covers[song_id]]})
    queries = [{"query_id": query_id, "song_id": corpus.truth[query_id],
                "start_s": start, "transform": _transform_dict(transform)}
               for query_id, _, transform, start in corpus.queries]
    return {"songs": songs, "queries": queries}


def write_ground_truth(path, corpus):
    """Write the ground truth of a corpus as JSON."""
    with open(str(path), "w") as fh:
        json.dump(ground_truth(corpus), fh, indent=2, sort_keys=True)


def read_ground_truth(path):
    """Read a ground-truth document written by :func:`write_ground_truth`.

    Returns
    -------
    dict
        ``{"songs": [...], "queries": [...]}``
    """

    try:
        with open(str(path)) as fh:
            document = json.load(fh)
    except ValueError as e:
        raise FormatError.default("ground truth", str(e))
    if not isinstance(document, dict) or \
            not isinstance(document.get("songs"), list) or \
            not isinstance(document.get("queries"), list):
        raise FormatError.default("ground truth",
                                  "expected songs and queries")
    return document
