#  -*- coding: utf-8 -*-
"""Value types for humsearch.

Most types are named tuples with a validating ``__new__``. Invariant
violations raise ``ValueError``; configuration loaders translate them into
``ConfigError``.
"""

from collections import namedtuple

import numpy as np

SAMPLE_RATE = 16000
HOP_LENGTH = 512
BINS_PER_OCTAVE = 12
N_OCTAVES = 7
N_BINS = BINS_PER_OCTAVE * N_OCTAVES
F_MIN = 32.70
FRAME_RATE = SAMPLE_RATE / float(HOP_LENGTH)
EMBEDDING_DIM = 128

ROLES = ("original", "cover", "humming")
PROFILES = ("short", "long")
RELEVANT = "relevant"
UNCERTAIN = "uncertain"


class Err(object):
    """A task result indicating that an exception was raised by the task.

    Attributes
    ----------
    err_type : type
        The type of exception that was raised
    args : tuple
        Arguments of the exception
    """

    def __init__(self, err, traceback=None):
        # Exceptions are deconstructed so that they survive pickling through
        # a pipe regardless of their constructor signature
        self.err_type = type(err)
        self.args = err.args
        self._traceback = traceback

    def __eq__(self, other):
        if not isinstance(other, Err):
            return False
        return self.err_type == other.err_type and self.args == other.args

    def __repr__(self):
        return "Err({})".format(self.err_type(*self.args))

    def __str__(self):
        if len(self.args) == 1:
            return str(self.args[0])
        return str(self.args) if self.args else ""

    @property
    def message_with_traceback(self):
        if self._traceback is None:
            return str(self)
        tb_string = "  File \"{0}\", line {1}, in {2} \n    {3}"
        return str(self) + "\nTraceback (most recent call last):\n" + \
            "\n".join(tb_string.format(*level) for level in self._traceback)


class Waveform(namedtuple("Waveform", ("samples", "sample_rate"))):
    """Mono PCM samples in [-1, 1] with their sample rate in Hz."""

    def __new__(cls, samples, sample_rate=SAMPLE_RATE):
        samples = np.asarray(samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError("Waveform samples must be one-dimensional")
        if sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if not np.all(np.isfinite(samples)):
            raise ValueError("Waveform samples must be finite")
        return super(Waveform, cls).__new__(cls, samples, int(sample_rate))

    @property
    def duration_s(self):
        return len(self.samples) / float(self.sample_rate)

    @property
    def n_samples(self):
        return len(self.samples)


class RmsEnvelope(namedtuple("RmsEnvelope",
                             ("values", "frame_length", "hop",
                              "sample_rate"))):
    """Per-frame RMS amplitude of a waveform."""

    def __new__(cls, values, frame_length=2048, hop=HOP_LENGTH,
                sample_rate=SAMPLE_RATE):
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 1:
            raise ValueError("RMS values must be one-dimensional")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise ValueError("RMS values must be finite and non-negative")
        return super(RmsEnvelope, cls).__new__(cls, values, int(frame_length),
                                               int(hop), int(sample_rate))


class FeatureMatrix(namedtuple("FeatureMatrix",
                               ("data", "bins_per_octave", "n_octaves",
                                "hop", "f_min", "sample_rate"))):
    """Non-negative CQT magnitudes, bins x frames."""

    def __new__(cls, data, bins_per_octave=BINS_PER_OCTAVE,
                n_octaves=N_OCTAVES, hop=HOP_LENGTH, f_min=F_MIN,
                sample_rate=SAMPLE_RATE):
        data = np.asarray(data, dtype=np.float64)
        if data.ndim != 2 or data.shape[0] != bins_per_octave * n_octaves:
            raise ValueError("Feature matrix must have {b} rows, got shape "
                             "{s}".format(b=bins_per_octave * n_octaves,
                                          s=data.shape))
        if not np.all(np.isfinite(data)) or np.any(data < 0):
            raise ValueError("Feature matrix entries must be finite and "
                             "non-negative")
        return super(FeatureMatrix, cls).__new__(cls, data,
                                                 int(bins_per_octave),
                                                 int(n_octaves), int(hop),
                                                 float(f_min),
                                                 int(sample_rate))

    @property
    def n_bins(self):
        return self.data.shape[0]

    @property
    def n_frames(self):
        return self.data.shape[1]

    @property
    def frame_rate(self):
        return self.sample_rate / float(self.hop)

    def with_data(self, data):
        """A copy carrying new data and the same metadata."""
        return self._replace(data=np.asarray(data, dtype=np.float64))


class SilenceMask(namedtuple("SilenceMask",
                             ("silent", "frame_length", "hop",
                              "sample_rate"))):
    """Per-RMS-frame silence flags (True = silent)."""

    def __new__(cls, silent, frame_length=2048, hop=HOP_LENGTH,
                sample_rate=SAMPLE_RATE):
        return super(SilenceMask, cls).__new__(
            cls, np.asarray(silent, dtype=bool), int(frame_length), int(hop),
            int(sample_rate))


class EncoderConfig(namedtuple("EncoderConfig",
                               ("window_s", "step_s", "window_frames",
                                "step_frames", "profile"))):
    """Analysis window geometry of one encoder profile.

    Frame counts are ``round(seconds * 31.25)``, which gives (94, 8) for the
    short profile and (250, 20) for the long one.
    """

    def __new__(cls, window_s, step_s, profile="short",
                frame_rate=FRAME_RATE):
        window_frames = int(round(window_s * frame_rate))
        step_frames = int(round(step_s * frame_rate))
        if not window_frames >= step_frames >= 1:
            raise ValueError("Need window_frames >= step_frames >= 1, got "
                             "({w}, {s})".format(w=window_frames,
                                                 s=step_frames))
        return super(EncoderConfig, cls).__new__(cls, float(window_s),
                                                 float(step_s), window_frames,
                                                 step_frames, profile)

    @classmethod
    def short(cls):
        return cls(3.0, 0.25, "short")

    @classmethod
    def long(cls):
        return cls(8.0, 0.64, "long")

    @property
    def hop_s(self):
        return self.step_frames / FRAME_RATE


class FingerprintSequence(namedtuple("FingerprintSequence",
                                     ("prints", "config", "source_id"))):
    """Ordered unit-norm fingerprints of one waveform, one per window."""

    def __new__(cls, prints, config, source_id=None):
        prints = np.ascontiguousarray(prints, dtype=np.float32)
        if prints.ndim != 2 or prints.shape[0] < 1:
            raise ValueError("A fingerprint sequence needs at least one "
                             "fingerprint")
        return super(FingerprintSequence, cls).__new__(cls, prints, config,
                                                       source_id)

    @property
    def n_prints(self):
        return self.prints.shape[0]

    @property
    def dim(self):
        return self.prints.shape[1]


class PipelineConfig(namedtuple("PipelineConfig",
                                ("d_min", "d_max", "pause_set", "db_set",
                                 "alpha_corr", "beta_rel", "beta_irrel"))):
    """Parameters of aligned-fragment extraction."""

    def __new__(cls, d_min=8.0, d_max=20.0, pause_set=(0.5, 1.0, 1.5),
                db_set=(52, 56, 60, 64, 68), alpha_corr=0.8, beta_rel=0.5,
                beta_irrel=0.3):
        if not 0 < d_min < d_max:
            raise ValueError("Need 0 < d_min < d_max")
        for name, value in (("alpha_corr", alpha_corr),
                            ("beta_rel", beta_rel),
                            ("beta_irrel", beta_irrel)):
            if not 0.0 <= value <= 1.0:
                raise ValueError("{n} must lie in [0, 1]".format(n=name))
        if not beta_irrel < beta_rel:
            raise ValueError("Need beta_irrel < beta_rel")
        if len(pause_set) == 0 or len(db_set) == 0:
            raise ValueError("pause_set and db_set must be non-empty")
        return super(PipelineConfig, cls).__new__(
            cls, float(d_min), float(d_max),
            tuple(sorted(float(p) for p in pause_set)),
            tuple(sorted(float(l) for l in db_set)),
            float(alpha_corr), float(beta_rel), float(beta_irrel))


class Fragment(namedtuple("Fragment",
                          ("source_id", "start_s", "end_s", "role"))):
    """A span of a source recording."""

    def __new__(cls, source_id, start_s, end_s, role="original"):
        if start_s < 0 or end_s < start_s:
            raise ValueError("Bad fragment span [{a}, {b}]"
                             .format(a=start_s, b=end_s))
        if role not in ROLES:
            raise ValueError("Unknown role {r!r}".format(r=role))
        return super(Fragment, cls).__new__(cls, source_id, float(start_s),
                                            float(end_s), role)

    @property
    def duration_s(self):
        return self.end_s - self.start_s


class Match(namedtuple("Match", ("fragment", "correlation", "status"))):
    """A cover fragment matched to an original fragment."""


class AlignedGroup(namedtuple("AlignedGroup", ("original", "matches"))):
    """An original fragment with its equal-duration matches."""

    def __new__(cls, original, matches=()):
        return super(AlignedGroup, cls).__new__(cls, original, tuple(matches))

    @property
    def relevant(self):
        return [m for m in self.matches if m.status == RELEVANT]

    @property
    def uncertain(self):
        return [m for m in self.matches if m.status == UNCERTAIN]


class LossParams(namedtuple("LossParams", ("temperature",))):
    """Temperature of the contrastive loss."""

    def __new__(cls, temperature=0.05):
        if not temperature > 0:
            raise ValueError("temperature must be positive")
        return super(LossParams, cls).__new__(cls, float(temperature))


class CorrelationCurve(namedtuple("CorrelationCurve",
                                  ("scores", "lag_zero_index", "hop_s"))):
    """Cross-correlation scores over lags.

    ``scores[i]`` belongs to lag ``i - lag_zero_index`` (in fingerprint
    steps); a lag ``l`` compares ``a[t]`` with ``b[t + l]``.
    """

    @property
    def lags(self):
        return np.arange(len(self.scores)) - self.lag_zero_index


class Peak(namedtuple("Peak", ("lag_index", "score", "start_s"))):
    """A local maximum of a correlation curve."""


class IndexEntry(namedtuple("IndexEntry",
                            ("vector", "song_id", "frame_offset",
                             "profile"))):
    """One stored fingerprint and where it came from."""


class SongRecord(namedtuple("SongRecord",
                            ("song_id", "title", "prints", "duration_s"))):
    """A database song with fingerprint sequences keyed by profile."""

    def __new__(cls, song_id, title, prints, duration_s):
        for profile, sequence in prints.items():
            if profile not in PROFILES:
                raise ValueError("Unknown profile {p!r}".format(p=profile))
            if sequence.config.profile != profile:
                raise ValueError("Sequence profile does not match its key")
        return super(SongRecord, cls).__new__(cls, int(song_id), title,
                                              dict(prints), float(duration_s))


class QueryResult(namedtuple("QueryResult",
                             ("ranking", "ann_s", "rerank_s", "profile",
                              "n_candidates"))):
    """Ranked ``(song_id, score, best_offset)`` triples and step timings.

    ``n_candidates`` counts the ``(song, offset)`` pairs rescored in the
    rerank step.
    """

    def __new__(cls, ranking, ann_s, rerank_s, profile, n_candidates=0):
        return super(QueryResult, cls).__new__(cls, list(ranking),
                                               float(ann_s), float(rerank_s),
                                               profile, int(n_candidates))

    def rank_of(self, song_id):
        """1-based rank of ``song_id``, or None when absent."""
        for k, (song_id_, _, _) in enumerate(self.ranking):
            if song_id_ == song_id:
                return k + 1
        return None


class MotifSpec(namedtuple("MotifSpec",
                           ("notes", "amplitude", "attack_s", "release_s",
                            "harmonics", "seed"))):
    """A melody motif as ``(cqt_bin, duration_s)`` notes.

    Bin ``b`` sounds at ``F_MIN * 2**(b/12)`` Hz.
    """

    def __new__(cls, notes, amplitude=0.5, attack_s=0.01, release_s=0.01,
                harmonics=(1.0, 0.5, 0.25), seed=0):
        notes = tuple((int(b), float(d)) for b, d in notes)
        if len(notes) == 0:
            raise ValueError("A motif needs at least one note")
        for b, d in notes:
            if d <= 0:
                raise ValueError("Note durations must be positive")
            if not 0 <= b < N_BINS:
                raise ValueError("Note bin {b} outside the CQT range"
                                 .format(b=b))
        return super(MotifSpec, cls).__new__(cls, notes, float(amplitude),
                                             float(attack_s),
                                             float(release_s),
                                             tuple(harmonics), seed)

    @property
    def duration_s(self):
        return sum(d for _, d in self.notes)


class CorpusSpec(namedtuple("CorpusSpec",
                            ("n_songs", "motifs_per_song", "motif_s",
                             "gap_s", "shift_range", "stretch_range",
                             "snr_db", "seed"))):
    """Parameters of a synthetic corpus."""

    def __new__(cls, n_songs=10, motifs_per_song=3, motif_s=10.0, gap_s=2.0,
                shift_range=(-2.0, 2.0), stretch_range=(0.9, 1.1),
                snr_db=10.0, seed=0):
        if not -4.0 <= shift_range[0] <= shift_range[1] <= 4.0:
            raise ValueError("shift_range must lie within [-4, 4]")
        if not 0.8 <= stretch_range[0] <= stretch_range[1] <= 1.25:
            raise ValueError("stretch_range must lie within [0.8, 1.25]")
        if n_songs < 1 or motifs_per_song < 1:
            raise ValueError("Need at least one song and one motif")
        return super(CorpusSpec, cls).__new__(
            cls, int(n_songs), int(motifs_per_song), float(motif_s),
            float(gap_s), tuple(shift_range), tuple(stretch_range),
            float(snr_db), seed)


class FragmentGroup(namedtuple("FragmentGroup", ("group_id", "members"))):
    """Time-aligned CQT fragments of one musical phrase."""

    def __new__(cls, group_id, members):
        members = tuple(members)
        if len({m.n_frames for m in members}) > 1:
            raise ValueError("Group members must have equal frame counts")
        return super(FragmentGroup, cls).__new__(cls, group_id, members)

    @property
    def n_frames(self):
        return self.members[0].n_frames if self.members else 0


class TrainingBatch(namedtuple("TrainingBatch",
                               ("windows", "labels", "group_ids"))):
    """``N`` analysis windows with their group labels.

    ``windows`` has shape ``(N, 84, window_frames)``; ``labels[i]`` indexes
    ``group_ids``.
    """

    def __new__(cls, windows, labels, group_ids):
        windows = np.asarray(windows, dtype=np.float64)
        labels = np.asarray(labels, dtype=np.int64)
        if windows.ndim != 3 or len(windows) != len(labels):
            raise ValueError("Need one label per window")
        return super(TrainingBatch, cls).__new__(cls, windows, labels,
                                                 tuple(group_ids))

    @property
    def n_windows(self):
        return len(self.labels)


class FragmentationResult(namedtuple("FragmentationResult",
                                     ("fragments", "d_p", "l_db",
                                      "status"))):
    """Unique fragments of a song and the grid point that produced them.

    ``status`` is ``"ok"`` or ``"empty"`` when no combination produced a
    fragment.
    """

    def __new__(cls, fragments, d_p, l_db, status="ok"):
        if status not in ("ok", "empty"):
            raise ValueError("Unknown status {s!r}".format(s=status))
        return super(FragmentationResult, cls).__new__(
            cls, tuple(fragments), float(d_p), float(l_db), status)


class CoverTransform(namedtuple("CoverTransform",
                                ("shift", "stretch", "snr_db",
                                 "lead_silence_s"))):
    """Transformation turning a song into a synthetic cover.

    ``stretch`` is a playback rate: the cover lasts ``1 / stretch`` times as
    long as the song. ``snr_db=None`` adds no noise.
    """

    def __new__(cls, shift=0.0, stretch=1.0, snr_db=None, lead_silence_s=0.0):
        if not -4.0 <= shift <= 4.0:
            raise ValueError("shift must lie in [-4, 4]")
        if not 0.8 <= stretch <= 1.25:
            raise ValueError("stretch must lie in [0.8, 1.25]")
        if lead_silence_s < 0:
            raise ValueError("lead_silence_s must be non-negative")
        return super(CoverTransform, cls).__new__(
            cls, float(shift), float(stretch),
            None if snr_db is None else float(snr_db), float(lead_silence_s))

    @property
    def is_identity(self):
        return self.shift == 0 and self.stretch == 1 and \
            self.snr_db is None and self.lead_silence_s == 0

    def map_time(self, t):
        """Cover time of song time ``t`` in seconds."""
        return self.lead_silence_s + t / self.stretch


class SynthCorpus(namedtuple("SynthCorpus",
                             ("songs", "boundaries", "covers", "queries",
                              "truth"))):
    """Synthetic songs, covers and queries with their ground truth.

    ``songs`` holds ``(song_id, title, Waveform)``; ``covers`` maps a song
    id to ``(cover_id, Waveform, CoverTransform)`` triples; ``queries``
    holds ``(query_id, Waveform, CoverTransform, start_s)`` where
    ``start_s`` locates the excerpt in its song, and ``truth`` maps a query
    id to its song id.
    """
