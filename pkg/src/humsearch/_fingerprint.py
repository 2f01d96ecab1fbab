#  -*- coding: utf-8 -*-
"""Analysis windows and fingerprint encoders.

A feature matrix is cut into overlapping analysis windows of
``window_frames`` frames every ``step_frames`` frames, and every window is
encoded into a unit-norm 128-d fingerprint by an encoder. Encoders implement
:class:`Encoder`; any realization (the seeded baseline, the trainable linear
encoder or an externally trained network) can be dropped in without touching
the downstream modules.
"""

import logging

import numpy as np

from ._audio import cqt, resample
from ._classes import (EncoderConfig, FingerprintSequence, EMBEDDING_DIM,
                       FRAME_RATE, N_BINS, SAMPLE_RATE)
from ._exceptions import EncoderContractError, FormatError, WindowError
from ._helpers import pack_header, read_array, to_le_bytes, unpack_header

logger = logging.getLogger(__name__)

FUSED_THRESHOLD_S = 15.0
NORM_TOLERANCE = 1e-6

_PRINT_MAGIC = b"CHFP"
_PRINT_HEADER = "HIHHf"


def profile_config(name):
    """Encoder configuration of a named profile.

    Parameters
    ----------
    name : str
        ``"short"`` (W=3 s, S=0.25 s) or ``"long"`` (W=8 s, S=0.64 s)

    Returns
    -------
    EncoderConfig
    """

    if name == "short":
        return EncoderConfig.short()
    elif name == "long":
        return EncoderConfig.long()
    raise ValueError("Unknown profile {n!r}".format(n=name))


def select_profile(duration_s):
    """Fused rule: the short profile below 15 seconds, the long one above."""
    return "short" if duration_s < FUSED_THRESHOLD_S else "long"


def window_count(n_frames, config):
    """Number of analysis windows in ``n_frames`` frames (0 if too short)."""
    if n_frames < config.window_frames:
        return 0
    return (n_frames - config.window_frames) // config.step_frames + 1


def make_windows(features, config):
    """Slice a feature matrix into overlapping analysis windows.

    Windows start at frames 0, step, 2*step, ...; a trailing remainder
    shorter than one window is dropped.

    Parameters
    ----------
    features : FeatureMatrix
    config : EncoderConfig

    Returns
    -------
    numpy.ndarray
        Read-only array of shape ``(T, bins, window_frames)``.
    """

    n_windows = window_count(features.n_frames, config)
    if n_windows == 0:
        raise WindowError.default(features.n_frames, config.window_frames)

    frames = np.lib.stride_tricks.sliding_window_view(
        features.data, config.window_frames, axis=1)
    # (bins, n_positions, window) -> (T, bins, window)
    return frames[:, ::config.step_frames][:, :n_windows].transpose(1, 0, 2)


def check_fingerprint(vector, identity):
    """Enforce the encoder contract on one output vector.

    Raises
    ------
    EncoderContractError
    """

    vector = np.asarray(vector, dtype=np.float64)
    if vector.shape != (EMBEDDING_DIM,) or not np.all(np.isfinite(vector)):
        raise EncoderContractError.default(identity, None)
    norm = float(np.linalg.norm(vector))
    if abs(norm - 1.0) > NORM_TOLERANCE:
        raise EncoderContractError.default(identity, norm)
    return vector


class Encoder(object):
    """Contract for window encoders.

    Subclasses implement :meth:`encode_window`, mapping an
    ``(84, window_frames)`` window to a unit-norm 128-d vector, and may
    override :meth:`encode_windows` with a vectorized version. Instances
    must be safe to use from several threads on distinct windows and
    picklable so that they can be shipped to worker processes.
    """

    identity = "abstract"
    deterministic = True

    def accepts(self, config):
        """Whether windows of ``config`` can be encoded."""
        return True

    def encode_window(self, window):
        raise NotImplementedError

    def encode_windows(self, windows):
        """Encode a stack of windows, shape ``(T, 84, window_frames)``."""
        return np.stack([self.encode_window(w) for w in windows])


class BaselineEncoder(Encoder):
    """Deterministic stand-in for a trained encoder.

    Each window is summarized by the per-bin temporal mean and standard
    deviation (168 features). Both halves are centered by their across-bin
    average, projected by a seeded 128x168 standard normal matrix and L2
    normalized. An all-silent window maps to ``e_1``, and so does any
    window whose bins all share one time course (a flat spectrum), since
    centering zeroes its features.

    Parameters
    ----------
    seed : int, optional
    """

    deterministic = True

    def __init__(self, seed=0):
        self.seed = seed
        self.projection = np.random.default_rng(seed).standard_normal(
            (EMBEDDING_DIM, 2 * N_BINS))

    @property
    def identity(self):
        return "baseline-meanstd-seed{s}".format(s=self.seed)

    def summarize(self, windows):
        """Centered mean/std features, shape ``(T, 168)``.

        Zero for every window whose bins share one time course.
        """
        windows = np.asarray(windows, dtype=np.float64)
        means = windows.mean(axis=-1)
        stds = windows.std(axis=-1)
        means = means - means.mean(axis=-1, keepdims=True)
        stds = stds - stds.mean(axis=-1, keepdims=True)
        return np.concatenate([means, stds], axis=-1)

    def encode_windows(self, windows):
        windows = np.asarray(windows, dtype=np.float64)
        if windows.ndim != 3 or windows.shape[1] != N_BINS:
            raise EncoderContractError("expected windows of shape "
                                       "(T, {b}, frames), got {s}"
                                       .format(b=N_BINS, s=windows.shape))
        projected = self.summarize(windows) @ self.projection.T
        norms = np.linalg.norm(projected, axis=1)
        out = np.zeros_like(projected)
        live = norms >= 1e-12
        out[live] = projected[live] / norms[live, None]
        out[~live, 0] = 1.0
        return out

    def encode_window(self, window):
        return self.encode_windows(np.asarray(window)[None])[0]


_baseline_cache = {}


def baseline_encode(window, seed=0):
    """Encode one window with the baseline encoder seeded by ``seed``.

    Parameters
    ----------
    window : numpy.ndarray
        Shape ``(84, window_frames)``
    seed : int, optional

    Returns
    -------
    numpy.ndarray
        Unit-norm vector of length 128
    """

    if seed not in _baseline_cache:
        _baseline_cache[seed] = BaselineEncoder(seed)
    return _baseline_cache[seed].encode_window(window)


def encode_sequence(features, config, encoder, source_id=None):
    """Encode every analysis window of a feature matrix.

    Parameters
    ----------
    features : FeatureMatrix
    config : EncoderConfig
    encoder : Encoder
    source_id : Hashable, optional

    Returns
    -------
    FingerprintSequence
    """

    windows = make_windows(features, config)
    prints = np.asarray(encoder.encode_windows(windows), dtype=np.float64)
    if prints.shape != (windows.shape[0], EMBEDDING_DIM):
        raise EncoderContractError(
            "encoder '{e}' returned shape {s} for {t} windows"
            .format(e=encoder.identity, s=prints.shape, t=windows.shape[0]))
    for vector in prints:
        check_fingerprint(vector, encoder.identity)
    return FingerprintSequence(prints, config, source_id)


def fingerprint_waveform(w, config, encoder, source_id=None):
    """Resample to 16 kHz if needed, compute the CQT and encode it.

    Parameters
    ----------
    w : Waveform
    config : EncoderConfig
    encoder : Encoder
    source_id : Hashable, optional

    Returns
    -------
    FingerprintSequence
    """

    if w.sample_rate != SAMPLE_RATE:
        w = resample(w, SAMPLE_RATE)
    return encode_sequence(cqt(w), config, encoder, source_id)


def config_from_frames(window_frames, step_frames):
    """Recover an encoder configuration from its frame counts."""
    for name in ("short", "long"):
        config = profile_config(name)
        if (config.window_frames, config.step_frames) == \
                (window_frames, step_frames):
            return config
    return EncoderConfig(window_frames / FRAME_RATE, step_frames / FRAME_RATE,
                         "custom")


def fingerprints_to_bytes(seq):
    """Serialize a fingerprint sequence as a CHFP blob.

    Parameters
    ----------
    seq : FingerprintSequence

    Returns
    -------
    bytes
    """

    return pack_header(_PRINT_MAGIC, _PRINT_HEADER, seq.dim, seq.n_prints,
                       seq.config.window_frames, seq.config.step_frames,
                       FRAME_RATE) + to_le_bytes(seq.prints, np.float32)


def fingerprints_from_bytes(blob, source_id=None):
    """Parse a CHFP blob.

    Parameters
    ----------
    blob : bytes
    source_id : Hashable, optional

    Returns
    -------
    FingerprintSequence
    """

    (dim, count, window_frames, step_frames, _), offset = \
        unpack_header(blob, _PRINT_MAGIC, _PRINT_HEADER, "fingerprint")
    if dim != EMBEDDING_DIM:
        raise FormatError.default("fingerprint", "dim {d}".format(d=dim))
    prints, end = read_array(blob, offset, np.float32, dim * count,
                             "fingerprint")
    if end != len(blob):
        raise FormatError.default("fingerprint", "trailing bytes")
    return FingerprintSequence(prints.reshape(count, dim),
                               config_from_frames(window_frames, step_frames),
                               source_id)


def save_fingerprints(path, seq):
    """Write a fingerprint sequence to ``path`` in CHFP format."""
    with open(str(path), "wb") as fh:
        fh.write(fingerprints_to_bytes(seq))


def load_fingerprints(path, source_id=None):
    """Read a CHFP fingerprint file."""
    with open(str(path), "rb") as fh:
        return fingerprints_from_bytes(fh.read(), source_id)
