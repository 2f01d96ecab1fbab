#  -*- coding: utf-8 -*-
"""Audio loading, resampling, RMS envelopes and CQT features.

The CQT uses librosa's recursive per-octave filterbank (Hann windows, 12 bins
per octave over 7 octaves from C1, hop 512 at 16 kHz) and keeps linear
magnitudes. Resampling is polyphase windowed-sinc filtering.
"""

import logging
from fractions import Fraction

import librosa
import numpy as np
import scipy.signal
import soundfile as sf

from ._classes import (FeatureMatrix, RmsEnvelope, Waveform, BINS_PER_OCTAVE,
                       F_MIN, HOP_LENGTH, N_BINS, N_OCTAVES, SAMPLE_RATE)
from ._exceptions import AudioError, FormatError
from ._helpers import pack_header, read_array, to_le_bytes, unpack_header

logger = logging.getLogger(__name__)

RESAMPLER = "polyphase windowed-sinc (scipy.signal.resample_poly, Kaiser)"
CQT_REALIZATION = "recursive per-octave filterbank (librosa.cqt, Hann)"
SUPPORTED_SUBTYPES = ("PCM_16", "FLOAT")
RMS_FRAME_LENGTH = 2048
RMS_HOP = HOP_LENGTH

_FEATURE_MAGIC = b"CHFM"
_FEATURE_HEADER = "HI"


def load_wav(path):
    """Read a WAV file into a mono waveform.

    Stereo input is downmixed by channel mean and samples are clamped to
    [-1, 1].

    Parameters
    ----------
    path : str or pathlib.Path

    Returns
    -------
    Waveform
    """

    try:
        info = sf.info(str(path))
    except (RuntimeError, OSError) as e:
        raise AudioError.default("unreadable file", "{p} ({e})"
                                 .format(p=path, e=e))
    if info.format not in ("WAV", "WAVEX") or \
            info.subtype not in SUPPORTED_SUBTYPES:
        raise AudioError.default("unsupported codec", "{f}/{s}"
                                 .format(f=info.format, s=info.subtype))
    try:
        data, sample_rate = sf.read(str(path), dtype="float64",
                                    always_2d=True)
    except (RuntimeError, OSError) as e:
        raise AudioError.default("unreadable file", "{p} ({e})"
                                 .format(p=path, e=e))
    if data.shape[0] == 0:
        raise AudioError.default("zero-length audio", str(path))

    samples = np.clip(data.mean(axis=1), -1.0, 1.0)
    return Waveform(samples, sample_rate)


def write_wav(path, w, subtype="PCM_16"):
    """Write a waveform as a mono WAV file.

    Parameters
    ----------
    path : str or pathlib.Path
    w : Waveform
    subtype : str, optional
        ``"PCM_16"`` (default) or ``"FLOAT"``
    """

    if subtype not in SUPPORTED_SUBTYPES:
        raise ValueError("Unsupported subtype {s!r}".format(s=subtype))
    sf.write(str(path), np.clip(w.samples, -1.0, 1.0), w.sample_rate,
             subtype=subtype, format="WAV")


def resample(w, target_rate):
    """Resample a waveform to ``target_rate`` Hz.

    Parameters
    ----------
    w : Waveform
    target_rate : int

    Returns
    -------
    Waveform
    """

    if target_rate <= 0:
        raise ValueError("target_rate must be positive")
    if int(target_rate) == w.sample_rate:
        return Waveform(w.samples.copy(), w.sample_rate)

    ratio = Fraction(int(target_rate), w.sample_rate)
    samples = scipy.signal.resample_poly(w.samples, ratio.numerator,
                                         ratio.denominator)
    return Waveform(samples, int(target_rate))


def rms_envelope(w, frame_length=RMS_FRAME_LENGTH, hop=RMS_HOP):
    """Frame-wise RMS amplitude without centering.

    Frame ``t`` covers samples ``[t*hop, t*hop + frame_length)``.

    Parameters
    ----------
    w : Waveform
    frame_length : int, optional
    hop : int, optional

    Returns
    -------
    RmsEnvelope
    """

    if not frame_length >= hop >= 1:
        raise ValueError("Need frame_length >= hop >= 1")
    if w.n_samples < frame_length:
        raise AudioError.default("waveform shorter than one frame",
                                 "{n} < {f} samples".format(n=w.n_samples,
                                                            f=frame_length))

    values = librosa.feature.rms(y=w.samples, frame_length=frame_length,
                                 hop_length=hop, center=False,
                                 dtype=np.float64)[0]
    return RmsEnvelope(values, frame_length, hop, w.sample_rate)


def cqt(w):
    """Constant-Q magnitudes, 84 bins from C1, one frame per 512 samples.

    Parameters
    ----------
    w : Waveform
        Audio at 16 kHz.

    Returns
    -------
    FeatureMatrix
        Shape ``(84, ceil(len / 512))``.
    """

    if w.sample_rate != SAMPLE_RATE:
        raise ValueError("cqt expects {r} Hz input, got {s} Hz"
                         .format(r=SAMPLE_RATE, s=w.sample_rate))
    if w.n_samples < HOP_LENGTH:
        raise AudioError.default("too-short input", "{n} samples"
                                 .format(n=w.n_samples))

    n_frames = -(-w.n_samples // HOP_LENGTH)
    if not np.any(w.samples):
        return FeatureMatrix(np.zeros((N_BINS, n_frames)))

    try:
        spectrum = librosa.cqt(w.samples, sr=SAMPLE_RATE,
                               hop_length=HOP_LENGTH, fmin=F_MIN,
                               n_bins=N_BINS,
                               bins_per_octave=BINS_PER_OCTAVE,
                               window="hann")
    except librosa.util.exceptions.ParameterError as e:
        raise AudioError.default("too-short input", str(e))

    # librosa centers frames and yields 1 + len // hop of them
    magnitudes = np.abs(spectrum[:, :n_frames])
    return FeatureMatrix(magnitudes, BINS_PER_OCTAVE, N_OCTAVES, HOP_LENGTH,
                         F_MIN, SAMPLE_RATE)


def features_to_bytes(fm):
    """Serialize a feature matrix as a CHFM blob.

    Parameters
    ----------
    fm : FeatureMatrix

    Returns
    -------
    bytes
    """

    return pack_header(_FEATURE_MAGIC, _FEATURE_HEADER, fm.n_bins,
                       fm.n_frames) + to_le_bytes(fm.data, np.float32)


def features_from_bytes(blob):
    """Parse a CHFM blob.

    Parameters
    ----------
    blob : bytes

    Returns
    -------
    FeatureMatrix
    """

    (bins, frames), offset = unpack_header(blob, _FEATURE_MAGIC,
                                           _FEATURE_HEADER, "feature")
    if bins % BINS_PER_OCTAVE:
        raise FormatError.default("feature", "{b} bins".format(b=bins))
    data, end = read_array(blob, offset, np.float32, bins * frames,
                           "feature")
    if end != len(blob):
        raise FormatError.default("feature", "trailing bytes")
    return FeatureMatrix(data.reshape(bins, frames).astype(np.float64),
                         BINS_PER_OCTAVE, bins // BINS_PER_OCTAVE)


def save_features(path, fm):
    """Write a feature matrix to ``path`` in CHFM format."""
    with open(str(path), "wb") as fh:
        fh.write(features_to_bytes(fm))


def load_features(path):
    """Read a CHFM feature file."""
    with open(str(path), "rb") as fh:
        return features_from_bytes(fh.read())
