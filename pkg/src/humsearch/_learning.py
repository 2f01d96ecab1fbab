#  -*- coding: utf-8 -*-
"""Contrastive loss, batch sampling, augmentations and a trainable encoder.

The loss treats every pair of windows from the same group as a positive
pair. The denominator of each term sums only over windows outside the
anchor's group, so a term is ``log(sum_neg exp(s_il / t)) - s_ij / t`` and
may be negative.
"""

import csv
import logging

import numpy as np
import scipy.interpolate
import scipy.ndimage
import scipy.special

from ._alignment import extract_aligned_groups
from ._audio import cqt, resample
from ._classes import (FeatureMatrix, FragmentGroup, LossParams,
                       TrainingBatch, Waveform, EMBEDDING_DIM, N_BINS,
                       SAMPLE_RATE)
from ._exceptions import (EncoderContractError, FormatError, LossError,
                          SamplingError)
from ._fingerprint import Encoder, config_from_frames
from ._helpers import (as_rng, pack_header, read_array, to_le_bytes,
                       unpack_header)

logger = logging.getLogger(__name__)

PITCH_RANGE = (-4.0, 4.0)
STRETCH_RANGE = (0.8, 1.25)
NOISE_SNR_RANGE = (3.0, 30.0)
MIX_SNR_RANGE = (5.0, 10.0)

_ENCODER_MAGIC = b"CHTE"
_ENCODER_HEADER = "HIHHq"


# Loss

def _pair_masks(labels):
    labels = np.asarray(labels)
    same = labels[:, None] == labels[None, :]
    positives = same & ~np.eye(len(labels), dtype=bool)
    return positives, ~same


def _check_batch(embeddings, labels, check_norm):
    z = np.asarray(embeddings, dtype=np.float64)
    if z.ndim != 2 or len(z) != len(labels):
        raise ValueError("Need one label per embedding")
    if len(z) < 2 or len(np.unique(labels)) < 2:
        raise LossError("no negatives available")
    if check_norm and np.any(np.abs(np.linalg.norm(z, axis=1) - 1.0) > 1e-6):
        raise ValueError("Embeddings must be unit-norm")
    positives, negatives = _pair_masks(labels)
    if not positives.any():
        raise LossError("no positive pairs")
    return z, positives, negatives


def _loss_terms(z, positives, negatives, temperature):
    sims = z @ z.T / temperature
    log_denominators = scipy.special.logsumexp(
        np.where(negatives, sims, -np.inf), axis=1)
    return sims, log_denominators


def ntxent_loss(embeddings, labels, params=LossParams(), check_norm=True):
    """Mean contrastive loss over all ordered positive pairs.

    Parameters
    ----------
    embeddings : numpy.ndarray
        ``(N, 128)`` unit-norm vectors
    labels : Sequence[Hashable]
        Group label of each embedding
    params : LossParams, optional
    check_norm : bool, optional
        Reject embeddings that are not unit-norm

    Returns
    -------
    float

    Raises
    ------
    LossError
        With fewer than two groups or when no group has two members.
    """

    z, positives, negatives = _check_batch(embeddings, labels, check_norm)
    sims, log_denominators = _loss_terms(z, positives, negatives,
                                         params.temperature)
    terms = log_denominators[:, None] - sims
    return float(terms[positives].mean())


def ntxent_grad(embeddings, labels, params=LossParams(), check_norm=True):
    """Gradient of :func:`ntxent_loss` with respect to the embeddings.

    Returns
    -------
    numpy.ndarray
        ``(N, 128)``
    """

    z, positives, negatives = _check_batch(embeddings, labels, check_norm)
    sims, log_denominators = _loss_terms(z, positives, negatives,
                                         params.temperature)
    n_pairs = positives.sum()
    n_positives = positives.sum(axis=1)

    # d loss / d sims
    weights = np.where(negatives, np.exp(sims - log_denominators[:, None]),
                       0.0) * n_positives[:, None]
    weights = weights - positives
    return (weights + weights.T) @ z / (n_pairs * params.temperature)


# Batch sampling

def _eligible(dataset, window_frames):
    return [g for g in dataset
            if len(g.members) >= 2 and g.n_frames >= window_frames]


def sample_batch(dataset, K, config, n_max=4, rng=None):
    """Draw ``K`` distinct groups and one aligned window per member.

    Parameters
    ----------
    dataset : Sequence[FragmentGroup]
    K : int
    config : EncoderConfig
        Provides the window length
    n_max : int, optional
        At most this many members per group
    rng : numpy.random.Generator, optional

    Returns
    -------
    TrainingBatch
    """

    rng = as_rng(rng)
    eligible = _eligible(dataset, config.window_frames)
    if K < 2 or len(eligible) < K:
        raise SamplingError("need {k} groups with two or more members, "
                            "{n} available".format(k=K, n=len(eligible)))

    windows, labels, group_ids = [], [], []
    for label, g in enumerate(rng.choice(len(eligible), size=K,
                                         replace=False)):
        group = eligible[g]
        n = min(n_max, len(group.members))
        members = np.sort(rng.choice(len(group.members), size=n,
                                     replace=False))
        start = int(rng.integers(0, group.n_frames - config.window_frames
                                 + 1))
        for m in members:
            windows.append(group.members[m].data[
                :, start:start + config.window_frames])
            labels.append(label)
        group_ids.append(group.group_id)
    return TrainingBatch(np.stack(windows), labels, group_ids)


def monitor_batch(dataset, config, n_max=4):
    """Deterministic batch of every eligible group cut at frame 0."""
    eligible = _eligible(dataset, config.window_frames)
    if len(eligible) < 2:
        raise SamplingError("need 2 groups with two or more members, "
                            "{n} available".format(n=len(eligible)))
    windows, labels = [], []
    for label, group in enumerate(eligible):
        for member in group.members[:n_max]:
            windows.append(member.data[:, :config.window_frames])
            labels.append(label)
    return TrainingBatch(np.stack(windows), labels,
                         [g.group_id for g in eligible])


# Augmentations

def augment_pitch_shift(features, semitones=None, rng=None):
    """Translate CQT rows by ``semitones`` bins with zero fill.

    Fractional shifts interpolate linearly between adjacent bins. When
    ``semitones`` is omitted it is drawn uniformly from [-4, 4].

    Parameters
    ----------
    features : FeatureMatrix
    semitones : float, optional
    rng : numpy.random.Generator, optional

    Returns
    -------
    FeatureMatrix
    """

    if semitones is None:
        semitones = as_rng(rng).uniform(*PITCH_RANGE)
    if not PITCH_RANGE[0] <= semitones <= PITCH_RANGE[1]:
        raise ValueError("semitones must lie in [-4, 4]")
    if semitones == 0:
        return features.with_data(features.data.copy())
    shifted = scipy.ndimage.shift(features.data, (semitones, 0), order=1,
                                  mode="constant", cval=0.0, prefilter=False)
    return features.with_data(np.maximum(shifted, 0.0))


def augment_time_stretch(features, rate=None, rng=None):
    """Resample the time axis to ``round(frames / rate)`` columns.

    Parameters
    ----------
    features : FeatureMatrix
    rate : float, optional
        Drawn uniformly from [0.8, 1.25] when omitted
    rng : numpy.random.Generator, optional

    Returns
    -------
    FeatureMatrix
    """

    if rate is None:
        rate = as_rng(rng).uniform(*STRETCH_RANGE)
    if not STRETCH_RANGE[0] <= rate <= STRETCH_RANGE[1]:
        raise ValueError("rate must lie in [0.8, 1.25]")

    n_frames = features.n_frames
    n_out = int(round(n_frames / rate))
    if n_out < 1 or n_frames < 1:
        raise SamplingError("time stretch by {r} leaves no frames"
                            .format(r=rate))
    if n_out == n_frames:
        return features.with_data(features.data.copy())
    if n_frames == 1:
        return features.with_data(np.repeat(features.data, n_out, axis=1))

    positions = np.linspace(0.0, n_frames - 1.0, n_out)
    interpolate = scipy.interpolate.interp1d(np.arange(n_frames),
                                             features.data, axis=1)
    return features.with_data(np.maximum(interpolate(positions), 0.0))


def augment_splice_out(w, n_intervals=10, interval_frames=500, rng=None):
    """Delete ``n_intervals`` random non-overlapping spans of samples.

    Parameters
    ----------
    w : Waveform
    n_intervals : int, optional
    interval_frames : int, optional
        Length of each deleted span in samples
    rng : numpy.random.Generator, optional

    Returns
    -------
    Waveform
    """

    if n_intervals < 0 or interval_frames < 0:
        raise ValueError("n_intervals and interval_frames must be "
                         "non-negative")
    if n_intervals == 0 or interval_frames == 0:
        return Waveform(w.samples.copy(), w.sample_rate)

    remaining = w.n_samples - n_intervals * interval_frames
    if remaining < w.sample_rate:
        raise SamplingError("waveform too short for splicing out {n} x {f} "
                            "samples".format(n=n_intervals,
                                             f=interval_frames))

    # Placing the cuts between the kept samples keeps them disjoint
    cuts = np.sort(as_rng(rng).integers(0, remaining + 1, size=n_intervals))
    starts = cuts + np.arange(n_intervals) * interval_frames
    keep = np.ones(w.n_samples, dtype=bool)
    for start in starts:
        keep[start:start + interval_frames] = False
    return Waveform(w.samples[keep], w.sample_rate)


def _rms(x):
    return float(np.sqrt(np.mean(np.square(x))))


def augment_mix(x, y, snr_db=None, rng=None):
    """Mix ``y`` into ``x`` at ``snr_db`` below the level of ``x``.

    ``y`` is looped or truncated to the length of ``x``.

    Parameters
    ----------
    x : Waveform
    y : Waveform
    snr_db : float, optional
        Drawn uniformly from [5, 10] dB when omitted
    rng : numpy.random.Generator, optional

    Returns
    -------
    Waveform
    """

    if x.sample_rate != y.sample_rate:
        raise ValueError("Sample rates differ ({a} vs {b})"
                         .format(a=x.sample_rate, b=y.sample_rate))
    if snr_db is None:
        snr_db = as_rng(rng).uniform(*MIX_SNR_RANGE)
    background = np.resize(y.samples, x.n_samples)
    rms_y = _rms(background)
    if rms_y == 0.0:
        raise SamplingError("silent mix source")
    gain = _rms(x.samples) / rms_y * 10.0 ** (-snr_db / 20.0)
    return Waveform(np.clip(x.samples + gain * background, -1.0, 1.0),
                    x.sample_rate)


def augment_noise(x, snr_db=None, rng=None):
    """Add white noise at ``snr_db`` (drawn from [3, 30] dB if omitted)."""
    rng = as_rng(rng)
    if snr_db is None:
        snr_db = rng.uniform(*NOISE_SNR_RANGE)
    noise = Waveform(rng.standard_normal(x.n_samples), x.sample_rate)
    return augment_mix(x, noise, snr_db)


def augment_chain(windows, rng=None, pitch_p=0.5, stretch_p=0.8):
    """Randomly pitch shift and time stretch each window independently.

    Stretched windows are cropped or zero padded back to their original
    length.

    Parameters
    ----------
    windows : numpy.ndarray
        ``(N, 84, window_frames)``
    rng : numpy.random.Generator, optional
    pitch_p : float, optional
    stretch_p : float, optional

    Returns
    -------
    numpy.ndarray
    """

    rng = as_rng(rng)
    windows = np.asarray(windows, dtype=np.float64)
    n_frames = windows.shape[2]
    out = np.empty_like(windows)
    for k, window in enumerate(windows):
        features = FeatureMatrix(window)
        if rng.random() < pitch_p:
            features = augment_pitch_shift(features, rng=rng)
        if rng.random() < stretch_p:
            features = augment_time_stretch(features, rng=rng)
        data = features.data[:, :n_frames]
        out[k] = np.pad(data, ((0, 0), (0, n_frames - data.shape[1])))
    return out


# Toy encoder

class ToyLinearEncoder(Encoder):
    """A trainable linear map followed by L2 normalization.

    The flattened window is scaled to unit norm, multiplied by a
    ``128 x (84 * window_frames)`` matrix and normalized again. The input
    scaling leaves the output direction unchanged. Zero windows and zero
    projections map to ``e_1``.

    Parameters
    ----------
    config : EncoderConfig
    seed : int, optional
        Seed of the ``N(0, 1/d)`` initialization
    weights : numpy.ndarray, optional
        Initial weights replacing the random initialization
    """

    deterministic = True

    def __init__(self, config, seed=0, weights=None):
        self.config = config
        self.seed = seed
        in_dim = N_BINS * config.window_frames
        if weights is None:
            weights = np.random.default_rng(seed).standard_normal(
                (EMBEDDING_DIM, in_dim)) / np.sqrt(in_dim)
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape != (EMBEDDING_DIM, in_dim):
            raise ValueError("Weights must have shape ({o}, {i})"
                             .format(o=EMBEDDING_DIM, i=in_dim))
        if not np.all(np.isfinite(weights)):
            raise ValueError("Weights must be finite")
        self.weights = weights

    @property
    def identity(self):
        return "toy-linear-w{w}-seed{s}".format(w=self.config.window_frames,
                                                s=self.seed)

    def accepts(self, config):
        return config.window_frames == self.config.window_frames

    def _inputs(self, windows):
        windows = np.asarray(windows, dtype=np.float64)
        if windows.ndim != 3 or windows.shape[1:] != \
                (N_BINS, self.config.window_frames):
            raise EncoderContractError("expected windows of shape (T, {b}, "
                                       "{w}), got {s}"
                                       .format(b=N_BINS,
                                               w=self.config.window_frames,
                                               s=windows.shape))
        x = windows.reshape(len(windows), -1)
        norms = np.linalg.norm(x, axis=1, keepdims=True)
        return np.where(norms > 1e-12, x / np.maximum(norms, 1e-12), 0.0)

    def forward(self, windows):
        """Inputs, pre-normalization outputs and fingerprints of a stack."""
        x = self._inputs(windows)
        y = x @ self.weights.T
        norms = np.linalg.norm(y, axis=1, keepdims=True)
        live = norms[:, 0] > 1e-12
        z = np.zeros_like(y)
        z[live] = y[live] / norms[live]
        z[~live, 0] = 1.0
        return x, y, z

    def encode_windows(self, windows):
        return self.forward(windows)[2]

    def encode_window(self, window):
        return self.encode_windows(np.asarray(window)[None])[0]

    def weight_gradient(self, windows, grad_z):
        """Back-propagate ``d loss / d z`` through the normalization.

        Parameters
        ----------
        windows : numpy.ndarray
        grad_z : numpy.ndarray
            ``(N, 128)``

        Returns
        -------
        numpy.ndarray
            Gradient with respect to the weights
        """

        x, y, z = self.forward(windows)
        norms = np.maximum(np.linalg.norm(y, axis=1, keepdims=True), 1e-12)
        grad_y = (grad_z - z * np.sum(z * grad_z, axis=1, keepdims=True)) \
            / norms
        return grad_y.T @ x

    def step(self, gradient, lr):
        self.weights = self.weights - lr * gradient


def train_toy_encoder(dataset, config, params=LossParams(), epochs=100,
                      lr=0.001, rng=None, K=8, n_max=4, batches_per_epoch=1,
                      augment=False, encoder=None):
    """Minimize the contrastive loss with plain gradient descent.

    Parameters
    ----------
    dataset : Sequence[FragmentGroup]
    config : EncoderConfig
    params : LossParams, optional
    epochs : int, optional
    lr : float, optional
    rng : Union[int, numpy.random.Generator], optional
    K : int, optional
        Groups per batch, capped by the number of eligible groups
    n_max : int, optional
    batches_per_epoch : int, optional
    augment : bool, optional
        Pass batches through :func:`augment_chain`
    encoder : ToyLinearEncoder, optional
        Continue training this encoder instead of a fresh one

    Returns
    -------
    ToyLinearEncoder
    List[float]
        Loss of a fixed monitoring batch before training and after each
        epoch (``epochs + 1`` values)
    """

    rng = as_rng(rng)
    if encoder is None:
        encoder = ToyLinearEncoder(config, seed=int(rng.integers(2 ** 31)))
    monitor = monitor_batch(dataset, config, n_max)
    K = min(K, len(set(monitor.labels.tolist())))

    def monitor_loss():
        return ntxent_loss(encoder.encode_windows(monitor.windows),
                           monitor.labels, params)

    trace = [monitor_loss()]
    for epoch in range(1, epochs + 1):
        for _ in range(batches_per_epoch):
            batch = sample_batch(dataset, K, config, n_max, rng)
            windows = augment_chain(batch.windows, rng) if augment \
                else batch.windows
            z = encoder.encode_windows(windows)
            grad_z = ntxent_grad(z, batch.labels, params)
            encoder.step(encoder.weight_gradient(windows, grad_z), lr)
        trace.append(monitor_loss())
        logger.debug("Epoch %d: loss %.6f", epoch, trace[-1])

    logger.info("Trained %s: loss %.4f -> %.4f over %d epochs",
                encoder.identity, trace[0], trace[-1], epochs)
    return encoder, trace


# Closing the loop with the alignment pipeline

def _cut(w, start_s, n_samples):
    start = int(round(start_s * w.sample_rate))
    samples = w.samples[start:start + n_samples]
    return Waveform(np.pad(samples, (0, n_samples - len(samples))),
                    w.sample_rate)


def groups_from_aligned(groups, waveforms):
    """Cut CQT fragments for each aligned group with relevant matches.

    Parameters
    ----------
    groups : Sequence[AlignedGroup]
    waveforms : Dict[Hashable, Waveform]
        Source recordings keyed by fragment source id

    Returns
    -------
    List[FragmentGroup]
    """

    dataset = []
    for group in groups:
        if not group.relevant:
            continue
        fragments = [group.original] + [m.fragment for m in group.relevant]
        n_samples = int(round(group.original.duration_s * SAMPLE_RATE))
        members = []
        for fragment in fragments:
            w = waveforms[fragment.source_id]
            if w.sample_rate != SAMPLE_RATE:
                w = resample(w, SAMPLE_RATE)
            members.append(cqt(_cut(w, fragment.start_s, n_samples)))
        group_id = "{s}@{t:.2f}".format(s=group.original.source_id,
                                        t=group.original.start_s)
        dataset.append(FragmentGroup(group_id, members))
    return dataset


def self_training_round(encoder, dataset, songs, pipeline_config,
                        encoder_config, params=LossParams(), epochs=100,
                        lr=0.001, rng=None, n_processes=1):
    """Collect aligned groups with ``encoder`` and retrain on the result.

    Parameters
    ----------
    encoder : Encoder
        Encoder used for alignment; continued if it is a compatible
        :class:`ToyLinearEncoder`
    dataset : List[FragmentGroup]
        Groups collected so far
    songs : Dict[Hashable, (Waveform, Dict[Hashable, Waveform])]
        Originals keyed by id with their covers keyed by id
    pipeline_config : PipelineConfig
    encoder_config : EncoderConfig
    params : LossParams, optional
    epochs : int, optional
    lr : float, optional
    rng : Union[int, numpy.random.Generator], optional
    n_processes : int, optional

    Returns
    -------
    ToyLinearEncoder
    List[FragmentGroup]
        ``dataset`` extended with the new groups
    List[AlignedGroup]
    """

    rng = as_rng(rng)
    aligned = []
    waveforms = {}
    for song_id, (original, covers) in songs.items():
        waveforms[song_id] = original
        waveforms.update(covers)
        aligned.extend(extract_aligned_groups(
            original, list(covers.values()), pipeline_config, encoder,
            encoder_config, n_processes=n_processes, original_id=song_id,
            cover_ids=list(covers.keys())))

    extended = list(dataset) + groups_from_aligned(aligned, waveforms)
    logger.info("Self-training round: %d aligned groups, dataset now %d "
                "groups", len(aligned), len(extended))

    start = encoder if isinstance(encoder, ToyLinearEncoder) and \
        encoder.config.window_frames == encoder_config.window_frames else None
    if start is not None:
        start = ToyLinearEncoder(encoder_config, start.seed,
                                 start.weights.copy())
    new_encoder, _ = train_toy_encoder(extended, encoder_config, params,
                                       epochs, lr, rng, encoder=start)
    return new_encoder, extended, aligned


# Serialization

def toy_encoder_to_bytes(encoder):
    """Serialize a toy encoder as a CHTE blob."""
    out_dim, in_dim = encoder.weights.shape
    return pack_header(_ENCODER_MAGIC, _ENCODER_HEADER, out_dim, in_dim,
                       encoder.config.window_frames,
                       encoder.config.step_frames, int(encoder.seed)) + \
        to_le_bytes(encoder.weights, np.float32)


def toy_encoder_from_bytes(blob):
    """Parse a CHTE blob."""
    (out_dim, in_dim, window_frames, step_frames, seed), offset = \
        unpack_header(blob, _ENCODER_MAGIC, _ENCODER_HEADER, "encoder")
    if out_dim != EMBEDDING_DIM or in_dim != N_BINS * window_frames:
        raise FormatError.default("encoder", "dims {o}x{i}"
                                  .format(o=out_dim, i=in_dim))
    weights, end = read_array(blob, offset, np.float32, out_dim * in_dim,
                              "encoder")
    if end != len(blob):
        raise FormatError.default("encoder", "trailing bytes")
    return ToyLinearEncoder(config_from_frames(window_frames, step_frames),
                            seed, weights.reshape(out_dim, in_dim))


def save_toy_encoder(path, encoder):
    with open(str(path), "wb") as fh:
        fh.write(toy_encoder_to_bytes(encoder))


def load_toy_encoder(path):
    with open(str(path), "rb") as fh:
        return toy_encoder_from_bytes(fh.read())


def write_loss_trace(path, trace):
    """Write a loss trace as CSV with header ``epoch,mean_loss``."""
    with open(str(path), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("epoch", "mean_loss"))
        for epoch, loss in enumerate(trace):
            writer.writerow((epoch, "{l:.6f}".format(l=loss)))
