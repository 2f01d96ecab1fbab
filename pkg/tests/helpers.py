# -*- coding: utf-8 -*-
"""Helper functions and reference implementations for testing."""

import numpy as np

import humsearch


# Tasks for the scheduler and the process runner

def id_(x):
    return x


def add(x, y):
    return x + y


def div(x, y):
    return x / y


def power(x, exponent=2):
    return x ** exponent


def fail_with_audio_error(path):
    raise humsearch.AudioError.default("unreadable file", path)


# Builders

def unit_rows(rng, n, dim=humsearch._classes.EMBEDDING_DIM):
    x = rng.standard_normal((n, dim))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def sequence(prints, profile="short", source_id=None):
    """Wrap an array of fingerprints in a FingerprintSequence."""
    return humsearch.FingerprintSequence(prints,
                                         humsearch.profile_config(profile),
                                         source_id)


def random_sequence(rng, n, profile="short"):
    return sequence(unit_rows(rng, n), profile)


def constant_sequence(vector, n, profile="short"):
    return sequence(np.tile(vector, (n, 1)), profile)


def vectors_with_gram(gram, dim=humsearch._classes.EMBEDDING_DIM):
    """Unit vectors whose pairwise dot products are ``gram``."""
    factor = np.linalg.cholesky(np.asarray(gram, dtype=np.float64))
    return np.pad(factor, ((0, 0), (0, dim - factor.shape[1])))


def tone(frequency, duration_s, amplitude=0.5,
         sample_rate=humsearch._classes.SAMPLE_RATE):
    t = np.arange(int(round(duration_s * sample_rate))) / float(sample_rate)
    return humsearch.Waveform(amplitude * np.sin(2 * np.pi * frequency * t),
                              sample_rate)


def noisy_groups(rng, n_groups, members=2, n_frames=94, noise=0.05):
    """Groups of random feature matrices perturbed by small noise."""
    groups = []
    for g in range(n_groups):
        base = rng.random((humsearch._classes.N_BINS, n_frames))
        groups.append(humsearch.FragmentGroup(
            "group{g}".format(g=g),
            [humsearch.FeatureMatrix(base + noise * rng.random(base.shape))
             for _ in range(members)]))
    return groups


def song_record(song_id, prints, profile="short"):
    return humsearch.SongRecord(song_id, "song {i}".format(i=song_id),
                                {profile: sequence(prints, profile, song_id)},
                                len(prints) * 0.25 + 3.0)


# Reference implementations

def brute_force_ntxent(z, labels, temperature):
    """Contrastive loss by explicit loops over anchors and pairs."""
    n = len(z)
    total, pairs = 0.0, 0
    for i in range(n):
        negatives = [np.exp(np.dot(z[i], z[l]) / temperature)
                     for l in range(n) if labels[l] != labels[i]]
        for j in range(n):
            if j == i or labels[j] != labels[i]:
                continue
            total += np.log(sum(negatives)) - np.dot(z[i], z[j]) / temperature
            pairs += 1
    return total / pairs


def finite_difference_grad(f, x, eps=1e-6):
    """Central differences of a scalar function of an array."""
    grad = np.zeros_like(x)
    for index in np.ndindex(*x.shape):
        step = np.zeros_like(x)
        step[index] = eps
        grad[index] = (f(x + step) - f(x - step)) / (2 * eps)
    return grad


def brute_force_pearson(q, c):
    """Best Pearson coefficient and offset over all alignments."""
    x, y = np.asarray(q.prints, np.float64), np.asarray(c.prints, np.float64)
    best = (-np.inf, None)
    for offset in range(len(y) - len(x) + 1):
        r = np.corrcoef(x.ravel(), y[offset:offset + len(x)].ravel())[0, 1]
        if r > best[0]:
            best = (r, offset)
    return best


def dominant_frequency(w):
    """Frequency in Hz of the largest DFT magnitude."""
    spectrum = np.abs(np.fft.rfft(w.samples * np.hanning(w.n_samples)))
    return np.argmax(spectrum) * w.sample_rate / float(w.n_samples)


def clustered_rows(rng, n_clusters, per_cluster, noise=0.05,
                   dim=humsearch._classes.EMBEDDING_DIM):
    """Unit rows around random unit centers, with their cluster labels."""
    centers = unit_rows(rng, n_clusters, dim)
    labels = np.repeat(np.arange(n_clusters), per_cluster)
    x = centers[labels] + noise * rng.standard_normal((len(labels), dim))
    return x / np.linalg.norm(x, axis=1, keepdims=True), labels
