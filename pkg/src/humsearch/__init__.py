# -*- coding: utf-8 -*-
"""Humsearch finds songs from sung or hummed melody fragments.

Audio is turned into constant-Q magnitudes, sliced into overlapping analysis
windows and encoded into unit-norm 128-d fingerprints. Groups of
time-aligned fragments of original songs and their covers are extracted by
silence splitting and cross-correlation, and can be used to train a window
encoder with a contrastive loss. Songs are retrieved by nearest-neighbour
search over fingerprints followed by reranking of the candidate songs.

Example
-------

Index a synthetic corpus and look up a transposed, noisy excerpt:

>>> import humsearch as hs
>>> corpus = hs.synth_corpus(hs.CorpusSpec(n_songs=5, seed=1))
>>> encoder = hs.BaselineEncoder(seed=0)
>>> db = hs.build_database(corpus.songs, encoder)
>>> query_id, query, _, _ = corpus.queries[0]
>>> result = hs.query_song(db, query, encoder)
>>> result.profile
'short'

"""

from ._classes import (AlignedGroup, CorpusSpec, CorrelationCurve,
                       CoverTransform, EncoderConfig, Err, FeatureMatrix,
                       FingerprintSequence, Fragment, FragmentationResult,
                       FragmentGroup, IndexEntry, LossParams, Match,
                       MotifSpec, Peak, PipelineConfig, QueryResult,
                       RmsEnvelope, SilenceMask, SongRecord, SynthCorpus,
                       TrainingBatch, Waveform)
from ._exceptions import (AudioError, ConfigError, EncoderContractError,
                          FormatError, HumsearchError, LossError,
                          MatchingError, SamplingError, SearchIndexError,
                          TaskError, TaskTimeoutError, WindowError)
from ._audio import (cqt, features_from_bytes, features_to_bytes,
                     load_features, load_wav, resample, rms_envelope,
                     save_features, write_wav, CQT_REALIZATION, RESAMPLER)
from ._fingerprint import (BaselineEncoder, Encoder, baseline_encode,
                           encode_sequence, fingerprint_waveform,
                           load_fingerprints, make_windows, profile_config,
                           save_fingerprints, select_profile)
from ._matching import (best_pearson, correlation_matrix, detect_peaks,
                        dtw_distance, max_pearson, max_pearson_with_offset,
                        seq_cross_correlation)
from ._alignment import (best_fragmentation, dedup_fragments,
                         evaluate_combination, extract_aligned_groups,
                         filter_matches, find_silence_mask, match_cover,
                         merge_fragments, split_by_silence)
from ._learning import (ToyLinearEncoder, augment_chain, augment_mix,
                        augment_noise, augment_pitch_shift,
                        augment_splice_out, augment_time_stretch,
                        groups_from_aligned, load_toy_encoder, ntxent_grad,
                        ntxent_loss, sample_batch, save_toy_encoder,
                        self_training_round, train_toy_encoder,
                        write_loss_trace)
from ._index import (CoarseIndex, SongDatabase, ann_search, bench_query,
                     build_database, build_index, exact_rerank, exact_search,
                     load_database, mean_reciprocal_rank, query_song,
                     save_database, top_n_hit_rate, write_bench_csv)
from ._corpus import (random_motif, read_ground_truth, synth_corpus,
                      synth_cover, synth_motif, synth_song, synthetic_groups,
                      write_ground_truth)
from ._manifest import (GroupManifest, ManifestFragment, RunConfig,
                        group_to_manifest, load_run_config, read_manifest,
                        write_manifest)
from ._execution import run

name = "humsearch"
__version__ = "0.1.0"


def build_info():
    """Realizations of the numerical building blocks.

    Returns
    -------
    Dict[str, str]
    """

    return {"version": __version__, "resampler": RESAMPLER,
            "cqt": CQT_REALIZATION}
