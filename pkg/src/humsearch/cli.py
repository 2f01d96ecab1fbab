#  -*- coding: utf-8 -*-
"""Command-line interface.

Exit codes are 0 on success, 1 on usage, input or processing errors and 2
when a command succeeds with an empty result.
"""

import argparse
import csv
import logging
import os
import sys

from ._alignment import extract_aligned_groups
from ._audio import cqt, load_wav, resample, save_features, write_wav
from ._classes import CorpusSpec, PROFILES, SAMPLE_RATE
from ._corpus import synth_corpus, synthetic_groups, write_ground_truth
from ._exceptions import HumsearchError
from ._fingerprint import (BaselineEncoder, encode_sequence, profile_config,
                           save_fingerprints, select_profile)
from ._index import (bench_query, build_database, load_database,
                     mean_reciprocal_rank, query_song, save_database,
                     top_n_hit_rate, write_bench_csv)
from ._learning import (load_toy_encoder, save_toy_encoder, train_toy_encoder,
                        write_loss_trace)
from ._manifest import RunConfig, group_to_manifest, load_run_config, \
    write_manifest

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_EMPTY = 2
HIT_RATE_NS = (1, 3, 5, 10, 100)


def _stem(path):
    return os.path.splitext(os.path.basename(str(path)))[0]


def _profile(args, config, duration_s=None, encoder=None):
    profile = args.profile or config.encoder.profile
    if profile != "fused":
        return profile
    if encoder is None:
        return None if duration_s is None else select_profile(duration_s)
    preferred = select_profile(duration_s or 0.0)
    if encoder.accepts(profile_config(preferred)):
        return preferred
    return next((p for p in PROFILES if encoder.accepts(profile_config(p))),
                preferred)


def _encoder(config):
    if config.encoder.path:
        logger.debug("Loading encoder from %s", config.encoder.path)
        return load_toy_encoder(config.encoder.path)
    return BaselineEncoder(config.encoder.seed)


def _query_kwargs(args, config):
    return dict(top_k=config.index.top_k, nprobe=config.index.nprobe,
                rerank=config.index.rerank,
                key_shifts=config.index.key_shifts,
                profile=_profile(args, config))


def cmd_synth(args, config):
    """Write a synthetic corpus of WAV files with its ground truth."""
    spec = CorpusSpec(n_songs=args.songs, motifs_per_song=args.motifs,
                      seed=config.seed)
    corpus = synth_corpus(spec, covers_per_song=args.covers,
                          n_queries=args.queries)
    for sub in ("songs", "covers", "queries"):
        os.makedirs(os.path.join(args.out, sub), exist_ok=True)

    for song_id, _, song in corpus.songs:
        write_wav(os.path.join(args.out, "songs",
                               "song_{i:04d}.wav".format(i=song_id)), song)
        for cover_id, cover, _ in corpus.covers[song_id]:
            write_wav(os.path.join(args.out, "covers",
                                   "{c}.wav".format(c=cover_id)), cover)
    with open(os.path.join(args.out, "truth.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("query_path", "song_id"))
        for query_id, query, _, _ in corpus.queries:
            path = os.path.join("queries", "{q}.wav".format(q=query_id))
            write_wav(os.path.join(args.out, path), query)
            writer.writerow((path, corpus.truth[query_id]))
    write_ground_truth(os.path.join(args.out, "ground_truth.json"), corpus)
    print("songs={s} covers={c} queries={q}".format(
        s=len(corpus.songs), c=sum(len(c) for c in corpus.covers.values()),
        q=len(corpus.queries)))
    return EXIT_OK


def cmd_features(args, config):
    """Write the CQT (and optionally fingerprints) of a recording."""
    w = load_wav(args.input)
    if w.sample_rate != SAMPLE_RATE:
        w = resample(w, SAMPLE_RATE)
    features = cqt(w)
    save_features(args.out, features)
    if args.prints:
        encoder = _encoder(config)
        profile = _profile(args, config, w.duration_s, encoder)
        save_fingerprints(args.prints,
                          encode_sequence(features, profile_config(profile),
                                          encoder, _stem(args.input)))
    return EXIT_OK


def cmd_align(args, config):
    """Extract aligned groups and write one manifest per group."""
    original = load_wav(args.original)
    covers = [load_wav(path) for path in args.covers]
    encoder = _encoder(config)
    profile = _profile(args, config, encoder=encoder)
    original_id = _stem(args.original)
    cover_ids = [_stem(path) for path in args.covers]
    groups = extract_aligned_groups(original, covers, config.pipeline,
                                    encoder, profile_config(profile),
                                    n_processes=config.threads,
                                    original_id=original_id,
                                    cover_ids=cover_ids)

    os.makedirs(args.out, exist_ok=True)
    titles = {source_id: source_id for source_id in [original_id] + cover_ids}
    for k, group in enumerate(groups):
        group_id = "{o}-{k:03d}".format(o=original_id, k=k)
        write_manifest(os.path.join(args.out, group_id + ".json"),
                       group_to_manifest(group_id, group, titles))
    print("groups={g} relevant={r} uncertain={u}".format(
        g=len(groups), r=sum(len(g.relevant) for g in groups),
        u=sum(len(g.uncertain) for g in groups)))
    return EXIT_OK if groups else EXIT_EMPTY


def cmd_index(args, config):
    """Fingerprint songs and write a database directory."""
    songs = [(k, _stem(path), load_wav(path))
             for k, path in enumerate(args.songs)]
    db = build_database(songs, _encoder(config), config.index.nlist,
                        config.seed, config.threads)
    save_database(db, args.out)
    print("songs={n} {i}".format(n=len(db), i=" ".join(
        "{p}={e}".format(p=p, e=index.n_entries)
        for p, index in sorted(db.indexes.items()))))
    return EXIT_OK


def cmd_query(args, config):
    """Print the ranked songs for one query recording."""
    db = load_database(args.db)
    result = query_song(db, load_wav(args.query), _encoder(config),
                        n_results=args.results, **_query_kwargs(args, config))
    print("rank\tsong_id\ttitle\tscore")
    for rank, (song_id, score, _) in enumerate(result.ranking, 1):
        print("{r}\t{i}\t{t}\t{s:.4f}".format(r=rank, i=song_id,
                                             t=db.songs[song_id].title,
                                             s=score))
    return EXIT_OK if result.ranking else EXIT_EMPTY


def _read_truth(path):
    base = os.path.dirname(os.path.abspath(str(path)))
    with open(str(path), newline="") as fh:
        return [(os.path.join(base, row["query_path"]), int(row["song_id"]))
                for row in csv.DictReader(fh)]


def cmd_eval(args, config):
    """Print Top-n hit rates and the mean reciprocal rank."""
    db = load_database(args.db)
    encoder = _encoder(config)
    truth, results = {}, {}
    for path, song_id in _read_truth(args.truth):
        truth[path] = song_id
        results[path] = query_song(db, load_wav(path), encoder,
                                   n_results=max(HIT_RATE_NS),
                                   **_query_kwargs(args, config))
    if not results:
        return EXIT_EMPTY
    for n in HIT_RATE_NS:
        print("top-{n}\t{r:.4f}".format(n=n,
                                        r=top_n_hit_rate(results, truth, n)))
    print("mrr\t{r:.4f}".format(r=mean_reciprocal_rank(results, truth)))
    return EXIT_OK


def cmd_bench(args, config):
    """Print the per-step query timing table."""
    db = load_database(args.db)
    rows = bench_query(db, [load_wav(path) for path in args.queries],
                       _encoder(config), args.repetitions,
                       **_query_kwargs(args, config))
    if args.out:
        write_bench_csv(args.out, rows)
    print("step,mean_s,std_s")
    for step, mean, std in rows:
        print("{s},{m:.6f},{d:.6f}".format(s=step, m=mean, d=std))
    return EXIT_OK


def cmd_train(args, config):
    """Train the linear encoder on synthetic motif groups."""
    profile = _profile(args, config) or "short"
    encoder_config = profile_config(profile)
    dataset = synthetic_groups(args.groups,
                               duration_s=encoder_config.window_s + 1.0,
                               seed=config.seed)
    encoder, trace = train_toy_encoder(dataset, encoder_config,
                                       epochs=args.epochs, lr=args.lr,
                                       rng=config.seed)
    os.makedirs(args.out, exist_ok=True)
    save_toy_encoder(os.path.join(args.out, "encoder.chte"), encoder)
    write_loss_trace(os.path.join(args.out, "loss.csv"), trace)
    print("initial_loss={a:.4f} final_loss={b:.4f}".format(a=trace[0],
                                                           b=trace[-1]))
    return EXIT_OK


def cmd_selftest(args, config):
    """Synthesize a small corpus and run alignment, indexing and search."""
    spec = CorpusSpec(n_songs=4, motifs_per_song=3, seed=config.seed,
                      snr_db=20.0)
    corpus = synth_corpus(spec, covers_per_song=1, n_queries=4)
    encoder = _encoder(config)

    song_id, _, song = corpus.songs[0]
    _, cover, _ = corpus.covers[song_id][0]
    groups = extract_aligned_groups(song, [cover], config.pipeline, encoder,
                                    n_processes=config.threads)
    relevant = sum(len(g.relevant) for g in groups)

    db = build_database(corpus.songs, encoder, seed=config.seed,
                        n_processes=config.threads)
    results = {query_id: query_song(db, query, encoder)
               for query_id, query, _, _ in corpus.queries}
    hit_rate = top_n_hit_rate(results, corpus.truth, 1)

    print("groups={g} relevant={r} top-1={h:.2f}".format(g=len(groups),
                                                         r=relevant,
                                                         h=hit_rate))
    ok = len(groups) == spec.motifs_per_song and relevant >= 1 and \
        hit_rate >= 0.75
    print("selftest {s}".format(s="passed" if ok else "FAILED"))
    return EXIT_OK if ok else EXIT_ERROR


class _Parser(argparse.ArgumentParser):
    """Argument parser reporting usage errors with exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, "{p}: error: {m}\n".format(p=self.prog,
                                                         m=message))


def _common_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--profile", choices=("short", "long", "fused"),
                        help="encoder profile (default from config: fused)")
    common.add_argument("--seed", type=int, help="random seed")
    common.add_argument("--encoder", metavar="CHTE",
                        help="trained encoder to use instead of the baseline")
    common.add_argument("--threads", type=int,
                        help="maximum number of worker processes")
    common.add_argument("--top-k", type=int, dest="top_k",
                        help="neighbours per query fingerprint (5000)")
    common.add_argument("--nprobe", type=int,
                        help="inverted lists scanned per fingerprint")
    common.add_argument("-v", "--verbose", action="store_true",
                        help="log debug messages")
    return common


def build_parser():
    common = _common_parser()
    parser = _Parser(
        prog="humsearch",
        description="Melody fingerprinting, alignment and retrieval")
    commands = parser.add_subparsers(dest="command", metavar="command")
    commands.required = True

    def add(name, func, help_text):
        sub = commands.add_parser(name, parents=[common], help=help_text,
                                  description=help_text)
        sub.set_defaults(func=func)
        return sub

    sub = add("synth", cmd_synth, "synthesize a corpus with ground truth")
    sub.add_argument("--out", required=True)
    sub.add_argument("--songs", type=int, default=10)
    sub.add_argument("--motifs", type=int, default=3)
    sub.add_argument("--covers", type=int, default=2)
    sub.add_argument("--queries", type=int, default=None)

    sub = add("features", cmd_features, "compute CQT features")
    sub.add_argument("input")
    sub.add_argument("out", help="CHFM output file")
    sub.add_argument("--prints", help="also write CHFP fingerprints here")

    sub = add("align", cmd_align, "extract aligned fragment groups")
    sub.add_argument("original")
    sub.add_argument("covers", nargs="+")
    sub.add_argument("--out", required=True, help="manifest directory")

    sub = add("index", cmd_index, "build a song database")
    sub.add_argument("songs", nargs="+")
    sub.add_argument("--out", required=True, help="database directory")

    sub = add("query", cmd_query, "search the database with a recording")
    sub.add_argument("db")
    sub.add_argument("query")
    sub.add_argument("--results", type=int, default=10)

    sub = add("eval", cmd_eval, "Top-n hit rates over a truth CSV")
    sub.add_argument("db")
    sub.add_argument("truth", help="CSV with columns query_path,song_id")

    sub = add("bench", cmd_bench, "time the two search steps")
    sub.add_argument("db")
    sub.add_argument("queries", nargs="+")
    sub.add_argument("--repetitions", type=int, default=1)
    sub.add_argument("--out", help="also write the table as CSV")

    sub = add("train", cmd_train, "train the linear encoder")
    sub.add_argument("--out", required=True)
    sub.add_argument("--groups", type=int, default=20)
    sub.add_argument("--epochs", type=int, default=100)
    sub.add_argument("--lr", type=float, default=0.001)

    add("selftest", cmd_selftest, "run a small end-to-end check")
    return parser


def resolve_config(args):
    """Load the run configuration and apply command-line overrides."""
    config = load_run_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        config = config._replace(seed=args.seed)
    if args.threads is not None:
        config = config._replace(threads=max(1, args.threads))
    if args.encoder is not None:
        config = config._replace(
            encoder=config.encoder._replace(path=args.encoder))
    index = config.index
    if args.top_k is not None:
        index = index._replace(top_k=args.top_k)
    if args.nprobe is not None:
        index = index._replace(nprobe=args.nprobe)
    return config._replace(index=index)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args, resolve_config(args))
    except (HumsearchError, OSError, ValueError) as e:
        print("humsearch: error: {e}".format(e=e), file=sys.stderr)
        return EXIT_ERROR
