#  -*- coding: utf-8 -*-
"""Group manifests and run configuration documents (JSON)."""

import json
from collections import namedtuple

from ._classes import PipelineConfig, ROLES
from ._exceptions import ConfigError, FormatError

RERANK_METHODS = ("corr", "dtw")
DEFAULT_KEY_SHIFTS = (-2, -1, 0, 1, 2)
PROFILE_CHOICES = ("short", "long", "fused")


class ManifestFragment(namedtuple("ManifestFragment",
                                  ("source_id", "role", "title", "author",
                                   "start_s", "end_s", "correlation",
                                   "verified"))):
    """One fragment of an aligned group as recorded in a manifest."""

    def __new__(cls, source_id, role, title, author, start_s, end_s,
                correlation, verified=False):
        if role not in ROLES:
            raise ValueError("Unknown role {r!r}".format(r=role))
        if not start_s < end_s:
            raise ValueError("Need start_s < end_s")
        if not -1.0 <= correlation <= 1.0:
            raise ValueError("correlation must lie in [-1, 1]")
        return super(ManifestFragment, cls).__new__(
            cls, source_id, role, title, author, float(start_s),
            float(end_s), float(correlation), bool(verified))


class GroupManifest(namedtuple("GroupManifest", ("group_id", "fragments"))):
    """An aligned group with the metadata of each member fragment."""

    def __new__(cls, group_id, fragments):
        return super(GroupManifest, cls).__new__(cls, group_id,
                                                 tuple(fragments))


def group_to_manifest(group_id, group, titles=None, authors=None):
    """Describe an aligned group.

    The original fragment is recorded with correlation 1 and as verified;
    matches are recorded unverified.

    Parameters
    ----------
    group_id : Hashable
    group : AlignedGroup
    titles : Dict[Hashable, str], optional
        Titles keyed by source id
    authors : Dict[Hashable, str], optional

    Returns
    -------
    GroupManifest
    """

    titles = titles or {}
    authors = authors or {}

    def describe(fragment, correlation, verified):
        return ManifestFragment(fragment.source_id, fragment.role,
                                titles.get(fragment.source_id, ""),
                                authors.get(fragment.source_id, ""),
                                fragment.start_s, fragment.end_s,
                                correlation, verified)

    fragments = [describe(group.original, 1.0, True)]
    fragments.extend(describe(m.fragment, m.correlation, False)
                     for m in group.matches)
    return GroupManifest(group_id, fragments)


def manifest_to_dict(manifest):
    return {"group_id": manifest.group_id,
            "fragments": [f._asdict() for f in manifest.fragments]}


def manifest_from_dict(document):
    try:
        return GroupManifest(document["group_id"],
                             [ManifestFragment(**f)
                              for f in document["fragments"]])
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError.default("manifest", str(e))


def write_manifest(path, manifest):
    with open(str(path), "w") as fh:
        json.dump(manifest_to_dict(manifest), fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_manifest(path):
    try:
        with open(str(path)) as fh:
            document = json.load(fh)
    except ValueError as e:
        raise FormatError.default("manifest", str(e))
    return manifest_from_dict(document)


class EncoderSettings(namedtuple("EncoderSettings",
                                 ("seed", "profile", "path"))):
    """Encoder seed, profile (``short``, ``long`` or ``fused``) and an
    optional CHTE file holding a trained encoder to use instead of the
    baseline."""

    def __new__(cls, seed=0, profile="fused", path=None):
        if profile not in PROFILE_CHOICES:
            raise ValueError("profile must be one of {p}"
                             .format(p=PROFILE_CHOICES))
        return super(EncoderSettings, cls).__new__(
            cls, int(seed), profile, None if path is None else str(path))


class IndexSettings(namedtuple("IndexSettings",
                               ("nlist", "nprobe", "top_k", "rerank",
                                "key_shifts"))):
    """Coarse index and query parameters."""

    def __new__(cls, nlist=None, nprobe=None, top_k=5000, rerank="corr",
                key_shifts=DEFAULT_KEY_SHIFTS):
        if nlist is not None and nlist < 1:
            raise ValueError("nlist must be at least 1")
        if nprobe is not None and nprobe < 1:
            raise ValueError("nprobe must be at least 1")
        if top_k < 1:
            raise ValueError("top_k must be at least 1")
        if rerank not in RERANK_METHODS:
            raise ValueError("rerank must be one of {m}"
                             .format(m=RERANK_METHODS))
        key_shifts = tuple(int(k) for k in key_shifts)
        if not key_shifts:
            raise ValueError("key_shifts must not be empty")
        return super(IndexSettings, cls).__new__(cls, nlist, nprobe,
                                                 int(top_k), rerank,
                                                 key_shifts)


class RunConfig(namedtuple("RunConfig",
                           ("pipeline", "encoder", "index", "seed",
                            "threads"))):
    """All tunable parameters of a run."""

    def __new__(cls, pipeline=None, encoder=None, index=None, seed=0,
                threads=1):
        if threads < 1:
            raise ValueError("threads must be at least 1")
        return super(RunConfig, cls).__new__(
            cls, pipeline or PipelineConfig(), encoder or EncoderSettings(),
            index or IndexSettings(), int(seed), int(threads))


_SECTIONS = {"pipeline": PipelineConfig, "encoder": EncoderSettings,
             "index": IndexSettings}


def _check_keys(document, allowed, where):
    if not isinstance(document, dict):
        raise ConfigError("{w} must be an object".format(w=where))
    unknown = sorted(set(document) - set(allowed))
    if unknown:
        raise ConfigError("Unknown key(s) in {w}: {k}"
                          .format(w=where, k=", ".join(unknown)))


def run_config_from_dict(document):
    """Validate a configuration document and build a :class:`RunConfig`.

    Raises
    ------
    ConfigError
        On unknown keys or invariant violations.
    """

    _check_keys(document, RunConfig._fields, "configuration")
    try:
        sections = {}
        for name, section_type in _SECTIONS.items():
            values = document.get(name, {})
            _check_keys(values, section_type._fields, name)
            sections[name] = section_type(**values)
        return RunConfig(seed=document.get("seed", 0),
                         threads=document.get("threads", 1), **sections)
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e))


def run_config_to_dict(config):
    document = {name: dict(getattr(config, name)._asdict())
                for name in _SECTIONS}
    for name in ("pause_set", "db_set"):
        document["pipeline"][name] = list(document["pipeline"][name])
    document["index"]["key_shifts"] = list(document["index"]["key_shifts"])
    document["seed"] = config.seed
    document["threads"] = config.threads
    return document


def load_run_config(path):
    """Read a JSON run configuration file."""
    try:
        with open(str(path)) as fh:
            document = json.load(fh)
    except ValueError as e:
        raise ConfigError("Malformed configuration {p}: {e}"
                          .format(p=path, e=e))
    return run_config_from_dict(document)
