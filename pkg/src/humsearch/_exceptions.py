# -*- coding: utf-8 -*-
"""Custom exceptions for humsearch.

Every exception carries a ``default`` static method building the canonical
message for its most common cause, so that call sites and tests agree on the
wording.
"""

from ._classes import Err


class HumsearchError(Exception):
    """Base class of all humsearch errors."""


class AudioError(HumsearchError):
    """Audio could not be read or is unusable for the requested operation."""

    @staticmethod
    def default(reason, detail=None):
        if detail is None:
            return AudioError(reason)
        return AudioError("{r}: {d}".format(r=reason, d=detail))


class WindowError(HumsearchError):
    """A feature matrix or query is too short to produce a single window."""

    @staticmethod
    def default(n_frames, window_frames):
        return WindowError("input shorter than one window ({n} < {w} frames)"
                           .format(n=n_frames, w=window_frames))


class EncoderContractError(HumsearchError):
    """An encoder returned something other than a finite unit vector."""

    @staticmethod
    def default(identity, norm):
        return EncoderContractError(
            "encoder '{e}' violated the unit-norm contract (norm={n!r})"
            .format(e=identity, n=norm))


class LossError(HumsearchError):
    """The contrastive loss is undefined for the given batch."""


class SamplingError(HumsearchError):
    """A batch or an augmentation could not be drawn."""


class MatchingError(HumsearchError):
    """Two sequences cannot be compared."""


class SearchIndexError(HumsearchError):
    """The retrieval index cannot answer the request."""


class FormatError(HumsearchError):
    """A binary blob, manifest or registry is malformed."""

    @staticmethod
    def default(kind, detail):
        return FormatError("bad {k} file: {d}".format(k=kind, d=detail))


class ConfigError(HumsearchError):
    """A configuration value violates its invariants."""


class TaskError(HumsearchError):
    """A task executed by the parallel runner raised an exception."""

    @staticmethod
    def default(err):
        if isinstance(err, Err):
            if issubclass(err.err_type, HumsearchError):
                return err.err_type(*err.args)
            message = "A task raised {t} with the message \"{m}\""\
                .format(t=err.err_type.__name__,
                        m=err.message_with_traceback)
            return TaskError(message)
        else:
            return TaskError("Task failed without an error record")


class TaskTimeoutError(HumsearchError):
    """A worker process did not deliver its results in time."""

    @staticmethod
    def default(process_index):
        return TaskTimeoutError("Timeout when collecting results from "
                                "process {k}".format(k=process_index))
