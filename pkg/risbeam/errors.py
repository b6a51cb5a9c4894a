#!/usr/bin/env python


class RisbeamError(Exception):
    """
    Base class for errors raised on purpose by risbeam
    """


class ConfigError(RisbeamError, ValueError):
    """
    Invalid run configuration
    """


class DatasetFormatError(RisbeamError):
    """
    Dataset file that cannot be parsed
    """


class InsufficientDataError(RisbeamError, ValueError):
    """
    Too few samples, or no labelled sample, for the requested operation
    """


class CheckpointError(RisbeamError):
    """
    Model checkpoint that cannot be parsed
    """


class ShapeMismatchError(RisbeamError, ValueError):
    """
    Arrays, models or datasets whose dimensions do not agree
    """


class TrainingDivergedError(RisbeamError):
    def __init__(self, epoch, batch, last_loss):
        self.epoch = epoch
        self.batch = batch
        self.last_loss = last_loss
        super().__init__(
            "training diverged at epoch {} batch {} (last finite loss {!r})".format(
                epoch, batch, last_loss
            )
        )
