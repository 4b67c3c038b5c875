"""Exception hierarchy shared across the package.

Kept free of third-party imports so the CLI can map exceptions to exit
codes before numpy is loaded.
"""


class LcnnError(Exception):
    """Base class for errors raised by this package."""


class InputDataError(LcnnError):
    """Bad input data: missing directories, undecodable images, invalid config values."""


class WeightsError(LcnnError):
    """Weight file problems: bad magic/version, truncation, shape mismatch against the model."""


class ModelConfigError(LcnnError):
    """Model specification that cannot produce a consistent layer stack."""


class TrainingDiverged(LcnnError):
    """Training aborted on a non-finite loss."""

    def __init__(self, epoch: int, batch_index: int, layer_norms: dict):
        self.epoch = epoch
        self.batch_index = batch_index
        self.layer_norms = layer_norms
        norms = ", ".join(f"{k}={v:.3e}" for k, v in layer_norms.items())
        super().__init__(
            f"non-finite loss at epoch {epoch}, batch {batch_index}; parameter norms: {norms}"
        )
