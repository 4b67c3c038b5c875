"""Low-complexity CNN for binary tumor image classification, built on numpy.

Subpackages are imported explicitly (``import lcnn.model``) rather than
re-exported here; keeping this module free of numpy imports lets the CLI
configure BLAS thread counts before numpy loads.
"""

__version__ = "0.1.0"

__all__ = [
    "tensor",
    "layers",
    "optim",
    "augment",
    "data",
    "metrics",
    "model",
    "train",
    "synthetic",
    "errors",
    "cli",
]
