"""One-class classification against Gaussian pseudo-negatives."""

from ._core import (
    Baseline,
    Error,
    Network,
    auroc,
    benchmark,
    bsvm,
    load,
    mann_whitney_u2,
    mpm,
    ocsvm,
    ocsvm_plus,
    read_features,
    svdd,
    synth,
    train,
    write_features,
)

__all__ = [
    "Baseline",
    "Error",
    "Network",
    "auroc",
    "benchmark",
    "bsvm",
    "load",
    "mann_whitney_u2",
    "mpm",
    "ocsvm",
    "ocsvm_plus",
    "read_features",
    "svdd",
    "synth",
    "train",
    "write_features",
]
