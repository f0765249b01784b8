"""HorNet: gated caption encoder fused with visual features for re-identification.

Configs are plain dicts with the same layout as the CLI's JSON config files;
missing keys take their defaults.
"""

import json

from . import _core
from ._core import (
    Checkpoint,
    DataError,
    ShapeError,
    TrainingDiverged,
    build_vocab,
    cmc_curve,
    distance_matrix,
    encode,
    gumbel_sigmoid_samples,
    pipeline_grad_check,
    rerank,
    tokenize,
)

__all__ = [
    "Checkpoint",
    "DataError",
    "ShapeError",
    "TrainingDiverged",
    "ablation",
    "build_vocab",
    "cmc_curve",
    "default_config",
    "distance_matrix",
    "encode",
    "evaluate",
    "evaluate_distances",
    "gumbel_sigmoid_samples",
    "load_data",
    "pipeline_grad_check",
    "rerank",
    "tokenize",
    "train",
]


def _dump(config):
    return json.dumps(config or {})


def default_config():
    return json.loads(_core.default_config())


def load_data(config=None):
    """Return (train, eval) dicts of features, identities, cameras and captions."""
    return _core.load_data(_dump(config))


def train(config=None):
    """Train a model; returns (Checkpoint, list of per-epoch loss dicts)."""
    return _core.train(_dump(config))


def evaluate(checkpoint, metric="euclidean", rerank=False):
    return json.loads(_core.evaluate(checkpoint, metric, rerank))


def evaluate_distances(distances, query_ids, query_cams, gallery_ids, gallery_cams):
    """mAP and CMC@{1,5,10,20} under the cross-camera protocol."""
    return json.loads(
        _core.evaluate_distances(distances, query_ids, query_cams, gallery_ids, gallery_cams)
    )


def ablation(config=None):
    return json.loads(_core.ablation(_dump(config)))
