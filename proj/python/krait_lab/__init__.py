"""Python bindings for the krait_lab graph prompt backdoor toolkit."""

import json
import os

from ._core import (
    Graph,
    KraitError,
    accuracy,
    constraint_evaluations,
    derive_seed,
    ego_network,
    generate_sbm,
    global_view_homophily,
    gnn_svd_filter,
    inject_embedding_noise,
    label_nonuniformity,
    lnh_score,
    load_graph,
    load_graph_json,
    macro_f1,
    project_embeddings_2d,
    select_poisoned,
    svd_reduce_features,
)
from . import _core

__all__ = [
    "Graph",
    "KraitError",
    "accuracy",
    "constraint_evaluations",
    "derive_seed",
    "ego_network",
    "generate_sbm",
    "global_view_homophily",
    "gnn_svd_filter",
    "inject_embedding_noise",
    "label_nonuniformity",
    "lnh_score",
    "load_config",
    "load_graph",
    "load_graph_json",
    "macro_f1",
    "project_embeddings_2d",
    "run_experiment",
    "select_poisoned",
    "svd_reduce_features",
]


def _config_text(config):
    if isinstance(config, dict):
        return json.dumps(config)
    if isinstance(config, (str, os.PathLike)) and os.path.exists(config):
        with open(config, encoding="utf-8") as handle:
            return handle.read()
    if isinstance(config, str):
        return config
    raise TypeError("config must be a dict, a JSON string or a path to a JSON file")


def load_config(config):
    """Validates a config and returns it as a dict with every default filled in."""
    return json.loads(_core.normalize_config(_config_text(config)))


def run_experiment(config):
    """Runs all trials of a config and returns the parsed summary.json."""
    return json.loads(_core.run_experiment(_config_text(config)))
