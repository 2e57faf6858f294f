"""Fashionability-aware visual similarity exploration at desk scale."""

from .data import (
    EpochTable,
    Interaction,
    Item,
    load_catalog,
    load_interactions,
    segment_epochs,
    split_holdout,
    write_catalog,
    write_interactions,
)
from .index import IndexSet, Query, QueryResult, autocomplete, build_indices, knn_query, map_slice, random_hotspot, select_map_sample, trend_lookup
from .model import (
    FashionModel,
    Hyperparams,
    auc_evaluate,
    fashionability,
    fashionability_series,
    load_model,
    predict_preference,
    save_model,
    style_position,
    train,
)
from .prng import PCG32
from .synth import PlantedTruth, SyntheticSpec, generate_synthetic
from .tsne import Embedding2D, TsneParams, kl_divergence, perplexity_calibrate, tsne_embed

__version__ = "0.1.0"
