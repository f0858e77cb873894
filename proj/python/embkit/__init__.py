"""embkit: metric-learning embeddings, exact retrieval and mP@5 scoring.

Thin re-export of the compiled core. Everything is deterministic under
explicit seeds; see the package README for file formats and the CLI.
"""

from ._core import (
    MAX_EMBED_DIM,
    SEED_TAGS,
    ArgumentError,
    ConfigError,
    ContractError,
    EmbkitError,
    FormatError,
    NumericError,
    ParseError,
    ValidationError,
    __version__,
    arcface_grad,
    arcface_logits,
    arcface_loss,
    backbone_lr,
    cosine_lr,
    derive_seed,
    encode,
    fuse_views,
    margin_at_epoch,
    margin_table,
    mix64,
    mp_at_5,
    p_at_5,
    plan_dataset,
    read_features,
    read_plan,
    read_store,
    splitmix64,
    synthesize,
    top_k,
    train,
    write_features,
    write_plan,
    write_store,
)

__all__ = [
    "MAX_EMBED_DIM",
    "SEED_TAGS",
    "ArgumentError",
    "ConfigError",
    "ContractError",
    "EmbkitError",
    "FormatError",
    "NumericError",
    "ParseError",
    "ValidationError",
    "__version__",
    "arcface_grad",
    "arcface_logits",
    "arcface_loss",
    "backbone_lr",
    "cosine_lr",
    "derive_seed",
    "encode",
    "fuse_views",
    "margin_at_epoch",
    "margin_table",
    "mix64",
    "mp_at_5",
    "p_at_5",
    "plan_dataset",
    "read_features",
    "read_plan",
    "read_store",
    "splitmix64",
    "synthesize",
    "top_k",
    "train",
    "write_features",
    "write_plan",
    "write_store",
]
