"""Halal cosmetic knowledge-graph representation learning (HaCKG)."""

from ._hackg import (
    CosmeticKG,
    ConfigInvalidError,
    HackgError,
    SchemaViolationError,
    evaluate,
    generate_synth,
    ingest_csv,
    run_pipeline,
    train_baseline,
    __version__,
)

__all__ = [
    "CosmeticKG",
    "ConfigInvalidError",
    "HackgError",
    "SchemaViolationError",
    "evaluate",
    "generate_synth",
    "ingest_csv",
    "run_pipeline",
    "train_baseline",
    "__version__",
]
