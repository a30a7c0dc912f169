"""Character recognition with property-transform flows, effectiveness-weighted
vote fusion, a per-decision explainability measure, and plain-language
rationale.

The top-level namespace re-exports the domain types and operations most
callers need; the submodules keep the full surface:

- :mod:`propfuse.ingest`      IDX file parsing, datasets, stratified splits
- :mod:`propfuse.transforms`  property-emphasizing image transforms
- :mod:`propfuse.inference`   from-scratch MLP engines and flow evaluation
- :mod:`propfuse.metrics`     per-class effectiveness metrics
- :mod:`propfuse.fusion`      weighted vote fusion into ranked decisions
- :mod:`propfuse.explain`     confidence bands and rationale sentences
- :mod:`propfuse.kb`          persisted knowledgebase of trained flows
- :mod:`propfuse.cli`         command-line driver
"""

from .metrics import ConfusionCounts, METRIC_IDS, auc, epars, metric
from .transforms import PropertyId, apply_transform
from .fusion import (
    DecisionReport,
    EffectivenessTable,
    FlowDescriptor,
    FlowVote,
    confidence,
    decide,
    explainability,
    weight,
)
from .explain import band, render

__all__ = [
    "ConfusionCounts",
    "METRIC_IDS",
    "auc",
    "epars",
    "metric",
    "PropertyId",
    "apply_transform",
    "DecisionReport",
    "EffectivenessTable",
    "FlowDescriptor",
    "FlowVote",
    "confidence",
    "decide",
    "explainability",
    "weight",
    "band",
    "render",
]

__version__ = "0.1.0"
