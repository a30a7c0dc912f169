"""Combine per-flow votes into a ranked global decision.

A flow's vote for class d carries the flow's effectiveness at recognizing
d. Class weight is the sum of effectiveness that voted for the class;
confidence is that weight normalized over all voted classes; per-class
explainability is the effectiveness-weighted average of the voting flows'
explainability weights. Negative effectiveness (possible under the
correlation-style metrics) is clamped to zero first: a worse-than-chance
flow contributes nothing.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import (
    MissingEffectivenessError,
    NoVotesError,
    NoVotesForClassError,
)
from .transforms import PropertyId


@dataclass(frozen=True)
class FlowDescriptor:
    """Identity of one pre-decision flow.

    `x_weight` is the flow's explainability in [0, 1]; by convention 1 for
    property flows and 0 for the identity flow, but any value is accepted.
    `engine_ref` names the trained engine inside the knowledgebase.
    """

    flow_id: int
    property: PropertyId
    x_weight: float
    engine_ref: str = ""

    def __post_init__(self):
        if not 0.0 <= self.x_weight <= 1.0:
            raise ValueError(f"x_weight must be in [0, 1], got {self.x_weight}")


def default_x_weight(prop: PropertyId) -> float:
    return 0.0 if prop is PropertyId.IDENTITY else 1.0


@dataclass(frozen=True)
class EffectivenessTable:
    """Matrix e[flow][class] of per-flow per-class effectiveness."""

    values: np.ndarray
    metric_id: str

    def __post_init__(self):
        if self.values.ndim != 2:
            raise ValueError(f"expected a 2-d table, got shape {self.values.shape}")

    @property
    def flow_count(self) -> int:
        return self.values.shape[0]

    @property
    def class_count(self) -> int:
        return self.values.shape[1]

    def cell(self, flow_id: int, class_id: int) -> float:
        if not 0 <= flow_id < self.flow_count:
            raise MissingEffectivenessError(
                f"flow {flow_id} has no row in the {self.metric_id} table"
            )
        return float(self.values[flow_id, class_id])


@dataclass(frozen=True)
class FlowVote:
    """One flow's local decision; scores present only when the engine was
    configured to expose probability estimates."""

    class_id: int
    scores: Optional[np.ndarray] = None


#: Map flow_id -> FlowVote; at most one vote per flow by construction.
VoteSet = Dict[int, FlowVote]


@dataclass(frozen=True)
class ClassDecision:
    class_id: int
    confidence: float
    explainability: float
    contributing: Tuple[PropertyId, ...]


@dataclass(frozen=True)
class DecisionReport:
    """Ranked classes with confidence, explainability, and contributors.

    Classes nobody voted for are omitted. `uniform_fallback` marks the
    degenerate case where every voting flow had zero effectiveness and
    confidence was spread uniformly.
    """

    ranked: Tuple[ClassDecision, ...]
    metric_id: str
    uniform_fallback: bool = False

    @property
    def winner(self) -> ClassDecision:
        return self.ranked[0]

    def to_record(self, sample_id, class_names: Sequence[str]) -> dict:
        """Structured record for one sample, rounded for reporting."""
        return {
            "sample_id": sample_id,
            "metric_id": self.metric_id,
            "uniform_fallback": self.uniform_fallback,
            "ranked": [
                {
                    "class": class_names[d.class_id],
                    "confidence": float(f"{d.confidence:.4g}"),
                    "explainability": float(f"{d.explainability:.3g}"),
                    "properties": [p.value for p in d.contributing],
                }
                for d in self.ranked
            ],
        }


def _clamped(eff: EffectivenessTable, flow_id: int, class_id: int) -> float:
    return max(0.0, eff.cell(flow_id, class_id))


def weight(
    class_id: int,
    votes: VoteSet,
    eff: EffectivenessTable,
    probabilistic: bool = False,
) -> float:
    """Total effectiveness behind one class.

    Discrete mode sums the effectiveness of the flows whose vote equals
    the class. Probabilistic mode sums effectiveness * p(class) over every
    flow that supplies scores; a flow without scores contributes as if its
    vote were a one-hot score vector, which makes the two modes coincide
    for discrete-only engines.
    """
    total = 0.0
    for flow_id, vote in votes.items():
        e = _clamped(eff, flow_id, class_id)
        if probabilistic and vote.scores is not None:
            total += e * float(vote.scores[class_id])
        elif vote.class_id == class_id:
            total += e
    return total


def confidence(
    votes: VoteSet,
    eff: EffectivenessTable,
    probabilistic: bool = False,
) -> Dict[int, float]:
    """Normalized class weights over the voted classes; sums to one.

    If every voting flow has zero effectiveness the confidence is uniform
    over the voted classes (the zero-total-weight fallback; `decide` flags
    it on the report).
    """
    if not votes:
        raise NoVotesError("no flow cast a vote")
    voted = sorted({vote.class_id for vote in votes.values()})
    weights = {d: weight(d, votes, eff, probabilistic) for d in voted}
    total = sum(weights.values())
    if total <= 0.0:
        return {d: 1.0 / len(voted) for d in voted}
    return {d: w / total for d, w in weights.items()}


def explainability(
    class_id: int,
    votes: VoteSet,
    eff: EffectivenessTable,
    flows: Sequence[FlowDescriptor],
) -> float:
    """Effectiveness-weighted mean explainability of the flows voting for
    the class; 1 means fully property-justified. Returns 0 when the voting
    flows carry no effectiveness (indeterminate)."""
    x_by_flow = {f.flow_id: f.x_weight for f in flows}
    voters = [fid for fid, vote in votes.items() if vote.class_id == class_id]
    if not voters:
        raise NoVotesForClassError(f"class {class_id} received no votes")
    num = 0.0
    den = 0.0
    for fid in voters:
        if fid not in x_by_flow:
            raise MissingEffectivenessError(f"flow {fid} has no descriptor")
        e = _clamped(eff, fid, class_id)
        num += e * x_by_flow[fid]
        den += e
    return num / den if den > 0 else 0.0


def decide(
    votes: VoteSet,
    eff: EffectivenessTable,
    flows: Sequence[FlowDescriptor],
    probabilistic: bool = False,
    display_scores: Optional[Mapping[int, float]] = None,
) -> DecisionReport:
    """Assemble the ranked decision report.

    Ranking is by confidence descending, class id ascending on ties. Each
    class lists the properties of the flows that voted for it, identity
    excluded, ordered by descending `display_scores` (falling back to the
    flow's effectiveness for the class), flow id breaking ties.
    """
    conf = confidence(votes, eff, probabilistic)
    weights = {d: weight(d, votes, eff, probabilistic) for d in conf}
    by_flow = {f.flow_id: f for f in flows}

    ranked = []
    for class_id in sorted(conf, key=lambda d: (-conf[d], d)):
        voters = [fid for fid, vote in votes.items() if vote.class_id == class_id]
        explainable = [
            fid for fid in voters if by_flow[fid].property is not PropertyId.IDENTITY
        ]

        def order_key(fid):
            score = (
                display_scores[fid]
                if display_scores is not None and fid in display_scores
                else _clamped(eff, fid, class_id)
            )
            return (-score, fid)

        contributing = tuple(
            by_flow[fid].property for fid in sorted(explainable, key=order_key)
        )
        ranked.append(
            ClassDecision(
                class_id=class_id,
                confidence=conf[class_id],
                explainability=explainability(class_id, votes, eff, flows),
                contributing=contributing,
            )
        )
    return DecisionReport(
        ranked=tuple(ranked),
        metric_id=eff.metric_id,
        uniform_fallback=sum(weights.values()) <= 0.0,
    )
