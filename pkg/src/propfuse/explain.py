"""Plain-language rationale for decision reports.

Each ranked class becomes one sentence naming the confidence band and the
properties whose flows voted for it, e.g.

    Confidence is high for interpreting this character as an S due to the
    stroke, corner, endpoint, and line properties.

The identity flow never appears in a sentence; a class carried only by it
is reported as having no explainable property.
"""

from __future__ import annotations

import enum
from typing import Dict, List, Sequence

from .errors import OutOfRangeError
from .fusion import DecisionReport
from .transforms import PropertyId


class ConfidenceBand(enum.IntEnum):
    LOW = 0
    MEDIUM = 1
    HIGH = 2

    @property
    def word(self) -> str:
        return self.name.lower()


def band(c: float) -> ConfidenceBand:
    """Verbal band for a confidence value: low below 25%, high above 75%,
    medium between (both boundaries inclusive)."""
    if not 0.0 <= c <= 1.0:
        raise OutOfRangeError(f"confidence must be in [0, 1], got {c}")
    if c < 0.25:
        return ConfidenceBand.LOW
    if c <= 0.75:
        return ConfidenceBand.MEDIUM
    return ConfidenceBand.HIGH


#: How a property is spoken of inside a sentence.
PROPERTY_PHRASES: Dict[PropertyId, str] = {
    PropertyId.STROKE: "stroke",
    PropertyId.CIRCLE: "circle",
    PropertyId.CROSSING: "crossing",
    PropertyId.ELLIPSE: "ellipse",
    PropertyId.ELLIPSE_CIRCLE: "ellipse-circle",
    PropertyId.ENDPOINT: "endpoint",
    PropertyId.ENCLOSED_REGION: "enclosed region",
    PropertyId.LINE: "line",
    PropertyId.CONVEX_HULL: "convex hull",
    PropertyId.CORNER: "corner",
}

_DIGIT_WORDS = {
    "0": "zero",
    "1": "one",
    "2": "two",
    "3": "three",
    "4": "four",
    "5": "five",
    "6": "six",
    "7": "seven",
    "8": "eight",
    "9": "nine",
}

# Letters whose spoken names start with a vowel sound ("ess", "em", ...),
# overriding the written-vowel heuristic.
_AN_LETTERS = set("AEFHILMNORSX")
_A_WORDS = {"one"}  # "one" is spoken with an initial w sound


def spoken_name(class_name: str) -> str:
    """Display form of a class name: digits become words, letters stay."""
    return _DIGIT_WORDS.get(class_name, class_name)


def article(class_name: str) -> str:
    name = spoken_name(class_name)
    if len(class_name) == 1 and class_name.isalpha():
        return "an" if class_name.upper() in _AN_LETTERS else "a"
    if name in _A_WORDS:
        return "a"
    return "an" if name[:1].lower() in "aeiou" else "a"


def _property_list(props: Sequence[PropertyId]) -> str:
    phrases = [PROPERTY_PHRASES[p] for p in props]
    if len(phrases) == 1:
        return phrases[0]
    if len(phrases) == 2:
        return f"{phrases[0]} and {phrases[1]}"
    return ", ".join(phrases[:-1]) + f", and {phrases[-1]}"


def sentence(
    confidence: float, class_name: str, props: Sequence[PropertyId]
) -> str:
    """One rationale sentence for a ranked class."""
    head = (
        f"Confidence is {band(confidence).word} for interpreting this "
        f"character as {article(class_name)} {spoken_name(class_name)}"
    )
    if not props:
        return f"{head} without support from an explainable property."
    noun = "property" if len(props) == 1 else "properties"
    return f"{head} due to the {_property_list(props)} {noun}."


def render(report: DecisionReport, class_names: Sequence[str]) -> List[str]:
    """Rationale sentences in the report's ranked order."""
    return [
        sentence(d.confidence, class_names[d.class_id], d.contributing)
        for d in report.ranked
    ]


def render_records(
    report: DecisionReport, class_names: Sequence[str], sample_id
) -> dict:
    """Structured record embedding the exact sentence strings."""
    record = report.to_record(sample_id, class_names)
    for entry, text in zip(record["ranked"], render(report, class_names)):
        entry["sentence"] = text
    return record
