"""Text polarity scoring: valence lexicon walk fused with a model score.

The lexicon scorer walks tokens, averaging the valence of matched
entries after negation flips and intensifier scaling inside a
three-token lookback window, then maps the mean from [-1, 1] onto
[0, 1]. The fused score blends the model prediction with the lexicon
score and flags large disagreements between the two routes.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from importlib import resources
from typing import Iterable

from .errors import EmptyText, InsufficientData, OutOfRangeScore, SchemaError

NEGATION_WINDOW = 3
DISAGREEMENT_GAP = 0.4
NEUTRAL_SCORE = 0.5
DEFAULT_MODEL_WEIGHT = 0.5
COMMENT_SEPARATOR = "\n"

_TOKEN_RE = re.compile(r"[a-z][a-z']*")


@dataclass(frozen=True)
class Lexicon:
    entries: dict[str, float]
    negators: frozenset[str]
    intensifiers: dict[str, float]

    @classmethod
    def parse(cls, text: str) -> "Lexicon":
        """Parse the token<TAB>valence format with [negators]/[intensifiers] sections."""
        entries: dict[str, float] = {}
        negators: set[str] = set()
        intensifiers: dict[str, float] = {}
        section = "entries"
        for line_no, raw_line in enumerate(text.splitlines(), start=1):
            line = raw_line.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("[") and line.endswith("]"):
                section = line[1:-1].strip()
                if section not in ("entries", "negators", "intensifiers"):
                    raise SchemaError(f"line {line_no}: unknown lexicon section [{section}]")
                continue
            if section == "negators":
                negators.add(line.lower())
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise SchemaError(f"line {line_no}: expected token<TAB>value")
            token, value_part = parts[0].strip().lower(), parts[1].strip()
            try:
                value = float(value_part)
            except ValueError:
                raise SchemaError(f"line {line_no}: bad number {value_part!r}")
            if section == "entries":
                if not -1.0 <= value <= 1.0:
                    raise SchemaError(f"line {line_no}: valence {value} outside [-1, 1]")
                entries[token] = value
            else:
                if value <= 0:
                    raise SchemaError(f"line {line_no}: multiplier {value} must be positive")
                intensifiers[token] = value
        return cls(entries=entries, negators=frozenset(negators), intensifiers=intensifiers)

    @classmethod
    def load(cls, path) -> "Lexicon":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.parse(fh.read())

    def checksum_source(self) -> str:
        lines = [f"{t}\t{v}" for t, v in sorted(self.entries.items())]
        lines += sorted(self.negators)
        lines += [f"{t}\t{v}" for t, v in sorted(self.intensifiers.items())]
        return "\n".join(lines)


def load_default_lexicon() -> Lexicon:
    text = resources.files("gardenlens").joinpath("data").joinpath("lexicon.txt").read_text(encoding="utf-8")
    return Lexicon.parse(text)


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def lexicon_score(text: str, lexicon: Lexicon) -> float:
    """Mean adjusted valence of matched tokens, mapped into [0, 1].

    Negators within the three preceding tokens flip the sign;
    intensifiers in the same window multiply the magnitude. Tokens
    absent from the lexicon contribute nothing; no matches at all is
    neutral (0.5).
    """
    if not text or not text.strip():
        raise EmptyText("cannot score empty text")
    tokens = tokenize(text)
    valences: list[float] = []
    for index, token in enumerate(tokens):
        valence = lexicon.entries.get(token)
        if valence is None:
            continue
        window = tokens[max(0, index - NEGATION_WINDOW):index]
        multiplier = 1.0
        negated = False
        for prior in window:
            if prior in lexicon.negators:
                negated = True
            factor = lexicon.intensifiers.get(prior)
            if factor is not None:
                multiplier *= factor
        valence *= multiplier
        if negated:
            valence = -valence
        valences.append(max(-1.0, min(1.0, valence)))
    if not valences:
        return NEUTRAL_SCORE
    mean = math.fsum(sorted(valences)) / len(valences)
    return (mean + 1.0) / 2.0


@dataclass(frozen=True)
class SentimentScore:
    fused: float
    model: float | None
    lexicon: float
    disagreement: bool

    def to_json_dict(self) -> dict:
        return {
            "fused": self.fused,
            "model": self.model,
            "lexicon": self.lexicon,
            "disagreement": self.disagreement,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "SentimentScore":
        return cls(fused=d["fused"], model=d.get("model"),
                   lexicon=d["lexicon"], disagreement=d["disagreement"])


def _check_unit_interval(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise OutOfRangeScore(f"{name} {value} outside [0, 1]")


def fuse(model: float | None, lexicon: float,
         w_model: float = DEFAULT_MODEL_WEIGHT) -> SentimentScore:
    """Weighted blend of model and lexicon scores.

    Written as lexicon + w * (model - lexicon) so that equal inputs are
    an exact fixed point for any weight. Without a model score the
    lexicon value passes through unchanged.
    """
    _check_unit_interval("lexicon score", lexicon)
    _check_unit_interval("w_model", w_model)
    if model is None:
        return SentimentScore(fused=lexicon, model=None, lexicon=lexicon, disagreement=False)
    _check_unit_interval("model score", model)
    fused = lexicon + w_model * (model - lexicon)
    disagreement = abs(model - lexicon) > DISAGREEMENT_GAP
    return SentimentScore(fused=fused, model=model, lexicon=lexicon, disagreement=disagreement)


def score_text(text: str, lexicon: Lexicon, model: float | None,
               w_model: float = DEFAULT_MODEL_WEIGHT) -> SentimentScore:
    return fuse(model, lexicon_score(text, lexicon), w_model)


def record_text(record, include_comments: bool = True) -> str:
    """The text a record is scored on; comments are appended by default."""
    if include_comments and record.comments:
        return record.text + COMMENT_SEPARATOR + COMMENT_SEPARATOR.join(record.comments)
    return record.text


@dataclass(frozen=True)
class CalibrationCurve:
    per_star: dict[int, float]
    counts: dict[int, int]
    monotone: bool | None  # None when fewer than two star levels are present

    def to_json_dict(self) -> dict:
        return {
            "per_star": {str(k): v for k, v in sorted(self.per_star.items())},
            "counts": {str(k): v for k, v in sorted(self.counts.items())},
            "monotone": self.monotone,
        }


def calibrate_from_stars(pairs: Iterable[tuple[float, int]]) -> CalibrationCurve:
    """Per-star mean fused score plus a monotonicity health check.

    This is a pipeline check, not a trained model: star ratings act as
    a supervision signal, and a sane pipeline should produce means that
    do not decrease as stars increase.
    """
    groups: dict[int, list[float]] = {}
    for score, stars in pairs:
        _check_unit_interval("score", score)
        stars = int(stars)
        if not 1 <= stars <= 5:
            raise OutOfRangeScore(f"stars {stars} outside [1, 5]")
        groups.setdefault(stars, []).append(score)
    if not groups:
        raise InsufficientData("no (score, stars) pairs")
    # fsum over sorted values keeps the means order-invariant
    per_star = {stars: math.fsum(sorted(scores)) / len(scores) for stars, scores in groups.items()}
    counts = {stars: len(scores) for stars, scores in groups.items()}
    if len(groups) < 2:
        monotone = None
    else:
        ordered = [per_star[s] for s in sorted(per_star)]
        monotone = all(a <= b for a, b in zip(ordered, ordered[1:]))
    return CalibrationCurve(per_star=per_star, counts=counts, monotone=monotone)
