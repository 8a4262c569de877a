"""Distribution statistics over fused scores and element profiles.

Everything here feeds the analysis report, which doubles as the
knowledge base the discussion agents query. Outputs are deterministic:
fixed binning, exhaustive grid searches with smallest-split tie-breaks,
and canonical JSON with floats at 9 significant digits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

from .errors import (InsufficientSpread, KbLoadError, OutOfRangeScore,
                     OverlappingSets, SnapshotMismatch)
from .jsonutil import dumps_pretty, round_floats
from .sentiment import SentimentScore
from .taxonomy import UNCLASSIFIED, ImageAssignment, Taxonomy
from .vision import EnrichedRecord, SegProfile

REPORT_SCHEMA = "scene-opinion-report/1"

DEFAULT_BIN_WIDTH = 0.1
DEFAULT_MIN_PEAK_FRAC = 0.5
DEFAULT_VALLEY_FRAC = 0.6
DEFAULT_MIN_SEPARATION_BINS = 2
DEFAULT_THRESHOLD_GRID = 0.05

WALL_CLASS = 0
PLANT_CLASSES = (4, 9, 17, 66, 72)      # tree, grass, plant, flower, palm
BUILDING_CLASSES = (1, 25, 48, 79, 84)  # building, house, skyscraper, hut, tower


@dataclass(frozen=True)
class Histogram:
    """Counts over [0, 1] in fixed-width bins; the last bin is closed."""

    bin_width: float
    counts: tuple[int, ...]
    n: int

    @property
    def empty(self) -> bool:
        return self.n == 0

    def mode_bin(self) -> int | None:
        if self.empty:
            return None
        return max(range(len(self.counts)), key=lambda k: (self.counts[k], -k))

    def validate(self) -> None:
        if sum(self.counts) != self.n:
            raise KbLoadError(f"histogram counts sum to {sum(self.counts)}, n is {self.n}")
        if any(c < 0 for c in self.counts):
            raise KbLoadError("negative histogram count")
        if len(self.counts) != _bin_count(self.bin_width):
            raise KbLoadError(f"{len(self.counts)} bins inconsistent with width {self.bin_width}")

    def to_json_dict(self) -> dict:
        return {"bin_width": self.bin_width, "counts": list(self.counts), "n": self.n}

    @classmethod
    def from_json_dict(cls, d: dict) -> "Histogram":
        return cls(bin_width=float(d["bin_width"]), counts=tuple(int(c) for c in d["counts"]),
                   n=int(d["n"]))


def _bin_count(bin_width: float) -> int:
    n_bins = round(1.0 / bin_width)
    if n_bins < 1 or abs(n_bins * bin_width - 1.0) > 1e-9:
        raise ValueError(f"bin width {bin_width} does not evenly divide [0, 1]")
    return n_bins


def histogram(scores: Iterable[float], bin_width: float = DEFAULT_BIN_WIDTH) -> Histogram:
    """Bin scores into [k*w, (k+1)*w); 1.0 lands in the last bin."""
    n_bins = _bin_count(bin_width)
    counts = [0] * n_bins
    n = 0
    for score in scores:
        if not 0.0 <= score <= 1.0:
            raise OutOfRangeScore(f"score {score} outside [0, 1]")
        counts[min(int(score / bin_width), n_bins - 1)] += 1
        n += 1
    return Histogram(bin_width=bin_width, counts=tuple(counts), n=n)


@dataclass(frozen=True)
class PeakReport:
    peaks: tuple[tuple[int, int], ...]  # (bin index, count), sorted by bin
    modality: str  # flat | unimodal | bimodal | multimodal

    def to_json_dict(self) -> dict:
        return {"peaks": [list(p) for p in self.peaks], "modality": self.modality}

    @classmethod
    def from_json_dict(cls, d: dict) -> "PeakReport":
        return cls(peaks=tuple((int(b), int(c)) for b, c in d["peaks"]), modality=d["modality"])


def detect_peaks(h: Histogram,
                 min_peak_frac: float = DEFAULT_MIN_PEAK_FRAC,
                 valley_frac: float = DEFAULT_VALLEY_FRAC,
                 min_separation_bins: int = DEFAULT_MIN_SEPARATION_BINS) -> PeakReport:
    """Strict local maxima above a height floor, then a modality verdict.

    Two peaks count as bimodal only when they are far enough apart and
    the valley between them dips below `valley_frac` of the smaller
    peak; otherwise they are one broad mode.
    """
    counts = h.counts
    top = max(counts) if counts else 0
    if top == 0:
        return PeakReport(peaks=(), modality="flat")
    last = len(counts) - 1
    floor = min_peak_frac * top
    peaks = []
    for k, count in enumerate(counts):
        if count < floor:
            continue
        left_ok = k == 0 or counts[k - 1] < count
        right_ok = k == last or counts[k + 1] < count
        if left_ok and right_ok:
            peaks.append((k, count))

    if not peaks:
        modality = "flat"
    elif len(peaks) == 1:
        modality = "unimodal"
    elif len(peaks) == 2:
        (b1, c1), (b2, c2) = peaks
        separated = b2 - b1 >= min_separation_bins
        valley = min(counts[b1 + 1:b2]) if b2 - b1 > 1 else min(c1, c2)
        if separated and valley <= valley_frac * min(c1, c2):
            modality = "bimodal"
        else:
            modality = "unimodal"
    else:
        modality = "multimodal"
    return PeakReport(peaks=tuple(peaks), modality=modality)


@dataclass(frozen=True)
class ThresholdReport:
    split: float
    mean_below: float
    mean_above: float
    gap: float  # signed: mean_below - mean_above
    n_below: int
    n_above: int

    def to_json_dict(self) -> dict:
        return {"split": self.split, "mean_below": self.mean_below,
                "mean_above": self.mean_above, "gap": self.gap,
                "n_below": self.n_below, "n_above": self.n_above}


def threshold_scan(points: Sequence[tuple[float, float]],
                   grid: float = DEFAULT_THRESHOLD_GRID) -> ThresholdReport:
    """Grid split of the proportion axis maximizing |mean below - mean above|.

    Only splits with at least two points on each side are candidates.
    The argmax runs on exact rationals so equal gaps are exact ties,
    which break toward the smallest split (constant scores therefore
    land on the first viable split). Invariant under affine maps of
    the scores.
    """
    steps = round(1.0 / grid)
    if steps < 2 or abs(steps * grid - 1.0) > 1e-9:
        raise ValueError(f"grid {grid} does not evenly divide [0, 1]")
    for proportion, _ in points:
        if not 0.0 <= proportion <= 1.0:
            raise OutOfRangeScore(f"proportion {proportion} outside [0, 1]")

    best: ThresholdReport | None = None
    best_gap: Fraction | None = None
    for k in range(1, steps):
        split = k * grid
        below = [Fraction(score) for proportion, score in points if proportion < split]
        above = [Fraction(score) for proportion, score in points if proportion >= split]
        if len(below) < 2 or len(above) < 2:
            continue
        mean_below = sum(below) / len(below)
        mean_above = sum(above) / len(above)
        gap = mean_below - mean_above
        if best_gap is None or abs(gap) > abs(best_gap):
            best_gap = gap
            best = ThresholdReport(split=split, mean_below=float(mean_below),
                                   mean_above=float(mean_above),
                                   gap=float(mean_below) - float(mean_above),
                                   n_below=len(below), n_above=len(above))
    if best is None:
        raise InsufficientSpread("no grid split has two points on each side")
    return best


def openness(profile: SegProfile, wall_class: int = WALL_CLASS) -> float:
    """Halved wall fraction: walls line both sides of a space, so the raw
    pixel share double-counts the enclosure."""
    return profile.fraction(wall_class) / 2.0


def element_ratio(profile: SegProfile, num_classes: Iterable[int],
                  den_classes: Iterable[int]) -> float | None:
    """Summed fraction ratio between two disjoint class sets; None when the
    denominator has no pixels."""
    num_set, den_set = set(num_classes), set(den_classes)
    if not num_set or not den_set:
        raise ValueError("class sets must be non-empty")
    if num_set & den_set:
        raise OverlappingSets(f"classes {sorted(num_set & den_set)} appear on both sides")
    numerator = math.fsum(profile.fraction(c) for c in sorted(num_set))
    denominator = math.fsum(profile.fraction(c) for c in sorted(den_set))
    if denominator == 0.0:
        return None
    return numerator / denominator


# --- report assembly ---------------------------------------------------------------

@dataclass(frozen=True)
class ReportParams:
    bin_width: float = DEFAULT_BIN_WIDTH
    min_peak_frac: float = DEFAULT_MIN_PEAK_FRAC
    valley_frac: float = DEFAULT_VALLEY_FRAC
    min_separation_bins: int = DEFAULT_MIN_SEPARATION_BINS
    threshold_grid: float = DEFAULT_THRESHOLD_GRID
    wall_class: int = WALL_CLASS
    plant_classes: tuple[int, ...] = PLANT_CLASSES
    building_classes: tuple[int, ...] = BUILDING_CLASSES
    top_keywords: int = 10

    def to_json_dict(self) -> dict:
        return {
            "bin_width": self.bin_width,
            "min_peak_frac": self.min_peak_frac,
            "valley_frac": self.valley_frac,
            "min_separation_bins": self.min_separation_bins,
            "threshold_grid": self.threshold_grid,
            "wall_class": self.wall_class,
            "plant_classes": list(self.plant_classes),
            "building_classes": list(self.building_classes),
            "top_keywords": self.top_keywords,
        }


@dataclass
class AnalysisReport:
    """The serialized analysis output; also the agents' knowledge base."""

    data: dict

    def to_json(self) -> str:
        return dumps_pretty(round_floats(self.data))

    def save(self, path: Path | str) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    def node(self, node_id: str) -> dict | None:
        return self.data["nodes"].get(node_id)

    def validate(self) -> None:
        for key in ("meta", "nodes", "global"):
            if key not in self.data:
                raise KbLoadError(f"report is missing {key!r}")
        if self.data["meta"].get("schema") != REPORT_SCHEMA:
            raise KbLoadError(f"unknown report schema {self.data['meta'].get('schema')!r}")
        for node_id, entry in self.data["nodes"].items():
            try:
                hist = Histogram.from_json_dict(entry["histogram"])
                hist.validate()
                if "histogram_alt" in entry:
                    alt = Histogram.from_json_dict(entry["histogram_alt"])
                    alt.validate()
                    if alt.n != hist.n:
                        raise KbLoadError(f"node {node_id!r} alt histogram mass differs")
            except (KeyError, TypeError, ValueError) as exc:
                raise KbLoadError(f"node {node_id!r} has a bad histogram: {exc}")
            if hist.n != entry.get("n"):
                raise KbLoadError(f"node {node_id!r} histogram mass {hist.n} != n {entry.get('n')}")


def load_report(path: Path | str) -> AnalysisReport:
    import json

    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise KbLoadError(f"cannot load report {path}: {exc}")
    report = AnalysisReport(data=data)
    report.validate()
    return report


def write_csv_views(report: "AnalysisReport", out_dir: Path | str) -> None:
    """Flat CSV views of the report for plotting tools."""
    import csv

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    nodes = report.data["nodes"]

    with (out_dir / "nodes.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["node", "level", "name", "n", "mean_score", "mode_bin", "modality"])
        for node_id, entry in sorted(nodes.items()):
            hist = Histogram.from_json_dict(entry["histogram"])
            writer.writerow([node_id, entry["level"], entry["name"], entry["n"],
                             entry["mean_score"], hist.mode_bin(), entry["peaks"]["modality"]])

    with (out_dir / "histograms.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["node", "bin", "bin_low", "count"])
        for node_id, entry in sorted(nodes.items()):
            hist = entry["histogram"]
            for index, count in enumerate(hist["counts"]):
                writer.writerow([node_id, index, round(index * hist["bin_width"], 6), count])


@dataclass
class _NodeBucket:
    scores: list[float] = field(default_factory=list)
    profiles: list[SegProfile] = field(default_factory=list)
    keyword_counts: dict[str, int] = field(default_factory=dict)


def _aggregate_profile(profiles: list[SegProfile]) -> dict[str, float]:
    sums: dict[int, list[float]] = {}
    for profile in profiles:
        for class_id, fraction in profile.class_fractions.items():
            sums.setdefault(class_id, []).append(fraction)
    n = len(profiles)
    return {str(c): math.fsum(sorted(values)) / n for c, values in sorted(sums.items())}


def build_report(
    enriched: Sequence[EnrichedRecord],
    assignments: Sequence[ImageAssignment],
    scores: dict[str, SentimentScore],
    taxonomy: Taxonomy,
    params: ReportParams = ReportParams(),
    snapshot: str = "",
    lexicon_checksum: str = "",
) -> AnalysisReport:
    """Assemble per-node statistics and global analyses into one report.

    All inputs must describe the same corpus snapshot: every enriched
    record needs a score, and assignment rows must line up one-to-one
    with enriched images.
    """
    image_index = [(record, image) for record in enriched for image in record.images]
    if len(image_index) != len(assignments):
        raise SnapshotMismatch(
            f"{len(assignments)} assignment rows for {len(image_index)} enriched images")
    for (record, image), row in zip(image_index, assignments):
        if row.record_id != record.id or row.image_ref != image.ref:
            raise SnapshotMismatch(
                f"assignment row ({row.record_id}, {row.image_ref}) does not match "
                f"enriched image ({record.id}, {image.ref})")
    missing = [record.id for record in enriched if record.id not in scores]
    if missing:
        raise SnapshotMismatch(f"no sentiment scores for records: {missing[:5]}")

    buckets: dict[str, _NodeBucket] = {}
    unclassified = {"major": 0, "medium": 0, "sub": 0}
    ratio_values: list[float] = []
    ratio_undefined = 0
    threshold_points: list[tuple[float, float]] = []

    for (record, image), row in zip(image_index, assignments):
        fused = scores[record.id].fused
        for level in ("major", "medium", "sub"):
            node_id = getattr(row.assignment, level)
            if node_id == UNCLASSIFIED:
                unclassified[level] += 1
                continue
            bucket = buckets.setdefault(node_id, _NodeBucket())
            bucket.scores.append(fused)
            bucket.profiles.append(image.profile)
            for keyword in image.keywords:
                bucket.keyword_counts[keyword] = bucket.keyword_counts.get(keyword, 0) + 1
        ratio = element_ratio(image.profile, params.plant_classes, params.building_classes)
        if ratio is None:
            ratio_undefined += 1
        else:
            ratio_values.append(ratio)
        threshold_points.append((openness(image.profile, params.wall_class), fused))

    nodes_out: dict[str, dict] = {}
    for node_id, bucket in sorted(buckets.items()):
        node = taxonomy.nodes[node_id]
        # the 0.1 view is the report's fixed granularity; a custom bin
        # width only adds an exploratory view beside it
        hist = histogram(bucket.scores, DEFAULT_BIN_WIDTH)
        peaks = detect_peaks(hist, params.min_peak_frac, params.valley_frac,
                             params.min_separation_bins)
        top = sorted(bucket.keyword_counts.items(), key=lambda kv: (-kv[1], kv[0]))
        entry = {
            "level": node.level,
            "name": node.name,
            "n": len(bucket.scores),
            "mean_score": math.fsum(sorted(bucket.scores)) / len(bucket.scores),
            "histogram": hist.to_json_dict(),
            "peaks": peaks.to_json_dict(),
            "seg": _aggregate_profile(bucket.profiles),
            "keywords": [[kw, count] for kw, count in top[:params.top_keywords]],
        }
        if params.bin_width != DEFAULT_BIN_WIDTH:
            entry["histogram_alt"] = histogram(bucket.scores, params.bin_width).to_json_dict()
        nodes_out[node_id] = entry

    try:
        wall_threshold = threshold_scan(threshold_points, params.threshold_grid).to_json_dict()
    except (InsufficientSpread, ValueError):
        wall_threshold = None

    ratios = {
        "plants_to_buildings": {
            "n": len(ratio_values),
            "n_undefined": ratio_undefined,
            "mean": math.fsum(sorted(ratio_values)) / len(ratio_values) if ratio_values else None,
            "min": min(ratio_values) if ratio_values else None,
            "max": max(ratio_values) if ratio_values else None,
        }
    }

    data = {
        "meta": {
            "schema": REPORT_SCHEMA,
            "snapshot": snapshot,
            "taxonomy_version": taxonomy.version,
            "taxonomy_checksum": taxonomy.checksum,
            "lexicon_checksum": lexicon_checksum,
            "n_records": len(enriched),
            "n_images": len(image_index),
            "params": params.to_json_dict(),
        },
        "nodes": nodes_out,
        "global": {
            "element_ratios": ratios,
            "thresholds": {"wall_openness": wall_threshold},
            "unclassified": unclassified,
        },
    }
    report = AnalysisReport(data=data)
    report.validate()
    return report
