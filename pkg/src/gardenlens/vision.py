"""Per-image perception features.

Two features are derived per image: the proportion of each of the 150
segmentation element classes (`SegProfile`) and up to three scene
labels ranked by confidence (`TieredLabels`). Low-confidence labels are
pruned: the third tier is dropped below the weight threshold, and the
whole image is discarded when even the top label falls below it.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .corpus import CorpusStats, Record
from .errors import ClassOutOfRange, DataError, EmptyLabelList, EmptyMask

N_ELEMENT_CLASSES = 150
N_SCENE_LABELS = 365
TIER3_MIN_WEIGHT = 0.3
FRACTION_SUM_TOL = 1e-9


@dataclass(frozen=True)
class SegProfile:
    """Pixel fraction per element class; classes absent from the map are 0."""

    class_fractions: dict[int, float]
    total_pixels: int

    def fraction(self, class_id: int) -> float:
        return self.class_fractions.get(class_id, 0.0)

    def validate(self, n_classes: int = N_ELEMENT_CLASSES) -> None:
        if self.total_pixels <= 0:
            raise DataError("total_pixels must be positive")
        for class_id, frac in self.class_fractions.items():
            if not 0 <= class_id < n_classes:
                raise ClassOutOfRange(class_id, n_classes)
            if not 0.0 <= frac <= 1.0:
                raise DataError(f"fraction {frac} for class {class_id} outside [0, 1]")
        if abs(sum(self.class_fractions.values()) - 1.0) > FRACTION_SUM_TOL:
            raise DataError("class fractions do not sum to 1")

    def to_json_dict(self) -> dict:
        return {
            "fractions": {str(c): f for c, f in sorted(self.class_fractions.items())},
            "total_pixels": self.total_pixels,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "SegProfile":
        return cls(
            class_fractions={int(c): float(f) for c, f in d["fractions"].items()},
            total_pixels=int(d["total_pixels"]),
        )


def profile_from_mask(mask: Sequence[Sequence[int]] | np.ndarray,
                      n_classes: int = N_ELEMENT_CLASSES) -> SegProfile:
    """Count cells per class and normalize by the total cell count."""
    arr = np.asarray(mask)
    if arr.size == 0:
        raise EmptyMask("mask has no cells")
    if arr.ndim != 2:
        raise DataError(f"mask must be 2-D, got {arr.ndim}-D")
    if not np.issubdtype(arr.dtype, np.integer):
        raise DataError(f"mask cells must be integers, got dtype {arr.dtype}")
    low, high = int(arr.min()), int(arr.max())
    if low < 0:
        raise ClassOutOfRange(low, n_classes)
    if high >= n_classes:
        raise ClassOutOfRange(high, n_classes)
    counts = np.bincount(arr.ravel(), minlength=n_classes)
    total = int(arr.size)
    fractions = {int(c): int(counts[c]) / total for c in np.flatnonzero(counts)}
    return SegProfile(class_fractions=fractions, total_pixels=total)


def decode_rle(rle: Sequence[Sequence[int]], width: int, height: int,
               n_classes: int = N_ELEMENT_CLASSES) -> np.ndarray:
    """Expand row-major [class, run] pairs into a (height, width) mask."""
    if width <= 0 or height <= 0:
        raise DataError(f"bad mask dimensions {width}x{height}")
    flat = np.empty(width * height, dtype=np.int64)
    pos = 0
    for pair in rle:
        class_id, run = int(pair[0]), int(pair[1])
        if run <= 0:
            raise DataError(f"non-positive run length {run}")
        if not 0 <= class_id < n_classes:
            raise ClassOutOfRange(class_id, n_classes)
        if pos + run > flat.size:
            raise DataError("run-length data overflows the mask")
        flat[pos:pos + run] = class_id
        pos += run
    if pos != flat.size:
        raise DataError(f"run-length data covers {pos} of {flat.size} cells")
    return flat.reshape(height, width)


def encode_rle(mask: np.ndarray) -> list[list[int]]:
    """Row-major run-length pairs with adjacent equal classes merged."""
    flat = np.asarray(mask).ravel()
    runs: list[list[int]] = []
    for value in flat.tolist():
        if runs and runs[-1][0] == value:
            runs[-1][1] += 1
        else:
            runs.append([value, 1])
    return runs


def mask_from_indexed_image(source, n_classes: int = N_ELEMENT_CLASSES) -> np.ndarray:
    """Decode an indexed-color (palette or grayscale) image into a class-id grid.

    The alternative mask interchange format: pixel values are class ids.
    Accepts a path or a bytes buffer; equivalent RLE decodes to the same
    grid.
    """
    import io

    from PIL import Image

    if isinstance(source, (bytes, bytearray)):
        source = io.BytesIO(bytes(source))
    with Image.open(source) as image:
        if image.mode not in ("P", "L", "I", "I;16"):
            raise DataError(f"mask image must be indexed or grayscale, got mode {image.mode!r}")
        mask = np.asarray(image.convert("I"), dtype=np.int64)
    if mask.size == 0:
        raise EmptyMask("mask image has no pixels")
    high = int(mask.max())
    if high >= n_classes:
        raise ClassOutOfRange(high, n_classes)
    return mask


@dataclass(frozen=True)
class TieredLabels:
    """Up to three (label, weight) scene classifications, weights descending."""

    tiers: tuple[tuple[str, float], ...]

    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.tiers)

    def validate(self) -> None:
        if not 1 <= len(self.tiers) <= 3:
            raise DataError(f"expected 1..3 tiers, got {len(self.tiers)}")
        weights = [w for _, w in self.tiers]
        if any(w2 > w1 for w1, w2 in zip(weights, weights[1:])):
            raise DataError("tier weights must be non-increasing")
        if sum(weights) > 1.0 + FRACTION_SUM_TOL:
            raise DataError("tier weights sum above 1")

    def to_json_list(self) -> list[list]:
        return [[label, weight] for label, weight in self.tiers]

    @classmethod
    def from_json_list(cls, items: list) -> "TieredLabels":
        return cls(tuple((str(l), float(w)) for l, w in items))


def tier_labels(raw: Iterable[tuple[str, float]],
                tier3_min_weight: float = TIER3_MIN_WEIGHT) -> TieredLabels | None:
    """Rank labels by weight into tiers; None means discard the image.

    The top three weights become tiers one to three. A third tier below
    the threshold is dropped; if even the top weight is below it, the
    image is unrecognizable and the whole classification is discarded.
    A weight exactly at the threshold is kept.
    """
    candidates = list(raw)
    if not candidates:
        raise EmptyLabelList("no labels to tier")
    for label, weight in candidates:
        if not 0.0 <= weight <= 1.0:
            raise DataError(f"label weight {weight} for {label!r} outside [0, 1]")
    ordered = sorted(candidates, key=lambda lw: -lw[1])  # stable: ties keep input order
    top = ordered[:3]
    if top[0][1] < tier3_min_weight:
        return None
    if len(top) == 3 and top[2][1] < tier3_min_weight:
        top = top[:2]
    return TieredLabels(tuple((str(label), float(weight)) for label, weight in top))


def normalize_keywords(keywords: Iterable[str]) -> tuple[str, ...]:
    """Lowercase and deduplicate, preserving first-seen order."""
    seen: list[str] = []
    for kw in keywords:
        k = str(kw).strip().lower()
        if k and k not in seen:
            seen.append(k)
    return tuple(seen)


# --- enrichment -----------------------------------------------------------------

@dataclass
class EnrichedImage:
    ref: str
    profile: SegProfile
    tiers: TieredLabels
    keywords: tuple[str, ...]

    def to_json_dict(self) -> dict:
        return {
            "ref": self.ref,
            "profile": self.profile.to_json_dict(),
            "tiers": self.tiers.to_json_list(),
            "keywords": list(self.keywords),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "EnrichedImage":
        return cls(
            ref=d["ref"],
            profile=SegProfile.from_json_dict(d["profile"]),
            tiers=TieredLabels.from_json_list(d["tiers"]),
            keywords=tuple(d.get("keywords") or ()),
        )


@dataclass
class EnrichedRecord:
    record: Record
    images: list[EnrichedImage]

    @property
    def id(self) -> str:
        return self.record.id

    def to_json_dict(self) -> dict:
        return {
            "record": self.record.to_json_dict(),
            "images": [img.to_json_dict() for img in self.images],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "EnrichedRecord":
        return cls(
            record=Record.from_json_dict(d["record"]),
            images=[EnrichedImage.from_json_dict(i) for i in d["images"]],
        )


def _image_request_id(record: Record, index: int) -> str:
    # single-image records reuse the record id so stub outputs stay a pure
    # function of it; extra images get a stable per-index suffix
    if len(record.images) == 1:
        return record.id
    return f"{record.id}#{index}"


def enrich(record: Record, backend, tier3_min_weight: float = TIER3_MIN_WEIGHT) -> EnrichedRecord | None:
    """Attach per-image perception features; None when nothing survives."""
    enriched_images: list[EnrichedImage] = []
    for index, ref in enumerate(record.images):
        request_id = _image_request_id(record, index)
        seg = backend.segment(request_id, ref)
        mask = decode_rle(seg.rle, seg.width, seg.height)
        profile = profile_from_mask(mask)
        labels, keywords = backend.classify(request_id, ref)
        tiers = tier_labels(labels, tier3_min_weight)
        if tiers is None:
            continue
        enriched_images.append(
            EnrichedImage(ref=ref, profile=profile, tiers=tiers,
                          keywords=normalize_keywords(keywords)))
    if not enriched_images:
        return None
    return EnrichedRecord(record=record, images=enriched_images)


def enrich_all(records: Iterable[Record], backend, tier3_min_weight: float = TIER3_MIN_WEIGHT,
               jobs: int = 1) -> tuple[list[EnrichedRecord], CorpusStats]:
    """Enrich records, dropping those with no usable image.

    Output is ordered by record id regardless of `jobs`, so parallel
    runs are byte-identical to serial ones.
    """
    records = list(records)
    stats = CorpusStats()

    def work(record: Record) -> EnrichedRecord | None:
        if not record.images:
            return None
        return enrich(record, backend, tier3_min_weight)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(work, records))
    else:
        results = [work(r) for r in records]

    enriched: list[EnrichedRecord] = []
    for record, result in zip(records, results):
        if result is None:
            stats.drop("no_images" if not record.images else "low_confidence_image")
        else:
            stats.keep()
            enriched.append(result)
    stats.check()
    enriched.sort(key=lambda e: e.id)
    return enriched, stats
