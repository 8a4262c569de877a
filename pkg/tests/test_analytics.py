"""Histogram, peak, threshold, and report assembly checks."""

import math
import random

import pytest

from gardenlens.analytics import (Histogram, ReportParams, build_report,
                                  detect_peaks, element_ratio, histogram,
                                  load_report, openness, threshold_scan)
from gardenlens.errors import (InsufficientSpread, KbLoadError, OutOfRangeScore,
                               OverlappingSets, SnapshotMismatch)
from gardenlens.vision import SegProfile


def profile(fractions, total=1600):
    return SegProfile(class_fractions=fractions, total_pixels=total)


# --- histogram -----------------------------------------------------------------

def test_all_in_one_bin():
    h = histogram([0.75, 0.72, 0.78])
    assert h.counts[7] == 3 and h.n == 3
    assert h.mode_bin() == 7


def test_upper_boundary_closed():
    assert histogram([1.0]).counts[9] == 1


def test_empty_scores_flagged_not_error():
    h = histogram([])
    assert h.empty and h.n == 0 and h.mode_bin() is None


def test_out_of_range_scores_rejected():
    with pytest.raises(OutOfRangeScore):
        histogram([1.5])


def test_histogram_matches_floor_binning_oracle():
    rng = random.Random(101)
    scores = [rng.random() for _ in range(500)]
    h = histogram(scores)
    oracle = [0] * 10
    for s in scores:
        oracle[min(int(s / 0.1), 9)] += 1
    assert list(h.counts) == oracle
    assert h.n == 500 == sum(h.counts)


def test_histogram_permutation_invariant():
    rng = random.Random(3)
    scores = [rng.random() for _ in range(200)]
    h1 = histogram(scores)
    rng.shuffle(scores)
    assert histogram(scores) == h1


# --- detect_peaks ---------------------------------------------------------------

def hist(counts):
    return Histogram(bin_width=0.1, counts=tuple(counts), n=sum(counts))


def test_synthetic_mixture_is_bimodal():
    report = detect_peaks(hist([0, 1, 3, 9, 3, 1, 2, 8, 3, 0]))
    assert report.modality == "bimodal"
    assert [b for b, _c in report.peaks] == [3, 7]


def test_single_spike_unimodal():
    report = detect_peaks(hist([0, 0, 0, 0, 0, 0, 0, 12, 0, 0]))
    assert report.modality == "unimodal"
    assert report.peaks == ((7, 12),)


def test_flat_histogram():
    assert detect_peaks(hist([4] * 10)).modality == "flat"
    assert detect_peaks(hist([0] * 10)).modality == "flat"


def test_close_peaks_collapse_to_unimodal():
    # two strict maxima only 2 bins apart with a shallow valley
    report = detect_peaks(hist([0, 0, 9, 8, 9, 0, 0, 0, 0, 0]), valley_frac=0.6)
    assert report.modality == "unimodal"


def test_three_peaks_multimodal():
    report = detect_peaks(hist([9, 0, 9, 0, 9, 0, 0, 0, 0, 0]))
    assert report.modality == "multimodal"


def test_mirrored_histogram_mirrors_peaks():
    rng = random.Random(77)
    for _ in range(200):
        counts = [rng.randint(0, 12) for _ in range(10)]
        forward = detect_peaks(hist(counts))
        backward = detect_peaks(hist(list(reversed(counts))))
        mirrored = sorted(9 - b for b, _c in forward.peaks)
        assert [b for b, _c in backward.peaks] == mirrored
        assert forward.modality == backward.modality


# --- threshold_scan ---------------------------------------------------------------

def test_step_function_split_at_point_two():
    points = [(p / 100, 0.7) for p in range(0, 20, 2)] + \
             [(p / 100, 0.2) for p in range(20, 40, 2)]
    report = threshold_scan(points)
    assert report.split == pytest.approx(0.2)
    assert report.gap == pytest.approx(0.5)
    assert report.mean_below == pytest.approx(0.7)


def test_constant_scores_zero_gap_smallest_split():
    points = [(p / 10, 0.4) for p in range(10)]
    report = threshold_scan(points)
    assert report.gap == 0.0
    # all gaps tie at zero; the first split with two points on each side wins
    assert report.split == 3 * 0.05


def test_insufficient_spread_raises():
    with pytest.raises(InsufficientSpread):
        threshold_scan([(0.5, 0.1), (0.5, 0.2), (0.5, 0.3)])


def exhaustive_split_oracle(points, grid=0.05):
    from fractions import Fraction

    best = None
    steps = round(1 / grid)
    for k in range(1, steps):
        split = k * grid
        below = [Fraction(s) for p, s in points if p < split]
        above = [Fraction(s) for p, s in points if p >= split]
        if len(below) < 2 or len(above) < 2:
            continue
        gap = sum(below) / len(below) - sum(above) / len(above)
        if best is None or abs(gap) > abs(best[1]):
            best = (split, gap)
    return best


def test_threshold_matches_exhaustive_search():
    rng = random.Random(202)
    for _ in range(200):
        n = rng.randint(8, 40)
        points = [(rng.random(), rng.random()) for _ in range(n)]
        oracle = exhaustive_split_oracle(points)
        if oracle is None:
            with pytest.raises(InsufficientSpread):
                threshold_scan(points)
            continue
        report = threshold_scan(points)
        assert report.split == oracle[0]
        assert report.gap == pytest.approx(float(oracle[1]), abs=1e-12)


def test_split_invariant_under_affine_score_maps():
    rng = random.Random(11)
    points = [(rng.random(), rng.random()) for _ in range(60)]
    base = threshold_scan(points)
    mapped = threshold_scan([(p, 0.25 * s + 0.1) for p, s in points])
    assert mapped.split == base.split


# --- openness and element ratios ------------------------------------------------------

def test_openness_halves_wall_fraction():
    assert openness(profile({0: 0.4, 2: 0.6}), 0) == 0.2
    assert openness(profile({2: 1.0}), 0) == 0.0


def test_openness_matches_direct_recomputation():
    rng = random.Random(6)
    for _ in range(100):
        wall = rng.random() * 0.6
        p = profile({0: wall, 2: 1 - wall})
        assert openness(p, 0) == p.class_fractions[0] / 2


def test_element_ratio_equal_shares():
    p = profile({4: 0.3, 1: 0.3, 2: 0.4})
    assert element_ratio(p, {4}, {1}) == 1.0


def test_element_ratio_undefined_when_denominator_empty():
    p = profile({4: 0.3, 2: 0.7})
    assert element_ratio(p, {4}, {1}) is None


def test_element_ratio_rejects_overlap_and_empty_sets():
    p = profile({4: 1.0})
    with pytest.raises(OverlappingSets):
        element_ratio(p, {4, 1}, {1})
    with pytest.raises(ValueError):
        element_ratio(p, set(), {1})


def test_element_ratio_matches_hand_computation():
    p = profile({4: 0.25, 9: 0.15, 1: 0.20, 25: 0.05, 2: 0.35})
    got = element_ratio(p, {4, 9}, {1, 25})
    assert got == pytest.approx((0.25 + 0.15) / (0.20 + 0.05), rel=1e-12)


# --- build_report -----------------------------------------------------------------

def test_empty_corpus_report(shipped_taxonomy):
    report = build_report([], [], {}, shipped_taxonomy, snapshot="sha256:empty")
    assert report.data["meta"]["n_records"] == 0
    assert report.data["nodes"] == {}
    assert report.data["global"]["thresholds"]["wall_openness"] is None


def test_one_image_per_water_subcategory(shipped_taxonomy):
    from gardenlens.inference import StubBackend
    from gardenlens.taxonomy import assign_all
    from gardenlens.vision import enrich_all
    from test_corpus import make_record

    hints = {
        "regular-water": "~lbl=fountain:0.66~seg=21:160,132:160,3:480,1:320,2:480",
        "natural-lake": "~lbl=lake/natural:0.7~seg=21:640,2:400,4:400,9:160",
        "natural-stream": "~lbl=creek:0.6~seg=21:240,34:240,4:640,2:320,9:160",
        "waterfront-architecture": "~lbl=pagoda:0.6~seg=1:400,21:320,2:400,4:480",
    }
    records = [make_record(f"w-{node}{hint}~sent=0.7", images=["img/x.jpg"])
               for node, hint in sorted(hints.items())]
    enriched, _ = enrich_all(records, StubBackend())
    rows = assign_all(enriched, shipped_taxonomy)
    scores = {r.id: _score_for(r) for r in records}
    report = build_report(enriched, rows, scores, shipped_taxonomy, snapshot="s")
    for node in hints:
        assert report.data["nodes"][node]["n"] == 1, node


def _score_for(record):
    from gardenlens.sentiment import SentimentScore

    return SentimentScore(fused=0.7, model=0.7, lexicon=0.7, disagreement=False)


def test_snapshot_mismatch_detected(shipped_taxonomy, golden_dir):
    from gardenlens.stages import read_assignments, read_enriched, read_scores

    enriched = read_enriched(golden_dir / "enriched.jsonl")
    assignments = read_assignments(golden_dir / "assignments.jsonl")
    scores = read_scores(golden_dir / "scores.jsonl")
    with pytest.raises(SnapshotMismatch):
        build_report(enriched.records, assignments.rows[:-1], scores.scores,
                     shipped_taxonomy)
    incomplete = dict(scores.scores)
    incomplete.pop(enriched.records[0].id)
    with pytest.raises(SnapshotMismatch):
        build_report(enriched.records, assignments.rows, incomplete, shipped_taxonomy)


def test_report_rebuild_is_byte_identical(shipped_taxonomy, golden_dir):
    from gardenlens.stages import read_assignments, read_enriched, read_scores

    enriched = read_enriched(golden_dir / "enriched.jsonl")
    assignments = read_assignments(golden_dir / "assignments.jsonl")
    scores = read_scores(golden_dir / "scores.jsonl")
    golden_bytes = (golden_dir / "report.json").read_bytes()
    meta = load_report(golden_dir / "report.json").data["meta"]
    report = build_report(enriched.records, assignments.rows, scores.scores,
                          shipped_taxonomy, params=ReportParams(),
                          snapshot=meta["snapshot"],
                          lexicon_checksum=meta["lexicon_checksum"])
    assert report.to_json().encode("utf-8") == golden_bytes


def test_report_validation_rejects_mass_violation(tmp_path, golden_dir):
    import json

    data = json.loads((golden_dir / "report.json").read_text())
    node = next(iter(data["nodes"]))
    data["nodes"][node]["histogram"]["counts"][0] += 1
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(data))
    with pytest.raises(KbLoadError):
        load_report(bad)


def test_custom_bin_width_keeps_the_default_view(shipped_taxonomy, golden_dir):
    from gardenlens.stages import read_assignments, read_enriched, read_scores

    enriched = read_enriched(golden_dir / "enriched.jsonl")
    assignments = read_assignments(golden_dir / "assignments.jsonl")
    scores = read_scores(golden_dir / "scores.jsonl")
    report = build_report(enriched.records, assignments.rows, scores.scores,
                          shipped_taxonomy, params=ReportParams(bin_width=0.05))
    node = report.data["nodes"]["waterfront-architecture"]
    assert node["histogram"]["bin_width"] == 0.1          # canonical view always present
    assert node["histogram_alt"]["bin_width"] == 0.05
    assert sum(node["histogram_alt"]["counts"]) == node["n"]
    assert len(node["histogram_alt"]["counts"]) == 20
