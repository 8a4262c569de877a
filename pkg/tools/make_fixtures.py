#!/usr/bin/env python3
"""Regenerate the shipped fixture corpus under fixtures/.

The 30-record corpus is authored data: every record id carries stub
hints (labels, keywords, segmentation runs, model sentiment) so the
deterministic stub backend reproduces the distribution shapes the
acceptance checks look for (per-node histogram modes, the bimodal
closed-window split, openness spread). This script writes the raw
per-source dumps, ingests them through the real CLI, then runs the
pipeline in-process and asserts every intended property before
declaring the fixtures good.

Run from the repo root:  python tools/make_fixtures.py
"""

from __future__ import annotations

import json
import shutil
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from gardenlens import cli  # noqa: E402
from gardenlens.analytics import detect_peaks, histogram  # noqa: E402
from gardenlens.corpus import filter_text  # noqa: E402
from gardenlens.inference import StubBackend, scene_labels  # noqa: E402
from gardenlens.sentiment import (load_default_lexicon, lexicon_score,  # noqa: E402
                                  record_text, score_text)
from gardenlens.store import RecordStore  # noqa: E402
from gardenlens.taxonomy import assign_all, load_default_taxonomy  # noqa: E402
from gardenlens.vision import enrich_all  # noqa: E402

FIXTURES = REPO / "fixtures"
DUMPS = FIXTURES / "dumps"
CORPUS = FIXTURES / "corpus"

# (source, raw_id, date, title, body, comments, rating, likes, locale, geo,
#  label_hint, kw_hint, seg_hint, target_fused, expected_sub)
SPECS = [
    # waterfront architecture: positive, mode bin 7 (one 0.65 in bin 6)
    ("flickr", "51230001", "2019-06-14", "Lakeside pagoda at dusk",
     "Golden hour at the lakeside pagoda, absolutely beautiful reflections across the still water tonight.",
     ["Wonderful colours in this one."], None, 214, "Portland, USA", (45.519, -122.671),
     "pagoda:0.62,formal_garden:0.21", "man-made+water_reflection+open_area",
     "1:400,21:320,2:400,4:480", 0.75, "waterfront-architecture"),
    ("twitter", "99410002", "2021-04-03", None,
     "The waterside teahouse is stunning, such a peaceful spot to watch the carp at dusk.",
     [], None, 87, "Sydney", None,
     "boathouse:0.58,pier:0.22", "man-made+water_reflection",
     "1:352,21:256,2:480,4:512", 0.78, "waterfront-architecture"),
    ("instagram", "77120003", "2020-09-21", None,
     "Boathouse views today. The pier and the old hall are gorgeous in the afternoon light.",
     [], None, 503, None, (49.2796, -123.1045),
     "boathouse:0.55,pier:0.24", "man-made+open_area",
     "1:384,21:288,2:448,4:480", 0.72, "waterfront-architecture"),
    ("tripadvisor", "41550004", "2018-08-09", "Shoreline walk worth the detour",
     "Lovely walk along the shore. The waterfront hall is impressive and the whole cove feels serene.",
     ["Agreed, the morning light is best."], 5, 12, "London, UK", None,
     "pagoda:0.59,pond:0.2", "man-made+water_reflection+natural_light",
     "1:400,21:272,2:368,4:560", 0.65, "waterfront-architecture"),

    # wooden pagoda: positive, mode bin 7
    ("flickr", "51230005", "2017-10-02", "Seven stories above the maples",
     "Seven stories of carved wood, an elegant pagoda rising above the maple canopy.",
     [], None, 158, "Vancouver, Canada", (49.2488, -123.1164),
     "pagoda:0.71,japanese_garden:0.12", "man-made+foliage",
     "1:320,4:480,2:480,9:320", 0.75, "wooden-pagoda"),
    ("instagram", "77120006", "2022-05-18", None,
     "The wooden tower among the pines is magnificent, every bracket painted by hand.",
     [], None, 611, None, None,
     "pagoda:0.68,botanical_garden:0.14", "man-made+foliage+natural_light",
     "1:256,4:560,2:464,9:320", 0.72, "wooden-pagoda"),
    ("tripadvisor", "41550007", "2019-03-27", "Climb to the pagoda terrace",
     "Climbed to the pagoda terrace this morning. Wonderful craftsmanship and a memorable view over the garden.",
     [], 5, 31, "Auckland, New Zealand", None,
     "pagoda:0.74,park:0.1", "man-made+foliage",
     "1:288,4:512,2:480,9:320", 0.78, "wooden-pagoda"),

    # traditional pavilion: positive, mode bin 7
    ("flickr", "51230008", "2018-04-12", "Pavilion in the plum grove",
     "A quiet pavilion in the plum grove, graceful roof lines against the spring sky.",
     [], None, 97, None, None,
     "pavilion:0.64,botanical_garden:0.18", "natural_light+vegetation",
     "1:240,4:560,2:480,9:320", 0.75, "traditional-pavilion"),
    ("instagram", "77120009", "2021-07-30", None,
     "Tea under the open pavilion, such a charming place to sit out the warm afternoon.",
     ["Saving this spot for my trip."], None, 342, None, (1.3138, 103.8159),
     "pavilion:0.66,patio:0.15", "natural_light+shade",
     "1:224,4:576,2:480,9:320", 0.78, "traditional-pavilion"),
    ("reddit", "t3_ab0010", "2020-06-05", "Hillside pavilion at the city garden",
     "Visited the hillside pavilion at the city garden. Really enjoyable spot, harmonious with the rockery behind it.",
     ["Nice, the rockery there is underrated."], None, 264, None, None,
     "pavilion:0.61,gazebo/exterior:0.2", "vegetation+stone",
     "1:256,4:544,2:480,9:320", 0.73, "traditional-pavilion"),

    # large-scale building: positive
    ("tripadvisor", "41550011", "2022-10-15", "The great hall",
     "The great hall is grand and impressive, though the courtyard in front gets crowded by noon.",
     [], 4, 44, "Toronto, Canada", None,
     "palace:0.66,temple/asia:0.15", "man-made+symmetrical",
     "1:480,2:560,4:320,6:240", 0.72, "large-scale-building"),
    ("reddit", "t3_ab0012", "2023-02-11", "Main palace hall",
     "Walked the main palace hall today. The painted beams are spectacular and the scale is humbling.",
     [], None, 389, None, None,
     "palace:0.69,castle:0.12", "man-made+symmetrical+stone",
     "1:512,2:528,4:320,6:240", 0.77, "large-scale-building"),

    # porch shelf: mildly positive, mode bin 5
    ("twitter", "99410013", "2019-08-22", None,
     "The covered porch walk is nice enough, pleasant shade on a hot day.",
     [], None, 23, "San Francisco", None,
     "porch:0.57,corridor:0.22", "wood+shade",
     "0:240,5:320,3:320,4:400,2:320", 0.52, "porch-shelf"),
    ("tripadvisor", "41550014", "2021-09-04", "Long porch by the east wall",
     "Strolled the long porch by the east wall. Interesting joinery, though the planting is a little ordinary.",
     [], 3, 6, "Dublin, Ireland", None,
     "porch:0.6,corridor:0.18", "wood+shade+man-made",
     "0:256,5:304,3:320,4:400,2:320", 0.55, "porch-shelf"),
    ("reddit", "t3_ab0015", "2018-11-19", "Porch gallery framing the bamboo",
     "The porch gallery frames the bamboo well. Nice detail work, nothing special beyond that honestly.",
     [], None, 74, None, None,
     "corridor:0.58,porch:0.21", "wood+foliage",
     "0:224,5:336,3:320,4:400,2:320", 0.58, "porch-shelf"),

    # leaky window: positive, mode bin 6
    ("flickr", "51230016", "2020-03-08", "Lattice windows on the white wall",
     "Lattice windows along the white wall, each one framing a pleasant little scene beyond.",
     [], None, 132, "Seattle, USA", None,
     "courtyard:0.55,patio:0.18", "latticework+man-made+shade",
     "0:320,8:160,4:480,2:320,3:320", 0.62, "leaky-window"),
    ("instagram", "77120017", "2022-08-27", None,
     "Love how the carved window openings borrow the courtyard view, such a special detail.",
     [], None, 456, None, None,
     "courtyard:0.52,formal_garden:0.2", "latticework+shade",
     "0:336,8:144,4:480,2:320,3:320", 0.65, "leaky-window"),
    ("reddit", "t3_ab0018", "2021-01-16", "Perforated windows in the side wall",
     "The perforated windows in the side wall are clever, the garden feels larger and more interesting through them.",
     ["These lattice patterns never repeat, look closely."], None, 198, None, None,
     "courtyard:0.57,alcove:0.16", "latticework+man-made",
     "0:352,8:128,4:480,2:320,3:320", 0.68, "leaky-window"),

    # closed alley: negative, mode bin 2
    ("twitter", "99410019", "2019-11-30", None,
     "The back alley between the walls is gloomy and cramped, skipped it quickly.",
     [], None, 9, "Manchester", None,
     "alley:0.63,street:0.14", "enclosed_area+no_horizon",
     "0:480,6:320,2:320,1:320,4:160", 0.22, "closed-alley"),
    ("tripadvisor", "41550020", "2020-10-25", "Dark lane behind the halls",
     "Dark service lane behind the halls, honestly a bit disappointing compared to the rest.",
     [], 2, 3, "Boston, USA", None,
     "alley:0.66,street:0.12", "enclosed_area+asphalt",
     "0:512,6:320,2:320,1:288,4:160", 0.25, "closed-alley"),
    ("reddit", "t3_ab0021", "2022-03-19", "Narrow passage between blank walls",
     "High blank walls on both sides, the narrow passage felt oppressive and dull to walk.",
     [], None, 57, None, None,
     "alley:0.6,courtyard:0.15", "enclosed_area+no_horizon",
     "0:496,6:320,2:320,1:304,4:160", 0.28, "closed-alley"),

    # closed window, negative cluster around bin 3
    ("flickr", "51230022", "2017-05-21", "Sealed windows on the grey wall",
     "Sealed windows on a long grey wall, the closed courtyard reads as unpleasant and shut away.",
     [], None, 41, None, None,
     "courtyard:0.56,balcony/exterior:0.17", "enclosed_area+man-made",
     "0:400,8:320,2:240,4:320,3:320", 0.32, "closed-window"),
    ("twitter", "99410023", "2018-02-14", None,
     "Rows of shuttered windows, the walled yard felt boring and a little sad today.",
     [], None, 14, "Chicago", None,
     "courtyard:0.54,building_facade:0.19", "enclosed_area+man-made",
     "0:416,8:304,2:240,4:320,3:320", 0.35, "closed-window"),
    ("reddit", "t3_ab0024", "2019-07-07", "Fixed panes around the enclosed court",
     "Couldn't see through the fixed window panes, the enclosed court seemed dreary and messy.",
     [], None, 33, None, None,
     "courtyard:0.55,building_facade:0.18", "enclosed_area+no_horizon",
     "0:384,8:336,2:240,4:320,3:320", 0.33, "closed-window"),

    # closed window, positive cluster around bin 7
    ("twitter", "99410025", "2021-06-12", None,
     "Those framed window bays on the garden wall are delightful, like small paintings in masonry.",
     [], None, 121, "Melbourne", None,
     "courtyard:0.58,building_facade:0.16", "man-made+stone",
     "0:400,8:312,2:248,4:320,3:320", 0.72, "closed-window"),
    ("instagram", "77120026", "2023-04-02", None,
     "The glazed windows set into the whitewashed wall are elegant, a lovely rhythm along the walk.",
     [], None, 529, None, None,
     "courtyard:0.53,balcony/exterior:0.19", "man-made+symmetrical",
     "0:408,8:320,2:232,4:320,3:320", 0.75, "closed-window"),
    ("tripadvisor", "41550027", "2022-12-28", "Window wall by the inner court",
     "The window wall by the inner court is charming, every bay perfectly composed.",
     [], 5, 18, "Edinburgh, UK", None,
     "courtyard:0.57,building_facade:0.15", "man-made+symmetrical+stone",
     "0:392,8:328,2:240,4:320,3:320", 0.73, "closed-window"),

    # one image per remaining water subcategory
    ("flickr", "51230028", "2016-09-17", "Mist over the big lake",
     "Morning mist over the big lake, breathtaking water and a serene shoreline of willows.",
     [], None, 266, "Hamburg, Germany", (53.5587, 9.9278),
     "lake/natural:0.72,pond:0.11", "open_area+water_reflection+natural_light",
     "21:640,2:400,4:400,9:160", 0.82, "natural-lake"),
    ("twitter", "99410029", "2023-05-29", None,
     "Followed the rocky creek through the garden, a vibrant and relaxing little valley.",
     [], None, 65, "Denver", None,
     "creek:0.61,forest_path:0.2", "vegetation+stone",
     "21:240,34:240,4:640,2:320,9:160", 0.78, "natural-stream"),
    ("instagram", "77120030", "2018-06-23", None,
     "The formal fountain court is fine, a bit plain and ordinary compared to the ponds.",
     [], None, 188, None, None,
     "fountain:0.66,plaza:0.12", "man-made+symmetrical",
     "21:160,132:160,3:480,1:320,2:480", 0.48, "regular-water"),
]

EXPECTED_MODES = {
    "waterfront-architecture": 7,
    "wooden-pagoda": 7,
    "traditional-pavilion": 7,
    "large-scale-building": 7,
    "porch-shelf": 5,
    "leaky-window": 6,
    "closed-alley": 2,
}

# 20-line mixed-validity tripadvisor dump for parser tests: 17 good, 3 bad
MIXED_BAD_LINES = {
    6: '{"review_id": "mx06", "rating": 4, "travel_date": "2019-04-04"}',            # missing text
    11: '{"review_id": "mx11", "text": "Great", "rating": 9, "travel_date": "2019-04-04"}',  # rating out of range
    17: '{"review_id": "mx17", "text": "broken json...',                              # invalid JSON
}


def record_id(source: str, raw_id: str, label_hint: str, kw_hint: str,
              seg_hint: str, model_hint: float) -> str:
    return (f"{raw_id}~lbl={label_hint}~kw={kw_hint}~seg={seg_hint}"
            f"~sent={model_hint}")


def build_dump_line(spec, model_hint: float) -> tuple[str, dict]:
    (source, raw_id, date, title, body, comments, rating, likes, locale, geo,
     label_hint, kw_hint, seg_hint, _target, _node) = spec
    hinted_id = record_id(source, raw_id, label_hint, kw_hint, seg_hint, model_hint)
    image = f"images/{source}/{raw_id}.jpg"
    if source == "flickr":
        raw = {"photo_id": hinted_id, "title": title, "description": body,
               "url": image, "faves": likes, "date_taken": date,
               "owner_location": locale, "comments": comments, "license": "cc-by-2.0"}
        if geo:
            raw["latitude"], raw["longitude"] = geo
    elif source == "twitter":
        raw = {"id_str": hinted_id, "full_text": body, "media": [image],
               "favorite_count": likes, "created_at": date,
               "user_location": locale, "retweets": likes // 3 if likes else 0}
        if comments:
            raw["comments"] = comments
    elif source == "instagram":
        raw = {"id": hinted_id, "caption": body, "display_url": image,
               "like_count": likes, "timestamp": f"{date}T10:30:00+00:00",
               "filter_used": "clarendon"}
        if comments:
            raw["comments"] = comments
        if geo:
            raw["location"] = {"lat": geo[0], "lng": geo[1]}
    elif source == "tripadvisor":
        raw = {"review_id": hinted_id, "title": title, "text": body,
               "rating": rating, "photos": [image], "travel_date": date,
               "user_location": locale, "helpful_votes": likes,
               "comments": comments or []}
    else:  # reddit
        raw = {"name": hinted_id, "title": title, "selftext": body,
               "image_urls": [image], "score": likes, "created_utc": f"{date}T08:00:00+00:00",
               "subreddit": "GardenDesign", "comments": comments or []}
    return source, raw


def main() -> int:
    lexicon = load_default_lexicon()
    labels = set(scene_labels())

    # sanity-check every hint before writing anything
    dumps: dict[str, list[dict]] = {s: [] for s in
                                    ("flickr", "twitter", "instagram", "tripadvisor", "reddit")}
    targets: dict[str, tuple[float, str]] = {}
    for spec in SPECS:
        (source, raw_id, _date, title, body, comments, _rating, _likes, _loc, _geo,
         label_hint, _kw, seg_hint, target, node) = spec
        for pair in label_hint.split(","):
            label = pair.rsplit(":", 1)[0]
            assert label in labels, f"{raw_id}: unknown scene label {label!r}"
        runs = [p.split(":") for p in seg_hint.split(",")]
        assert sum(int(n) for _c, n in runs) == 1600, f"{raw_id}: seg runs must cover 1600 cells"
        text = "\n".join([t for t in (title, body) if t] + (comments or []))
        lex = lexicon_score(text, lexicon)
        model = round(2 * target - lex, 4)
        assert 0.0 <= model <= 1.0, f"{raw_id}: model hint {model} out of range (lex={lex})"
        source, raw = build_dump_line(spec, model)
        dumps[source].append(raw)
        targets[f"{source}-{record_id(source, raw_id, label_hint, _kw, seg_hint, model)}"] = (target, node)

    if DUMPS.exists():
        shutil.rmtree(DUMPS)
    DUMPS.mkdir(parents=True)
    for source, rows in dumps.items():
        path = DUMPS / f"{source}.jsonl"
        path.write_text("".join(json.dumps(r, ensure_ascii=False) + "\n" for r in rows),
                        encoding="utf-8")
        print(f"wrote {path} ({len(rows)} lines)")

    # mixed-validity dump for parser tests
    good_line = ('{{"review_id": "mx{i:02d}", "title": "Visit number {i}", '
                 '"text": "A perfectly ordinary garden visit with plenty of words to pass the filter.", '
                 '"rating": 4, "travel_date": "2019-04-{day:02d}", "helpful_votes": {i}}}')
    lines = []
    for i in range(1, 21):
        lines.append(MIXED_BAD_LINES.get(i) or good_line.format(i=i, day=min(i, 28)))
    (DUMPS / "tripadvisor_mixed.jsonl").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {DUMPS / 'tripadvisor_mixed.jsonl'} (20 lines, 3 bad)")

    # ingest through the real CLI, in fixed source order
    if CORPUS.exists():
        shutil.rmtree(CORPUS)
    for source in ("flickr", "twitter", "instagram", "tripadvisor", "reddit"):
        rc = cli.main(["ingest", "--source", source, "--in", str(DUMPS / f"{source}.jsonl"),
                       "--out", str(CORPUS)])
        assert rc == 0, f"ingest {source} failed"

    # verify: filters keep everything, assignments and score bins hit their targets
    store = RecordStore.open(CORPUS)
    assert len(store) == len(SPECS), f"store has {len(store)} records"
    records = list(store.iter_records())
    kept, stats = filter_text(records)
    assert stats.kept == len(SPECS), f"text filter dropped records: {stats.to_json_dict()}"

    backend = StubBackend()
    enriched, enrich_stats = enrich_all(kept, backend)
    assert enrich_stats.kept == len(SPECS), f"enrich dropped records: {enrich_stats.to_json_dict()}"

    taxonomy = load_default_taxonomy(known_labels=labels)
    rows = assign_all(enriched, taxonomy)
    by_node: dict[str, list[float]] = {}
    for enriched_record, row in zip(enriched, rows):
        target, node = targets[row.record_id]
        assert row.assignment.sub == node, (
            f"{row.record_id}: assigned {row.assignment.sub}, wanted {node}")
        text = record_text(enriched_record.record)
        score = score_text(text, lexicon, backend.sentiment(row.record_id, text))
        assert abs(score.fused - target) < 5e-4, (
            f"{row.record_id}: fused {score.fused} != target {target}")
        by_node.setdefault(node, []).append(score.fused)

    for node, mode in EXPECTED_MODES.items():
        hist = histogram(by_node[node])
        assert hist.mode_bin() == mode, f"{node}: mode bin {hist.mode_bin()}, wanted {mode}"
    closed = detect_peaks(histogram(by_node["closed-window"]))
    assert closed.modality == "bimodal", f"closed-window modality {closed.modality}"
    peak_bins = [b for b, _ in closed.peaks]
    assert peak_bins == [3, 7], f"closed-window peaks at {peak_bins}"
    for node in ("natural-lake", "natural-stream", "regular-water"):
        assert len(by_node[node]) == 1

    print(f"corpus verified: {len(SPECS)} records, "
          f"{len(by_node)} sub nodes populated, closed-window bimodal at bins 3/7")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
