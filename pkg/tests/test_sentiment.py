"""Lexicon scoring, fusion algebra, and the star calibration check."""

import math
import random

import pytest

from gardenlens.errors import EmptyText, InsufficientData, OutOfRangeScore
from gardenlens.sentiment import (Lexicon, calibrate_from_stars, fuse,
                                  lexicon_score, record_text, tokenize)
from test_corpus import make_record


# --- lexicon_score ---------------------------------------------------------------

def test_single_positive_token(lexicon):
    assert lexicon.entries["beautiful"] == 0.8
    assert lexicon_score("beautiful", lexicon) == pytest.approx(0.9, abs=1e-12)


def test_negation_flips(lexicon):
    assert lexicon_score("not beautiful", lexicon) == pytest.approx(0.1, abs=1e-12)


def test_negation_window_is_three_tokens(lexicon):
    inside = "not really very that beautiful"  # "not" is 4 back from "beautiful"
    assert lexicon_score(inside, lexicon) > 0.5
    assert lexicon_score("not quite so beautiful", lexicon) < 0.5


def test_case_insensitive_and_unknown_tokens_ignored(lexicon):
    a = lexicon_score("the garden is BEAUTIFUL today", lexicon)
    b = lexicon_score("beautiful", lexicon)
    assert a == b


def test_no_matches_is_neutral(lexicon):
    assert lexicon_score("the the the the", lexicon) == 0.5


def test_empty_text_raises(lexicon):
    with pytest.raises(EmptyText):
        lexicon_score("   ", lexicon)


def walk_oracle(text, lexicon):
    """Independent re-implementation of the scoring walk."""
    tokens = tokenize(text)
    values = []
    for i, token in enumerate(tokens):
        if token not in lexicon.entries:
            continue
        value = lexicon.entries[token]
        window = tokens[max(0, i - 3):i]
        for w in window:
            if w in lexicon.intensifiers:
                value *= lexicon.intensifiers[w]
        if any(w in lexicon.negators for w in window):
            value = -value
        values.append(min(1.0, max(-1.0, value)))
    if not values:
        return 0.5
    return (math.fsum(sorted(values)) / len(values) + 1.0) / 2.0


SENTENCES = [
    "A beautiful garden with a peaceful pond and elegant bridges everywhere you look.",
    "The entrance was not beautiful at all, honestly quite disappointing.",
    "Very impressive rockery, truly wonderful craftsmanship in every corner.",
    "Extremely crowded and noisy on weekends, hardly relaxing at all.",
    "The teahouse is charming but the gift shop is overpriced and messy.",
    "Never boring, always something interesting behind the next leaky window.",
    "Somewhat ordinary planting, though the pavilion itself is gorgeous.",
    "I don't hate it, but the concrete paths feel cheap.",
    "Absolutely stunning reflections on the lake this morning.",
    "The walled alley felt oppressive, gloomy, and slightly claustrophobic.",
    "So pleasant to sit under the wisteria with tea.",
    "Rather dull in winter, without the lotus the pond looks sad.",
    "A truly magical and memorable visit, perfect light all afternoon.",
    "Not a great value, and the bonsai court was shabby.",
    "Quite serene early in the day before the tour groups arrive.",
    "The carvings are incredibly delightful, crisp and vibrant.",
    "The map was bad and the signage worse, we got lost twice.",
    "Barely worthwhile at full price, wait for the evening discount.",
    "An enchanting moon gate framing a picturesque willow.",
    "The fountain court was underwhelming, just a plain basin.",
    "Wonderful volunteers, really friendly and helpful with history questions.",
    "Hardly any shade near the great lawn, bring a hat.",
    "Their plum blossoms are spectacular in late February.",
    "Mediocre snacks, but the scenery is excellent and calm.",
    "No ugly fences anywhere, the borrowed scenery flows naturally.",
    "We found the rain walk surprisingly tranquil and graceful.",
    "It was not terrible, just very ordinary for the price.",
    "The koi pond is delightful and the kids loved it.",
    "Such a harmonious balance of stone, water, and pine.",
    "A slightly gaudy new pavilion spoils the old skyline.",
    "Really special at dusk when the lanterns come on.",
    "The exhibits were boring and the hall smelled musty.",
    "Incredibly photogenic bridges, gorgeous from every angle.",
    "Without the crowds this would be perfect.",
    "A fine, pleasant stroll, nothing more, nothing less.",
    "Truly awful parking situation, plan to arrive early.",
    "The scent of osmanthus made the walk magical.",
    "Not very impressive compared with the famous gardens abroad.",
    "Astonishingly peaceful for a garden inside a busy city.",
    "The moon bridge reflection is breathtaking on still evenings.",
]


def test_forty_sentence_fixture_matches_token_walk_oracle(lexicon):
    assert len(SENTENCES) == 40
    for sentence in SENTENCES:
        assert lexicon_score(sentence, lexicon) == walk_oracle(sentence, lexicon)


def test_scores_always_in_unit_interval(lexicon):
    rng = random.Random(31)
    vocabulary = list(lexicon.entries) + list(lexicon.negators) + \
        list(lexicon.intensifiers) + ["garden", "wall", "pond"]
    for _ in range(300):
        text = " ".join(rng.choice(vocabulary) for _ in range(rng.randint(1, 30)))
        assert 0.0 <= lexicon_score(text, lexicon) <= 1.0


def test_lexicon_parse_rejects_bad_valence():
    from gardenlens.errors import SchemaError

    with pytest.raises(SchemaError):
        Lexicon.parse("great\t1.5\n")
    with pytest.raises(SchemaError):
        Lexicon.parse("[intensifiers]\nvery\t-2\n")


# --- fuse ------------------------------------------------------------------------

def test_agreement_fixed_point():
    score = fuse(0.8, 0.8)
    assert score.fused == 0.8
    assert score.disagreement is False


def test_disagreement_flag_and_arithmetic():
    score = fuse(0.9, 0.3)
    assert score.fused == pytest.approx(0.6, abs=1e-12)
    assert score.disagreement is True


def test_model_absent_falls_back_to_lexicon():
    score = fuse(None, 0.42)
    assert score.fused == 0.42
    assert score.model is None
    assert score.disagreement is False


def test_fixed_point_exact_on_grid():
    for i in range(11):
        for j in range(11):
            x, w = i / 10, j / 10
            assert fuse(x, x, w).fused == x


def test_fuse_monotone_in_both_arguments():
    rng = random.Random(55)
    for _ in range(1000):
        model, lex, w = rng.random(), rng.random(), rng.random()
        bumped_model = min(1.0, model + rng.random() * (1 - model))
        bumped_lex = min(1.0, lex + rng.random() * (1 - lex))
        base = fuse(model, lex, w).fused
        assert fuse(bumped_model, lex, w).fused >= base
        assert fuse(model, bumped_lex, w).fused >= base
        assert 0.0 <= base <= 1.0


def test_out_of_range_inputs_rejected():
    with pytest.raises(OutOfRangeScore):
        fuse(1.2, 0.5)
    with pytest.raises(OutOfRangeScore):
        fuse(0.5, -0.1)
    with pytest.raises(OutOfRangeScore):
        fuse(0.5, 0.5, w_model=2.0)


def test_record_text_appends_comments():
    record = make_record("r", text="main text here", comments=["one", "two"])
    assert record_text(record) == "main text here\none\ntwo"
    assert record_text(record, include_comments=False) == "main text here"


# --- calibrate_from_stars -----------------------------------------------------------

def test_single_star_level_gives_curve_without_monotonicity():
    curve = calibrate_from_stars([(0.9, 5), (0.9, 5)])
    assert curve.per_star == {5: 0.9}
    assert curve.monotone is None


def test_empty_pairs_raise():
    with pytest.raises(InsufficientData):
        calibrate_from_stars([])


def test_synthetic_monotone_pairs():
    rng = random.Random(17)
    pairs = []
    for _ in range(500):
        stars = rng.randint(1, 5)
        noise = (rng.random() - 0.5) * 0.1
        pairs.append((min(1.0, max(0.0, stars / 5 + noise)), stars))
    curve = calibrate_from_stars(pairs)
    assert curve.monotone is True
    # brute-force grouping oracle
    for stars in range(1, 6):
        group = sorted(s for s, st in pairs if st == stars)
        assert curve.per_star[stars] == math.fsum(group) / len(group)
        assert curve.counts[stars] == len(group)


def test_shuffled_input_gives_identical_curve():
    rng = random.Random(23)
    pairs = [(rng.random(), rng.randint(1, 5)) for _ in range(200)]
    curve1 = calibrate_from_stars(pairs)
    shuffled = pairs[:]
    rng.shuffle(shuffled)
    curve2 = calibrate_from_stars(shuffled)
    assert curve1 == curve2
