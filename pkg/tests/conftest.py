import sys
from pathlib import Path

import pytest

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

FIXTURES = REPO / "fixtures"
GOLDEN = FIXTURES / "golden"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def golden_dir() -> Path:
    return GOLDEN


@pytest.fixture(scope="session")
def corpus_store():
    from gardenlens.store import RecordStore

    return RecordStore.open(FIXTURES / "corpus")


@pytest.fixture(scope="session")
def lexicon():
    from gardenlens.sentiment import load_default_lexicon

    return load_default_lexicon()


@pytest.fixture(scope="session")
def shipped_taxonomy():
    from gardenlens.inference import scene_labels
    from gardenlens.taxonomy import load_default_taxonomy

    return load_default_taxonomy(known_labels=scene_labels())


@pytest.fixture(scope="session")
def golden_report():
    from gardenlens.analytics import load_report

    return load_report(GOLDEN / "report.json")
