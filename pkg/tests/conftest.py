import os
from pathlib import Path

import pytest

from drebench.corpus import load_split
from drebench.schema import load_schema

REPO_ROOT = Path(__file__).resolve().parents[1]
FIXTURE_CORPUS = REPO_ROOT / "fixtures" / "dialogre_fixture.json"
GOLDEN_DIR = REPO_ROOT / "fixtures" / "golden"


@pytest.fixture(scope="session")
def schema():
    return load_schema()


@pytest.fixture(scope="session")
def fixture_split(schema):
    return load_split(FIXTURE_CORPUS, "fixture", schema)


def real_data_dir() -> Path | None:
    """Directory holding the published corpus splits, when available.

    Looked up from $DIALOGRE_DATA_DIR, then data/dialogre under the repo
    root.  The directory must contain train.json, dev.json and test.json.
    """
    candidates = []
    env = os.environ.get("DIALOGRE_DATA_DIR")
    if env:
        candidates.append(Path(env))
    candidates.append(REPO_ROOT / "data" / "dialogre")
    for cand in candidates:
        if all((cand / f"{name}.json").is_file() for name in ("train", "dev", "test")):
            return cand
    return None


requires_real_data = pytest.mark.skipif(
    real_data_dir() is None,
    reason="published corpus splits not present (set DIALOGRE_DATA_DIR)",
)
