import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

REPO_ROOT = Path(__file__).resolve().parent.parent
CORPUS_DIR = REPO_ROOT / "data" / "corpus"


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def corpus_manifest():
    """The bundled synthetic corpus; regenerated if missing."""
    manifest = CORPUS_DIR / "manifest.json"
    if not manifest.exists():
        from docgaze.synth import generate_corpus

        generate_corpus(CORPUS_DIR, seed=7)
    return manifest
