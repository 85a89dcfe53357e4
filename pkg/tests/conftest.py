import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hintloop.cli import _default_taxonomy_path
from hintloop.synthdata import CorpusConfig, generate_corpus
from hintloop.taxonomy import load_taxonomy

THREE_POLICIES = ("nudity.partial", "profanity.mild", "violence.graphic")


@pytest.fixture(scope="session")
def taxonomy():
    return load_taxonomy(_default_taxonomy_path())


@pytest.fixture(scope="session")
def small_corpus():
    return generate_corpus(
        CorpusConfig(
            n_videos=40,
            policies=THREE_POLICIES,
            seed=11,
            violating_fraction=0.3,
            frame_count_range=(80, 160),
            dims=8,
        )
    )
