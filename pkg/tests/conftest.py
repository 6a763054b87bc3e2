import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from taskpace.lexicon import default_lexicon


@pytest.fixture(scope="session")
def lexicon():
    return default_lexicon()
