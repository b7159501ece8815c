import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pkgsleuth.behavior import load_catalog, load_patterns
from pkgsleuth.features import FeatureExtractor


@pytest.fixture(scope="session")
def catalog():
    return load_catalog()


@pytest.fixture(scope="session")
def patterns():
    return load_patterns()


@pytest.fixture(scope="session")
def extractor():
    return FeatureExtractor()


@pytest.fixture
def pkg_dir(tmp_path):
    """Write a package directory from {relative path: text} and return it."""

    def build(files: dict[str, str], name: str = "pkg-1.0") -> Path:
        root = tmp_path / name
        for rel, text in files.items():
            target = root / rel
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_text(text, encoding="utf-8")
        return root

    return build
