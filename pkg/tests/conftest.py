"""Shared fixtures; puts src/ on the path the same way main.py does."""
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from geometry import GapEnvironment, catalog_shape, make_cross_section  # noqa: E402


@pytest.fixture
def rectangle():
    return make_cross_section(catalog_shape("rectangle").spec)


@pytest.fixture
def circle():
    return make_cross_section(catalog_shape("circle").spec)


@pytest.fixture
def gap():
    return GapEnvironment()
