import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from app.sparse_core import laplacian_system  # noqa: E402


@pytest.fixture
def small_system():
    """Jacobi-split 6 x 6 grid Laplacian (n = 36)."""
    return laplacian_system(6, 12345)


@pytest.fixture
def grid_system():
    """Jacobi-split 10 x 10 grid Laplacian (n = 100)."""
    return laplacian_system(10, 12345)
