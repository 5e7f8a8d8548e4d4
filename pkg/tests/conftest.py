import sys
import os

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from nls_services.field_factory import gaussian_field, random_field
from nls_services.spectral_core import ComplexField, Grid, l2_norm


@pytest.fixture
def small_grid():
    return Grid(n_points=64, length=2 * np.pi)


@pytest.fixture
def box_grid():
    return Grid(n_points=128, length=32.0)


@pytest.fixture
def make_random_field():
    def _make(grid, seed, amp=1.0):
        return random_field(grid, amp=amp, seed=seed)
    return _make


def unit_gaussian(grid, center=0.0, width=1.0, norm=1.0):
    field = gaussian_field(grid, 1.0, center, width)
    return field.with_values(field.values * (norm / l2_norm(field)))


def zero_forcing(grid):
    return ComplexField.zeros(grid)


def write_config(path, **entries):
    """写出 key = value 配置文件"""
    lines = ["# test config"]
    for key, value in entries.items():
        if isinstance(value, (list, tuple)):
            value = ",".join(str(item) for item in value)
        lines.append(f"{key} = {value}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return str(path)
