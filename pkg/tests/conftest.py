import os
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

HMD_DIR_ENV = "ALPHACODA_HMD_DIR"
HMD_FILES = {"female": "AUS_fltper_1x1.txt", "male": "AUS_mltper_1x1.txt"}


def hmd_path(sex):
    """Path of a user-supplied Australian HMD period life table, or None."""
    root = os.environ.get(HMD_DIR_ENV)
    if not root:
        return None
    path = Path(root) / HMD_FILES[sex]
    return path if path.is_file() else None


@pytest.fixture(scope="session")
def hmd_series():
    """Rebuilt-from-qx Australian series, 1921-2020; skips when absent."""
    from alphacoda.lifetable import read_hmd

    out = {}
    for sex in HMD_FILES:
        path = hmd_path(sex)
        if path is None:
            pytest.skip(f"set {HMD_DIR_ENV} to a directory holding {HMD_FILES[sex]}")
        series = read_hmd(path)
        keep = (series.years >= 1921) & (series.years <= 2020)
        out[sex] = series.subset(np.flatnonzero(keep))
    return out


@pytest.fixture(scope="session")
def synthetic_tables():
    """Simulated female and male life tables as HMD-formatted text."""
    from alphacoda.synthetic import format_hmd, simulate_life_tables

    return {
        "female": format_hmd(simulate_life_tables(sex="female", seed=3)),
        "male": format_hmd(simulate_life_tables(sex="male", seed=4), sex="Males"),
    }


@pytest.fixture(scope="session")
def synthetic_series(synthetic_tables):
    from alphacoda.lifetable import build_series, parse_hmd_lifetable

    return {sex: build_series(parse_hmd_lifetable(text)) for sex, text in synthetic_tables.items()}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
