import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))  # for synth.py / helpers.py

from helpers import DATA_DIR


@pytest.fixture
def tiny_ohlcv_path():
    return os.path.join(DATA_DIR, "tiny_ohlcv.csv")


@pytest.fixture
def tiny_articles_path():
    return os.path.join(DATA_DIR, "tiny_articles.emb")
