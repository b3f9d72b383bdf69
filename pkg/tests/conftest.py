import numpy as np
import pytest

from vistrim.linalg import SeededRng
from vistrim.model import ModelConfig
from vistrim.model import init_model
from vistrim.model import random_sequence

# fixtures


@pytest.fixture
def rng():
    yield np.random.default_rng(1234)


@pytest.fixture
def small_config():
    yield ModelConfig(num_layers=4, hidden_dim=16, ffn_dim=32, num_heads=2,
                      seed=7)


@pytest.fixture
def small_model(small_config):
    yield init_model(small_config)


@pytest.fixture
def small_sequence(small_config):
    yield random_sequence(small_config.hidden_dim, 12, 5, SeededRng(11))


@pytest.fixture
def causal_t2t():
    yield np.array([[1.0, 0.0, 0.0],
                    [0.4, 0.6, 0.0],
                    [0.2, 0.3, 0.5]])


@pytest.fixture
def run_yaml(tmp_path):
    """Small run configuration written to a YAML file"""
    content = """
model:
  num_layers: 6
  hidden_dim: 16
  ffn_dim: 32
  num_heads: 2
  seed: 3
data:
  samples: 3
  vision_count: 20
  text_count: 4
  planted_fraction: 0.2
  seed: 5
schedule:
  stage_layers: [1, 3]
  keep_counts: [10, 4]
analysis:
  fraction_text: 0.5
  fraction_vision: 0.2
"""
    filename = tmp_path / "run.yml"
    filename.write_text(content, encoding="utf-8")
    yield filename
