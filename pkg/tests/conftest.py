from __future__ import annotations

import random

import pytest

from causaltext.client import template_generate
from causaltext.linearize import TAGS, linearize
from causaltext.prompts import PairRecord

from helpers import random_component


def synthetic_pairs(n: int, seed: int = 0) -> list[PairRecord]:
    """Dataset of linearized prompts with template references."""
    rng = random.Random(seed)
    pairs = []
    for i in range(n):
        component = random_component(rng.randrange(1_000_000) + i, max_edges=3)
        pairs.append(
            PairRecord(
                prompt=linearize(component, TAGS).text,
                completion=template_generate(component),
            )
        )
    return pairs


@pytest.fixture
def small_dataset() -> list[PairRecord]:
    return synthetic_pairs(30, seed=7)
