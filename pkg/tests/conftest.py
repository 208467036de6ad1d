from __future__ import annotations

import pytest

from flowcache import FieldSpec, MixtureComponent

# Pinned mixture used by the cross-sample and comparison experiments:
# two overlapping components so the velocity field is smooth but still
# couples magnitude and direction dynamics.
GMM_COMPONENTS = (
    MixtureComponent(0.6, (1.2, -0.8, 0.5), 1.1),
    MixtureComponent(0.4, (-1.0, 0.9, -0.4), 1.3),
)


@pytest.fixture
def gmm_spec() -> FieldSpec:
    return FieldSpec(kind="gaussian-mixture", dimension=3, components=GMM_COMPONENTS)


@pytest.fixture
def constant_spec() -> FieldSpec:
    return FieldSpec(kind="constant", dimension=2, target=(1.0, -1.0))


@pytest.fixture
def decay_spec() -> FieldSpec:
    return FieldSpec(kind="magnitude-decay", dimension=2, target=(1.0, -0.5), rate=0.03)


@pytest.fixture
def rotation_spec() -> FieldSpec:
    return FieldSpec(kind="rotation", dimension=2, target=(1.0, 0.0), rate=2.0, plane=(0, 1))
