from __future__ import annotations

import numpy as np
import pytest

from thetacf.numerics import ThetaContext

M_VALUES = [1, 2, 3, 4, 5]


@pytest.fixture(scope="session")
def contexts() -> dict[int, ThetaContext]:
    return {m: ThetaContext.create(m) for m in M_VALUES}


@pytest.fixture(scope="session")
def ctx1(contexts) -> ThetaContext:
    return contexts[1]


@pytest.fixture(scope="session")
def ctx2(contexts) -> ThetaContext:
    return contexts[2]


@pytest.fixture(scope="session")
def ctx4(contexts) -> ThetaContext:
    return contexts[4]


@pytest.fixture(params=M_VALUES, ids=lambda m: f"m{m}")
def ctx(request, contexts) -> ThetaContext:
    return contexts[request.param]


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(20240611)))


@pytest.fixture(scope="session")
def ctx3(contexts) -> ThetaContext:
    return contexts[3]
