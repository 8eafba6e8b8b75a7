import os

import numpy as np
import pytest
from hypothesis import settings

from invfree.problem import builtin_problem, builtin_problems

settings.register_profile("default", max_examples=60, deadline=None)
settings.register_profile("stress", max_examples=2000, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

EXAMPLE_J0 = np.array([[8.64, -3.4], [4.913, 9.404]])


@pytest.fixture
def worked():
    return builtin_problem("paper_example")


@pytest.fixture(params=[p.name for p in builtin_problems()])
def builtin(request):
    return builtin_problem(request.param)
