from functools import lru_cache

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from heisenmra.ifs import attractor_fixed_point, box_seed, build_ifs, cube_seed, tile_grid

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@lru_cache(maxsize=None)
def cached_tile(res: int, seed: str = "cube", hausdorff: bool = False):
    sys = build_ifs(0.5)
    grid = tile_grid(sys, res)
    start = cube_seed(grid) if seed == "cube" else box_seed(grid, *sys.invariant_box())
    return attractor_fixed_point(sys, start, 12, track_hausdorff=hausdorff)


@pytest.fixture(scope="session")
def ifs_half():
    return build_ifs(0.5)


@pytest.fixture(scope="session")
def tile32():
    return cached_tile(32).voxels


@pytest.fixture(scope="session")
def tile64():
    return cached_tile(64).voxels


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def record():
    def _record(criterion: int, passed: bool, detail: str):
        ACCEPTANCE[criterion] = (bool(passed), detail)
        print(f"criterion {criterion:2d}: {'PASS' if passed else 'FAIL'} | {detail}")
        return passed

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'} | {detail}")
