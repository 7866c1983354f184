"""The thirteen acceptance criteria at their stated tolerances.

Each test prints one ``criterion NN VERDICT ...`` line; all of them are repeated
in an "acceptance criteria" section at the end of the run. Criteria whose frozen config carries a
``known_failure`` note are strict xfails: they must fail, and an unexpected pass
turns the suite red.
"""

import os

import pytest

from twopoint.acceptance import CRITERIA, default_config_dir, run_criterion
from twopoint.io import read_json

from conftest import ACCEPTANCE_LINES

THREADS = int(os.environ.get("TWOPOINT_THREADS", "4"))


def _param(i):
    known = read_json(default_config_dir() / f"c{i:02d}.json").get("known_failure")
    marks = [pytest.mark.xfail(strict=True, reason=known)] if known else []
    return pytest.param(i, marks=marks, id=f"criterion_{i:02d}")


@pytest.mark.parametrize("i", [_param(i) for i in CRITERIA])
def test_criterion(i):
    r = run_criterion(i, threads=THREADS)
    print(r.line())
    ACCEPTANCE_LINES[i] = r.line()
    assert not r.error, r.detail
    assert r.passed, r.detail
