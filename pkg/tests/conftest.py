import sys
import time

import numpy as np
import pytest

from pupilemo import gbm


@pytest.fixture(scope="session")
def blobs():
    """Four classes, each two well-separated Gaussian blobs in 2-D; 400 rows."""
    rng = np.random.default_rng(1234)
    centers = np.array([
        [0.0, 0.0], [10.0, 10.0],    # happy
        [0.0, 10.0], [10.0, 0.0],    # sad
        [20.0, 0.0], [30.0, 10.0],   # anger
        [20.0, 10.0], [30.0, 0.0],   # fear
    ])
    labels = np.repeat([0, 0, 1, 1, 2, 2, 3, 3], 50)
    X = np.repeat(centers, 50, axis=0) + rng.normal(0.0, 1.0, (400, 2))
    perm = rng.permutation(400)
    return X[perm], labels[perm], centers


@pytest.fixture(scope="session")
def blob_hp():
    return gbm.Hyperparams(min_samples_split=10, min_samples_leaf=2, max_features=2)


@pytest.fixture(scope="session")
def blob_model(blobs, blob_hp):
    X, y, _ = blobs
    return gbm.fit(X, y, blob_hp)


def _run_pipeline(workdir, seed):
    from pupilemo.cli import main
    start = time.perf_counter()
    code = main(["pipeline", "--seed", str(seed), "--workdir", str(workdir)])
    elapsed = time.perf_counter() - start
    assert code == 0
    return workdir, elapsed


@pytest.fixture(scope="session")
def run_42(tmp_path_factory):
    """Full CLI pipeline at seed 42: (workdir, wall seconds)."""
    return _run_pipeline(tmp_path_factory.mktemp("run42a"), 42)


@pytest.fixture(scope="session")
def run_42_again(tmp_path_factory):
    return _run_pipeline(tmp_path_factory.mktemp("run42b"), 42)


@pytest.fixture(scope="session")
def run_7(tmp_path_factory):
    return _run_pipeline(tmp_path_factory.mktemp("run7"), 7)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        status, title, detail = results[n]
        terminalreporter.write_line(f"criterion {n:>2}: {status}  {title}  [{detail}]")
