import sys
from pathlib import Path

import numpy as np
import pytest
import scipy.sparse as sp

sys.path.insert(0, str(Path(__file__).parent))

from locsoc.ingest import SocialNetwork, UserLocationNetwork  # noqa: E402


def networks_from_dense(X, Y, users=None, locations=None):
    """Wrap dense matrices as network objects, bypassing the filtering pipeline."""
    X = np.asarray(X)
    Y = np.asarray(Y)
    n, m = Y.shape
    users = tuple(users or (f"u{i}" for i in range(n)))
    locations = tuple(locations or (f"l{j}" for j in range(m)))
    social = SocialNetwork(users, sp.csr_matrix(X.astype(np.int64)))
    ul = UserLocationNetwork(users, locations, sp.csr_matrix(Y.astype(np.int64)))
    return social, ul


def random_instance(seed, max_users=50, max_locations=30):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, max_users + 1))
    m = int(rng.integers(1, max_locations + 1))
    upper = np.triu(rng.random((n, n)) < rng.uniform(0.02, 0.4), k=1)
    X = (upper | upper.T).astype(int)
    Y = rng.poisson(rng.uniform(0.2, 2.0), size=(n, m)) * (rng.random((n, m)) < rng.uniform(0.1, 0.7))
    return X, Y


@pytest.fixture
def toy_dir():
    return Path(__file__).resolve().parents[1] / "src" / "locsoc" / "data" / "toy"


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = mod.summary_lines() if mod is not None else []
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
