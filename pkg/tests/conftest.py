import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from oracles.fixtures import FIXTURES  # noqa: E402
from ponzi_lens.chain_data import ContractHistory, Direction, Label, Transaction  # noqa: E402

DATA = Path(__file__).resolve().parent / "data"


def history_from_tuples(address, creator, rows, label=None) -> ContractHistory:
    txs = tuple(
        Transaction(ts, cp, Direction.IN if d == "in" else Direction.OUT, wei)
        for ts, cp, d, wei in sorted(rows, key=lambda r: r[0])
    )
    return ContractHistory(address, creator, txs, label)


@pytest.fixture
def fixture_histories():
    return {name: history_from_tuples(*spec) for name, spec in FIXTURES.items()}


def make_separable(n=500, n_features=4, seed=0):
    """Labels are x0 > 0.5; the other columns are noise."""
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, n_features))
    y = (X[:, 0] > 0.5).astype(np.int64)
    return X, y


def make_informative_noise(n=600, seed=0):
    """3 informative columns (f0..f2) followed by 5 independent noise columns."""
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 8))
    y = (X[:, 0] + X[:, 1] + X[:, 2] > 0).astype(np.int64)
    return X, y


@pytest.fixture
def synthetic_dataset():
    from ponzi_lens.synthetic import generate_dataset

    return generate_dataset(40, 160, seed=5)


__all__ = ["DATA", "FIXTURES", "Label", "history_from_tuples", "make_separable", "make_informative_noise"]


# --- acceptance reporting ------------------------------------------------------

ACCEPTANCE: list[tuple[int, str, str, str]] = []


class Criterion:
    """Context manager recording one acceptance outcome (PASS, FAIL or SKIP)."""

    def __init__(self, number: int, title: str):
        self.number, self.title = number, title
        self.detail = ""

    def __enter__(self):
        return self

    def skip(self, reason: str):
        self._record("SKIP", reason)
        pytest.skip(reason)

    def _record(self, status, detail):
        ACCEPTANCE.append((self.number, status, self.title, detail))
        print(f"[acceptance {self.number:>2}] {status} {self.title}" + (f" ({detail})" if detail else ""))

    def __exit__(self, exc_type, exc, tb):
        if exc_type is None:
            self._record("PASS", self.detail)
        elif not issubclass(exc_type, pytest.skip.Exception):
            self._record("FAIL", f"{exc_type.__name__}: {exc}".splitlines()[0])
        return False


@pytest.fixture
def criterion():
    return Criterion


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, status, title, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"{number:>2}. {status:<4} {title}" + (f" ({detail})" if detail else ""))
