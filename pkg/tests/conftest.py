import numpy as np
import pytest

from hybridml.dataset import SplitSpec, load_cleveland, split, standardize


@pytest.fixture(scope="session")
def cleveland():
    return load_cleveland()


@pytest.fixture(scope="session")
def prepared(cleveland):
    sp = split(cleveland, SplitSpec(seed=0))
    train, scaler = standardize(cleveland.subset(sp.train))
    val, _ = standardize(cleveland.subset(sp.val), scaler)
    test, _ = standardize(cleveland.subset(sp.test), scaler)
    return train, val, test


@pytest.fixture
def separable_2d():
    """Two well-separated Gaussian blobs in the plane."""
    rng = np.random.default_rng(3)
    a = rng.normal([2.0, 2.0], 0.4, size=(20, 2))
    b = rng.normal([-2.0, -1.5], 0.4, size=(20, 2))
    X = np.vstack([a, b])
    y = np.r_[np.ones(20, dtype=int), np.zeros(20, dtype=int)]
    return X, y


def write_synthetic_cleveland(path, n=30, seed=0):
    """A small file in the Cleveland layout with a learnable signal."""
    rng = np.random.default_rng(seed)
    with open(path, "w") as fh:
        for _ in range(n):
            x = rng.normal(size=13)
            num = int(rng.uniform() < 1 / (1 + np.exp(-2 * x[0])))
            fh.write(",".join(f"{v:.4f}" for v in x) + f",{num}\n")
    return path


ACCEPTANCE: list[str] = []


def record(number: int, passed: bool, summary: str, detail: str) -> bool:
    """Log one acceptance line; printed inline and again in the terminal summary."""
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:2d}: {summary} | {detail}"
    ACCEPTANCE.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
