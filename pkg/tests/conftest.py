import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def random_sequence(rng, n_max=200, d_max=8, n_min=1):
    """Valid degree sequence: positive degrees with even sum."""
    n = int(rng.integers(n_min, n_max + 1))
    d = rng.integers(1, d_max + 1, size=n)
    if d.sum() % 2:
        i = int(rng.integers(n))
        d[i] = d[i] + 1 if d[i] < d_max else d[i] - 1
        if d.sum() % 2:  # d_max == 1 corner
            d = np.append(d, 1)
    return d


def random_table(rng, kmax=10, support=None):
    """Random probability table on a random subset of 1..kmax."""
    ks = np.arange(1, kmax + 1)
    if support is None:
        support = int(rng.integers(1, kmax + 1))
    chosen = np.sort(rng.choice(ks, size=support, replace=False))
    w = rng.random(len(chosen)) + 0.05
    w /= w.sum()
    return {int(k): float(v) for k, v in zip(chosen, w)}


@pytest.fixture
def rng():
    return np.random.default_rng(20260101)


def random_target(rng, kmax=8):
    """Random (q, p) with 0 <= q <= p, q_0 = 0, q_1 > 0 and sum k q_k > 2 sum q_k."""
    while True:
        p = random_table(rng, kmax)
        if p.get(1, 0) == 0 or max(p) < 3:
            continue
        q = {k: v * float(rng.uniform(0.05, 1.0)) for k, v in p.items()}
        if sum(k * v for k, v in q.items()) > 2 * sum(q.values()) * (1 + 1e-9):
            return q, p


ACCEPTANCE_LINES: list[str] = []


def acceptance_line(number: int, ok: bool, detail: str) -> str:
    """Record and print one pass/fail line for an acceptance criterion."""
    line = f"acceptance {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
