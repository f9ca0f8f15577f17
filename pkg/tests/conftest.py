import itertools
import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=200, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def brute_force_assignment(cost):
    """Minimum total over every one-to-one assignment of size min(n, m)."""
    cost = np.asarray(cost, dtype=float)
    n, m = cost.shape
    if n <= m:
        return min(sum(cost[i, p[i]] for i in range(n)) for p in itertools.permutations(range(m), n))
    return min(sum(cost[p[j], j] for j in range(m)) for p in itertools.permutations(range(n), m))


def brute_force_align(d_tilde, d):
    """Scan every j; nearest to d_tilde[0] with the smallest index on ties."""
    if len(d_tilde) == 0 or len(d) == 0:
        return 0.0
    best_j, best = 0, abs(d_tilde[0] - d[0])
    for j in range(1, len(d)):
        gap = abs(d_tilde[0] - d[j])
        if gap < best:
            best_j, best = j, gap
    total = 0.0
    for i in range(len(d_tilde)):
        if best_j + i >= len(d):
            break
        total += abs(d_tilde[i] - d[best_j + i])
    return total


def lcs_oracle(a, b):
    a, b = list(a), list(b)
    table = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i in range(len(a)):
        for j in range(len(b)):
            table[i + 1][j + 1] = table[i][j] + 1 if a[i] == b[j] else max(table[i][j + 1], table[i + 1][j])
    return table[-1][-1]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance reporting: one line per criterion at the end of the run

def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by this test")
    config._criteria = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or (report.when != "call" and report.passed):
        return
    number, title = mark.args
    results = item.config._criteria.setdefault(number, [title, True, []])
    if report.skipped:
        results[2].append(f"{item.name} skipped")
        return
    results[1] = results[1] and report.passed
    detail = "; ".join(f"{k} {v}" for k, v in item.user_properties)
    if report.when == "call" and detail:
        results[2].append(detail)


def pytest_terminal_summary(terminalreporter, config):
    criteria = getattr(config, "_criteria", {})
    if not criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(criteria):
        title, ok, details = criteria[number]
        extra = f"  ({' | '.join(details)})" if details else ""
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {number:>2}. {title}{extra}")
