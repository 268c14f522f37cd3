import numpy as np
import pytest

from sigff.sampler import RngStream

SEED = 20261016


@pytest.fixture
def stream():
    return RngStream(SEED, ("tests",))


def within_se(estimate, target, se, k=5.0):
    return abs(estimate - target) <= k * se


def empirical_cov_check(draws, cov, k=5.0):
    """Entrywise |cov_hat - cov| <= k SE with SE from the fourth-moment formula."""
    x = draws - draws.mean(axis=0)
    n = len(x)
    emp = x.T @ x / (n - 1)
    prod_var = (x[:, :, None] * x[:, None, :]).var(axis=0, ddof=1)
    se = np.sqrt(prod_var / n)
    z = np.abs(emp - cov) / np.where(se > 0, se, np.inf)
    return float(z.max())


# acceptance results: criterion number -> list of (title, part, passed, detail)
ACCEPTANCE: dict = {}


def record(number, title, part, passed, detail=""):
    ACCEPTANCE.setdefault(number, []).append((title, part, bool(passed), detail))
    return bool(passed)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[n]
        ok = all(p[2] for p in parts)
        detail = "; ".join(f"{p[1]}: {p[3]}{'' if p[2] else ' (failed)'}" for p in parts)
        terminalreporter.write_line(f"criterion {n:2d} {parts[0][0]}: {'PASS' if ok else 'FAIL'}  [{detail}]")
