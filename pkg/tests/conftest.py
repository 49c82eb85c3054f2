import numpy as np
import pytest

from switchrec.domain import UserProfile
from switchrec.gb_filter import BoostingParams, LabeledSample
from switchrec.gb_filter.model import train_item_model

RULES_TEXT = """\
# desk-scale knowledge base
credit_card: credit_score >= 700 AND age >= 18
loan: (income > 2000 OR credit_score > 650) AND NOT region = "X"
open_banking: device_os IN ("ios", "android")
gift_card: TRUE
"""


def synthetic_dataset(n, seed, weight=2.0, base=-1.0):
    """Two numeric features and one categorical; label depends on ``a`` and region."""
    rng = np.random.default_rng(seed)
    a = rng.normal(size=n)
    b = rng.normal(size=n)
    region = rng.choice(["N", "S", "X"], size=n)
    logit = base + weight * a + np.where(region == "S", 1.0, 0.0)
    y = (rng.random(n) < 1 / (1 + np.exp(-logit))).astype(int)
    return [
        LabeledSample({"a": float(ai), "b": float(bi), "region": str(ri)}, int(yi))
        for ai, bi, ri, yi in zip(a, b, region, y)
    ]


def separable_dataset(n=200, seed=0):
    rng = np.random.default_rng(seed)
    rows = []
    while len(rows) < n:
        a, b = rng.uniform(-1, 1, 2)
        if abs(a + b) < 0.1:  # keep a margin around the boundary
            continue
        rows.append(LabeledSample({"a": float(a), "b": float(b)}, int(a + b > 0)))
    return rows


@pytest.fixture(scope="session")
def trained_models():
    """Three calibrated item models trained on differently-weighted data."""
    models = {}
    for k, (item, weight) in enumerate([("cc", 2.0), ("ob", 1.0), ("loan", -1.5)]):
        data = synthetic_dataset(1500, seed=10 + k, weight=weight)
        model, _ = train_item_model(item, data, BoostingParams(n_trees=30, max_depth=3, seed=k))
        models[item] = model
    return models


@pytest.fixture
def profiles():
    rng = np.random.default_rng(99)
    return [
        UserProfile(f"u{i}", {"a": float(rng.normal()), "b": float(rng.normal()), "region": str(rng.choice(["N", "S", "X"]))})
        for i in range(40)
    ]


# -- acceptance report -------------------------------------------------------

_criteria: dict[int, tuple[str, str, float]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion this test checks")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    if report.when == "call" or (report.when == "setup" and not report.passed):
        _criteria[number] = (title, "PASS" if report.passed else "FAIL", report.duration)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, verdict, secs = _criteria[number]
        terminalreporter.write_line(f"[{verdict}] criterion {number:>2}: {title} ({secs:.2f}s)")
