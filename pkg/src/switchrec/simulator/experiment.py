"""Two-arm online experiments over a synthetic population.

The analysis unit is the user: a user counts as an impression once they open
the app during the experiment and as a conversion once they convert on any
slate item. Per-item guardrails use the same rule restricted to users who were
shown that item and conversions on that item.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from switchrec.pipeline import PipelineConfig, load_config, plan_user
from switchrec.rng import stable_hash64, user_stream
from switchrec.simulator.clicks import PositionClickModel, simulate_session
from switchrec.simulator.population import PopulationSpec, generate_user
from switchrec.simulator.stats import ZTestResult, two_proportion_ztest, wald_interval


class Arm(str, enum.Enum):
    CONTROL = "control"
    TREATMENT = "treatment"


def assign_arm(user_id: str, salt: str, treatment_fraction: float = 0.5) -> Arm:
    """Deterministic split: a stable hash of ``(salt, user_id)`` mapped to ``[0, 1)``."""
    if not 0.0 <= treatment_fraction <= 1.0:
        raise ValueError("treatment_fraction must lie in [0, 1]")
    u = stable_hash64(salt, user_id) / 2.0**64
    return Arm.TREATMENT if u < treatment_fraction else Arm.CONTROL


@dataclass(frozen=True)
class ArmStats:
    impressions: int
    conversions: int

    @property
    def rate(self) -> float:
        return self.conversions / self.impressions if self.impressions else math.nan

    @property
    def ci95(self) -> tuple[float, float]:
        return wald_interval(self.conversions, self.impressions)


@dataclass(frozen=True)
class Comparison:
    control: ArmStats
    treatment: ArmStats
    test: ZTestResult | None  # None when an arm has no impressions


def compare(control: ArmStats, treatment: ArmStats) -> Comparison:
    test = None
    if control.impressions > 0 and treatment.impressions > 0:
        test = two_proportion_ztest(control.conversions, control.impressions, treatment.conversions, treatment.impressions)
    return Comparison(control, treatment, test)


@dataclass(frozen=True)
class ExperimentReport:
    overall: Comparison
    guardrails: Mapping[str, Comparison]
    days: int
    n_users: int
    sessions: Mapping[str, int] = field(default_factory=dict)

    @property
    def uplift(self) -> float | None:
        return self.overall.test.uplift if self.overall.test else None

    @property
    def p_value(self) -> float:
        return self.overall.test.p_value if self.overall.test else math.nan

    @property
    def z(self) -> float:
        return self.overall.test.z if self.overall.test else math.nan


class _Counter:
    def __init__(self) -> None:
        self.users = 0
        self.converted = 0
        self.sessions = 0
        self.item_exposed: dict[str, int] = {}
        self.item_converted: dict[str, int] = {}


def _simulate_user(
    profile,
    config: PipelineConfig,
    population: PopulationSpec,
    click_model: PositionClickModel,
    days: int,
    seed: int,
    regular: Sequence[str] | None,
):
    plan = plan_user(profile, config, regular)
    rng = user_stream(seed, profile.user_id, "sessions")
    candidates = set(plan.eligible) | set(plan.regular)
    base_rel = {i: population.behavior(i).relevance(profile.features) for i in candidates}
    conversion = {i: population.behavior(i).conversion(profile.features) for i in candidates}
    decay = population.fatigue_decay
    streak: dict[str, int] = {}
    sessions = 0
    exposed: set[str] = set()
    converted: set[str] = set()
    for _ in range(days):
        for _ in range(int(rng.poisson(population.opens_per_day))):
            slate = plan.draw(rng)
            if decay > 0.0:
                relevance = {i: base_rel[i] * (1.0 - decay) ** streak.get(i, 0) for i in slate}
                streak = {i: streak.get(i, 0) + 1 for i in slate}
            else:
                relevance = base_rel
            outcome = simulate_session(slate, click_model, relevance, rng, conversion)
            sessions += 1
            exposed.update(slate.promoted)
            converted.update(outcome.conversions)
    return sessions, exposed, converted


def run_ab_test(
    population: PopulationSpec,
    control: PipelineConfig,
    treatment: PipelineConfig,
    click_model: PositionClickModel,
    days: int,
    seed: int,
    salt: str = "ab",
    treatment_fraction: float = 0.5,
    regular: Sequence[str] | None = None,
) -> ExperimentReport:
    """Simulate ``days`` of traffic for every user on the arm they hash into.

    Each user's features, sessions and arm come from streams keyed on their
    id, so results are independent of iteration order and reproducible.
    """
    counters = {Arm.CONTROL: _Counter(), Arm.TREATMENT: _Counter()}
    promoted_ids = sorted(set(control.rules.item_ids()) | set(treatment.rules.item_ids()))
    for user_id in population.user_ids():
        arm = assign_arm(user_id, salt, treatment_fraction)
        config = treatment if arm is Arm.TREATMENT else control
        profile = generate_user(population, user_id, seed)
        sessions, exposed, converted = _simulate_user(profile, config, population, click_model, days, seed, regular)
        c = counters[arm]
        c.sessions += sessions
        if sessions == 0:
            continue
        c.users += 1
        c.converted += bool(converted)
        for item in exposed:
            c.item_exposed[item] = c.item_exposed.get(item, 0) + 1
            if item in converted:
                c.item_converted[item] = c.item_converted.get(item, 0) + 1

    def arm_stats(c: _Counter, item: str | None = None) -> ArmStats:
        if item is None:
            return ArmStats(c.users, c.converted)
        return ArmStats(c.item_exposed.get(item, 0), c.item_converted.get(item, 0))

    ctl, trt = counters[Arm.CONTROL], counters[Arm.TREATMENT]
    return ExperimentReport(
        overall=compare(arm_stats(ctl), arm_stats(trt)),
        guardrails={i: compare(arm_stats(ctl, i), arm_stats(trt, i)) for i in promoted_ids},
        days=days,
        n_users=population.n_users,
        sessions={Arm.CONTROL.value: ctl.sessions, Arm.TREATMENT.value: trt.sessions},
    )


# -- experiment spec and report output --------------------------------------

@dataclass(frozen=True)
class ExperimentSpec:
    population: PopulationSpec
    click_model: PositionClickModel
    control: PipelineConfig
    treatment: PipelineConfig
    days: int = 14
    salt: str = "ab"
    treatment_fraction: float = 0.5
    regular: tuple[str, ...] | None = None


def load_experiment_spec(path: str | Path) -> ExperimentSpec:
    """Read an experiment spec (JSON). Pipeline configs are paths relative to the spec."""
    path = Path(path)
    raw = json.loads(path.read_text(encoding="utf-8"))
    base = path.parent
    return ExperimentSpec(
        population=PopulationSpec.from_dict(raw["population"]),
        click_model=PositionClickModel.from_dict(raw["click_model"]),
        control=load_config(base / raw["control"]),
        treatment=load_config(base / raw["treatment"]),
        days=int(raw.get("days", 14)),
        salt=str(raw.get("salt", "ab")),
        treatment_fraction=float(raw.get("treatment_fraction", 0.5)),
        regular=tuple(raw["regular"]) if "regular" in raw else None,
    )


REPORT_COLUMNS = ("scope", "arm", "impressions", "conversions", "rate", "ci_low", "ci_high", "uplift", "z", "p_value")


def _num(x: float | None) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return f"{x:.10g}"


def _comparison_rows(scope: str, comp: Comparison) -> list[list[str]]:
    rows = []
    for arm, stats in ((Arm.CONTROL, comp.control), (Arm.TREATMENT, comp.treatment)):
        lo, hi = stats.ci95
        rows.append([scope, arm.value, str(stats.impressions), str(stats.conversions),
                     _num(stats.rate), _num(lo), _num(hi), "", "", ""])
    t = comp.test
    rows.append([scope, "comparison", "", "", "", "", "",
                 _num(t.uplift) if t else "", _num(t.z) if t else "", _num(t.p_value) if t else ""])
    return rows


def report_rows(report: ExperimentReport) -> list[list[str]]:
    rows = _comparison_rows("overall", report.overall)
    for item, comp in report.guardrails.items():
        rows += _comparison_rows(f"item:{item}", comp)
    return rows


def report_csv(report: ExperimentReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    w.writerows(report_rows(report))
    return buf.getvalue()


def report_table(report: ExperimentReport) -> str:
    """Aligned plain-text rendering of :func:`report_csv`."""
    rows = [list(REPORT_COLUMNS)] + report_rows(report)
    widths = [max(len(r[i]) for r in rows) for i in range(len(REPORT_COLUMNS))]
    lines = [
        f"users={report.n_users} days={report.days} "
        + " ".join(f"sessions_{k}={v}" for k, v in report.sessions.items())
    ]
    for r in rows:
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip())
    return "\n".join(lines) + "\n"
