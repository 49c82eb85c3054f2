"""Synthetic traffic: position click model, shuffled-slate experiment, A/B tests."""

from switchrec.simulator.clicks import (
    PositionClickModel,
    PositionEstimate,
    SessionOutcome,
    ShuffleReport,
    run_shuffle_experiment,
    shuffled_slates,
    simulate_session,
    simulate_sessions,
)
from switchrec.simulator.experiment import (
    Arm,
    ArmStats,
    ExperimentReport,
    ExperimentSpec,
    assign_arm,
    load_experiment_spec,
    report_csv,
    report_table,
    run_ab_test,
)
from switchrec.simulator.population import FeatureGenerator, ItemBehavior, LogitModel, PopulationSpec, generate_users
from switchrec.simulator.stats import ZTestResult, normal_cdf, two_proportion_ztest, wald_interval

__all__ = [
    "Arm",
    "ArmStats",
    "ExperimentReport",
    "ExperimentSpec",
    "FeatureGenerator",
    "ItemBehavior",
    "LogitModel",
    "PopulationSpec",
    "PositionClickModel",
    "PositionEstimate",
    "SessionOutcome",
    "ShuffleReport",
    "ZTestResult",
    "assign_arm",
    "generate_users",
    "load_experiment_spec",
    "normal_cdf",
    "report_csv",
    "report_table",
    "run_ab_test",
    "run_shuffle_experiment",
    "shuffled_slates",
    "simulate_session",
    "simulate_sessions",
    "two_proportion_ztest",
    "wald_interval",
]
