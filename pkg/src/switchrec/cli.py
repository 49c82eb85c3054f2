"""Command-line entry point.

    switchrec train     --data D.csv --item ID --out DIR
    switchrec threshold --model M.gbm --data D.csv --min-recall 0.8 --out T.csv
    switchrec recommend --config pipeline.json --users U.csv --out slates.csv
    switchrec simulate  --config experiment.json --out DIR
    switchrec shuffle   --config shuffle.json --out ctr.csv
    switchrec abtest    --data counts.csv --out result.csv

All randomness derives from ``--seed``. Validation failures exit with status 2.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from switchrec.domain import UserProfile, ValidationError
from switchrec.gb_filter import (
    THRESHOLD_REPORT_COLUMNS,
    BoostingParams,
    MaxImpacted,
    MinRecall,
    TrainingError,
    UnreachableTarget,
    gains_curve,
    load_model,
    logistic_loss,
    read_dataset,
    roc_auc,
    save_model,
    select_threshold,
    train_item_model,
)
from switchrec.gb_filter.encoding import coerce_value
from switchrec.knowledge_base import CATEGORICAL, NUMERIC, RuleParseError
from switchrec.pipeline import ConfigError, load_config, recommend_all
from switchrec.simulator.clicks import PositionClickModel, run_shuffle_experiment
from switchrec.simulator.experiment import load_experiment_spec, report_csv, report_table, run_ab_test
from switchrec.simulator.stats import two_proportion_ztest

EXIT_OK = 0
EXIT_INVALID = 2


class CliError(Exception):
    pass


@dataclass
class RunConfig:
    inputs: dict[str, Path] = field(default_factory=dict)
    seed: int = 0
    out: Path | None = None

    def check(self) -> None:
        """Fail before any work if an input is missing."""
        for role, path in self.inputs.items():
            if not path.is_file():
                raise CliError(f"{role} file not found: {path}")


def _fmt(x: float) -> str:
    return f"{x:.10g}"


def _write_text(path: Path | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8", newline="")


def _csv_text(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


# -- train -------------------------------------------------------------------

def cmd_train(args: argparse.Namespace) -> int:
    run = RunConfig({"dataset": Path(args.data)}, args.seed, Path(args.out))
    run.check()
    dataset = read_dataset(run.inputs["dataset"])
    if not dataset:
        raise CliError("dataset is empty")
    params = BoostingParams(
        n_trees=args.n_trees,
        max_depth=args.max_depth,
        learning_rate=args.learning_rate,
        min_samples_leaf=args.min_samples_leaf,
        seed=args.seed,
    )
    model, hold_idx = train_item_model(args.item, dataset, params, args.calibration_fraction)
    hold = [dataset[i] for i in hold_idx]
    y = np.array([s.label for s in hold])
    raw = model.ensemble.predict_proba(model.ensemble.encoder.encode([s.features for s in hold]))
    cal = model.calibrated_scores([s.features for s in hold])

    out = run.out
    out.mkdir(parents=True, exist_ok=True)
    save_model(model, out / f"{args.item}.gbm")

    metrics = [
        ("item", args.item),
        ("n_samples", str(len(dataset))),
        ("n_train", str(len(dataset) - len(hold))),
        ("n_holdout", str(len(hold))),
        ("positive_rate", _fmt(float(np.mean([s.label for s in dataset])))),
        ("n_trees", str(len(model.ensemble.trees))),
        ("train_logloss", _fmt(model.ensemble.train_loss[-1])),
    ]
    if 0 < y.sum() < y.size:
        metrics.append(("holdout_auc", _fmt(roc_auc(raw, y))))
        metrics.append(("holdout_logloss_raw", _fmt(logistic_loss(y, np.log(raw / (1 - raw))))))
    _write_text(out / f"{args.item}_metrics.csv", _csv_text(("metric", "value"), metrics))
    if y.sum() > 0:
        curve = gains_curve(cal, y)
        rows = [(_fmt(p.impacted_fraction), _fmt(p.recall), _fmt(p.threshold)) for p in curve.points]
        _write_text(out / f"{args.item}_gains.csv", _csv_text(("impacted_fraction", "recall", "threshold"), rows))
    print(f"wrote {out / (args.item + '.gbm')}", file=sys.stderr)
    return EXIT_OK


# -- threshold ---------------------------------------------------------------

def cmd_threshold(args: argparse.Namespace) -> int:
    run = RunConfig({"model": Path(args.model), "dataset": Path(args.data)}, args.seed)
    run.check()
    model = load_model(run.inputs["model"])
    dataset = read_dataset(run.inputs["dataset"])
    scores = model.calibrated_scores([s.features for s in dataset])
    labels = [s.label for s in dataset]
    policy = MinRecall(args.min_recall) if args.min_recall is not None else MaxImpacted(args.max_impacted)
    choice = select_threshold(gains_curve(scores, labels), policy)
    row = choice.as_row(model.item_id)
    text = _csv_text(
        THRESHOLD_REPORT_COLUMNS,
        [[row["item"], _fmt(row["threshold"]), _fmt(row["recall"]), _fmt(row["impacted_users"])]],
    )
    _write_text(Path(args.out) if args.out else None, text)
    if args.save_model:
        save_model(model.with_threshold(choice.threshold), Path(args.save_model))
    return EXIT_OK


# -- recommend ---------------------------------------------------------------

def read_users(path: Path, schema: dict[str, str]) -> list[tuple[UserProfile, list[str] | None]]:
    """Users CSV: ``user_id`` plus feature columns; optional ``regular`` column of ``|``-joined ids."""
    text = path.read_text(encoding="utf-8")
    if not text.strip():
        return []
    reader = csv.DictReader(io.StringIO(text))
    if "user_id" not in (reader.fieldnames or []):
        raise CliError(f"{path}: users file needs a user_id column")
    out = []
    for lineno, row in enumerate(reader, start=2):
        feats = {}
        for col, cell in row.items():
            if col in ("user_id", "regular") or cell is None or cell.strip() == "":
                continue
            kind = schema.get(col)
            if kind == CATEGORICAL:
                feats[col] = cell.strip()
            elif kind == NUMERIC:
                try:
                    feats[col] = float(cell)
                except ValueError:
                    raise CliError(f"{path}:{lineno}: {col} must be numeric, got {cell!r}") from None
            else:
                feats[col] = coerce_value(cell)
        regular = row.get("regular")
        regular_ids = [r for r in regular.split("|") if r] if regular else None
        try:
            profile = UserProfile(row["user_id"].strip(), feats)
        except ValidationError as exc:
            raise CliError(f"{path}:{lineno}: {exc}") from None
        out.append((profile, regular_ids))
    return out


def cmd_recommend(args: argparse.Namespace) -> int:
    run = RunConfig({"config": Path(args.config), "users": Path(args.users)}, args.seed)
    run.check()
    config = load_config(run.inputs["config"])
    users = read_users(run.inputs["users"], dict(config.rules.schema))
    rows = []
    for profile, regular in users:
        ((_, slate),) = recommend_all([profile], config, args.seed, regular)
        for pos, (item, kind) in enumerate(zip(slate.entries, slate.kinds), start=1):
            rows.append((profile.user_id, pos, item, kind.value))
    _write_text(Path(args.out) if args.out else None, _csv_text(("user_id", "position", "item_id", "kind"), rows))
    return EXIT_OK


# -- simulate / shuffle / abtest ---------------------------------------------

def cmd_simulate(args: argparse.Namespace) -> int:
    run = RunConfig({"experiment spec": Path(args.config)}, args.seed)
    run.check()
    spec = load_experiment_spec(run.inputs["experiment spec"])
    report = run_ab_test(
        spec.population, spec.control, spec.treatment, spec.click_model, spec.days, args.seed,
        salt=spec.salt, treatment_fraction=spec.treatment_fraction, regular=spec.regular,
    )
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _write_text(out / "report.csv", report_csv(report))
        _write_text(out / "report.txt", report_table(report))
    else:
        sys.stdout.write(report_table(report))
    return EXIT_OK


SHUFFLE_COLUMNS = ("position", "visible", "impressions", "clicks", "ctr", "ci_low", "ci_high")


def cmd_shuffle(args: argparse.Namespace) -> int:
    run = RunConfig({"shuffle spec": Path(args.config)}, args.seed)
    run.check()
    raw = json.loads(run.inputs["shuffle spec"].read_text(encoding="utf-8"))
    click_model = PositionClickModel.from_dict(raw["click_model"])
    report = run_shuffle_experiment(
        int(raw.get("n_users", 28235)),
        int(raw.get("sessions_per_user", 1)),
        click_model,
        np.random.default_rng(args.seed),
        raw.get("item_relevance"),
    )
    if report.no_data:
        print("no sessions simulated; empty report", file=sys.stderr)
    rows = [
        (p.position, int(p.visible), p.impressions, p.clicks, _fmt(p.ctr), _fmt(p.ci_low), _fmt(p.ci_high))
        for p in report.positions
    ]
    _write_text(Path(args.out) if args.out else None, _csv_text(SHUFFLE_COLUMNS, rows))
    return EXIT_OK


def cmd_abtest(args: argparse.Namespace) -> int:
    """Counts CSV with columns ``arm,impressions,conversions`` (arms: control, treatment)."""
    run = RunConfig({"counts": Path(args.data)}, args.seed)
    run.check()
    counts = {}
    with open(run.inputs["counts"], newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            counts[row["arm"].strip().lower()] = (int(row["conversions"]), int(row["impressions"]))
    if set(counts) != {"control", "treatment"}:
        raise CliError("counts file needs exactly one control and one treatment row")
    (c1, n1), (c2, n2) = counts["control"], counts["treatment"]
    res = two_proportion_ztest(c1, n1, c2, n2)
    rows = [(c1, n1, c2, n2, _fmt(c1 / n1), _fmt(c2 / n2),
             "" if res.uplift is None else _fmt(res.uplift), _fmt(res.z), _fmt(res.p_value))]
    header = ("control_conversions", "control_impressions", "treatment_conversions", "treatment_impressions",
              "control_rate", "treatment_rate", "uplift", "z", "p_value")
    _write_text(Path(args.out) if args.out else None, _csv_text(header, rows))
    return EXIT_OK


# -- wiring ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="global seed for every random stream")
    common.add_argument("--out", help="output file or directory (stdout when omitted, where allowed)")

    parser = argparse.ArgumentParser(prog="switchrec", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", parents=[common], help="train and calibrate one item's classifier")
    p.add_argument("--data", required=True)
    p.add_argument("--item", required=True)
    p.add_argument("--n-trees", type=int, default=100)
    p.add_argument("--max-depth", type=int, default=4)
    p.add_argument("--learning-rate", type=float, default=0.1)
    p.add_argument("--min-samples-leaf", type=int, default=20)
    p.add_argument("--calibration-fraction", type=float, default=0.2)
    p.set_defaults(func=cmd_train, out_required=True)

    p = sub.add_parser("threshold", parents=[common], help="pick a score threshold from the gains curve")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--min-recall", type=float)
    g.add_argument("--max-impacted", type=float)
    p.add_argument("--save-model", help="write a copy of the model carrying the chosen threshold")
    p.set_defaults(func=cmd_threshold)

    p = sub.add_parser("recommend", parents=[common], help="build slates for a users file")
    p.add_argument("--config", required=True)
    p.add_argument("--users", required=True)
    p.set_defaults(func=cmd_recommend)

    p = sub.add_parser("simulate", parents=[common], help="run a simulated A/B test")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("shuffle", parents=[common], help="shuffled-slate position CTR experiment")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_shuffle)

    p = sub.add_parser("abtest", parents=[common], help="two-proportion z-test on observed counts")
    p.add_argument("--data", required=True)
    p.set_defaults(func=cmd_abtest)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "out_required", False) and not args.out:
        parser.error(f"{args.command} requires --out")
    try:
        return args.func(args)
    except RuleParseError as exc:
        print(f"error: invalid rules file\n{exc}", file=sys.stderr)
    except TrainingError as exc:
        print(f"error: {exc}", file=sys.stderr)
    except (CliError, ConfigError, ValidationError, UnreachableTarget, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
