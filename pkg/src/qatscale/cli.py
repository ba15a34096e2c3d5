"""Command-line interface.

Every subcommand accepts ``--config FILE`` (given before the subcommand name)
holding a JSON object of option values; flags on the command line win, and
unknown keys are rejected. Exit status is 0 on success, 1 for invalid input
and 2 for numerical failures.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import sys
import time
from importlib import resources
from pathlib import Path
from typing import Any, Sequence

import click
import numpy as np

from . import __version__
from .errors import InfeasibleError, NumericalError, QatScaleError, ValidationError
from .fitter import FitConfig, build_report, fit_fraction_law, fit_loss_law, optimal_points, predict_records
from .law import (
    SCHEMA_VERSION,
    LossLawParams,
    ParamsFile,
    dumps_params,
    eval_fraction_law,
    eval_loss,
    load_params,
)
from .planner import (
    BudgetQuery,
    PlanQuery,
    bitwidth_plan,
    fp_crossover,
    fraction_growth_curve,
    optimal_fraction,
    wasted_tokens,
)
from .quantizers import ALGORITHMS, algorithm_for_bits, quantize, split_groups
from .records import ExperimentRecord, group_by_bitwidth, parse_count, read_records
from .schedules import SCHEMES, ScheduleConfig, emit_schedule, schedule_csv


class CountType(click.ParamType):
    """Integer count that also accepts integral scientific notation ("49.3e9")."""

    name = "count"

    def convert(self, value, param, ctx):
        try:
            return parse_count(value)
        except ValueError as exc:
            self.fail(str(exc), param, ctx)


COUNT = CountType()
FORMAT = click.Choice(["json", "csv"])


def _published_text() -> str:
    return resources.files("qatscale").joinpath("data/published_params.json").read_text(encoding="utf-8")


def _load_params_file(source: str) -> ParamsFile:
    from .law import loads_params

    if source == "published":
        return loads_params(_published_text())
    path = Path(source)
    if not path.is_file():
        raise ValidationError(f"--params: no such file {source!r}")
    return load_params(path)


def _loss_law(source: str) -> LossLawParams:
    pf = _load_params_file(source)
    if pf.loss_law is None:
        raise ValidationError(f"--params: {source!r} holds no loss-law parameters")
    return pf.loss_law


def _emit(text: str, output: str | None) -> None:
    if output in (None, "-"):
        click.echo(text, nl=False)
    else:
        Path(output).write_text(text, encoding="utf-8")


def _json(obj: Any) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _csv(rows: Sequence[dict[str, Any]], columns: Sequence[str] | None = None) -> str:
    buf = io.StringIO()
    columns = list(columns or (rows[0].keys() if rows else []))
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow(["" if row.get(c) is None else _cell(row.get(c)) for c in columns])
    return buf.getvalue()


def _cell(value: Any) -> str:
    return repr(value) if isinstance(value, float) else str(value)


def _table(rows: list[dict[str, Any]], fmt: str, output: str | None, columns: Sequence[str] | None = None) -> None:
    _emit(_json(rows) if fmt == "json" else _csv(rows, columns), output)


params_option = click.option(
    "--params", "params_source", default="published", show_default=True,
    help="Parameter JSON file, or 'published' for the built-in constants.",
)
output_option = click.option("--output", "-o", default=None, help="Write to this file instead of stdout.")


def format_option(default: str = "json"):
    return click.option("--format", "fmt", type=FORMAT, default=default, show_default=True, help="Output format.")


# ---------------------------------------------------------------------------
# group


def _load_config(ctx: click.Context, path: str | None) -> None:
    if path is None:
        return
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ValidationError(f"--config: cannot read {path!r}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"--config: {path!r} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ValidationError("--config: top level must be a JSON object")
    name = ctx.invoked_subcommand
    cmd = main.get_command(ctx, name) if name else None
    if cmd is None:
        return
    # keys are flag names ("max-iters" or "max_iters")
    allowed = {}
    for p in cmd.params:
        for opt in p.opts:
            if opt.startswith("--"):
                allowed[opt[2:].replace("-", "_")] = p.name
    values = {}
    for key, value in data.items():
        norm = key.replace("-", "_")
        if norm not in allowed:
            raise ValidationError(f"--config: unknown key {key!r} for '{name}'")
        values[allowed[norm]] = value
    ctx.default_map = {name: values}


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(__version__, message=f"%(prog)s %(version)s (params schema {SCHEMA_VERSION})")
@click.option("--config", "config_path", default=None, help="JSON file of option values for the subcommand.")
@click.pass_context
def main(ctx: click.Context, config_path: str | None) -> None:
    """Fit and query scaling laws for quantization-aware training budgets."""
    _load_config(ctx, config_path)


# ---------------------------------------------------------------------------
# records and fitting


def _read(path: str, fmt: str | None) -> list[ExperimentRecord]:
    if not Path(path).is_file():
        raise ValidationError(f"--records: no such file {path!r}")
    return read_records(path, fmt)


records_option = click.option("--records", "records_path", required=True, help="Experiment records (CSV or JSON).")
records_format_option = click.option(
    "--records-format", type=click.Choice(["csv", "json"]), default=None, help="Record file format (default: by suffix)."
)


@main.command()
@records_option
@records_format_option
def validate(records_path: str, records_format: str | None) -> None:
    """Check a record file and print a summary."""
    records = _read(records_path, records_format)
    summary = {
        "n_records": len(records),
        "bit_widths": {str(b): len(rs) for b, rs in group_by_bitwidth(records).items()},
        "model_params": sorted({r.model_params for r in records}),
    }
    _emit(_json(summary), None)


def _fit_date(explicit: str | None) -> str | None:
    if explicit:
        return explicit
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch:
        try:
            return time.strftime("%Y-%m-%d", time.gmtime(int(epoch)))
        except ValueError:
            raise ValidationError(f"SOURCE_DATE_EPOCH must be an integer, got {epoch!r}") from None
    return None


@main.command()
@records_option
@records_format_option
@output_option
@click.option("--report", "report_path", default=None, help="Write the fit report JSON here (default: stderr).")
@click.option("--residuals", "residuals_path", default=None, help="Write per-record predictions and residuals (CSV).")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--restarts", type=int, default=FitConfig.restarts, show_default=True)
@click.option("--max-iters", type=int, default=FitConfig.max_iters, show_default=True)
@click.option("--step-size", type=float, default=FitConfig.step_size, show_default=True)
@click.option("--step-decay", type=float, default=FitConfig.step_decay, show_default=True,
              help="Step-size multiplier applied every 100 iterations.")
@click.option("--huber-delta", type=float, default=FitConfig.huber_delta, show_default=True)
@click.option("--tol", type=float, default=FitConfig.tol, show_default=True,
              help="Stop when the relative objective change per 100 iterations drops below this (0 = never).")
@click.option("--reweight/--no-reweight", default=True, show_default=True, help="Inverse bit-width frequency weights.")
@click.option("--fp-regularization/--no-fp-regularization", default=True, show_default=True,
              help="Include B=16 records with the interaction-minimizing token split.")
@click.option("--holdout-fraction", type=float, default=0.0, show_default=True,
              help="Share of records held out (seeded) and scored separately in the report.")
@click.option("--with-fraction-law", is_flag=True, help="Also fit the fraction law to the records' best fractions.")
@click.option("--fit-date", default=None, help="Date stored in metadata (default: SOURCE_DATE_EPOCH, else null).")
def fit(
    records_path, records_format, output, report_path, residuals_path, seed, restarts, max_iters, step_size,
    step_decay, huber_delta, tol, reweight, fp_regularization, holdout_fraction, with_fraction_law, fit_date,
) -> None:
    """Fit the loss law to experiment records."""
    records = _read(records_path, records_format)
    config = FitConfig(
        huber_delta=huber_delta, restarts=restarts, max_iters=max_iters, step_size=step_size,
        step_decay=step_decay, tol=tol, reweight_by_bitwidth=reweight,
        fp_regularization=fp_regularization, seed=seed,
    )
    if not 0.0 <= holdout_fraction < 1.0:
        raise ValidationError(f"--holdout-fraction must lie in [0, 1), got {holdout_fraction}")
    train, held = records, []
    if holdout_fraction > 0:
        order = np.random.default_rng(seed).permutation(len(records))
        n_held = int(round(holdout_fraction * len(records)))
        held_idx = set(order[:n_held].tolist())
        train = [r for i, r in enumerate(records) if i not in held_idx]
        held = [r for i, r in enumerate(records) if i in held_idx]

    params, report = fit_loss_law(train, config)
    report_dict = report.to_dict()
    if held:
        report_dict["holdout"] = build_report(params, held).to_dict()["per_bit_width"]

    fraction_law = None
    metadata = {
        "fit_date": _fit_date(fit_date),
        "seed": seed,
        "n_records": len(train),
        "objective": report.objective,
    }
    if with_fraction_law:
        fraction_law, mae = fit_fraction_law(optimal_points(train), config)
        metadata["fraction_law_mae"] = mae
        report_dict["fraction_law_mae"] = mae

    _emit(dumps_params(params, fraction_law, metadata), output)
    if report_path:
        Path(report_path).write_text(_json(report_dict), encoding="utf-8")
    else:
        click.echo(_json(report_dict), err=True, nl=False)
    if residuals_path:
        rows = []
        for rec, pred in predict_records(params, records):
            rows.append({
                "model_params": rec.model_params, "d_fp_tokens": rec.d_fp, "d_qat_tokens": rec.d_qat,
                "bit_width": rec.bit_width, "loss": rec.loss, "predicted": pred, "residual": pred - rec.loss,
                "tag": rec.tag,
            })
        Path(residuals_path).write_text(_csv(rows), encoding="utf-8")


@main.command("fit-fraction-law")
@click.option("--records", "records_path", default=None, help="Records; the best fraction of each multi-fraction group is used.")
@records_format_option
@click.option("--points", "points_path", default=None, help="CSV with columns s_total,fraction.")
@click.option("--params", "params_source", default=None, help="Existing parameter file to merge the fitted 'a' into.")
@click.option("--huber-delta", type=float, default=FitConfig.huber_delta, show_default=True)
@output_option
def fit_fraction_law_cmd(records_path, records_format, points_path, params_source, huber_delta, output) -> None:
    """Fit the direct fraction law f = exp(-a / ln s_total)."""
    if (records_path is None) == (points_path is None):
        raise ValidationError("give exactly one of --records or --points")
    if records_path is not None:
        pts = optimal_points(_read(records_path, records_format))
    else:
        pts = _read_points(points_path)
    q, mae = fit_fraction_law(pts, FitConfig(huber_delta=huber_delta))
    base = _load_params_file(params_source) if params_source else ParamsFile()
    metadata = dict(base.metadata or {})
    metadata["fraction_law_mae"] = mae
    metadata["fraction_law_points"] = len(pts)
    _emit(dumps_params(base.loss_law, q, metadata), output)


def _read_points(path: str) -> list[tuple[float, float]]:
    if not Path(path).is_file():
        raise ValidationError(f"--points: no such file {path!r}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"s_total", "fraction"} <= set(reader.fieldnames):
            raise ValidationError("--points: header must contain s_total and fraction")
        pts = []
        for i, row in enumerate(reader):
            try:
                pts.append((float(row["s_total"]), float(row["fraction"])))
            except (TypeError, ValueError):
                raise ValidationError(f"--points: row {i}: s_total and fraction must be numbers") from None
    return pts


# ---------------------------------------------------------------------------
# planning


def _positive(name: str, value: float) -> float:
    if not (math.isfinite(value) and value > 0):
        raise ValidationError(f"{name} must be > 0, got {value!r}")
    return value


def _read_loss_queries(path: str) -> list[dict[str, float]]:
    if not Path(path).is_file():
        raise ValidationError(f"--queries: no such file {path!r}")
    cols = ("model_params", "d_fp_tokens", "d_qat_tokens", "bit_width")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in cols if c not in (reader.fieldnames or [])]
        if missing:
            raise ValidationError(f"--queries: missing column {missing[0]!r}")
        rows = []
        for i, row in enumerate(reader):
            out = {}
            for c in cols:
                try:
                    out[c] = _positive(c, float(row[c]))
                except (TypeError, ValueError):
                    raise ValidationError(f"--queries: row {i}, field '{c}': not a number: {row[c]!r}") from None
                except ValidationError as exc:
                    raise ValidationError(f"--queries: row {i}, field '{c}': {exc}") from None
            rows.append(out)
    return rows


@main.command("predict-loss")
@params_option
@click.option("--n", "n", type=float, default=None, help="Parameter count.")
@click.option("--dfp", type=float, default=None, help="Full-precision tokens.")
@click.option("--dqat", type=float, default=None, help="QAT tokens.")
@click.option("--bits", type=int, default=None, help="Bit width.")
@click.option("--queries", "queries_path", default=None,
              help="CSV of model_params,d_fp_tokens,d_qat_tokens,bit_width for batch prediction.")
@format_option()
@output_option
def predict_loss(params_source, n, dfp, dqat, bits, queries_path, fmt, output) -> None:
    """Evaluate the loss law."""
    p = _loss_law(params_source)
    if queries_path:
        rows = _read_loss_queries(queries_path)
        if rows:
            arr = np.array([[r[c] for c in ("model_params", "d_fp_tokens", "d_qat_tokens", "bit_width")] for r in rows])
            losses = np.atleast_1d(eval_loss(p, arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3]))
            for r, loss in zip(rows, losses):
                r["loss"] = float(loss)
        _table(rows, fmt, output, ["model_params", "d_fp_tokens", "d_qat_tokens", "bit_width", "loss"])
        return
    for name, value in (("--n", n), ("--dfp", dfp), ("--dqat", dqat), ("--bits", bits)):
        if value is None:
            raise ValidationError(f"{name} is required (or pass --queries)")
        _positive(name, value)
    loss = float(eval_loss(p, n, dfp, dqat, bits))
    row = {"model_params": n, "d_fp_tokens": dfp, "d_qat_tokens": dqat, "bit_width": bits, "loss": loss}
    _emit(_json(row) if fmt == "json" else _csv([row]), output)


@main.command("optimal-fraction")
@params_option
@click.option("--n", "n", type=float, required=True, help="Parameter count.")
@click.option("--d-total", type=float, required=True, help="Total token budget (FP + QAT).")
@click.option("--bits", type=int, required=True, help="QAT bit width.")
@click.option("--overhead", type=float, default=1.0, show_default=True, help="QAT cost per token relative to FP.")
@click.option("--curve-points", type=int, default=0, show_default=True, help="Also sample the loss over fractions.")
@format_option()
@output_option
def optimal_fraction_cmd(params_source, n, d_total, bits, overhead, curve_points, fmt, output) -> None:
    """Loss-minimizing QAT share of a token budget."""
    if curve_points < 0:
        raise ValidationError(f"--curve-points must be >= 0, got {curve_points}")
    res = optimal_fraction(PlanQuery(_loss_law(params_source), n, d_total, bits, overhead), curve_points)
    if fmt == "json":
        _emit(_json(res.to_dict()), output)
    else:
        rows = [{"fraction": f, "loss": l} for f, l in (res.loss_curve or [])]
        if not rows:
            rows = [{"fraction": res.optimal_fraction, "loss": res.loss_at_optimum}]
        _table(rows, "csv", output, ["fraction", "loss"])


@main.command("fraction-curve")
@params_option
@click.option("--n", "n", type=float, required=True, help="Parameter count.")
@click.option("--bits", type=int, required=True, help="QAT bit width.")
@click.option("--d-min", type=float, required=True, help="Smallest token budget.")
@click.option("--d-max", type=float, required=True, help="Largest token budget.")
@click.option("--points", type=int, default=32, show_default=True, help="Geometric grid size.")
@click.option("--overhead", type=float, default=1.0, show_default=True)
@format_option("csv")
@output_option
def fraction_curve(params_source, n, bits, d_min, d_max, points, overhead, fmt, output) -> None:
    """Optimal QAT fraction along a geometric token grid."""
    if points < 2:
        raise ValidationError(f"--points must be >= 2, got {points}")
    if not 0 < d_min < d_max:
        raise ValidationError(f"need 0 < --d-min < --d-max, got {d_min}, {d_max}")
    pf = _load_params_file(params_source)
    if pf.loss_law is None:
        raise ValidationError(f"--params: {params_source!r} holds no loss-law parameters")
    grid = np.geomspace(d_min, d_max, points)
    curve = fraction_growth_curve(pf.loss_law, n, bits, grid, overhead)
    rows = []
    for d, (s, f) in zip(grid.tolist(), curve):
        row = {"d_total": d, "s_total": s, "optimal_fraction": f}
        if pf.fraction_law is not None:
            row["fraction_law"] = float(eval_fraction_law(pf.fraction_law, s)) if s > 1 else None
        rows.append(row)
    _table(rows, fmt, output)


@main.command("wasted-tokens")
@params_option
@click.option("--n", "n", type=float, required=True, help="Parameter count.")
@click.option("--d-total", type=float, required=True, help="Total token budget.")
@click.option("--bits", type=int, required=True, help="QAT bit width.")
@click.option("--fraction", type=float, required=True, help="The sub-optimal QAT fraction actually used.")
@click.option("--overhead", type=float, default=1.0, show_default=True)
@output_option
def wasted_tokens_cmd(params_source, n, d_total, bits, fraction, overhead, output) -> None:
    """Share of the budget a sub-optimal QAT fraction wastes."""
    res = wasted_tokens(_loss_law(params_source), n, d_total, bits, fraction, overhead)
    _emit(_json(res.to_dict()), output)


@main.command("fp-crossover")
@params_option
@click.option("--n", "n_values", type=float, multiple=True, required=True, help="Parameter count (repeatable).")
@click.option("--bits", "bit_values", type=int, multiple=True, required=True, help="Bit width (repeatable).")
@click.option("--margin", type=float, default=0.005, show_default=True, help="Allowed relative perplexity gap.")
@click.option("--d-min", type=float, default=1e8, show_default=True)
@click.option("--d-max", type=float, default=1e15, show_default=True)
@format_option("csv")
@output_option
def fp_crossover_cmd(params_source, n_values, bit_values, margin, d_min, d_max, fmt, output) -> None:
    """Largest budget where QAT stays within a perplexity margin of full precision."""
    p = _loss_law(params_source)
    rows = []
    for n in n_values:
        for b in bit_values:
            c = fp_crossover(p, n, b, margin, (d_min, d_max))
            rows.append({"model_params": n, "bit_width": b, **c.to_dict()})
    _table(rows, fmt, output, ["model_params", "bit_width", "status", "d_total_tokens"])


def _bits_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise ValidationError(f"--candidate-bits must be a comma-separated list of integers, got {text!r}") from None


@main.command("bitwidth-plan")
@params_option
@click.option("--memory", "memory_values", type=float, multiple=True, required=True,
              help="Weight memory budget in bytes (repeatable).")
@click.option("--flops", "flops_values", type=float, multiple=True, required=True,
              help="Training FLOP budget (repeatable).")
@click.option("--candidate-bits", default="1,2,3,4,5,6,7,8", show_default=True)
@format_option("csv")
@output_option
def bitwidth_plan_cmd(params_source, memory_values, flops_values, candidate_bits, fmt, output) -> None:
    """Best bit width for each (memory, FLOPs) budget pair."""
    p = _loss_law(params_source)
    bits = _bits_list(candidate_bits)
    rows = []
    for m in memory_values:
        for c in flops_values:
            budget = BudgetQuery(m, c, bits)
            try:
                plan = bitwidth_plan(p, budget)
            except NumericalError:
                rows.append({"memory_budget": m, "flops_budget": c, "feasible": False})
                continue
            rows.append({**plan.to_dict(), "feasible": True})
    if not any(r["feasible"] for r in rows):
        raise InfeasibleError("every budget cell gives D < N for all candidate bit widths")
    _table(rows, fmt, output, ["memory_budget", "flops_budget", "feasible", "bit_width", "model_params", "d_total_tokens", "loss"])


@main.command("published-params")
@output_option
def published_params(output) -> None:
    """Print the built-in published law constants as a parameter file."""
    _emit(_published_text(), output)


# ---------------------------------------------------------------------------
# schedules and quantizers


@main.command()
@click.option("--scheme", type=click.Choice(SCHEMES), default="wsd", show_default=True)
@click.option("--peak-lr", type=float, required=True)
@click.option("--total-steps", type=COUNT, required=True)
@click.option("--warmup-steps", type=COUNT, default=1000, show_default=True)
@click.option("--cooldown-fraction", type=float, default=0.2, show_default=True)
@click.option("--qat-warmup-fraction", type=float, default=0.05, show_default=True)
@click.option("--fp-steps", type=COUNT, default=None, help="Full-precision steps (classic_qat and fused).")
@format_option("csv")
@output_option
def schedule(scheme, peak_lr, total_steps, warmup_steps, cooldown_fraction, qat_warmup_fraction, fp_steps, fmt, output) -> None:
    """Emit a per-step learning-rate schedule."""
    cfg = ScheduleConfig(
        peak_lr=peak_lr, total_steps=total_steps, scheme=scheme, warmup_steps=warmup_steps,
        cooldown_fraction=cooldown_fraction, qat_warmup_fraction=qat_warmup_fraction, fp_steps=fp_steps,
    )
    points = emit_schedule(cfg)
    if fmt == "csv":
        _emit(schedule_csv(points), output)
    else:
        _emit(_json([{"step": p.step, "lr": p.lr, "phase": p.phase} for p in points]), output)


def _read_matrix(path: str) -> np.ndarray:
    if not Path(path).is_file():
        raise ValidationError(f"--input: no such file {path!r}")
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                raise ValidationError(f"--input: row {i}: every cell must be a number") from None
    if not rows:
        raise ValidationError("--input: matrix is empty")
    if len({len(r) for r in rows}) != 1:
        raise ValidationError("--input: rows have different lengths")
    return np.array(rows)


@main.command("quant-check")
@click.option("--input", "input_path", required=True, help="CSV matrix, one output feature per row, no header.")
@click.option("--algo", type=click.Choice(ALGORITHMS), default=None, help="Default: chosen from --bits.")
@click.option("--bits", type=int, required=True)
@click.option("--alpha", type=float, default=None, help="Fixed scale for every row (default: per-row init).")
@format_option("csv")
@output_option
def quant_check(input_path, algo, bits, alpha, fmt, output) -> None:
    """Quantize a weight matrix and emit codes, dequantized values and STE gradients."""
    from .quantizers import QuantGroup

    matrix = _read_matrix(input_path)
    algo = algo or algorithm_for_bits(bits)
    if alpha is None:
        groups = split_groups(matrix, bits, algo)
    else:
        groups = [QuantGroup(row, alpha, bits) for row in matrix]
    rows = []
    for i, g in enumerate(groups):
        res = quantize(g, algo)
        for j in range(len(g.weights)):
            rows.append({
                "row": i, "col": j, "weight": float(g.weights[j]), "alpha": g.alpha,
                "code": int(res.codes[j]), "dequantized": float(res.dequantized[j]),
                "grad_w": float(res.grad_w[j]), "grad_alpha": float(res.grad_alpha[j]),
            })
    _table(rows, fmt, output)


# ---------------------------------------------------------------------------
# entry point


def run(argv: Sequence[str] | None = None) -> int:
    """Run the CLI and return its exit status instead of exiting."""
    try:
        main.main(args=list(argv) if argv is not None else None, prog_name="qatscale", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except ValidationError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except NumericalError as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        return 2
    except QatScaleError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    return 0


def entry() -> None:
    sys.exit(run())
