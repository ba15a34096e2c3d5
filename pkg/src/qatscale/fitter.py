"""Fitting the loss law and the fraction law to experiment records.

The loss law is fit by minimizing a bit-width-reweighted Huber objective on
raw loss residuals. Optimization runs on log-parameters (so every fitted
coefficient stays positive) with Adam, many random restarts at once, and
keeps the restart with the lowest final objective.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from ._search import golden_section
from .errors import FitError, ValidationError
from .law import (
    FP_BIT_WIDTH,
    N_PARAMS,
    PARAM_NAMES,
    FractionLawParams,
    LossLawParams,
    eval_fraction_law,
    interaction_assignment,
    loss_and_jacobian,
    loss_from_logs,
)
from .records import ExperimentRecord, param_bytes

DEFAULT_INIT_RANGES: dict[str, tuple[float, float]] = {
    "alpha": (0.5, 4.0),
    "beta": (10.0, 1e4),
    "gamma": (0.1, 1.0),
    "zeta": (1.0, 500.0),
    "eta": (0.05, 1.0),
    "theta": (0.01, 10.0),
    "kappa": (0.2, 3.0),
    "phi": (1.0, 1e4),
    "chi": (0.2, 3.0),
    "psi": (0.05, 1.0),
    "omega": (0.01, 1.0),
    "lambda": (1.0, 1e3),
    "mu": (0.01, 1.0),
    "nu": (0.05, 1.0),
    "xi": (0.05, 1.0),
    "rho": (0.05, 1.0),
}

MIN_RECORDS = N_PARAMS + 1


@dataclass(frozen=True)
class FitConfig:
    huber_delta: float = 1e-2
    restarts: int = 256
    max_iters: int = 20_000
    step_size: float = 1e-2
    step_decay: float = 0.999  # multiplied in every `decay_every` iterations
    decay_every: int = 100
    momentum: float = 0.9
    second_moment_decay: float = 0.999
    adam_eps: float = 1e-12
    init_ranges: dict[str, tuple[float, float]] = field(default_factory=lambda: dict(DEFAULT_INIT_RANGES))
    reweight_by_bitwidth: bool = True
    fp_regularization: bool = True
    refresh_every: int = 100
    tol: float = 0.0  # relative objective change per refresh window below which fitting stops; 0 disables
    seed: int = 0

    def __post_init__(self):
        if not (math.isfinite(self.huber_delta) and self.huber_delta > 0):
            raise ValidationError(f"huber_delta must be > 0, got {self.huber_delta!r}")
        for name in ("restarts", "max_iters", "decay_every", "refresh_every"):
            if int(getattr(self, name)) < 1:
                raise ValidationError(f"{name} must be >= 1, got {getattr(self, name)!r}")
        if not self.step_size > 0:
            raise ValidationError(f"step_size must be > 0, got {self.step_size!r}")
        if not 0 < self.step_decay <= 1:
            raise ValidationError(f"step_decay must lie in (0, 1], got {self.step_decay!r}")
        for name in ("momentum", "second_moment_decay"):
            if not 0 <= getattr(self, name) < 1:
                raise ValidationError(f"{name} must lie in [0, 1), got {getattr(self, name)!r}")
        if self.tol < 0:
            raise ValidationError(f"tol must be >= 0, got {self.tol!r}")
        ranges = dict(DEFAULT_INIT_RANGES)
        unknown = set(self.init_ranges) - set(PARAM_NAMES)
        if unknown:
            raise ValidationError(f"unknown parameter(s) in init_ranges: {', '.join(sorted(unknown))}")
        ranges.update(self.init_ranges)
        for name, (lo, hi) in ranges.items():
            if not (0 < lo < hi and math.isfinite(hi)):
                raise ValidationError(f"init range for {name} must satisfy 0 < low < high, got ({lo}, {hi})")
        object.__setattr__(self, "init_ranges", {n: (float(ranges[n][0]), float(ranges[n][1])) for n in PARAM_NAMES})

    def init_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.array([self.init_ranges[n][0] for n in PARAM_NAMES])
        hi = np.array([self.init_ranges[n][1] for n in PARAM_NAMES])
        return lo, hi


def huber(residual, delta: float):
    """Huber penalty: quadratic within ``delta`` of zero, linear outside."""
    r = np.abs(np.asarray(residual, dtype=np.float64))
    out = np.where(r <= delta, 0.5 * r * r, delta * (r - 0.5 * delta))
    return float(out) if out.ndim == 0 else out


def fit_metrics(predicted: Sequence[float], actual: Sequence[float]) -> dict[str, float]:
    p = np.asarray(predicted, dtype=np.float64)
    a = np.asarray(actual, dtype=np.float64)
    if p.shape != a.shape or p.ndim != 1:
        raise ValidationError(f"predicted and actual must be 1-D of equal length, got {p.shape} and {a.shape}")
    if len(a) == 0:
        raise ValidationError("metrics need at least one point")
    err = p - a
    ss_tot = float(np.sum((a - a.mean()) ** 2))
    if ss_tot == 0.0:
        raise ValidationError("actual values have zero variance; R^2 is undefined")
    if np.any(a == 0):
        raise ValidationError("actual values must be nonzero for MAPE")
    return {
        "mae": float(np.mean(np.abs(err))),
        "r2": 1.0 - float(np.sum(err**2)) / ss_tot,
        "mape_percent": 100.0 * float(np.mean(np.abs(err) / np.abs(a))),
    }


# ---------------------------------------------------------------------------
# loss-law fit


@dataclass
class _FitData:
    ln_n: np.ndarray
    ln_dfp: np.ndarray
    ln_dqat: np.ndarray
    ln_d: np.ndarray
    bits: np.ndarray
    loss: np.ndarray
    weights: np.ndarray
    fp_mask: np.ndarray
    records: list[ExperimentRecord]


def bitwidth_weights(bits: Sequence[int]) -> np.ndarray:
    """Inverse-frequency weights per bit width, normalized to sum to the record count."""
    bits = np.asarray(bits)
    _, inverse, counts = np.unique(bits, return_inverse=True, return_counts=True)
    w = 1.0 / counts[inverse]
    return w * (len(bits) / w.sum())


def _prepare(records: Sequence[ExperimentRecord], config: FitConfig) -> _FitData:
    used = []
    for i, rec in enumerate(records):
        if rec.bit_width == FP_BIT_WIDTH:
            if config.fp_regularization:
                used.append(rec)
            continue
        if rec.d_fp <= 0 or rec.d_qat <= 0:
            raise ValidationError(
                f"record {i}: QAT records need d_fp > 0 and d_qat > 0 to be fit (got d_fp={rec.d_fp}, d_qat={rec.d_qat})"
            )
        used.append(rec)
    if len(used) < MIN_RECORDS:
        raise ValidationError(f"loss-law fit needs at least {MIN_RECORDS} records, got {len(used)}")
    bits = np.array([r.bit_width for r in used], dtype=np.float64)
    if len(np.unique(bits)) < 2:
        raise ValidationError("loss-law fit needs records spanning at least 2 bit widths")
    fp_mask = bits == FP_BIT_WIDTH
    d_total = np.array([r.d_total for r in used], dtype=np.float64)
    with np.errstate(divide="ignore"):
        ln_dfp = np.log(np.array([r.d_fp for r in used], dtype=np.float64))
        ln_dqat = np.log(np.array([r.d_qat for r in used], dtype=np.float64))
    weights = bitwidth_weights(bits) if config.reweight_by_bitwidth else np.ones(len(used))
    return _FitData(
        ln_n=np.log(np.array([r.model_params for r in used], dtype=np.float64)),
        ln_dfp=ln_dfp,
        ln_dqat=ln_dqat,
        ln_d=np.log(d_total),
        bits=bits,
        loss=np.array([r.loss for r in used]),
        weights=weights,
        fp_mask=fp_mask,
        records=used,
    )


def _assigned_logs(data: _FitData, p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-restart log token counts with FP records split by the interaction assignment.

    ``p`` has shape (R, 16); returns arrays of shape (R, n).
    """
    R = p.shape[0]
    ln_dfp = np.broadcast_to(data.ln_dfp, (R, len(data.loss))).copy()
    ln_dqat = np.broadcast_to(data.ln_dqat, (R, len(data.loss))).copy()
    if data.fp_mask.any():
        xi, rho = p[:, 14:15], p[:, 15:16]
        ln_d = data.ln_d[data.fp_mask][None, :]
        ln_dfp[:, data.fp_mask] = ln_d + np.log(xi / (xi + rho))
        ln_dqat[:, data.fp_mask] = ln_d + np.log(rho / (xi + rho))
    return ln_dfp, ln_dqat


def _objective(data: _FitData, p: np.ndarray, delta: float) -> np.ndarray:
    ln_dfp, ln_dqat = _assigned_logs(data, p)
    pred = loss_from_logs(p[:, None, :], data.ln_n, ln_dfp, ln_dqat, data.bits)
    return np.sum(data.weights * huber(pred - data.loss, delta), axis=1)


@dataclass
class FitReport:
    per_bit_width: dict[int, dict]
    objective: float
    restart_index: int
    iterations: int
    restarts_completed: int
    restarts_discarded: int
    n_records: int
    restart_objectives: list[float | None] = field(default_factory=list)  # None marks a discarded restart

    def to_dict(self) -> dict:
        out = asdict(self)
        out["per_bit_width"] = {str(k): v for k, v in self.per_bit_width.items()}
        return out


def predict_records(p: LossLawParams, records: Iterable[ExperimentRecord]) -> list[tuple[ExperimentRecord, float]]:
    """Law predictions for records; B=16 records use the interaction-minimizing split."""
    out = []
    pv = p.as_array()
    for rec in records:
        if rec.bit_width == FP_BIT_WIDTH:
            d_fp, d_qat = interaction_assignment(p, rec.d_total)
        else:
            d_fp, d_qat = rec.d_fp, rec.d_qat
        with np.errstate(divide="ignore"):
            pred = loss_from_logs(pv, math.log(rec.model_params), np.log(float(d_fp)), np.log(float(d_qat)), rec.bit_width)
        out.append((rec, float(pred)))
    return out


def empirical_optima(records: Iterable[ExperimentRecord]) -> list[tuple[ExperimentRecord, list[ExperimentRecord]]]:
    """Best-loss record of every (N, D_total, B) group that tested at least two QAT fractions."""
    groups: dict[tuple[int, int, int], list[ExperimentRecord]] = defaultdict(list)
    for rec in records:
        if rec.bit_width != FP_BIT_WIDTH and rec.d_fp > 0 and rec.d_qat > 0:
            groups[(rec.model_params, rec.d_total, rec.bit_width)].append(rec)
    out = []
    for key in sorted(groups):
        members = groups[key]
        if len({r.d_qat for r in members}) < 2:
            continue
        best = min(members, key=lambda r: (r.loss, r.d_qat))
        out.append((best, members))
    return out


def build_report(
    p: LossLawParams,
    records: Sequence[ExperimentRecord],
    objective: float = float("nan"),
    restart_index: int = -1,
    iterations: int = 0,
    restarts_completed: int = 0,
    restarts_discarded: int = 0,
    restart_objectives: Sequence[float | None] = (),
) -> FitReport:
    from .planner import PlanQuery, optimal_fraction

    preds = predict_records(p, records)
    per_b: dict[int, dict] = {}
    by_b: dict[int, list[tuple[float, float]]] = defaultdict(list)
    for rec, pred in preds:
        by_b[rec.bit_width].append((pred, rec.loss))
    frac_err: dict[int, list[float]] = defaultdict(list)
    for best, _ in empirical_optima(records):
        f_star = optimal_fraction(PlanQuery(p, best.model_params, best.d_total, best.bit_width)).optimal_fraction
        frac_err[best.bit_width].append(abs(f_star - best.qat_fraction))
    for b in sorted(by_b):
        pred, actual = (np.array(x) for x in zip(*by_b[b]))
        err = np.abs(pred - actual)
        try:
            r2 = fit_metrics(pred, actual)["r2"]
        except ValidationError:
            r2 = None
        per_b[b] = {
            "n_records": int(len(actual)),
            "loss_mae": float(err.mean()),
            "loss_r2": r2,
            "loss_mape_percent": 100.0 * float(np.mean(err / actual)),
            "fraction_mae": float(np.mean(frac_err[b])) if frac_err.get(b) else None,
        }
    return FitReport(
        per_bit_width=per_b,
        objective=float(objective),
        restart_index=int(restart_index),
        iterations=int(iterations),
        restarts_completed=int(restarts_completed),
        restarts_discarded=int(restarts_discarded),
        n_records=len(records),
        restart_objectives=list(restart_objectives),
    )


def fit_loss_law(records: Sequence[ExperimentRecord], config: FitConfig | None = None) -> tuple[LossLawParams, FitReport]:
    """Fit the 16 law parameters to records.

    Objective: sum_i w_i * huber(L(p; record_i) - loss_i, delta), with w_i the
    normalized inverse frequency of record i's bit width. B=16 records (when
    ``fp_regularization`` is set) get their FP/QAT split from the interaction
    assignment of the current iterate, refreshed every ``refresh_every`` steps.
    A restart whose loss or gradient turns non-finite is discarded.
    """
    config = config or FitConfig()
    data = _prepare(records, config)
    rng = np.random.default_rng(config.seed)
    lo, hi = config.init_bounds()
    theta = rng.uniform(np.log(lo), np.log(hi), size=(config.restarts, N_PARAMS))
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    alive = np.ones(config.restarts, dtype=bool)
    delta = config.huber_delta
    b1, b2 = config.momentum, config.second_moment_decay

    ln_dfp, ln_dqat = _assigned_logs(data, np.exp(theta))
    last_obj = None
    it = 0
    for it in range(1, config.max_iters + 1):
        idx = np.flatnonzero(alive)
        if len(idx) == 0:
            break
        with np.errstate(all="ignore"):
            p = np.exp(theta[idx])
            if data.fp_mask.any() and (it - 1) % config.refresh_every == 0:
                ln_dfp[idx], ln_dqat[idx] = _assigned_logs(data, p)
            pred, jac = loss_and_jacobian(p[:, None, :], data.ln_n, ln_dfp[idx], ln_dqat[idx], data.bits)
            resid = pred - data.loss
            dh = data.weights * np.clip(resid, -delta, delta)
            grad = np.einsum("rn,rnk->rk", dh, jac) * p
        bad = ~(np.all(np.isfinite(grad), axis=1) & np.all(np.isfinite(pred), axis=1))
        if bad.any():
            alive[idx[bad]] = False
            keep = ~bad
            idx, grad = idx[keep], grad[keep]
            if len(idx) == 0:
                break
        step = config.step_size * config.step_decay ** ((it - 1) // config.decay_every)
        m[idx] = b1 * m[idx] + (1 - b1) * grad
        v[idx] = b2 * v[idx] + (1 - b2) * grad * grad
        m_hat = m[idx] / (1 - b1**it)
        v_hat = v[idx] / (1 - b2**it)
        theta[idx] -= step * m_hat / (np.sqrt(v_hat) + config.adam_eps)

        if config.tol > 0 and it % config.refresh_every == 0:
            with np.errstate(all="ignore"):
                obj = _objective(data, np.exp(theta[idx]), delta)
            if last_obj is not None and len(last_obj) == len(obj):
                change = np.abs(last_obj - obj) / np.maximum(np.abs(obj), 1e-300)
                if np.all(change < config.tol):
                    break
            last_obj = obj

    idx = np.flatnonzero(alive)
    with np.errstate(all="ignore"):
        final = np.full(config.restarts, np.inf)
        if len(idx):
            final[idx] = _objective(data, np.exp(theta[idx]), delta)
    finite = np.isfinite(final)
    if not finite.any():
        raise FitError(f"all {config.restarts} restarts diverged")
    best = int(np.argmin(np.where(finite, final, np.inf)))
    params = LossLawParams.from_sequence(np.exp(theta[best]))
    report = build_report(
        params,
        data.records,
        objective=float(final[best]),
        restart_index=best,
        iterations=it,
        restarts_completed=int(finite.sum()),
        restarts_discarded=int(config.restarts - finite.sum()),
        restart_objectives=[float(v) if np.isfinite(v) else None for v in final],
    )
    return params, report


def loss_objective(p: LossLawParams, records: Sequence[ExperimentRecord], config: FitConfig | None = None) -> float:
    """Weighted Huber objective of a fixed parameter vector on ``records``."""
    config = config or FitConfig()
    data = _prepare(records, config)
    return float(_objective(data, p.as_array()[None, :], config.huber_delta)[0])


# ---------------------------------------------------------------------------
# fraction-law fit

A_SEARCH_RANGE = (1e-4, 1e4)
A_SCAN_POINTS = 4001


def optimal_points(records: Iterable[ExperimentRecord]) -> list[tuple[float, float]]:
    """(s_total, best QAT fraction) of every multi-fraction record group."""
    pts = []
    for best, _ in empirical_optima(records):
        s_total = best.d_total / param_bytes(best.model_params, best.bit_width)
        pts.append((s_total, best.qat_fraction))
    return pts


def fit_fraction_law(
    optimal_points: Sequence[tuple[float, float]], config: FitConfig | None = None
) -> tuple[FractionLawParams, float]:
    """Fit ``a`` in f = exp(-a / ln s_total) by Huber minimization; returns (params, MAE)."""
    config = config or FitConfig()
    pts = np.asarray(optimal_points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
        raise ValidationError("fraction-law fit needs at least 2 (s_total, fraction) points")
    s, f = pts[:, 0], pts[:, 1]
    if not np.all(np.isfinite(s)) or np.any(s <= 1):
        raise ValidationError("every s_total must be > 1")
    if not np.all(np.isfinite(f)) or np.any((f <= 0) | (f > 1)):
        raise ValidationError("every fraction must lie in (0, 1]")
    inv_ln_s = 1.0 / np.log(s)
    delta = config.huber_delta

    def objective(log_a):
        a = np.exp(np.asarray(log_a))[..., None]
        return np.sum(huber(np.exp(-a * inv_ln_s) - f, delta), axis=-1)

    grid = np.linspace(math.log(A_SEARCH_RANGE[0]), math.log(A_SEARCH_RANGE[1]), A_SCAN_POINTS)
    k = int(np.argmin(objective(grid)))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
    log_a, _ = golden_section(objective, np.array([lo]), np.array([hi]), tol=1e-13)
    q = FractionLawParams(math.exp(float(log_a[0])))
    mae = float(np.mean(np.abs(eval_fraction_law(q, s) - f)))
    return q, mae
