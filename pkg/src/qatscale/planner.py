"""Planning queries on a fitted loss law.

Token mode splits a budget as d_fp + d_qat = d_total. With a QAT overhead
factor r > 1 the split is over compute instead: d_fp + d_qat' = d_total where
d_qat' = r * d_qat is the FLOP-equivalent QAT token count, and the law sees
the real QAT tokens d_qat = d_qat' / r.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._search import bisect_decreasing, golden_section
from .errors import DegenerateLawError, InfeasibleError, ValidationError
from .law import (
    LossLawParams,
    eval_loss,
    fp_proxy_loss,
    loss_asymptote,
    loss_from_logs,
)
from .records import MAX_BIT_WIDTH, param_bytes

FRACTION_LO = 1e-6
FRACTION_HI = 1.0 - 1e-6
SCAN_POINTS = 1024
FRACTION_TOL = 1e-7
WASTED_LOSS_TOL = 1e-9
CROSSOVER_RANGE = (1e8, 1e15)
DEFAULT_MARGIN = 0.005
DEFAULT_CANDIDATE_BITS = tuple(range(1, 9))

_SCAN = np.geomspace(FRACTION_LO, FRACTION_HI, SCAN_POINTS)


def apply_overhead(d_qat_tokens, r: float):
    """Real QAT tokens bought by ``d_qat_tokens`` FLOP-equivalent tokens at overhead ``r``."""
    if not r >= 1.0:
        raise ValidationError(f"overhead r must be >= 1, got {r!r}")
    return d_qat_tokens / r


def _check_bit_width(B) -> int:
    if isinstance(B, bool) or int(B) != B or not 1 <= int(B) <= MAX_BIT_WIDTH:
        raise ValidationError(f"bit width must be an integer in 1..{MAX_BIT_WIDTH}, got {B!r}")
    return int(B)


@dataclass(frozen=True)
class PlanQuery:
    params: LossLawParams
    N: float
    d_total: float
    B: int
    r: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.N) and self.N > 0):
            raise ValidationError(f"N must be > 0, got {self.N!r}")
        if not (math.isfinite(self.d_total) and self.d_total > 0):
            raise ValidationError(f"d_total must be > 0, got {self.d_total!r}")
        object.__setattr__(self, "B", _check_bit_width(self.B))
        if not (math.isfinite(self.r) and self.r >= 1.0):
            raise ValidationError(f"overhead r must be >= 1, got {self.r!r}")


@dataclass(frozen=True)
class PlanResult:
    optimal_fraction: float
    d_fp: float
    d_qat: float
    loss_at_optimum: float
    overhead: float = 1.0
    loss_curve: list[tuple[float, float]] | None = None

    def to_dict(self) -> dict:
        out = {
            "optimal_fraction": round(self.optimal_fraction, 6),
            "d_fp_tokens": int(round(self.d_fp)),
            "d_qat_tokens": int(round(self.d_qat)),
            "loss_at_optimum": self.loss_at_optimum,
            "perplexity_at_optimum": math.exp(self.loss_at_optimum),
            "overhead": self.overhead,
        }
        if self.loss_curve is not None:
            out["loss_curve"] = [{"fraction": round(f, 6), "loss": l} for f, l in self.loss_curve]
        return out


def check_interior_optimum(p: LossLawParams) -> None:
    """Raise unless the loss diverges at both ends of the fraction range."""
    diverges_low = (p.phi > 0 and p.omega > 0) or (p.lambda_ > 0 and p.rho > 0)
    diverges_high = p.lambda_ > 0 and p.xi > 0
    if not (diverges_low and diverges_high):
        raise DegenerateLawError(
            "law has a finite loss at a fraction boundary (needs phi*omega > 0 or lambda*rho > 0, "
            f"and lambda*xi > 0; got omega={p.omega}, rho={p.rho}, xi={p.xi}); "
            "sample the loss curve with loss_curve() instead"
        )


def _fraction_loss_fn(pv: np.ndarray, ln_n, ln_d, B, ln_r):
    """Vectorized loss at QAT budget share f for one or many (N, d_total) queries."""

    def fn(f):
        ln_dfp = ln_d + np.log1p(-f)
        ln_dqat = ln_d + np.log(f) - ln_r
        return loss_from_logs(pv, ln_n, ln_dfp, ln_dqat, B)

    return fn


def _optimal_fractions(p: LossLawParams, N, d_total, B, r: float = 1.0):
    """Vectorized argmin over the QAT share for arrays of (N, d_total)."""
    N, d_total = np.broadcast_arrays(np.asarray(N, dtype=np.float64), np.asarray(d_total, dtype=np.float64))
    N, d_total = N.ravel(), d_total.ravel()
    pv = p.as_array()
    ln_n = np.log(N)[:, None]
    ln_d = np.log(d_total)[:, None]
    ln_r = math.log(r)
    scan_loss = _fraction_loss_fn(pv, ln_n, ln_d, B, ln_r)(_SCAN[None, :])
    k = np.argmin(scan_loss, axis=1)
    lo = _SCAN[np.maximum(k - 1, 0)]
    hi = _SCAN[np.minimum(k + 1, SCAN_POINTS - 1)]
    fn = _fraction_loss_fn(pv, ln_n[:, 0], ln_d[:, 0], B, ln_r)
    f_gs, loss_gs = golden_section(fn, lo, hi, FRACTION_TOL)
    scan_best = scan_loss[np.arange(len(k)), k]
    use_scan = scan_best < loss_gs
    f_best = np.where(use_scan, _SCAN[k], f_gs)
    loss_best = np.where(use_scan, scan_best, loss_gs)
    return f_best, loss_best


def loss_curve(p: LossLawParams, N: float, d_total: float, B: int, fractions: Sequence[float], r: float = 1.0):
    """Sampled (fraction, loss) pairs; fractions are shares of the (FLOP-equivalent) budget."""
    fr = np.asarray(fractions, dtype=np.float64)
    if np.any((fr <= 0) | (fr >= 1)):
        raise ValidationError("curve fractions must lie strictly inside (0, 1)")
    d_fp = (1.0 - fr) * d_total
    d_qat = apply_overhead(fr * d_total, r)
    losses = eval_loss(p, N, d_fp, d_qat, B)
    return list(zip(fr.tolist(), np.atleast_1d(losses).tolist()))


def optimal_fraction(q: PlanQuery, curve_points: int = 0) -> PlanResult:
    """Loss-minimizing QAT share of the budget.

    A 1024-point log-spaced scan over [1e-6, 1 - 1e-6] brackets the minimum,
    then golden-section search narrows it to 1e-7.
    """
    p = q.params
    check_interior_optimum(p)
    f, loss = _optimal_fractions(p, q.N, q.d_total, q.B, q.r)
    f, loss = float(f[0]), float(loss[0])
    curve = None
    if curve_points:
        curve = loss_curve(p, q.N, q.d_total, q.B, np.linspace(0, 1, curve_points + 2)[1:-1], q.r)
    d_fp = (1.0 - f) * q.d_total
    return PlanResult(
        optimal_fraction=f,
        d_fp=d_fp,
        d_qat=apply_overhead(f * q.d_total, q.r),
        loss_at_optimum=loss,
        overhead=q.r,
        loss_curve=curve,
    )


def optimal_loss(p: LossLawParams, N: float, d_total, B: int, r: float = 1.0):
    """Minimum-over-split loss; vectorized over ``d_total``."""
    check_interior_optimum(p)
    _, loss = _optimal_fractions(p, N, d_total, _check_bit_width(B), r)
    return float(loss[0]) if np.ndim(d_total) == 0 else loss


def fraction_growth_curve(p: LossLawParams, N: float, B: int, d_grid: Sequence[float], r: float = 1.0):
    """(s_total, f*) along an increasing grid of total token budgets."""
    d = np.asarray(d_grid, dtype=np.float64)
    if d.ndim != 1 or len(d) == 0:
        raise ValidationError("d_grid must be a nonempty 1-D sequence")
    if np.any(np.diff(d) <= 0):
        raise ValidationError("d_grid must be strictly increasing")
    for value in d:
        PlanQuery(p, N, float(value), B, r)
    check_interior_optimum(p)
    f, _ = _optimal_fractions(p, N, d, B, r)
    s_total = d / param_bytes(N, B)
    return list(zip(s_total.tolist(), f.tolist()))


@dataclass(frozen=True)
class WastedTokens:
    wasted_fraction_percent: float
    d_equivalent: float
    loss_suboptimal: float
    optimal_fraction: float

    def to_dict(self) -> dict:
        return {
            "wasted_fraction_percent": self.wasted_fraction_percent,
            "d_equivalent_tokens": int(round(self.d_equivalent)),
            "loss_suboptimal": self.loss_suboptimal,
            "optimal_fraction": round(self.optimal_fraction, 6),
        }


def wasted_tokens(p: LossLawParams, N: float, d_total: float, B: int, f_sub: float, r: float = 1.0) -> WastedTokens:
    """Share of ``d_total`` a sub-optimal QAT fraction throws away.

    Finds the smaller budget d_equiv whose optimal-split loss equals the loss
    at ``f_sub``; the envelope of optimal losses decreases in d_total, so a
    log-space bisection suffices.
    """
    q = PlanQuery(p, N, d_total, B, r)
    if not 0.0 < f_sub < 1.0:
        raise ValidationError(f"f_sub must lie in (0, 1), got {f_sub!r}")
    opt = optimal_fraction(q)
    loss_sub = float(eval_loss(p, N, (1.0 - f_sub) * d_total, apply_overhead(f_sub * d_total, r), q.B))
    if loss_sub <= loss_asymptote(p, q.B):
        raise InfeasibleError(f"sub-optimal loss {loss_sub} is below the law's asymptote")
    if loss_sub <= opt.loss_at_optimum:
        return WastedTokens(0.0, float(d_total), loss_sub, opt.optimal_fraction)

    def envelope(d: float) -> float:
        return optimal_loss(p, N, d, q.B, r)

    lo = d_total / 2.0
    while envelope(lo) < loss_sub:
        lo /= 2.0
        if lo < 1.0:
            raise InfeasibleError("no token budget >= 1 reaches the sub-optimal loss")
    d_equiv = bisect_decreasing(envelope, loss_sub, lo, d_total, WASTED_LOSS_TOL)
    wasted = 100.0 * (d_total - d_equiv) / d_total
    return WastedTokens(wasted, d_equiv, loss_sub, opt.optimal_fraction)


@dataclass(frozen=True)
class Crossover:
    """Largest budget at which QAT stays within the perplexity margin of FP.

    ``status`` is "finite" (``d_total`` set), "none" (never within margin in
    the search range) or "unbounded" (still within margin at the range top).
    """

    status: str
    d_total: float | None = None

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "d_total_tokens": None if self.d_total is None else int(round(self.d_total)),
        }


def fp_crossover(
    p: LossLawParams,
    N: float,
    B: int,
    margin: float = DEFAULT_MARGIN,
    d_range: tuple[float, float] = CROSSOVER_RANGE,
    scan_points: int = SCAN_POINTS,
) -> Crossover:
    """Largest d_total with exp(L_qat*) <= (1 + margin) * exp(L_fp)."""
    if not (math.isfinite(margin) and margin >= 0):
        raise ValidationError(f"margin must be >= 0, got {margin!r}")
    if not (0 < d_range[0] < d_range[1]):
        raise ValidationError(f"invalid search range {d_range!r}")
    PlanQuery(p, N, d_range[0], B)
    check_interior_optimum(p)
    B = int(B)
    log_margin = math.log1p(margin)

    def gap(d):
        return optimal_loss(p, N, d, B) - fp_proxy_loss(p, N, d)

    ds = np.geomspace(d_range[0], d_range[1], scan_points)
    ok = gap(ds) <= log_margin
    if not ok.any():
        return Crossover("none")
    if ok[-1]:
        return Crossover("unbounded")
    k = int(np.flatnonzero(ok)[-1])
    a, b = math.log(ds[k]), math.log(ds[k + 1])
    for _ in range(200):
        m = 0.5 * (a + b)
        if m <= a or m >= b:
            break
        if float(gap(math.exp(m))) <= log_margin:
            a = m
        else:
            b = m
    return Crossover("finite", math.exp(a))


@dataclass(frozen=True)
class BudgetQuery:
    memory_budget: float
    flops_budget: float
    candidate_bits: tuple[int, ...] = DEFAULT_CANDIDATE_BITS

    def __post_init__(self):
        if not (math.isfinite(self.memory_budget) and self.memory_budget > 0):
            raise ValidationError(f"memory_budget must be > 0, got {self.memory_budget!r}")
        if not (math.isfinite(self.flops_budget) and self.flops_budget > 0):
            raise ValidationError(f"flops_budget must be > 0, got {self.flops_budget!r}")
        bits = tuple(sorted({_check_bit_width(b) for b in self.candidate_bits}))
        if not bits:
            raise ValidationError("candidate_bits must be nonempty")
        object.__setattr__(self, "candidate_bits", bits)


@dataclass(frozen=True)
class BitwidthCandidate:
    bit_width: int
    N: float
    D: float
    feasible: bool
    loss: float | None = None


@dataclass(frozen=True)
class BitwidthPlan:
    memory_budget: float
    flops_budget: float
    bit_width: int
    N: float
    D: float
    loss: float
    candidates: list[BitwidthCandidate] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "memory_budget": self.memory_budget,
            "flops_budget": self.flops_budget,
            "bit_width": self.bit_width,
            "model_params": int(round(self.N)),
            "d_total_tokens": int(round(self.D)),
            "loss": self.loss,
        }


def params_for_memory(memory_budget: float, B: int) -> float:
    return 8.0 * memory_budget / B


def tokens_for_flops(flops_budget: float, N: float) -> float:
    """Training tokens under the C ~ 6 N D estimate."""
    return flops_budget / (6.0 * N)


def bitwidth_plan(p: LossLawParams, budget: BudgetQuery) -> BitwidthPlan:
    """Best bit width for a memory/FLOP budget; cells with D < N are infeasible.

    Ties go to the smaller bit width.
    """
    check_interior_optimum(p)
    cands = []
    best = None
    for B in budget.candidate_bits:
        N = params_for_memory(budget.memory_budget, B)
        D = tokens_for_flops(budget.flops_budget, N)
        if D < N:
            cands.append(BitwidthCandidate(B, N, D, feasible=False))
            continue
        loss = optimal_loss(p, N, D, B)
        cand = BitwidthCandidate(B, N, D, feasible=True, loss=loss)
        cands.append(cand)
        if best is None or loss < best.loss:
            best = cand
    if best is None:
        raise InfeasibleError(
            f"every candidate bit width gives D < N for memory={budget.memory_budget}, flops={budget.flops_budget}"
        )
    return BitwidthPlan(budget.memory_budget, budget.flops_budget, best.bit_width, best.N, best.D, best.loss, cands)


def bitwidth_grid(
    p: LossLawParams,
    memory_budgets: Sequence[float],
    flops_budgets: Sequence[float],
    candidate_bits: Sequence[int] = DEFAULT_CANDIDATE_BITS,
) -> list[BitwidthPlan | BudgetQuery]:
    """Plan every (memory, flops) cell; infeasible cells come back as their BudgetQuery."""
    cells: list[BitwidthPlan | BudgetQuery] = []
    for m in memory_budgets:
        for c in flops_budgets:
            query = BudgetQuery(m, c, tuple(candidate_bits))
            try:
                cells.append(bitwidth_plan(p, query))
            except InfeasibleError:
                cells.append(query)
    return cells


__all__ = [
    "BitwidthCandidate",
    "BitwidthPlan",
    "BudgetQuery",
    "Crossover",
    "PlanQuery",
    "PlanResult",
    "WastedTokens",
    "apply_overhead",
    "bitwidth_grid",
    "bitwidth_plan",
    "check_interior_optimum",
    "fp_crossover",
    "fraction_growth_curve",
    "loss_curve",
    "optimal_fraction",
    "optimal_loss",
    "wasted_tokens",
]
