"""Per-step learning-rate schedules for full-precision training and two QAT variants.

``wsd``
    linear warmup, constant plateau, cooldown over the final fraction of steps
    with lr = peak * (1 - sqrt(u)).
``classic_qat``
    a complete wsd run over the FP steps, then a fresh linear re-warmup from 0
    and a cosine decay to exactly 0.
``fused``
    warmup and plateau through the FP steps with no FP cooldown; QAT re-warms
    from 0, holds the peak, and takes over the cooldown at the end of training.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable

from .errors import ValidationError

SCHEMES = ("wsd", "classic_qat", "fused")
COOLDOWN_SHAPES = ("one_minus_sqrt",)
PHASES = ("warmup", "constant", "cooldown", "qat_warmup", "qat_cosine", "fused_cooldown")


def _count(name: str, value, minimum: int = 0) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise ValidationError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return value


@dataclass(frozen=True)
class ScheduleConfig:
    peak_lr: float
    total_steps: int
    scheme: str = "wsd"
    warmup_steps: int = 1000
    cooldown_fraction: float = 0.20
    cooldown_shape: str = "one_minus_sqrt"
    qat_warmup_fraction: float = 0.05
    fp_steps: int | None = None

    def __post_init__(self):
        if not (math.isfinite(self.peak_lr) and self.peak_lr > 0):
            raise ValidationError(f"peak_lr must be > 0, got {self.peak_lr!r}")
        _count("total_steps", self.total_steps, 1)
        _count("warmup_steps", self.warmup_steps)
        if self.scheme not in SCHEMES:
            raise ValidationError(f"scheme must be one of {', '.join(SCHEMES)}, got {self.scheme!r}")
        if self.cooldown_shape not in COOLDOWN_SHAPES:
            raise ValidationError(f"cooldown_shape must be one of {', '.join(COOLDOWN_SHAPES)}, got {self.cooldown_shape!r}")
        if not 0 < self.cooldown_fraction < 1:
            raise ValidationError(f"cooldown_fraction must lie in (0, 1), got {self.cooldown_fraction!r}")
        if not 0 <= self.qat_warmup_fraction < 1:
            raise ValidationError(f"qat_warmup_fraction must lie in [0, 1), got {self.qat_warmup_fraction!r}")
        if self.warmup_steps >= self.total_steps:
            raise ValidationError(f"warmup_steps ({self.warmup_steps}) must be < total_steps ({self.total_steps})")
        if self.scheme == "wsd":
            return
        if self.fp_steps is None:
            raise ValidationError(f"fp_steps is required for scheme {self.scheme!r}")
        _count("fp_steps", self.fp_steps, 1)
        if self.fp_steps >= self.total_steps:
            raise ValidationError(f"fp_steps ({self.fp_steps}) must be < total_steps ({self.total_steps})")
        if self.warmup_steps >= self.fp_steps:
            raise ValidationError(f"warmup_steps ({self.warmup_steps}) must be < fp_steps ({self.fp_steps})")
        if self.scheme == "fused":
            qat_steps = self.total_steps - self.fp_steps
            room = qat_steps - _qat_warmup_len(self)
            if _cooldown_len(self.cooldown_fraction, self.total_steps) > room:
                raise ValidationError(
                    f"cooldown ({_cooldown_len(self.cooldown_fraction, self.total_steps)} steps) does not fit in the "
                    f"QAT phase after its re-warmup ({room} steps); lower fp_steps or cooldown_fraction"
                )


@dataclass(frozen=True)
class SchedulePoint:
    step: int
    lr: float
    phase: str


def _cooldown_len(fraction: float, steps: int) -> int:
    return max(1, round(fraction * steps))


def _qat_warmup_len(config: ScheduleConfig) -> int:
    return round(config.qat_warmup_fraction * (config.total_steps - config.fp_steps))


def _one_minus_sqrt(peak: float, index: int, length: int) -> float:
    """lr at position ``index`` of a ``length``-step cooldown; first step at peak, last at 0."""
    if length == 1:
        return 0.0
    u = index / (length - 1)
    return peak * (1.0 - math.sqrt(u))


def _wsd(peak: float, steps: int, warmup: int, cooldown_fraction: float, step: int) -> SchedulePoint:
    cooldown = _cooldown_len(cooldown_fraction, steps)
    start = steps - cooldown
    if step >= start:
        return SchedulePoint(step, _one_minus_sqrt(peak, step - start, cooldown), "cooldown")
    if step < warmup:
        return SchedulePoint(step, peak * step / warmup, "warmup")
    return SchedulePoint(step, peak, "constant")


def lr_at(config: ScheduleConfig, step: int) -> SchedulePoint:
    if isinstance(step, bool) or not isinstance(step, int) or not 0 <= step < config.total_steps:
        raise ValidationError(f"step must be an integer in [0, {config.total_steps}), got {step!r}")
    peak = config.peak_lr
    if config.scheme == "wsd":
        return _wsd(peak, config.total_steps, config.warmup_steps, config.cooldown_fraction, step)

    fp = config.fp_steps
    if config.scheme == "classic_qat" and step < fp:
        return _wsd(peak, fp, config.warmup_steps, config.cooldown_fraction, step)
    if step < fp:
        if step < config.warmup_steps:
            return SchedulePoint(step, peak * step / config.warmup_steps, "warmup")
        return SchedulePoint(step, peak, "constant")

    q = step - fp
    rewarm = _qat_warmup_len(config)
    if q < rewarm:
        return SchedulePoint(step, peak * q / rewarm, "qat_warmup")

    if config.scheme == "classic_qat":
        length = config.total_steps - fp - rewarm
        if length == 1 or step == config.total_steps - 1:
            return SchedulePoint(step, 0.0, "qat_cosine")
        v = (q - rewarm) / (length - 1)
        return SchedulePoint(step, peak * 0.5 * (1.0 + math.cos(math.pi * v)), "qat_cosine")

    cooldown = _cooldown_len(config.cooldown_fraction, config.total_steps)
    start = config.total_steps - cooldown
    if step >= start:
        return SchedulePoint(step, _one_minus_sqrt(peak, step - start, cooldown), "fused_cooldown")
    return SchedulePoint(step, peak, "constant")


def emit_schedule(config: ScheduleConfig) -> list[SchedulePoint]:
    return [lr_at(config, s) for s in range(config.total_steps)]


def schedule_csv(points: Iterable[SchedulePoint]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["step", "lr", "phase"])
    for p in points:
        writer.writerow([p.step, repr(p.lr), p.phase])
    return buf.getvalue()
