"""Reference weight quantizers with straight-through-estimator gradients.

Three code maps, one scale per output-feature row:

* 1 bit, elastic binarization: codes in {-1, +1}
* 2 bit, stretched elastic quantization: codes in {-2, -1, 0, 1}, dequantized to
  half-integer levels
* 3 bits and up, learned step size: signed integer codes in
  [-2^(B-1), 2^(B-1) - 1]

All gradients are the surrogate definitions, not true derivatives of the
piecewise-constant forward map.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ValidationError

ALGORITHMS = ("binary", "seq", "lsq")


class DegenerateScaleError(ValidationError):
    """Raised when a group's scale would be zero."""


@dataclass(frozen=True)
class QuantGroup:
    weights: np.ndarray
    alpha: float
    bit_width: int

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 1 or w.size == 0:
            raise ValidationError("weights must be a nonempty vector")
        if not np.all(np.isfinite(w)):
            raise ValidationError("weights must be finite")
        if not (np.isfinite(self.alpha) and self.alpha > 0):
            raise ValidationError(f"alpha must be > 0, got {self.alpha!r}")
        if isinstance(self.bit_width, bool) or int(self.bit_width) != self.bit_width or self.bit_width < 1:
            raise ValidationError(f"bit_width must be an integer >= 1, got {self.bit_width!r}")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "bit_width", int(self.bit_width))


@dataclass(frozen=True)
class QuantizerResult:
    codes: np.ndarray
    dequantized: np.ndarray
    grad_w: np.ndarray
    grad_alpha: np.ndarray


def round_half_away(x):
    """Round to nearest integer, ties away from zero (np.round ties to even)."""
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def algorithm_for_bits(bit_width: int) -> str:
    if bit_width == 1:
        return "binary"
    if bit_width == 2:
        return "seq"
    if bit_width >= 3:
        return "lsq"
    raise ValidationError(f"bit_width must be >= 1, got {bit_width}")


def init_scale(weights: Sequence[float], algorithm: str) -> float:
    """Initial scale: mean |w| for binarization, max |w| otherwise."""
    w = np.abs(np.asarray(weights, dtype=np.float64))
    if w.size == 0:
        raise ValidationError("weights must be nonempty")
    if algorithm not in ALGORITHMS:
        raise ValidationError(f"unknown algorithm {algorithm!r}; expected one of {', '.join(ALGORITHMS)}")
    alpha = float(w.mean()) if algorithm == "binary" else float(w.max())
    if not alpha > 0:
        raise DegenerateScaleError("all-zero weights give a zero scale")
    return alpha


def quantize_binary(group: QuantGroup) -> QuantizerResult:
    if group.bit_width != 1:
        raise ValidationError(f"binarization needs bit_width=1, got {group.bit_width}")
    w, alpha = group.weights, group.alpha
    codes = np.where(w >= 0, 1, -1).astype(np.int64)
    inside = np.abs(w / alpha) < 1
    return QuantizerResult(
        codes=codes,
        dequantized=alpha * codes,
        grad_w=inside.astype(np.float64),
        grad_alpha=codes.astype(np.float64),  # sign(w) under the same sign(0) = +1 convention
    )


def quantize_seq(group: QuantGroup) -> QuantizerResult:
    if group.bit_width != 2:
        raise ValidationError(f"stretched elastic quantization needs bit_width=2, got {group.bit_width}")
    w, alpha = group.weights, group.alpha
    ratio = w / alpha
    codes = np.clip(round_half_away(np.clip(ratio, -1.0, 1.0) * 2.0 - 0.5), -2, 1)
    inside = np.abs(ratio) < 1
    return QuantizerResult(
        codes=codes.astype(np.int64),
        dequantized=(alpha / 2.0) * (codes + 0.5),
        grad_w=inside.astype(np.float64),
        grad_alpha=codes - ratio * inside,
    )


def quantize_lsq(group: QuantGroup) -> QuantizerResult:
    if group.bit_width < 3:
        raise ValidationError(f"learned step size quantization needs bit_width >= 3, got {group.bit_width}")
    w, alpha = group.weights, group.alpha
    lo, hi = -(2 ** (group.bit_width - 1)), 2 ** (group.bit_width - 1) - 1
    ratio = w / alpha
    codes = round_half_away(np.clip(ratio, lo, hi))
    inside = (lo < ratio) & (ratio < hi)
    return QuantizerResult(
        codes=codes.astype(np.int64),
        dequantized=alpha * codes,
        grad_w=inside.astype(np.float64),
        grad_alpha=codes - ratio * inside,
    )


_QUANTIZERS = {"binary": quantize_binary, "seq": quantize_seq, "lsq": quantize_lsq}


def quantize(group: QuantGroup, algorithm: str | None = None) -> QuantizerResult:
    """Dispatch on ``algorithm``, defaulting to the one matching the bit width."""
    algorithm = algorithm or algorithm_for_bits(group.bit_width)
    if algorithm not in _QUANTIZERS:
        raise ValidationError(f"unknown algorithm {algorithm!r}; expected one of {', '.join(ALGORITHMS)}")
    return _QUANTIZERS[algorithm](group)


def code_set(algorithm: str, bit_width: int) -> tuple[int, ...]:
    if algorithm == "binary":
        return (-1, 1)
    if algorithm == "seq":
        return (-2, -1, 0, 1)
    if algorithm == "lsq":
        return tuple(range(-(2 ** (bit_width - 1)), 2 ** (bit_width - 1)))
    raise ValidationError(f"unknown algorithm {algorithm!r}")


def split_groups(matrix, bit_width: int, algorithm: str | None = None) -> list[QuantGroup]:
    """One group per matrix row, each with its own initial scale."""
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2 or m.size == 0:
        raise ValidationError("matrix must be 2-D and nonempty")
    algorithm = algorithm or algorithm_for_bits(bit_width)
    groups = []
    for i, row in enumerate(m):
        try:
            alpha = init_scale(row, algorithm)
        except DegenerateScaleError:
            raise DegenerateScaleError(f"row {i}: all-zero weights give a zero scale") from None
        groups.append(QuantGroup(row, alpha, bit_width))
    return groups
