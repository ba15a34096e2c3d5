"""Experiment records: data model, CSV/JSON ingestion and tokens-per-parameter-byte statistics."""

from __future__ import annotations

import csv
import io
import json
import math
from collections import defaultdict
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import IO, Any, Iterable

from .errors import RecordParseError, ValidationError

REQUIRED_FIELDS = ("model_params", "d_fp_tokens", "d_qat_tokens", "bit_width")
OPTIONAL_FIELDS = ("loss", "perplexity", "tag")
ALL_FIELDS = REQUIRED_FIELDS + OPTIONAL_FIELDS

MAX_BIT_WIDTH = 16
FP_BIT_WIDTH = 16


@dataclass(frozen=True)
class ExperimentRecord:
    """One training outcome: N parameters, FP and QAT token counts, bit width and final loss.

    ``loss`` is the natural-log cross-entropy per token. ``bit_width=16``
    marks a full-precision checkpoint used for regularizing the fit.
    """

    model_params: int
    d_fp: int
    d_qat: int
    bit_width: int
    loss: float
    tag: str | None = None

    def __post_init__(self):
        for name in ("model_params", "d_fp", "d_qat", "bit_width"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int):
                raise ValidationError(f"{name} must be an integer, got {value!r}")
        if self.model_params <= 0:
            raise ValidationError(f"model_params must be > 0, got {self.model_params}")
        if self.d_fp < 0:
            raise ValidationError(f"d_fp must be >= 0, got {self.d_fp}")
        if self.d_qat < 0:
            raise ValidationError(f"d_qat must be >= 0, got {self.d_qat}")
        if self.d_fp + self.d_qat <= 0:
            raise ValidationError("d_fp + d_qat must be > 0")
        if not 1 <= self.bit_width <= MAX_BIT_WIDTH:
            raise ValidationError(f"bit_width must be in 1..{MAX_BIT_WIDTH}, got {self.bit_width}")
        loss = float(self.loss)
        if not math.isfinite(loss) or loss <= 0:
            raise ValidationError(f"loss must be finite and > 0, got {self.loss!r}")
        object.__setattr__(self, "loss", loss)
        if self.tag == "":
            object.__setattr__(self, "tag", None)

    @property
    def d_total(self) -> int:
        return self.d_fp + self.d_qat

    @property
    def qat_fraction(self) -> float:
        return self.d_qat / self.d_total

    @property
    def perplexity(self) -> float:
        return math.exp(self.loss)


@dataclass(frozen=True)
class TpbStats:
    s_qat: float
    s_fp: float
    s_total: float


def param_bytes(model_params: float, bit_width: float) -> float:
    return model_params * bit_width / 8.0


def tpb(record: ExperimentRecord) -> TpbStats:
    """Tokens-per-parameter-byte of each phase, using the record's bit width for the byte count."""
    nbytes = param_bytes(record.model_params, record.bit_width)
    s_qat = record.d_qat / nbytes
    s_fp = record.d_fp / nbytes
    return TpbStats(s_qat=s_qat, s_fp=s_fp, s_total=s_fp + s_qat)


def group_by_bitwidth(records: Iterable[ExperimentRecord]) -> dict[int, list[ExperimentRecord]]:
    groups: dict[int, list[ExperimentRecord]] = defaultdict(list)
    for rec in records:
        groups[rec.bit_width].append(rec)
    return dict(sorted(groups.items()))


# ---------------------------------------------------------------------------
# parsing


def parse_count(text: Any) -> int:
    """Parse an integer count, tolerating scientific notation such as ``49.3e9``.

    Raises ValueError if the value is not integral.
    """
    if isinstance(text, bool):
        raise ValueError(f"not a count: {text!r}")
    if isinstance(text, int):
        return text
    if isinstance(text, float):
        if not text.is_integer():
            raise ValueError(f"not an integer: {text!r}")
        return int(text)
    s = str(text).strip()
    try:
        return int(s)
    except ValueError:
        pass
    try:
        dec = Decimal(s)
    except InvalidOperation:
        raise ValueError(f"not a number: {text!r}") from None
    if not dec.is_finite() or dec != dec.to_integral_value():
        raise ValueError(f"not an integer: {text!r}")
    return int(dec)


def _parse_real(text: Any) -> float:
    if isinstance(text, bool):
        raise ValueError(f"not a number: {text!r}")
    value = float(text) if isinstance(text, (int, float)) else float(str(text).strip())
    if not math.isfinite(value):
        raise ValueError(f"not finite: {text!r}")
    return value


def _is_blank(value: Any) -> bool:
    return value is None or (isinstance(value, str) and value.strip() == "")


def _record_from_mapping(row: dict[str, Any], index: int) -> ExperimentRecord:
    unknown = [k for k in row if k not in ALL_FIELDS]
    if unknown:
        raise RecordParseError("unknown field", row=index, field=unknown[0])

    values: dict[str, Any] = {}
    for field_name, key in (
        ("model_params", "model_params"),
        ("d_fp_tokens", "d_fp"),
        ("d_qat_tokens", "d_qat"),
        ("bit_width", "bit_width"),
    ):
        raw = row.get(field_name)
        if _is_blank(raw):
            raise RecordParseError("missing value", row=index, field=field_name)
        try:
            values[key] = parse_count(raw)
        except ValueError as exc:
            raise RecordParseError(str(exc), row=index, field=field_name) from None

    has_loss = not _is_blank(row.get("loss"))
    has_ppl = not _is_blank(row.get("perplexity"))
    if has_loss and has_ppl:
        raise RecordParseError("both loss and perplexity given; supply exactly one", row=index, field="loss")
    if not (has_loss or has_ppl):
        raise RecordParseError("one of loss or perplexity is required", row=index, field="loss")
    field_name = "loss" if has_loss else "perplexity"
    try:
        raw_value = _parse_real(row[field_name])
    except ValueError as exc:
        raise RecordParseError(str(exc), row=index, field=field_name) from None
    if has_ppl:
        if raw_value <= 1.0:
            raise RecordParseError(f"perplexity must be > 1, got {raw_value}", row=index, field="perplexity")
        values["loss"] = math.log(raw_value)
    else:
        values["loss"] = raw_value

    tag = row.get("tag")
    values["tag"] = None if _is_blank(tag) else str(tag)

    try:
        return ExperimentRecord(**values)
    except ValidationError as exc:
        raise RecordParseError(str(exc), row=index) from None


def _as_text(source: IO[bytes] | bytes | str) -> str:
    if isinstance(source, bytes):
        data = source
    elif isinstance(source, str):
        return source
    else:
        data = source.read()
        if isinstance(data, str):
            return data
    return data.decode("utf-8-sig")


def load_records(source: IO[bytes] | bytes | str, format: str = "csv") -> list[ExperimentRecord]:
    """Parse and validate records from a CSV or JSON byte stream.

    A ``perplexity`` value is converted to loss on the spot (``ln``).
    Errors carry the zero-based data row index and the field name.
    """
    text = _as_text(source)
    if format == "csv":
        return _load_csv(text)
    if format == "json":
        return _load_json(text)
    raise ValidationError(f"unknown record format {format!r}; expected 'csv' or 'json'")


def _load_csv(text: str) -> list[ExperimentRecord]:
    if not text.strip():
        return []
    reader = csv.DictReader(io.StringIO(text))
    header = [h.strip() for h in (reader.fieldnames or [])]
    reader.fieldnames = header
    for name in header:
        if name not in ALL_FIELDS:
            raise RecordParseError("unknown column in header", field=name)
    for name in REQUIRED_FIELDS:
        if name not in header:
            raise RecordParseError("required column missing from header", field=name)
    if "loss" not in header and "perplexity" not in header:
        raise RecordParseError("header needs a loss or perplexity column", field="loss")

    records = []
    for index, row in enumerate(reader):
        if None in row:
            raise RecordParseError("too many values in row", row=index)
        if all(_is_blank(v) for v in row.values()):
            continue
        records.append(_record_from_mapping(row, index))
    return records


def _load_json(text: str) -> list[ExperimentRecord]:
    if not text.strip():
        return []
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise RecordParseError(f"invalid JSON: {exc}") from None
    if not isinstance(data, list):
        raise RecordParseError("top-level JSON value must be an array of objects")
    records = []
    for index, obj in enumerate(data):
        if not isinstance(obj, dict):
            raise RecordParseError("expected an object", row=index)
        records.append(_record_from_mapping(obj, index))
    return records


def read_records(path: str | Path, format: str | None = None) -> list[ExperimentRecord]:
    """Load records from a file; the format defaults to the file suffix."""
    path = Path(path)
    if format is None:
        format = "json" if path.suffix.lower() == ".json" else "csv"
    with path.open("rb") as fh:
        return load_records(fh, format)


# ---------------------------------------------------------------------------
# serialization


def _record_row(rec: ExperimentRecord) -> dict[str, Any]:
    return {
        "model_params": rec.model_params,
        "d_fp_tokens": rec.d_fp,
        "d_qat_tokens": rec.d_qat,
        "bit_width": rec.bit_width,
        "loss": rec.loss,
        "tag": rec.tag,
    }


def dump_records(records: Iterable[ExperimentRecord], format: str = "csv") -> str:
    """Serialize records; ``load_records(dump_records(rs, f), f) == rs``."""
    rows = [_record_row(r) for r in records]
    if format == "json":
        return json.dumps(rows, indent=2) + "\n"
    if format != "csv":
        raise ValidationError(f"unknown record format {format!r}; expected 'csv' or 'json'")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["model_params", "d_fp_tokens", "d_qat_tokens", "bit_width", "loss", "tag"])
    for row in rows:
        writer.writerow(
            [
                row["model_params"],
                row["d_fp_tokens"],
                row["d_qat_tokens"],
                row["bit_width"],
                repr(row["loss"]),
                "" if row["tag"] is None else row["tag"],
            ]
        )
    return buf.getvalue()
