"""Unified QAT loss scaling law and the direct optimal-fraction law.

The loss law is

    L = alpha + beta / D_total**gamma + zeta / N**eta
        + theta * 2**(-kappa*B)
        + phi * 2**(-chi*B) / (N**psi * S_qat**omega)
        + lambda * 2**(-mu*B) / (N**nu * S_fp**xi * S_qat**rho)

with S_x = D_x / (N * B / 8) the tokens-per-parameter-byte of each phase.
Everything below evaluates in log space: ``2**(-k*B)`` is ``exp(-k*B*ln 2)``.
Functions broadcast over numpy arrays; scalar inputs give Python floats.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any

import numpy as np

from .errors import DegenerateLawError, DomainError, ValidationError

SCHEMA_VERSION = 1
FP_BIT_WIDTH = 16
LN2 = math.log(2.0)
LN8 = math.log(8.0)

# JSON key for each dataclass field; ``lambda`` is a Python keyword.
PARAM_NAMES = (
    "alpha", "beta", "gamma", "zeta", "eta",
    "theta", "kappa",
    "phi", "chi", "psi", "omega",
    "lambda", "mu", "nu", "xi", "rho",
)  # fmt: skip
N_PARAMS = len(PARAM_NAMES)


@dataclass(frozen=True)
class LossLawParams:
    """The 16 coefficients of the loss law.

    Construction rejects negative or non-finite values. Zeros are allowed so
    that penalty terms can be switched off; anything fitted is strictly
    positive (see ``is_positive``).
    """

    alpha: float
    beta: float
    gamma: float
    zeta: float
    eta: float
    theta: float
    kappa: float
    phi: float
    chi: float
    psi: float
    omega: float
    lambda_: float
    mu: float
    nu: float
    xi: float
    rho: float

    def __post_init__(self):
        for f, name in zip(fields(self), PARAM_NAMES):
            value = getattr(self, f.name)
            try:
                value = float(value)
            except (TypeError, ValueError):
                raise ValidationError(f"parameter {name} must be a real number, got {value!r}") from None
            if not math.isfinite(value) or value < 0:
                raise ValidationError(f"parameter {name} must be finite and >= 0, got {value!r}")
            object.__setattr__(self, f.name, value)

    @property
    def is_positive(self) -> bool:
        return all(v > 0 for v in self.as_tuple())

    def as_tuple(self) -> tuple[float, ...]:
        return tuple(getattr(self, f.name) for f in fields(self))

    def as_array(self) -> np.ndarray:
        return np.array(self.as_tuple(), dtype=np.float64)

    def as_dict(self) -> dict[str, float]:
        return dict(zip(PARAM_NAMES, self.as_tuple()))

    @classmethod
    def from_sequence(cls, values) -> LossLawParams:
        values = [float(v) for v in values]
        if len(values) != N_PARAMS:
            raise ValidationError(f"expected {N_PARAMS} parameters, got {len(values)}")
        return cls(*values)

    @classmethod
    def from_dict(cls, mapping: dict[str, Any]) -> LossLawParams:
        missing = [n for n in PARAM_NAMES if n not in mapping]
        if missing:
            raise ValidationError(f"missing law parameter(s): {', '.join(missing)}")
        return cls(*(_parse_real(mapping[n], n) for n in PARAM_NAMES))

    def replace(self, **changes: float) -> LossLawParams:
        values = self.as_dict()
        for key, value in changes.items():
            key = "lambda" if key == "lambda_" else key
            if key not in values:
                raise ValidationError(f"unknown law parameter {key!r}")
            values[key] = value
        return LossLawParams(*(values[n] for n in PARAM_NAMES))


@dataclass(frozen=True)
class FractionLawParams:
    a: float

    def __post_init__(self):
        a = float(self.a)
        if not math.isfinite(a) or a <= 0:
            raise ValidationError(f"fraction-law parameter a must be finite and > 0, got {self.a!r}")
        object.__setattr__(self, "a", a)


PUBLISHED_PARAMS = LossLawParams(
    alpha=1.598,
    beta=2477.0,
    gamma=0.4089,
    zeta=57.64,
    eta=0.2148,
    theta=0.4297,
    kappa=1.41,
    phi=1091.0,
    chi=1.212,
    psi=0.4004,
    omega=0.076,
    lambda_=138.8,
    mu=0.0833,
    nu=0.2135,
    xi=0.4819,
    rho=0.1903,
)


@dataclass(frozen=True)
class LossGrad:
    """Partials of the loss: one per law parameter, plus d/d(d_qat) along D_total = const."""

    params: dict[str, float]
    d_qat: float


# ---------------------------------------------------------------------------
# core evaluation


def _check_positive(**values) -> None:
    for name, value in values.items():
        arr = np.asarray(value, dtype=np.float64)
        if not np.all(np.isfinite(arr)) or not np.all(arr > 0):
            raise DomainError(f"{name} must be finite and > 0, got {value!r}")


def _factors(p: np.ndarray, ln_n, ln_dfp, ln_dqat, d_total, b):
    """Unit-coefficient factors of each non-constant term and the logs they need.

    ``p`` has trailing dimension 16; data arrays broadcast against ``p[..., 0]``.
    Returns (u1..u5, ln_d, ln_sfp, ln_sqat) where term_i = coef_i * u_i.
    """
    (_, _, gamma, _, eta, _, kappa, _, chi, psi, omega, _, mu, nu, xi, rho) = np.moveaxis(p, -1, 0)
    ln_d = np.log(d_total)
    ln_bytes = ln_n + np.log(b) - LN8
    ln_sfp = ln_dfp - ln_bytes
    ln_sqat = ln_dqat - ln_bytes
    bl2 = b * LN2
    u1 = np.exp(-gamma * ln_d)
    u2 = np.exp(-eta * ln_n)
    u3 = np.exp(-kappa * bl2)
    u4 = np.exp(-chi * bl2 - psi * ln_n - omega * ln_sqat)
    u5 = np.exp(-mu * bl2 - nu * ln_n - xi * ln_sfp - rho * ln_sqat)
    return u1, u2, u3, u4, u5, ln_d, ln_sfp, ln_sqat


def loss_from_logs(p: np.ndarray, ln_n, ln_dfp, ln_dqat, b):
    """Loss for a batch of parameter vectors (trailing dim 16) from log token counts.

    No domain checks; callers guarantee positivity.
    """
    d_total = np.exp(ln_dfp) + np.exp(ln_dqat)
    u1, u2, u3, u4, u5, *_ = _factors(p, ln_n, ln_dfp, ln_dqat, d_total, b)
    alpha, beta, zeta, theta, phi, lam = (p[..., i] for i in (0, 1, 3, 5, 7, 11))
    return alpha + beta * u1 + zeta * u2 + theta * u3 + phi * u4 + lam * u5


def loss_and_jacobian(p: np.ndarray, ln_n, ln_dfp, ln_dqat, b):
    """Loss and its Jacobian with respect to the 16 parameters.

    ``p`` has shape (..., 16); the Jacobian has shape broadcast(...) + (16,).
    """
    d_total = np.exp(ln_dfp) + np.exp(ln_dqat)
    u1, u2, u3, u4, u5, ln_d, ln_sfp, ln_sqat = _factors(p, ln_n, ln_dfp, ln_dqat, d_total, b)
    (alpha, beta, _, zeta, _, theta, _, phi, _, _, _, lam, _, _, _, _) = np.moveaxis(p, -1, 0)
    t1, t2, t3, t4, t5 = beta * u1, zeta * u2, theta * u3, phi * u4, lam * u5
    loss = alpha + t1 + t2 + t3 + t4 + t5
    bl2 = b * LN2
    ones = np.ones_like(loss)
    jac = np.stack(
        np.broadcast_arrays(
            ones,
            u1, -ln_d * t1,
            u2, -ln_n * t2,
            u3, -bl2 * t3,
            u4, -bl2 * t4, -ln_n * t4, -ln_sqat * t4,
            u5, -bl2 * t5, -ln_n * t5, -ln_sfp * t5, -ln_sqat * t5,
        ),
        axis=-1,
    )  # fmt: skip
    return loss, jac


def _scalarize(value):
    arr = np.asarray(value)
    return float(arr) if arr.ndim == 0 else arr


def eval_loss(p: LossLawParams, N, d_fp, d_qat, B):
    """Predicted loss in nats. All inputs must be strictly positive."""
    _check_positive(N=N, d_fp=d_fp, d_qat=d_qat, B=B)
    N, d_fp, d_qat, B = (np.asarray(x, dtype=np.float64) for x in (N, d_fp, d_qat, B))
    loss = loss_from_logs(p.as_array(), np.log(N), np.log(d_fp), np.log(d_qat), B)
    return _scalarize(loss)


def eval_loss_grad(p: LossLawParams, N: float, d_fp: float, d_qat: float, B: float) -> LossGrad:
    _check_positive(N=N, d_fp=d_fp, d_qat=d_qat, B=B)
    N, d_fp, d_qat, B = float(N), float(d_fp), float(d_qat), float(B)
    _, jac = loss_and_jacobian(p.as_array(), math.log(N), math.log(d_fp), math.log(d_qat), B)
    # moving tokens from FP to QAT only changes the two QAT-dependent terms
    t4 = p.phi * float(jac[7])
    t5 = p.lambda_ * float(jac[11])
    d_dqat = -p.omega * t4 / d_qat + t5 * (p.xi / d_fp - p.rho / d_qat)
    return LossGrad(params=dict(zip(PARAM_NAMES, (float(v) for v in jac))), d_qat=d_dqat)


def chinchilla_part(p: LossLawParams, N, d_total):
    return p.alpha + p.beta / np.power(d_total, p.gamma) + p.zeta / np.power(N, p.eta)


def loss_asymptote(p: LossLawParams, B) -> float:
    """Limit of the loss as N, D_fp and D_qat all grow without bound."""
    return p.alpha + p.theta * math.exp(-p.kappa * B * LN2)


def eval_fraction_law(q: FractionLawParams, s_total):
    """Predicted optimal QAT fraction ``exp(-a / ln s_total)``; defined only for s_total > 1."""
    s = np.asarray(s_total, dtype=np.float64)
    if not np.all(np.isfinite(s)) or not np.all(s > 1.0):
        raise DomainError(f"fraction law needs s_total > 1, got {s_total!r}")
    return _scalarize(np.exp(-q.a / np.log(s)))


def interaction_assignment(p: LossLawParams, d_total):
    """Split of ``d_total`` that maximizes S_fp**xi * S_qat**rho (minimizing the interaction term).

    Returns (d_fp, d_qat) = (xi, rho) / (xi + rho) * d_total.
    """
    if not (p.xi > 0 and p.rho > 0):
        raise DegenerateLawError(f"interaction assignment needs xi > 0 and rho > 0, got xi={p.xi}, rho={p.rho}")
    share = p.rho / (p.xi + p.rho)
    d_total = np.asarray(d_total, dtype=np.float64)
    d_qat = share * d_total
    return _scalarize(d_total - d_qat), _scalarize(d_qat)


def fp_proxy_loss(p: LossLawParams, N, d_total):
    """Full-precision loss estimate: the law at B=16 with the interaction-minimizing split."""
    _check_positive(N=N, d_total=d_total)
    d_fp, d_qat = interaction_assignment(p, d_total)
    return eval_loss(p, N, d_fp, d_qat, FP_BIT_WIDTH)


# ---------------------------------------------------------------------------
# persistence


def _format_real(x: float) -> str:
    return repr(float(x))


def _parse_real(value: Any, name: str) -> float:
    if isinstance(value, bool):
        raise ValidationError(f"{name}: expected a number, got {value!r}")
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ValidationError(f"{name}: expected a number, got {value!r}") from None


@dataclass(frozen=True)
class ParamsFile:
    loss_law: LossLawParams | None = None
    fraction_law: FractionLawParams | None = None
    metadata: dict[str, Any] | None = None


def params_to_dict(
    loss_law: LossLawParams | None = None,
    fraction_law: FractionLawParams | None = None,
    metadata: dict[str, Any] | None = None,
) -> dict[str, Any]:
    out: dict[str, Any] = {"schema_version": SCHEMA_VERSION}
    if loss_law is not None:
        out.update({k: _format_real(v) for k, v in loss_law.as_dict().items()})
    if fraction_law is not None:
        out["a"] = _format_real(fraction_law.a)
    out["metadata"] = dict(metadata or {})
    return out


def params_from_dict(data: dict[str, Any]) -> ParamsFile:
    if not isinstance(data, dict):
        raise ValidationError("parameter file must hold a JSON object")
    allowed = set(PARAM_NAMES) | {"a", "metadata", "schema_version"}
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ValidationError(f"unknown key(s) in parameter file: {', '.join(unknown)}")
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ValidationError(f"schema_version {version!r} not supported (expected {SCHEMA_VERSION})")
    present = [n for n in PARAM_NAMES if n in data]
    loss_law = LossLawParams.from_dict(data) if present else None
    fraction_law = FractionLawParams(_parse_real(data["a"], "a")) if "a" in data else None
    if loss_law is None and fraction_law is None:
        raise ValidationError("parameter file holds neither loss-law parameters nor 'a'")
    metadata = data.get("metadata") or {}
    if not isinstance(metadata, dict):
        raise ValidationError("metadata must be a JSON object")
    return ParamsFile(loss_law=loss_law, fraction_law=fraction_law, metadata=metadata)


def dumps_params(
    loss_law: LossLawParams | None = None,
    fraction_law: FractionLawParams | None = None,
    metadata: dict[str, Any] | None = None,
) -> str:
    return json.dumps(params_to_dict(loss_law, fraction_law, metadata), indent=2) + "\n"


def loads_params(text: str) -> ParamsFile:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"parameter file is not valid JSON: {exc}") from None
    return params_from_dict(data)


def save_params(path: str | Path, loss_law=None, fraction_law=None, metadata=None) -> None:
    Path(path).write_text(dumps_params(loss_law, fraction_law, metadata), encoding="utf-8")


def load_params(path: str | Path) -> ParamsFile:
    return loads_params(Path(path).read_text(encoding="utf-8"))
