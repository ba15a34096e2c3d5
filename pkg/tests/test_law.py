import json
import math

import mpmath
import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from oracles import PUBLISHED, central_difference, float_loss, mp_loss
from qatscale.errors import DegenerateLawError, DomainError, ValidationError
from qatscale.law import (
    PARAM_NAMES,
    PUBLISHED_PARAMS,
    FractionLawParams,
    LossLawParams,
    chinchilla_part,
    dumps_params,
    eval_fraction_law,
    eval_loss,
    eval_loss_grad,
    fp_proxy_loss,
    interaction_assignment,
    loads_params,
    loss_asymptote,
)

P = PUBLISHED_PARAMS


def test_published_constants_bit_exact():
    assert P.as_dict() == {k: float(v) for k, v in PUBLISHED.items()}


def test_published_example_point():
    value = eval_loss(P, 86_030_000, 9e9, 1e9, 4)
    assert isinstance(value, float)
    oracle = float(mp_loss(PUBLISHED, 86_030_000, 9e9, 1e9, 4))
    assert value == pytest.approx(oracle, rel=1e-13)
    assert value == pytest.approx(3.0600962891434054, rel=1e-14)


def test_penalties_off_gives_chinchilla_part():
    p = P.replace(theta=0.0, phi=0.0, lambda_=0.0)
    for b in (1, 3, 8):
        got = eval_loss(p, 3e8, 7e9, 2e9, b)
        assert got == pytest.approx(P.alpha + P.beta / 9e9**P.gamma + P.zeta / 3e8**P.eta, rel=1e-14)
        assert got == pytest.approx(chinchilla_part(p, 3e8, 9e9), rel=1e-14)


def test_asymptote():
    # the N^-eta and N^-nu terms decay slowly: about 3e-5 remains at 1e30
    for b in (1, 2, 4, 8):
        assert eval_loss(P, 1e30, 1e30, 1e30, b) == pytest.approx(loss_asymptote(P, b), abs=1e-4)
        assert eval_loss(P, 1e60, 1e60, 1e60, b) == pytest.approx(loss_asymptote(P, b), abs=1e-9)


def test_domain_errors():
    for args in ((0, 1e9, 1e9, 4), (1e8, 0, 1e9, 4), (1e8, 1e9, -1, 4), (1e8, 1e9, 1e9, 0)):
        with pytest.raises(DomainError):
            eval_loss(P, *args)


def test_vectorized_matches_scalar():
    n = np.array([1e8, 5e8])
    out = eval_loss(P, n, 1e10, 2e9, 2)
    assert out.shape == (2,)
    assert out[1] == eval_loss(P, 5e8, 1e10, 2e9, 2)


def test_params_validation():
    with pytest.raises(ValidationError):
        P.replace(alpha=-1.0)
    with pytest.raises(ValidationError):
        P.replace(beta=float("inf"))
    with pytest.raises(ValidationError):
        P.replace(nope=1.0)
    with pytest.raises(ValidationError):
        FractionLawParams(0.0)
    assert P.is_positive
    assert not P.replace(theta=0.0).is_positive


def test_simple_gradients():
    g = eval_loss_grad(P, 2e8, 5e9, 1e9, 3)
    assert g.params["alpha"] == 1.0
    assert g.params["theta"] == pytest.approx(2 ** (-P.kappa * 3), rel=1e-14)


@pytest.mark.parametrize("name", PARAM_NAMES)
def test_parameter_gradients_match_finite_differences(name):
    point = (3e8, 2e10, 5e9, 2)
    g = eval_loss_grad(P, *point).params[name]
    x0 = P.as_dict()[name]

    def f(x):
        d = {k: mpmath.mpf(v) for k, v in PUBLISHED.items()}
        d[name] = x
        return mp_loss(d, *point, dps=40)

    with mpmath.workdps(40):
        h = mpmath.mpf(1e-6) * max(1, abs(x0))
        fd = float(central_difference(f, mpmath.mpf(PUBLISHED[name]), h))
    assert g == pytest.approx(fd, rel=1e-5)


def test_d_qat_gradient_at_fixed_total():
    N, d_total, B = 4e8, 3e10, 2
    f0 = 0.3
    g = eval_loss_grad(P, N, (1 - f0) * d_total, f0 * d_total, B).d_qat

    def f(dq):
        return mp_loss(PUBLISHED, N, d_total - dq, dq, B, dps=40)

    with mpmath.workdps(40):
        fd = float(central_difference(f, mpmath.mpf(f0 * d_total), mpmath.mpf(1e-6) * f0 * d_total))
    assert g == pytest.approx(fd, rel=1e-5)


def test_fraction_law_examples():
    assert eval_fraction_law(FractionLawParams(3.0), math.exp(3.0)) == pytest.approx(math.exp(-1))
    assert eval_fraction_law(FractionLawParams(2.0), math.exp(4.0)) == pytest.approx(0.6065306597126334)
    # convergence to 1 is like 1 - a / ln(s), so 1e300 is still 0.3% short
    assert eval_fraction_law(FractionLawParams(2.0), 1e300) == pytest.approx(math.exp(-2.0 / math.log(1e300)), rel=1e-15)
    assert 1 - eval_fraction_law(FractionLawParams(2.0), 1e300) < 2.0 / math.log(1e300)
    for s in (1.0, 0.5):
        with pytest.raises(DomainError):
            eval_fraction_law(FractionLawParams(2.0), s)


def test_fraction_law_monotone_grid():
    s = np.geomspace(1.01, 1e12, 1000)
    f = eval_fraction_law(FractionLawParams(4.0), s)
    assert np.all((f > 0) & (f < 1))
    assert np.all(np.diff(f) >= 0)


def test_interaction_assignment_examples():
    sym = P.replace(xi=0.3, rho=0.3)
    assert interaction_assignment(sym, 1e10) == (5e9, 5e9)
    d_fp, d_qat = interaction_assignment(P, 1e10)
    assert d_fp == pytest.approx(7168997322.22553, rel=1e-12)
    assert d_fp + d_qat == pytest.approx(1e10, rel=1e-15)


def test_interaction_assignment_beats_grid():
    d_total = 1e10
    d_fp, d_qat = interaction_assignment(P, d_total)
    best = d_fp**P.xi * d_qat**P.rho
    grid = np.linspace(0, 1, 1001)[1:-1]
    others = ((1 - grid) * d_total) ** P.xi * (grid * d_total) ** P.rho
    assert np.all(others <= best * (1 + 1e-15))


def test_interaction_assignment_needs_positive_exponents():
    with pytest.raises(DegenerateLawError):
        interaction_assignment(P.replace(rho=0.0), 1e10)


def test_fp_proxy():
    N, d = 7.5859e8, 1e11
    d_fp, d_qat = interaction_assignment(P, d)
    value = fp_proxy_loss(P, N, d)
    assert value == pytest.approx(float(mp_loss(PUBLISHED, N, d_fp, d_qat, 16)), rel=1e-13)
    assert value == pytest.approx(2.45264764028033, rel=1e-12)
    frac = np.linspace(0.001, 0.999, 999)
    assert value < float_loss(PUBLISHED, N, (1 - frac) * d, frac * d, 1).min()
    assert P.theta * 2 ** (-16 * P.kappa) < 2e-7 * P.theta
    grid = np.geomspace(1e9, 1e12, 10)
    values = [fp_proxy_loss(P, N, x) for x in grid]
    assert all(a > b for a, b in zip(values, values[1:]))


def test_persistence_round_trip(tmp_path):
    text = dumps_params(P, FractionLawParams(3.25), {"fit_date": None, "n_records": 3})
    pf = loads_params(text)
    assert pf.loss_law == P
    assert pf.fraction_law.a == 3.25
    assert pf.metadata == {"fit_date": None, "n_records": 3}
    data = json.loads(text)
    assert data["schema_version"] == 1
    assert set(PARAM_NAMES) <= set(data)


def test_persistence_rejects_unknown_and_bad_values():
    data = json.loads(dumps_params(P))
    data["sigma"] = "1"
    with pytest.raises(ValidationError, match="sigma"):
        loads_params(json.dumps(data))
    data = json.loads(dumps_params(P))
    data["alpha"] = "abc"
    with pytest.raises(ValidationError, match="alpha"):
        loads_params(json.dumps(data))
    data = json.loads(dumps_params(P))
    del data["rho"]
    with pytest.raises(ValidationError, match="rho"):
        loads_params(json.dumps(data))


positive = st.floats(0.05, 2.0)
law_strategy = st.builds(
    LossLawParams,
    alpha=st.floats(0.5, 4), beta=st.floats(10, 1e4), gamma=positive, zeta=st.floats(1, 500), eta=positive,
    theta=st.floats(0.01, 10), kappa=positive, phi=st.floats(1, 1e4), chi=positive, psi=positive, omega=positive,
    lambda_=st.floats(1, 1e3), mu=positive, nu=positive, xi=positive, rho=positive,
)
inputs = st.tuples(
    st.floats(1e7, 1e11), st.floats(1e8, 1e13), st.floats(1e8, 1e13), st.integers(1, 15)
)


def _mp_params(p):
    return {k: repr(v) for k, v in p.as_dict().items()}


@settings(max_examples=300, deadline=None)
@given(law_strategy, inputs, st.floats(1.01, 10))
def test_monotone_in_tokens(p, x, factor):
    N, d_fp, d_qat, B = x
    base = eval_loss(p, N, d_fp, d_qat, B)
    q = _mp_params(p)
    exact = mp_loss(q, N, d_fp, d_qat, B)
    # only assert where the true decrease is resolvable in double precision
    assume(exact - mp_loss(q, N, d_fp * factor, d_qat, B) > 1e-13 * exact)
    assume(exact - mp_loss(q, N, d_fp, d_qat * factor, B) > 1e-13 * exact)
    assert eval_loss(p, N, d_fp * factor, d_qat, B) < base
    assert eval_loss(p, N, d_fp, d_qat * factor, B) < base
    assert base > p.alpha


@st.composite
def shrinking_penalty_laws(draw):
    p = draw(law_strategy)
    return p.replace(chi=p.omega + draw(positive), mu=p.xi + p.rho + draw(positive))


@settings(max_examples=300, deadline=None)
@given(shrinking_penalty_laws(), inputs)
def test_monotone_in_bits_when_penalties_shrink(p, x):
    # S = d / (N B / 8) falls as B grows, so each penalty term shrinks in B
    # only when chi > omega and mu > xi + rho
    N, d_fp, d_qat, B = x
    q = _mp_params(p)
    assume(mp_loss(q, N, d_fp, d_qat, B) - mp_loss(q, N, d_fp, d_qat, B + 1) > 1e-13)
    assert eval_loss(p, N, d_fp, d_qat, B + 1) < eval_loss(p, N, d_fp, d_qat, B)


def test_published_law_not_monotone_in_bits_everywhere():
    # counterexample recorded for the invariant above: at low tokens per byte
    # the interaction term grows faster in B than 2^(-mu B) shrinks
    assert eval_loss(P, 1e7, 1e8, 1e8, 6) > eval_loss(P, 1e7, 1e8, 1e8, 5)


@settings(max_examples=40, deadline=None)
@given(law_strategy, inputs)
def test_gradients_match_finite_differences_random(p, x):
    N, d_fp, d_qat, B = x
    g = eval_loss_grad(p, N, d_fp, d_qat, B).params
    base = {k: mpmath.mpf(v) for k, v in _mp_params(p).items()}
    with mpmath.workdps(40):
        for name in PARAM_NAMES:
            h = mpmath.mpf(1e-6) * max(1, abs(base[name]))

            def f(v, name=name):
                d = dict(base)
                d[name] = v
                return mp_loss(d, N, d_fp, d_qat, B, dps=40)

            fd = float(central_difference(f, base[name], h))
            assert abs(g[name] - fd) <= 1e-5 * abs(fd) + 1e-15


@settings(max_examples=100, deadline=None)
@given(positive, st.floats(1.01, 1e200))
def test_fraction_law_range(a, s):
    f = eval_fraction_law(FractionLawParams(a), s)
    assert 0 < f < 1
