import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pmfrontier.errors import DomainError, SingularityError
from pmfrontier.model import (Flag, ModelKind, ModelSpec, density_from_pressure, eval_G, eval_G_prime,
                              g_of_density, is_lab_condition, pressure_from_density, structural_constants,
                              tumor_upper_envelope)


@pytest.mark.parametrize("rho, m, expected", [(0.0, 2.0, 0.0), (0.5, 2.0, 1.0), (0.5, 3.0, 0.375)])
def test_pressure_from_density_examples(rho, m, expected):
    assert pressure_from_density(rho, m) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("P, m, expected", [(0.0, 2.0, 0.0), (1.0, 2.0, 0.5), (0.375, 3.0, 0.5)])
def test_density_from_pressure_examples(P, m, expected):
    assert density_from_pressure(P, m) == pytest.approx(expected, abs=1e-15)


def test_conversion_domain_errors():
    with pytest.raises(DomainError):
        pressure_from_density(-0.1, 2.0)
    with pytest.raises(DomainError):
        pressure_from_density(0.1, 1.0)
    with pytest.raises(DomainError):
        density_from_pressure(-1e-3, 2.0)


@settings(max_examples=200, deadline=None)
@given(rho=st.just(0.0) | st.floats(1e-6, 10.0), m=st.floats(1.05, 5.0))
def test_pressure_round_trip(rho, m):
    back = density_from_pressure(pressure_from_density(rho, m), m)
    assert back == pytest.approx(rho, rel=1e-12, abs=1e-300)


def test_eval_G_examples(tumor, fisher):
    assert eval_G(tumor, 1.0) == 0.0
    assert eval_G(tumor, 0.3) == pytest.approx(0.7)
    assert eval_G(fisher, 2.0) == pytest.approx(0.0, abs=1e-15)


def test_eval_G_outside_range(tumor):
    with pytest.raises(DomainError):
        eval_G(tumor, 1.5)
    with pytest.raises(DomainError):
        eval_G(tumor, -0.1)


def test_eval_G_prime_examples(tumor, fisher):
    assert np.all(eval_G_prime(tumor, np.linspace(0, 1, 7)) == -1.0)
    assert eval_G_prime(fisher, 1.0) == pytest.approx(-0.5)
    f3 = ModelSpec.fisher_kpp(m=3.0)
    # oracle: central difference of eval_G itself
    step = 1e-7
    fd = (eval_G(f3, 0.01 + step) - eval_G(f3, 0.01 - step)) / (2 * step)
    closed = -0.5 * math.sqrt(2.0 / 3.0) * 0.01**-0.5
    assert eval_G_prime(f3, 0.01) == pytest.approx(closed, rel=1e-12)
    assert eval_G_prime(f3, 0.01) == pytest.approx(fd, rel=1e-6)
    assert closed == pytest.approx(-4.082, abs=5e-4)


def test_eval_G_prime_singular_at_zero():
    with pytest.raises(SingularityError):
        eval_G_prime(ModelSpec.fisher_kpp(m=3.0), 0.0)


def test_structural_constants_examples(tumor, fisher):
    c = structural_constants(tumor, 2)
    assert (c.d_g, c.D_g, c.K_g) == (1.0, 1.0, 0.5)
    c = structural_constants(fisher, 2)
    assert c.d_g == pytest.approx(0.5) and c.D_g == pytest.approx(0.5)
    c = structural_constants(ModelSpec.fisher_kpp(m=3.0), 2)
    assert c.D_g is Flag.UNBOUNDED
    with pytest.raises(DomainError):
        c.require("D_g")


def test_fisher_small_m_lower_slope_vanishes():
    c = structural_constants(ModelSpec.fisher_kpp(m=1.5), 2)
    assert c.d_g is Flag.VIOLATED
    assert c.D_g > 0


def test_K_G_dominates_sampled_sup(fisher):
    P = np.linspace(1e-6, fisher.p_m / 2, 5001)
    c = structural_constants(fisher, 2)
    assert c.K_g >= np.max(-P * eval_G_prime(fisher, P)) - 1e-12


def test_custom_table_matches_tumor():
    table = [(0.0, 1.0), (0.5, 0.5), (1.0, 0.0), (1.5, -0.5)]
    spec = ModelSpec.custom(2.0, table)
    assert spec.kind is ModelKind.CUSTOM
    assert spec.p_m == pytest.approx(1.0)
    assert spec.p_h == 1.5
    c = structural_constants(spec)
    assert c.d_g == pytest.approx(1.0) and c.D_g == pytest.approx(1.0)
    assert c.K_g == pytest.approx(0.5, abs=1e-4)
    assert eval_G_prime(spec, 0.3) == pytest.approx(-1.0)


def test_custom_table_rejects_increasing_G():
    with pytest.raises(DomainError):
        ModelSpec.custom(2.0, [(0.0, 1.0), (0.5, 1.2), (1.0, 0.0)])


def test_model_spec_invariants():
    with pytest.raises(DomainError):
        ModelSpec.tumor(m=1.0)
    with pytest.raises(DomainError):
        ModelSpec.tumor(p_m=1.0, p_h=0.5)
    with pytest.raises(DomainError):
        ModelSpec(ModelKind.FISHER_KPP, 2.0, 1.0, 1.0)
    spec = ModelSpec.tumor(m=3.0, p_m=2.0)
    assert pressure_from_density(spec.rho_m, spec.m) == pytest.approx(spec.p_m, rel=1e-12)


def test_g_of_density_fisher_is_logistic(fisher):
    rho = np.linspace(0, 1, 11)
    assert np.allclose(g_of_density(fisher, rho), 1 - rho, atol=1e-15)


def test_lab_condition(tumor):
    assert is_lab_condition(tumor)


def test_tumor_upper_envelope_against_ode():
    from scipy.integrate import solve_ivp

    pm, ph, m = 2.0, 3.0, 2.0
    sol = solve_ivp(lambda t, f: (m - 1) * f * (pm - f), (0, 3), [ph], rtol=1e-11, atol=1e-13,
                    t_eval=np.linspace(0, 3, 31))
    assert np.allclose(tumor_upper_envelope(sol.t, pm, ph, m), sol.y[0] - pm, atol=1e-8)
    assert tumor_upper_envelope(5.0, 1.0, 1.0, 2.0) == 0.0
