import math

import mpmath
import pytest
from hypothesis import given, settings, strategies as st

from drivenrabi import (
    DegenerateCoupling,
    InvalidParams,
    ModelParams,
    NonConvergence,
    PoleProximity,
    SeriesConfig,
    evaluate_G,
    f_coeff,
    k_coefficients,
    pole_positions,
)
from drivenrabi.model import evaluate_G_regularized, nearest_pole_distance


def mp_series(params, x, sign, terms, dps=60):
    """Extended-precision K_n by the same recursion, independent of the float path."""
    with mpmath.workdps(dps):
        w, g, d, e = (mpmath.mpf(repr(v)) for v in (params.omega, params.g, params.delta,
                                                      params.epsilon))
        x = mpmath.mpf(repr(x))

        def f(n):
            return 2 * g / w + (n * w - x + sign * e + d ** 2 / (x - n * w + sign * e)) / (2 * g)
        K = [mpmath.mpf(1), f(0)]
        for n in range(2, terms):
            K.append((f(n - 1) * K[-1] - K[-2]) / n)
        return K, f


def mp_G(params, x, terms=160):
    with mpmath.workdps(60):
        out = {}
        for s in (1, -1):
            K, _ = mp_series(params, x, s, terms)
            r = mpmath.mpf(repr(params.g)) / mpmath.mpf(repr(params.omega))
            xx = mpmath.mpf(repr(x))
            e = mpmath.mpf(repr(params.epsilon))
            R = mpmath.fsum(k * r ** n for n, k in enumerate(K))
            Rb = mpmath.fsum(k * r ** n / (xx - n * params.omega + s * e) for n, k in enumerate(K))
            out[s] = (R, Rb)
        d2 = mpmath.mpf(repr(params.delta)) ** 2
        return d2 * out[1][1] * out[-1][1] - out[1][0] * out[-1][0]


class TestParams:
    def test_defaults_and_coercion(self):
        p = ModelParams(1, 0, 0, 0)
        assert isinstance(p.omega, float) and p.g == 0.0

    @pytest.mark.parametrize("kw", [dict(omega=0.0), dict(omega=-1.0), dict(g=-0.1),
                                    dict(delta=-0.5), dict(epsilon=math.nan),
                                    dict(g=math.inf)])
    def test_rejects_invalid(self, kw):
        with pytest.raises(InvalidParams):
            ModelParams(**{"omega": 1.0, **kw})

    @pytest.mark.parametrize("kw", [dict(max_terms=7), dict(rel_tol=0.0),
                                    dict(consecutive_small=0), dict(pole_guard=0.0)])
    def test_series_config_invariants(self, kw):
        with pytest.raises(InvalidParams):
            SeriesConfig(**kw)


class TestFCoeff:
    def test_delta_zero_removes_pole_term(self):
        assert f_coeff(ModelParams(1, 0.5, 0, 0), 1, 0, 0.25) == pytest.approx(0.75, abs=1e-15)

    def test_direct_substitution(self):
        assert f_coeff(ModelParams(1, 0.5, 0.7, 0), 1, 0, 0.25) == pytest.approx(2.71, abs=1e-14)

    def test_extended_precision_value(self):
        # 60-digit evaluation of the same formula: 0.71776315789473684210526...
        p = ModelParams(1, 0.4, 0.7, 0.25)
        assert f_coeff(p, -1, 1, 0.3) == pytest.approx(0.7177631578947368421, rel=1e-15)

    def test_pole_and_coupling_errors(self):
        with pytest.raises(PoleProximity):
            f_coeff(ModelParams(1, 0.5, 0.7, 0.25), 1, 1, 0.75)
        with pytest.raises(DegenerateCoupling):
            f_coeff(ModelParams(1, 0.0, 0.7, 0.25), 1, 1, 0.3)


class TestKCoefficients:
    def test_initial_conditions(self, ref_params):
        for s in (1, -1):
            K = k_coefficients(ref_params, s, 0.3)
            assert K[0] == 1.0
            assert K[1] == pytest.approx(f_coeff(ref_params, s, 0, 0.3), rel=1e-15)

    def test_recursion_by_hand(self):
        K = k_coefficients(ModelParams(1, 0.5, 0, 0), 1, 0.25)
        assert K[1] == pytest.approx(0.75, abs=1e-15)
        assert K[2] == pytest.approx(0.15625, abs=1e-15)

    def test_against_extended_precision(self, ref_params):
        # 60 digits: 1, 12.3625, 3.9366735197368421..., -1.1048198920905027..., -1.9936624455302519...
        K = k_coefficients(ref_params, -1, 0.3)
        frozen = [1.0, 12.3625, 3.936673519736842105, -1.104819892090502699, -1.993662445530251949]
        assert K[:5] == pytest.approx(frozen, rel=1e-14)
        mp, _ = mp_series(ref_params, 0.3, -1, 5)
        assert K[:5] == pytest.approx([float(v) for v in mp], rel=1e-14)

    def test_nonconvergence(self, ref_params):
        with pytest.raises(NonConvergence):
            k_coefficients(ref_params.with_(g=1.5), 1, 0.3, SeriesConfig(max_terms=8))

    @settings(max_examples=40, deadline=None)
    @given(st.floats(0.05, 1.5), st.floats(0, 1.5), st.floats(-2, 5))
    def test_eps_zero_families_coincide(self, g, d, x):
        p = ModelParams(1, g, d, 0.0)
        if nearest_pole_distance(p, x) < 1e-6:
            return
        assert k_coefficients(p, 1, x) == k_coefficients(p, -1, x)


class TestEvaluateG:
    @pytest.mark.parametrize("x, frozen", [(0.3, -9.5728075763742666467),
                                           (1.0, -0.18995289559514939534),
                                           (-0.5, 2.1310187017791606605),
                                           (2.6, -0.044170492586014125179)])
    def test_against_extended_precision(self, ref_params, x, frozen):
        ev = evaluate_G(ref_params, x)
        assert ev.converged
        assert ev.value == pytest.approx(frozen, rel=1e-12, abs=1e-14)
        assert ev.value == pytest.approx(float(mp_G(ref_params, x)), rel=1e-12, abs=1e-14)

    def test_eps_zero_structure(self):
        p = ModelParams(1, 0.6, 0.7, 0.0)
        ev = evaluate_G(p, 0.42)
        K = k_coefficients(p, 1, 0.42)
        r = p.g / p.omega
        R = sum(k * r ** n for n, k in enumerate(K))
        Rb = sum(k * r ** n / (0.42 - n) for n, k in enumerate(K))
        assert ev.value == pytest.approx(p.delta ** 2 * Rb ** 2 - R ** 2, rel=1e-12)

    def test_diagnostics(self, ref_params):
        ev = evaluate_G(ref_params, 1.3)
        assert ev.nearest_pole_distance == pytest.approx(0.05)
        assert ev.terms_used_plus > 8 and ev.terms_used_minus > 8

    def test_unconverged_flag(self, ref_params):
        ev = evaluate_G(ref_params.with_(g=1.5), 1.3, SeriesConfig(max_terms=10))
        assert not ev.converged

    def test_pole_guard(self, ref_params):
        with pytest.raises(PoleProximity):
            evaluate_G(ref_params, 1.25 + 1e-10)
        with pytest.raises(DegenerateCoupling):
            evaluate_G(ref_params.with_(g=0.0), 0.3)

    def test_sign_change_around_oracle_root(self, ref_params, oracle_fixture):
        E = oracle_fixture[(ref_params, 60)]
        x0 = E[0] + ref_params.g ** 2
        a, b = evaluate_G(ref_params, x0 - 0.05).value, evaluate_G(ref_params, x0 + 0.05).value
        assert a * b < 0
        assert abs(evaluate_G(ref_params, x0).value) < 1e-6 * max(abs(a), abs(b))

    def test_small_at_all_pole_free_oracle_roots(self, ref_params, oracle_fixture):
        for E in oracle_fixture[(ref_params, 60)]:
            x = E + ref_params.g ** 2
            if nearest_pole_distance(ref_params, x) < 0.06:
                continue
            v = evaluate_G(ref_params, x).value
            scale = max(abs(evaluate_G(ref_params, x - 0.05).value),
                        abs(evaluate_G(ref_params, x + 0.05).value))
            assert abs(v) < 1e-6 * scale

    @settings(max_examples=60, deadline=None)
    @given(st.floats(0.05, 1.5), st.floats(0, 1.5), st.floats(-1.5, 1.5), st.floats(-2, 4))
    def test_eps_reflection(self, g, d, e, x):
        p = ModelParams(1, g, d, e)
        if nearest_pole_distance(p, x) < 1e-6:
            return
        # the two families swap roles, so only the product order differs
        a, b = evaluate_G(p, x).value, evaluate_G(p.with_(epsilon=-e), x).value
        assert a == pytest.approx(b, rel=1e-13, abs=1e-13 * _term_scale(p, x))

    @settings(max_examples=40, deadline=None)
    @given(st.floats(0.05, 1.5), st.floats(0, 1.5), st.floats(-1.5, 1.5), st.floats(-2, 4))
    def test_truncation_stability(self, g, d, e, x):
        p = ModelParams(1, g, d, e)
        if nearest_pole_distance(p, x) < 1e-3:
            return
        cfg = SeriesConfig()
        base = evaluate_G(p, x, cfg)
        longer = evaluate_G(p, x, SeriesConfig(rel_tol=1e-17, consecutive_small=20))
        assert base.converged
        assert longer.terms_used_plus >= base.terms_used_plus
        # rounding in the products bounds how small the drift can be made
        scale = max(abs(base.value), 1e-300)
        assert abs(longer.value - base.value) <= 10 * cfg.rel_tol * scale + 1e-14 * _term_scale(p, x)


def _term_scale(p, x):
    """Largest magnitude entering either product of G; bounds its rounding error."""
    r = p.g / p.omega
    big_r, big_rb = 1.0, 1.0
    for s in (1, -1):
        K = k_coefficients(p, s, x)
        big_r *= max(abs(k) * r ** n for n, k in enumerate(K))
        big_rb *= max(abs(k) * r ** n / abs(x - n * p.omega + s * p.epsilon)
                      for n, k in enumerate(K))
    return max(big_r, p.delta ** 2 * big_rb)


class TestRegularized:
    def test_matches_scaled_G_off_pole(self, ref_params):
        x = 1.3
        for rem in [(1, None), (None, 1), (1, 1), (None, None)]:
            tp = x - rem[0] + 0.25 if rem[0] is not None else 1.0
            tm = x - rem[1] - 0.25 if rem[1] is not None else 1.0
            assert evaluate_G_regularized(ref_params, x, rem) == pytest.approx(
                tp * tm * evaluate_G(ref_params, x).value, rel=1e-12)

    @pytest.mark.parametrize("pole, rem", [(0.75, (1, None)), (-0.25, (0, None)),
                                           (1.25, (None, 1))])
    def test_finite_and_continuous_at_pole(self, ref_params, pole, rem):
        at = evaluate_G_regularized(ref_params, pole, rem)
        near = evaluate_G_regularized(ref_params, pole + 1e-9, rem)
        assert math.isfinite(at)
        assert at == pytest.approx(near, abs=1e-7)


class TestPolePositions:
    def test_coincident_families(self):
        assert pole_positions(ModelParams(1, 0, 0, 0), 2.5) == [0.0, 1.0, 2.0]

    def test_dedup_half_integer_bias(self):
        assert pole_positions(ModelParams(1, 0, 0, 0.5), 2.2) == [-0.5, 0.5, 1.5]

    def test_enumeration(self):
        assert pole_positions(ModelParams(1, 0, 0, 0.25), 1.4) == [-0.25, 0.25, 0.75, 1.25]

    @given(st.floats(-2, 2), st.floats(0, 2), st.floats(-1, 6))
    def test_strictly_ascending(self, e, d, xmax):
        out = pole_positions(ModelParams(1, 0, d, e), xmax)
        assert all(b > a for a, b in zip(out, out[1:]))
