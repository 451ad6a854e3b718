import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ksymplectic.brownian import BrownianGrid, sample_batch
from ksymplectic.errors import DomainError
from ksymplectic.integrate import Trajectory, integrate_paths, make_step, scheme_config
from ksymplectic.model import LV_PARAMS, ModelParams, State, check_coefficient_condition
from ksymplectic.verify import (
    DEFAULT_TRIANGLE,
    Triangle,
    defect_scan,
    empirical_moments,
    euclid_area,
    generator_on_lyapunov,
    k_symplectic_defect,
    log_area,
    probe_states,
    step_jacobian,
    triangle_areas,
    two_form,
    verification_step,
)

E = math.e
# 40-digit shoelace of (0, ln 7), (ln 7, 0), (ln 2, ln 8)
DEFAULT_LOG_AREA = 0.80432111278311086164
# exact rational value 1/819 from the symbolic 2x2 determinant
MILSTEIN_DEFECT_1_7 = 0.0012210012210012210


class TestJacobian:
    def test_identity_at_zero_step(self):
        for name in ("1", "4", "em"):
            M = step_jacobian(verification_step(name, LV_PARAMS), State(1.3, 2.2), 0.0, 0.0)
            np.testing.assert_allclose(M, np.eye(2), atol=1e-9)

    def test_em_jacobian(self):
        # d/dx of x + h(x - xy) is 1 + h(1 - y), which is 1 at y = 1
        M = step_jacobian(make_step(scheme_config("em"), LV_PARAMS), State(1, 1), 0.1, 0.0)
        np.testing.assert_allclose(M, [[1.0, -0.1], [0.1, 1.0]], atol=1e-6)
        M = step_jacobian(make_step(scheme_config("em"), LV_PARAMS), State(2, 3), 0.1, 0.2)
        np.testing.assert_allclose(M, [[0.8, -0.2], [0.3, 1.3]], atol=1e-6)

    def test_scheme4_determinant(self):
        M = step_jacobian(verification_step("4", LV_PARAMS), State(1, 1), 0.1, 0.0)
        x1, y1 = 1.0024720593094508929, 0.95134700654502202222
        assert np.linalg.det(M) == pytest.approx(x1 * y1, abs=1e-8)
        assert np.linalg.det(M) == pytest.approx(0.9536988, abs=5e-8)

    def test_rejects_bad_eps(self):
        with pytest.raises(DomainError):
            step_jacobian(verification_step("4", LV_PARAMS), State(1, 1), 0.1, 0.0, fd_eps=0.0)


def test_two_form_pullback_factor():
    assert two_form(np.eye(2), (2.0, 3.0), (2.0, 3.0)).value == 1.0
    assert two_form(np.diag([2.0, 3.0]), (1.0, 1.0), (2.0, 3.0)).value == 1.0
    assert two_form(np.eye(2), (1.0, 1.0), (2.0, 1.0)).value == 0.5


class TestDefect:
    def test_zero_step(self):
        for name in ("1", "2", "3", "4", "em", "milstein"):
            assert k_symplectic_defect(verification_step(name, LV_PARAMS), State(1.5, 0.7), 0.0, 0.0) <= 1e-9

    def test_scheme1_random_states(self):
        h = 2.0**-5
        step = verification_step("1", LV_PARAMS)
        for s in probe_states(20, seed=7):
            for J in (0.0, math.sqrt(h), -math.sqrt(h)):
                assert k_symplectic_defect(step, s, h, J) <= 1e-6

    def test_milstein_example(self):
        d = k_symplectic_defect(verification_step("milstein", LV_PARAMS), State(1, 7), 2.0**-5, 0.0)
        assert d > 1e-4
        assert d == pytest.approx(MILSTEIN_DEFECT_1_7, rel=1e-6)


def test_defect_scan_separates_scheme_families():
    states = probe_states(20, seed=0)
    rows = defect_scan(["1", "2", "3", "4", "em", "milstein"], states, [2.0**-4, 2.0**-6], LV_PARAMS)
    assert len(rows) == 6 * 20 * 2 * 3
    assert max(r.defect for r in rows if r.scheme in "1234") <= 1e-6
    for name in ("em", "milstein"):
        by_key = {}
        for r in rows:
            if r.scheme == name:
                by_key.setdefault((r.x, r.y, round(r.J / math.sqrt(r.h))), {})[r.h] = r.defect
        for d in by_key.values():
            d4, d6 = d[2.0**-4], d[2.0**-6]
            if d4 < 1e-8 and d6 < 1e-8:
                continue
            assert d4 >= 4 * d6
            assert d4 > 1e-4


class TestAreas:
    def test_log_area_examples(self):
        assert log_area(Triangle(State(1, 1), State(E, 1), State(1, E))) == pytest.approx(0.5, abs=1e-15)
        assert log_area(Triangle(State(1, 1), State(E, E), State(E**2, E**2))) == pytest.approx(0.0, abs=1e-15)
        assert log_area(DEFAULT_TRIANGLE) == pytest.approx(DEFAULT_LOG_AREA, rel=1e-14)

    def test_euclid_area_examples(self):
        assert euclid_area(DEFAULT_TRIANGLE) == 6.0
        assert euclid_area(Triangle(State(1, 1), State(2, 1), State(1, 2))) == 0.5
        assert euclid_area(Triangle(State(1, 1), State(2, 2), State(3, 3))) == 0.0

    def test_vectorised_areas(self):
        xs = np.array([[1.0, 1.0], [7.0, 2.0], [2.0, 1.0]])
        ys = np.array([[7.0, 1.0], [1.0, 1.0], [8.0, 2.0]])
        np.testing.assert_allclose(triangle_areas(xs, ys), [6.0, 0.5])
        np.testing.assert_allclose(triangle_areas(xs, ys, log=True)[0], DEFAULT_LOG_AREA, rtol=1e-14)

    def test_orientation_is_ignored(self):
        a, b, c = DEFAULT_TRIANGLE.vertices()
        flipped = Triangle(State(*c), State(*b), State(*a))
        assert euclid_area(flipped) == euclid_area(DEFAULT_TRIANGLE)


def _small_triangle_drift(name, centre, delta, seed, h=2.0**-6, steps=100):
    u, v = math.log(centre[0]), math.log(centre[1])
    x0 = np.exp([u, u + delta, u])
    y0 = np.exp([v, v, v + delta])
    inc = np.repeat(sample_batch(steps * h, steps, seed, [0]), 3, axis=0)
    b = integrate_paths(x0, y0, inc, h, scheme_config(name), LV_PARAMS, record=range(steps + 1))
    areas = triangle_areas(b.x, b.y, log=True)
    return np.max(np.abs(areas / areas[0] - 1))


@pytest.mark.parametrize("centre", [(1, 2), (2, 1), (0.5, 3)])
def test_small_triangle_log_area_is_nearly_conserved(centre):
    for seed in range(5):
        for name in ("1", "4"):
            assert _small_triangle_drift(name, centre, 0.01, seed) <= 0.01
        # the comparators drift visibly on the same triangle
        assert _small_triangle_drift("milstein", centre, 0.01, seed) > 0.01


class TestLyapunovGenerator:
    def test_reference_points(self):
        assert generator_on_lyapunov(State(2, 3), LV_PARAMS) == pytest.approx(0.5, abs=1e-12)
        assert generator_on_lyapunov(State(0.2, 9), LV_PARAMS) == pytest.approx(0.5, abs=1e-12)

    def test_deterministic_is_zero(self):
        p = ModelParams(2, 2, 2, 2, 0, 0)
        assert check_coefficient_condition(p)
        for s in probe_states(10, seed=3):
            assert generator_on_lyapunov(s, p) == pytest.approx(0.0, abs=1e-12)

    def test_constant_on_grid(self):
        g = np.linspace(0.1, 10, 20)
        vals = np.array([generator_on_lyapunov(State(a, b), LV_PARAMS) for a in g for b in g])
        assert np.ptp(vals) <= 1e-12
        both = ModelParams(1, 1, 1.5, 0.82, 1, 0.6)
        assert check_coefficient_condition(both, 1e-12)
        vals = np.array([generator_on_lyapunov(State(a, b), both) for a in g for b in g])
        np.testing.assert_allclose(vals, (1 + 0.36) / 2, atol=1e-12)

    def test_perturbed_interaction_is_not_constant(self):
        p = ModelParams(1, 1.5, 1.5, 1, 1, 0)
        g = np.linspace(0.1, 10, 20)
        vals = np.array([generator_on_lyapunov(State(a, b), p) for a in g for b in g])
        assert np.ptp(vals) >= 0.1


class TestMoments:
    def test_constant_trajectory(self):
        t = np.linspace(0, 1, 5)
        tr = Trajectory(t, np.ones(5), np.ones(5))
        m = empirical_moments([tr, tr], 2)
        np.testing.assert_array_equal(m.means, 2.0)
        assert m.max == 2.0

    def test_first_moment_is_mean_sum(self):
        t = np.linspace(0, 1, 3)
        a = Trajectory(t, np.array([1.0, 2.0, 3.0]), np.array([1.0, 1.0, 1.0]))
        b = Trajectory(t, np.array([3.0, 2.0, 1.0]), np.array([2.0, 2.0, 2.0]))
        m = empirical_moments([a, b], 1)
        np.testing.assert_allclose(m.means, [3.5, 3.5, 3.5])

    def test_mismatched_grid(self):
        a = Trajectory(np.linspace(0, 1, 3), np.ones(3), np.ones(3))
        b = Trajectory(np.linspace(0, 2, 3), np.ones(3), np.ones(3))
        with pytest.raises(DomainError):
            empirical_moments([a, b], 2)

    def test_order_below_one(self):
        a = Trajectory(np.linspace(0, 1, 3), np.ones(3), np.ones(3))
        with pytest.raises(DomainError):
            empirical_moments([a], 0.5)


# --- properties ----------------------------------------------------------------

positive = st.floats(min_value=0.1, max_value=10.0)


@settings(max_examples=40, deadline=None)
@given(positive, positive, st.sampled_from("1234"), st.sampled_from([2.0**-4, 2.0**-6]), st.sampled_from([-1, 0, 1]))
def test_structure_preserving_defect_property(x, y, name, h, sign):
    step = verification_step(name, LV_PARAMS)
    assert k_symplectic_defect(step, State(x, y), h, sign * math.sqrt(h)) <= 1e-6


@settings(max_examples=50, deadline=None)
@given(positive, positive)
def test_lyapunov_generator_property(x, y):
    assert generator_on_lyapunov(State(x, y), LV_PARAMS) == pytest.approx(0.5, abs=1e-12)


@given(positive, positive, positive, positive, positive, positive)
def test_area_is_nonnegative_and_translation_invariant_in_log(x1, y1, x2, y2, x3, y3):
    tri = Triangle(State(x1, y1), State(x2, y2), State(x3, y3))
    scaled = Triangle(State(2 * x1, 3 * y1), State(2 * x2, 3 * y2), State(2 * x3, 3 * y3))
    assert log_area(tri) >= 0
    # scaling the state is a translation in log coordinates
    assert log_area(scaled) == pytest.approx(log_area(tri), abs=1e-12)
