import numpy as np
import pytest

from qcforms import forms
from qcforms.forms import (
    QuadraticForm,
    canonical_lift,
    corollary_q,
    extremal_q,
    from_cubic,
    from_cyclic,
    mat_to_vec,
    minors,
    norm_squared,
    null_lagrangian,
    parse_form_spec,
    project_minor_span,
    symmetry_check,
    to_biquadratic,
    vec_to_mat,
    zero_form,
)

RNG = np.random.default_rng(20240811)


def random_unit(rng, n=3):
    v = rng.normal(size=n)
    return v / np.linalg.norm(v)


class TestEvaluate:
    def test_q_at_identity(self):
        assert extremal_q().evaluate(np.eye(3)) == -3.0

    def test_zero_input(self):
        f = from_cyclic(*RNG.normal(size=4))
        assert f.evaluate(np.zeros((3, 3))) == 0.0

    def test_q_at_identity_plus_e12(self):
        xi = np.eye(3)
        xi[0, 1] = 1.0
        # direct expansion: Q(I) + coefficient of xi12^2
        assert extremal_q().evaluate(xi) == -2.0

    def test_symmetrization_on_construction(self):
        m = RNG.normal(size=(9, 9))
        f = QuadraticForm(m)
        assert np.allclose(f.matrix, f.matrix.T)
        v = RNG.normal(size=9)
        assert np.isclose(f.evaluate(vec_to_mat(v)), v @ (0.5 * (m + m.T)) @ v)

    def test_vec_mat_roundtrip(self):
        xi = RNG.normal(size=(3, 3))
        assert np.allclose(vec_to_mat(mat_to_vec(xi)), xi)


class TestRankOneEvaluation:
    def test_cubic_axis_probes(self):
        f = from_cubic(1.25, -0.4, 0.6)
        e1 = np.array([1.0, 0, 0])
        e2 = np.array([0.0, 1, 0])
        assert np.isclose(f.evaluate_rank_one(e1, e1), 1.25)  # alpha
        assert np.isclose(f.evaluate_rank_one(e1, e2), 0.6)   # gamma

    def test_cubic_at_all_ones(self):
        alpha, beta, gamma = 0.8, 0.3, 1.1
        f = from_cubic(alpha, beta, gamma)
        ones = np.ones(3)
        expected = 3 * alpha + 6 * (beta + gamma) + 6 * gamma
        assert np.isclose(f.evaluate_rank_one(ones, ones), expected)

    def test_q_vanishes_on_diagonal_rank_ones(self):
        q = extremal_q()
        for t, z in [(1.0, 1.0), (-0.7, 2.3), (3.1, -0.2)]:
            x = t * np.ones(3)
            y = z * np.ones(3)
            assert abs(q.evaluate_rank_one(x, y)) < 1e-12

    def test_acoustic_identity_random(self):
        # |f(x outer y) - x T(y) x^T| <= 1e-12 * (1 + |f|) on 1e4 sphere pairs
        for f in (extremal_q(), from_cubic(1.3, -0.2, 0.5),
                  QuadraticForm(RNG.normal(size=(9, 9)))):
            t = f.acoustic()
            xs = RNG.normal(size=(10_000, 3))
            ys = RNG.normal(size=(10_000, 3))
            xs /= np.linalg.norm(xs, axis=1, keepdims=True)
            ys /= np.linalg.norm(ys, axis=1, keepdims=True)
            lhs = f.evaluate_rank_one(xs, ys)
            rhs = np.einsum("na,nab,nb->n", xs, t.batch(ys), xs)
            assert np.max(np.abs(lhs - rhs)) <= 1e-12 * (1 + f.scale)


class TestAcousticMatrix:
    def test_q_matrix_entries(self):
        t = extremal_q().acoustic()
        y = RNG.normal(size=3)
        y1, y2, y3 = y
        expected = np.array([
            [y1 * y1 + y2 * y2, -y1 * y2, -y1 * y3],
            [-y1 * y2, y2 * y2 + y3 * y3, -y2 * y3],
            [-y1 * y3, -y2 * y3, y3 * y3 + y1 * y1],
        ])
        assert np.allclose(t(y), expected, atol=1e-14)

    def test_cubic_matrix_entries(self):
        alpha, beta, gamma = 1.7, 0.4, 0.9
        t = from_cubic(alpha, beta, gamma).acoustic()
        y = RNG.normal(size=3)
        y1, y2, y3 = y
        bg = beta + gamma
        expected = np.array([
            [alpha * y1**2 + gamma * (y2**2 + y3**2), bg * y1 * y2, bg * y1 * y3],
            [bg * y1 * y2, alpha * y2**2 + gamma * (y3**2 + y1**2), bg * y2 * y3],
            [bg * y1 * y3, bg * y2 * y3, alpha * y3**2 + gamma * (y1**2 + y2**2)],
        ])
        assert np.allclose(t(y), expected, atol=1e-14)

    def test_zero_form(self):
        t = zero_form().acoustic()
        assert np.all(t(RNG.normal(size=3)) == 0.0)

    def test_symmetry_in_ab_and_kl(self):
        c = QuadraticForm(RNG.normal(size=(9, 9))).acoustic().coeffs
        assert np.allclose(c, np.swapaxes(c, 0, 1))
        assert np.allclose(c, np.swapaxes(c, 2, 3))


class TestFamilies:
    def test_cubic_1_1_0_is_trace_squared_on_rank_ones(self):
        f = from_cubic(1.0, 1.0, 0.0)
        for _ in range(50):
            x = RNG.normal(size=3)
            y = RNG.normal(size=3)
            assert np.isclose(f.evaluate_rank_one(x, y), np.dot(x, y) ** 2)

    def test_corollary_specialization(self):
        assert corollary_q(1.0, 1.0, 1.0).allclose(extremal_q())

    def test_extremal_is_cyclic_member(self):
        assert from_cyclic(1.0, -2.0, 1.0, 0.0).allclose(extremal_q())

    def test_cyclic_with_c_equals_d_matches_cubic(self):
        # (a, b, c, c) as a biquadratic equals cubic with alpha=a, beta=b/2-c, gamma=c
        a, b, c = 1.4, -0.6, 0.8
        lhs = to_biquadratic(from_cyclic(a, b, c, c))
        rhs = to_biquadratic(from_cubic(a, b / 2 - c, c))
        assert lhs.allclose(rhs)


class TestMinors:
    def test_rank_one_kills_minors(self):
        xs = RNG.normal(size=(100_000, 3))
        ys = RNG.normal(size=(100_000, 3))
        xi = np.einsum("ni,nj->nij", xs, ys)
        vals = minors(xi)
        scale = np.max(np.abs(xi), axis=(1, 2)) ** 2
        assert np.max(np.abs(vals) / (1 + scale)[:, None]) <= 1e-12

    def test_minors_of_identity(self):
        assert np.allclose(minors(np.eye(3)), [1, 1, 1, 0, 0, 0, 0, 0, 0])

    def test_minors_are_cofactors(self):
        xi = RNG.normal(size=(3, 3))
        cof = np.linalg.inv(xi).T * np.linalg.det(xi)
        expected = [cof[i, j] for i, j in forms.VARIABLE_ORDER]
        assert np.allclose(minors(xi), expected)

    def test_null_lagrangian_e1_at_identity(self):
        e1 = np.zeros(9)
        e1[0] = 1.0
        assert np.isclose(null_lagrangian(e1).evaluate(np.eye(3)), 1.0)

    def test_null_lagrangian_vanishes_on_rank_ones(self):
        alpha = RNG.normal(size=9)
        f = null_lagrangian(alpha)
        xs = RNG.normal(size=(100_000, 3))
        ys = RNG.normal(size=(100_000, 3))
        xs /= np.linalg.norm(xs, axis=1, keepdims=True)
        ys /= np.linalg.norm(ys, axis=1, keepdims=True)
        vals = f.evaluate_rank_one(xs, ys)
        assert np.max(np.abs(vals)) <= 1e-12 * (1 + f.scale)


class TestBiquadraticQuotient:
    def test_minor_forms_map_to_zero(self):
        for n in range(9):
            alpha = np.zeros(9)
            alpha[n] = 1.0
            b = to_biquadratic(null_lagrangian(alpha))
            assert b.scale <= 1e-15

    def test_quotient_invariance(self):
        f = QuadraticForm(RNG.normal(size=(9, 9)))
        alpha = RNG.normal(size=9)
        g = f + null_lagrangian(alpha)
        assert to_biquadratic(f).allclose(to_biquadratic(g), tol=1e-14)

    def test_lift_is_right_inverse(self):
        b = forms.Biquadratic(RNG.normal(size=(6, 6)))
        assert to_biquadratic(canonical_lift(b)).allclose(b, tol=1e-14)

    def test_lift_roundtrip_on_q(self):
        q = extremal_q()
        assert canonical_lift(to_biquadratic(q)).allclose(q)

    def test_projection_residual_in_minor_span(self):
        f = QuadraticForm(RNG.normal(size=(9, 9)))
        diff = f - canonical_lift(to_biquadratic(f))
        _, residual = project_minor_span(diff)
        assert residual <= 1e-12 * max(1.0, f.scale)

    def test_cubic_biquadratic_coefficients(self):
        alpha, beta, gamma = 0.9, -0.3, 0.5
        b = to_biquadratic(from_cubic(alpha, beta, gamma))
        x = RNG.normal(size=3)
        y = RNG.normal(size=3)
        expected = (
            alpha * np.sum(x**2 * y**2)
            + 2 * (beta + gamma) * (x[0] * x[1] * y[0] * y[1]
                                    + x[1] * x[2] * y[1] * y[2]
                                    + x[2] * x[0] * y[2] * y[0])
            + gamma * (x[0]**2 * (y[1]**2 + y[2]**2)
                       + x[1]**2 * (y[0]**2 + y[2]**2)
                       + x[2]**2 * (y[0]**2 + y[1]**2))
        )
        assert np.isclose(b.evaluate(x, y), expected)


class TestSymmetry:
    def test_extremal_q_symmetries(self):
        b = to_biquadratic(extremal_q())
        assert symmetry_check(b, "cyclic")
        assert symmetry_check(b, "axis-reflection")
        assert not symmetry_check(b, "swap")  # c=1 differs from d=0

    def test_cubic_family_is_swap_symmetric(self):
        b = to_biquadratic(from_cubic(1.0, 2.0, 3.0))
        assert symmetry_check(b, "swap")
        assert symmetry_check(b, "cyclic")
        assert symmetry_check(b, "axis-reflection")

    def test_generic_form_has_no_symmetry(self):
        b = to_biquadratic(QuadraticForm(RNG.normal(size=(9, 9))))
        assert not symmetry_check(b, "swap")
        assert not symmetry_check(b, "cyclic")
        assert not symmetry_check(b, "axis-reflection")

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            symmetry_check(to_biquadratic(extremal_q()), "mirror")


class TestFlux:
    def test_q_flux_structure(self):
        q = extremal_q()
        xi = RNG.normal(size=(3, 3))
        j = q.flux(xi)
        expected = np.array([
            [xi[0, 0] - xi[1, 1] - xi[2, 2], xi[0, 1], 0.0],
            [0.0, xi[1, 1] - xi[2, 2] - xi[0, 0], xi[1, 2]],
            [xi[2, 0], 0.0, xi[2, 2] - xi[0, 0] - xi[1, 1]],
        ])
        assert np.allclose(j, expected, atol=1e-14)

    def test_flux_at_zero(self):
        f = QuadraticForm(RNG.normal(size=(9, 9)))
        assert np.all(f.flux(np.zeros((3, 3))) == 0.0)

    def test_q_flux_at_identity(self):
        q = extremal_q()
        j = q.flux(np.eye(3))
        assert np.allclose(j, -np.eye(3))
        assert np.isclose(np.sum(j * np.eye(3)), q.evaluate(np.eye(3)))

    def test_flux_identity_random(self):
        f = QuadraticForm(RNG.normal(size=(9, 9)))
        for _ in range(200):
            xi = RNG.normal(size=(3, 3))
            val = f.evaluate(xi)
            assert abs(np.sum(f.flux(xi) * xi) - val) <= 1e-12 * (1 + abs(val))


class TestFormSpec:
    def test_family_specs(self):
        assert parse_form_spec({"family": "extremal_q", "params": []}).allclose(extremal_q())
        assert parse_form_spec({"family": "cubic", "params": [1, 1, 0]}).allclose(
            from_cubic(1, 1, 0))
        assert parse_form_spec({"family": "corollary_q", "params": [4, 1, 0.25]}).allclose(
            corollary_q(4, 1, 0.25))

    def test_matrix_spec_roundtrip(self):
        q = extremal_q()
        spec = {"matrix": q.matrix.tolist()}
        assert parse_form_spec(spec).allclose(q)

    def test_asymmetric_matrix_warns(self):
        m = np.eye(9)
        m[0, 1] = 1.0  # asymmetry well above 1e-9
        with pytest.warns(UserWarning):
            f = parse_form_spec({"matrix": m.tolist()})
        assert np.isclose(f.matrix[0, 1], 0.5)

    def test_bad_specs_rejected(self):
        for spec in ({}, {"family": "quartic", "params": []},
                     {"family": "cubic", "params": [1]}, {"matrix": [[1, 2], [3, 4]]}):
            with pytest.raises(ValueError):
                parse_form_spec(spec)

    def test_non_dict_rejected(self):
        with pytest.raises(ValueError):
            parse_form_spec([1, 2, 3])
