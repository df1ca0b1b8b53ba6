"""Spectrum and Schatten-Lorentz functional tests."""

import math

import numpy as np
import pytest

from schatten_lab.dyadic import CubeId, GridError, Shift, sample_slices, unit_window
from schatten_lab.haar import SampledFunction, Signature, haar_function
from schatten_lab.operators import OperatorMatrix, conjugate_by_weight, riesz_matrix
from schatten_lab.spectra import (
    SingularSpectrum,
    functional_report,
    nwo_size_report,
    rs_lower_functional,
    rs_upper_assembly,
    schatten_norm,
    singular_values,
    spectrum_csv_rows,
    weak_argmax,
)
from schatten_lab.weights import power_weight

STD1 = Shift.zero(1)


def all_cubes_1d(win):
    out = []
    for k in range(win.k_min, win.k_max + 1):
        out.extend(CubeId(STD1, k, (m,)) for m in range(2**k))
    return out


class TestSingularValues:
    def test_zero_matrix(self):
        s = singular_values(np.zeros((5, 5)))
        assert np.all(s.values == 0)
        assert s.numerical_rank == 0

    def test_diagonal_sorted(self):
        s = singular_values(np.diag([3.0, 1.0, 2.0]))
        assert np.allclose(s.values, [3.0, 2.0, 1.0])

    def test_eigen_oracle(self):
        T = np.random.default_rng(0).standard_normal((50, 50))
        s = singular_values(T)
        ev = np.sort(np.linalg.eigvalsh(T.T @ T))[::-1]
        assert np.allclose(s.values, np.sqrt(np.maximum(ev, 0.0)), atol=1e-10)

    def test_unitary_invariance(self):
        g = np.random.default_rng(1)
        T = g.standard_normal((30, 30))
        U, _ = np.linalg.qr(g.standard_normal((30, 30)))
        V, _ = np.linalg.qr(g.standard_normal((30, 30)))
        s1 = singular_values(T).values
        s2 = singular_values(U @ T @ V).values
        assert np.allclose(s1, s2, atol=1e-10)

    def test_weighted_equals_conjugated(self):
        win = unit_window(1, 32, 3)
        w = power_weight(win, 0.5, (0.4,))
        T = riesz_matrix(1, win, mode="truncated-kernel")
        weighted = singular_values(OperatorMatrix(T.entries, win, ip_weight=w))
        plain = singular_values(conjugate_by_weight(T, w))
        assert np.max(np.abs(weighted.values - plain.values)) <= 1e-10 * plain.values[0]

    def test_nonfinite_rejected(self):
        bad = np.array([[1.0, np.nan], [0.0, 1.0]])
        with pytest.raises(GridError):
            singular_values(bad)

    def test_numerical_rank(self):
        s = singular_values(np.diag([1.0, 1e-20]))
        assert len(s.values) == 2
        assert s.numerical_rank == 1

    def test_invalid_order_rejected(self):
        with pytest.raises(GridError):
            SingularSpectrum(np.array([1.0, 2.0]), 4)


class TestSchattenNorm:
    def test_arithmetic(self):
        assert schatten_norm([1.0, 0.5, 0.25], 1, 1) == 1.75

    def test_weak_norm_scan(self):
        s = 1.0 / np.arange(1, 101)
        assert schatten_norm(s, 1, math.inf) == 2.0
        assert weak_argmax(s, 1) == 1

    def test_pp_equals_lp(self):
        vals = np.sort(np.random.default_rng(2).random(40))[::-1]
        for p in (1.0, 2.0, 3.5):
            assert schatten_norm(vals, p, p) == float(np.sum(vals**p) ** (1 / p))

    def test_inclusion_constant(self):
        # fixed-length comparison S^(p2,q2) <= C * S^(p1,q1) for p1 < p2,
        # with C assembled from the two power weights: holding the worst
        # normalized head sums against the tail weight
        p1, q1, p2, q2 = 2.0, 2.0, 4.0, 4.0
        m = 60
        k = np.arange(1, m + 1)
        S = np.cumsum((1.0 + k) ** (q1 / p1 - 1.0))
        D = np.max((1.0 + k) ** (1.0 / p1) / S ** (1.0 / q1))
        E = schatten_norm((1.0 + k) ** (-1.0 / p1), p2, q2)
        C = D * E
        g = np.random.default_rng(3)
        for _ in range(20):
            vals = np.sort(g.random(m))[::-1]
            assert schatten_norm(vals, p2, q2) <= C * schatten_norm(vals, p1, q1) * (1 + 1e-12)

    def test_report_fields(self):
        rep = functional_report([1.0, 0.5], 2, "inf")
        assert rep["q"] == "inf"
        assert rep["argmax_k"] in (1, 2)
        assert rep["value"] == pytest.approx(max(2**0.5, 0.5 * 3**0.5))


class TestLowerFunctional:
    def haar_family(self, win):
        return {q: haar_function(win, q, Signature((0,))) for q in all_cubes_1d(win)}

    def test_zero_operator(self):
        win = unit_window(1, 16, 3)
        fam = self.haar_family(win)
        T = OperatorMatrix(np.zeros((16, 16)), win)
        assert rs_lower_functional(T, fam, fam, 2.0) == 0.0

    def test_dominated_by_schatten(self):
        # orthonormal analyzing family: the diagonal is weakly majorized by
        # the singular values, so the functional sits below the S^p norm
        win = unit_window(1, 16, 3)
        fam = self.haar_family(win)
        g = np.random.default_rng(4)
        for p in (2.0, 3.0):
            T = OperatorMatrix(g.standard_normal((16, 16)), win)
            func = rs_lower_functional(T, fam, fam, p)
            s = singular_values(T)
            assert func <= schatten_norm(s, p, p) * (1 + 1e-12)

    def test_haar_family_is_nwo_sized(self):
        win = unit_window(1, 32, 4)
        fam = self.haar_family(win)
        for r in (2.0, 3.0, 6.0):
            rep = nwo_size_report(fam, r)
            assert rep["constant"] == pytest.approx(1.0, rel=1e-12)
            assert rep["count"] == len(fam)

    def test_p_at_most_one_rejected(self):
        win = unit_window(1, 16, 3)
        fam = self.haar_family(win)
        T = OperatorMatrix(np.eye(16), win)
        with pytest.raises(GridError):
            rs_lower_functional(T, fam, fam, 1.0)


class TestUpperAssembly:
    def indicator(self, win, q):
        chi = np.zeros(win.samples_per_side)
        chi[sample_slices(win, q)] = 1.0 / float(q.volume) ** 0.5
        return SampledFunction(win, chi)

    def test_single_unit_term(self):
        win = unit_window(1, 16, 3)
        h = haar_function(win, CubeId(STD1, 1, (0,)), Signature((0,)))
        ratio = rs_upper_assembly([(1.0, h, h)], 2.0, 1.0)
        assert ratio == pytest.approx(1.0, rel=1e-12)

    def test_disjoint_orthonormal_terms(self):
        # disjoint supports: singular values are |lambda| sorted, so the
        # ratio collapses to exactly one
        win = unit_window(1, 16, 3)
        lams = [2.0, 1.0, 3.0]
        terms = []
        for lam, m in zip(lams, (0, 1, 2)):
            e = self.indicator(win, CubeId(STD1, 2, (m,)))
            terms.append((lam, e, e))
        assert rs_upper_assembly(terms, 2.0, 1.0) == pytest.approx(1.0, rel=1e-12)

    def test_frobenius_ratio_one_for_orthonormal_input_family(self):
        win = unit_window(1, 16, 3)
        g = np.random.default_rng(5)
        terms = [
            (g.standard_normal(), haar_function(win, q, Signature((0,))), self.indicator(win, q))
            for q in all_cubes_1d(win)
        ]
        assert rs_upper_assembly(terms, 2.0, 2.0) == pytest.approx(1.0, rel=1e-12)

    def test_random_sweep_bounded(self):
        win = unit_window(1, 16, 3)
        worst = 0.0
        for seed in range(10):
            g = np.random.default_rng(seed)
            terms = [
                (
                    g.standard_normal(),
                    haar_function(win, q, Signature((0,))),
                    self.indicator(win, q),
                )
                for q in all_cubes_1d(win)
            ]
            worst = max(worst, rs_upper_assembly(terms, 4.0, 4.0))
        assert worst <= 1.5

    def test_empty_rejected(self):
        with pytest.raises(GridError):
            rs_upper_assembly([], 2.0, 2.0)


class TestExports:
    def test_csv_rows(self):
        s = singular_values(np.diag([2.0, 1.0]))
        rows = spectrum_csv_rows(s)
        assert rows[0] == ["k", "s_k"]
        assert rows[1] == ["1", "2"]
        assert float(rows[2][1]) == 1.0
