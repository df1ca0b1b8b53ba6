"""Haar system unit tests with hand-derived expected values."""

import math

import numpy as np
import pytest

from schatten_lab.dyadic import CubeId, GridError, Shift, enumerate_cubes, unit_window
from schatten_lab.haar import (
    HaarIndex,
    SampledFunction,
    Signature,
    cancellative_signatures,
    coefficients_csv_rows,
    cube_average,
    expand_mean_oscillation,
    haar_coefficient,
    haar_function,
    haar_transform,
    _haar_transform_direct,
    mean_oscillation,
    nwo_maximal,
    sample_function,
    synthesize,
)

STD1 = Shift.zero(1)
STD2 = Shift.zero(2)


def rng(seed=7):
    return np.random.default_rng(seed)


class TestSignature:
    def test_cancellative_count(self):
        assert len(cancellative_signatures(1)) == 1
        assert len(cancellative_signatures(2)) == 3
        assert len(cancellative_signatures(3)) == 7

    def test_all_ones_not_cancellative(self):
        assert not Signature((1, 1)).cancellative
        assert Signature((0, 1)).cancellative

    def test_bad_bits(self):
        with pytest.raises(GridError):
            Signature((0, 2))


class TestHaarValues:
    def test_unit_interval_values(self):
        win = unit_window(1, 8, 2)
        h = haar_function(win, CubeId(STD1, 0, (0,)), Signature((0,)))
        assert np.array_equal(h.values, np.array([1, 1, 1, 1, -1, -1, -1, -1.0]))

    def test_half_interval_values(self):
        win = unit_window(1, 8, 2)
        h = haar_function(win, CubeId(STD1, 1, (1,)), Signature((0,)))
        s = math.sqrt(2)
        assert np.allclose(h.values, [0, 0, 0, 0, s, s, -s, -s], atol=0)

    def test_averaging_factor(self):
        win = unit_window(1, 8, 2)
        h = haar_function(win, CubeId(STD1, 1, (0,)), Signature((1,)))
        s = math.sqrt(2)
        assert np.allclose(h.values, [s, s, s, s, 0, 0, 0, 0], atol=0)

    def test_tensor_sign_pattern(self):
        win = unit_window(2, 4, 1)
        h = haar_function(win, CubeId(STD2, 0, (0, 0)), Signature((0, 0)))
        # first axis indexes rows; sign flips across both midlines
        assert np.array_equal(np.sign(h.values[0]), [1, 1, -1, -1])
        assert np.array_equal(np.sign(h.values[3]), [-1, -1, 1, 1])

    def test_lp_norms_exact(self):
        # ||h||_p = |Q|^(1/p - 1/2); discrete midpoint sums hit it exactly
        win = unit_window(1, 16, 2)
        q = CubeId(STD1, 1, (0,))  # |Q| = 1/2
        h = haar_function(win, q, Signature((0,)))
        for p in (1.0, 2.0, 4.0):
            assert h.norm_lp(p) == pytest.approx(0.5 ** (1 / p - 0.5), rel=1e-14)
        assert h.norm_lp(math.inf) == pytest.approx(math.sqrt(2), rel=1e-14)
        assert h.norm_lp(1.0) * h.norm_lp(math.inf) == pytest.approx(1.0, rel=1e-14)


class TestOrthonormality:
    def gram(self, win, shift):
        funcs = [
            haar_function(win, q, sig)
            for q in enumerate_cubes(win, shift)
            for sig in cancellative_signatures(win.n)
        ]
        m = len(funcs)
        g = np.empty((m, m))
        for i in range(m):
            for j in range(m):
                g[i, j] = funcs[i].inner(funcs[j])
        return g

    def test_gram_identity_1d(self):
        win = unit_window(1, 16, 2)
        g = self.gram(win, STD1)
        assert g.shape == (7, 7)
        assert np.max(np.abs(g - np.eye(7))) < 1e-12

    def test_gram_identity_2d(self):
        win = unit_window(2, 8, 1)
        g = self.gram(win, STD2)
        assert g.shape == (15, 15)
        assert np.max(np.abs(g - np.eye(15))) < 1e-12

    def test_zero_mean(self):
        win = unit_window(2, 8, 1)
        for q in enumerate_cubes(win, STD2):
            for sig in cancellative_signatures(2):
                h = haar_function(win, q, sig)
                assert abs(h.values.sum() * win.cell_volume) < 1e-14


class TestCoefficients:
    def test_linear_coefficient_quarter(self):
        # <x, h_[0,1)> = int_0^1/2 x - int_1/2^1 x = -1/4, exact at midpoints
        win = unit_window(1, 64, 3)
        b = sample_function(win, lambda x: x)
        c = haar_coefficient(b, CubeId(STD1, 0, (0,)), Signature((0,)))
        assert c == pytest.approx(-0.25, abs=1e-15)

    def test_coefficient_matches_inner_product(self):
        win = unit_window(2, 16, 2)
        b = SampledFunction(win, rng().standard_normal((16, 16)))
        q = CubeId(STD2, 2, (1, 3))
        for sig in cancellative_signatures(2):
            direct = b.inner(haar_function(win, q, sig))
            assert haar_coefficient(b, q, sig) == pytest.approx(direct, abs=1e-14)

    def test_outside_window_cube_is_zero(self):
        win = unit_window(1, 8, 2)
        b = SampledFunction(win, np.ones(8))
        far = CubeId(STD1, 0, (5,))
        assert haar_coefficient(b, far, Signature((0,))) == 0.0


class TestTransform:
    def test_pyramid_matches_direct_1d(self):
        win = unit_window(1, 32, 3)
        b = SampledFunction(win, rng(1).standard_normal(32))
        fast = haar_transform(b)
        slow = _haar_transform_direct(b, STD1)
        assert fast.method == "pyramid"
        assert set(fast.data) == set(slow.data)
        for key, val in slow.data.items():
            assert fast.data[key] == pytest.approx(val, abs=1e-12)

    def test_pyramid_matches_direct_2d(self):
        win = unit_window(2, 16, 2)
        b = SampledFunction(win, rng(2).standard_normal((16, 16)))
        fast = haar_transform(b)
        slow = _haar_transform_direct(b, STD2)
        assert fast.method == "pyramid"
        for key, val in slow.data.items():
            assert fast.data[key] == pytest.approx(val, abs=1e-12)

    def test_shifted_system_runs_direct(self):
        win = unit_window(1, 16, 2)
        b = SampledFunction(win, rng(3).standard_normal(16))
        out = haar_transform(b, Shift((1,)))
        assert out.method == "direct"
        assert len(out.data) > 0

    def test_parseval_complete_window(self):
        # levels 0..log2(N)-1 resolve every cell: energy splits exactly
        win = unit_window(1, 64, 5)
        b = SampledFunction(win, rng(4).standard_normal(64))
        out = haar_transform(b)
        total = out.window_mean**2 + sum(v**2 for v in out.data.values())
        assert total == pytest.approx(b.norm_lp(2.0) ** 2, rel=1e-10)

    def test_synthesis_roundtrip(self):
        win = unit_window(2, 8, 2)
        b = SampledFunction(win, rng(5).standard_normal((8, 8)))
        back = synthesize(haar_transform(b))
        assert np.max(np.abs(back.values - b.values)) < 1e-12


class TestAverages:
    def test_cube_average_telescopes(self):
        # avg_Q = window mean + sum over strict ancestors of coeff * haar value on Q
        win = unit_window(1, 64, 5)
        b = SampledFunction(win, rng(6).standard_normal(64))
        out = haar_transform(b)
        q = CubeId(STD1, 3, (5,))
        acc = out.window_mean
        r = q
        sig = Signature((0,))
        from schatten_lab.dyadic import parent

        while r.level > 0:
            r = parent(r)
            hval = haar_function(win, r, sig)
            probe = CubeId(STD1, q.level, q.offset)
            from schatten_lab.dyadic import sample_slices

            sl = sample_slices(win, probe)
            acc += out.data[HaarIndex(r, sig)] * float(hval.values[sl][0])
        assert acc == pytest.approx(cube_average(b, q), abs=1e-10)

    def test_mean_oscillation_of_identity(self):
        # avg over [0,1) of |x - 1/2| = 1/4, exact at midpoints
        win = unit_window(1, 8, 2)
        b = sample_function(win, lambda x: x)
        assert mean_oscillation(b, CubeId(STD1, 0, (0,))) == pytest.approx(0.25, abs=1e-15)

    def test_expand_full_depth_exact(self):
        win = unit_window(1, 16, 3)  # finest cubes hold 2 samples: expansion is exact
        b = SampledFunction(win, rng(8).standard_normal(16))
        q = CubeId(STD1, 1, (1,))
        exp = expand_mean_oscillation(b, q)
        assert exp.residual_l2 < 1e-12
        assert exp.average == pytest.approx(cube_average(b, q), abs=1e-14)

    def test_expand_truncated_reports_residual(self):
        win = unit_window(1, 32, 2)  # truncated: finest cubes hold 8 samples
        b = SampledFunction(win, rng(9).standard_normal(32))
        exp = expand_mean_oscillation(b, CubeId(STD1, 0, (0,)))
        # residual equals the energy of b below level 2, computed by hand here
        coarse = b.values.reshape(8, 4).mean(axis=1).repeat(4)
        expected = math.sqrt(float(((b.values - coarse) ** 2).sum()) * win.cell_volume)
        assert exp.residual_l2 == pytest.approx(expected, rel=1e-10)
        assert exp.residual_l2 > 0.01


class TestNWOMaximal:
    def test_hand_case(self):
        win = unit_window(1, 4, 1)
        f = SampledFunction(win, np.array([1.0, 0.0, 0.0, 0.0]))
        whole = CubeId(STD1, 0, (0,))
        half = CubeId(STD1, 1, (0,))
        family = [
            (whole, haar_function(win, whole, Signature((1,)))),
            (half, haar_function(win, half, Signature((1,)))),
        ]
        # note sig (1,) on the whole window is chi/sqrt(1): <f,e> = 1/4
        # on [0,1/2): e = sqrt(2) chi, <f,e> = sqrt(2)/4, /sqrt(1/2) -> 1/2
        out = nwo_maximal(f, family)
        assert np.allclose(out.values, [0.5, 0.5, 0.25, 0.25], atol=1e-14)


class TestCsvExport:
    def test_rows_frozen(self):
        win = unit_window(1, 8, 1)
        b = sample_function(win, lambda x: x)
        rows = coefficients_csv_rows(haar_transform(b))
        assert rows[0] == ["cube", "signature", "coefficient"]
        assert rows[1][:2] == ["0:0:0", "0"]
        assert float(rows[1][2]) == pytest.approx(-0.25, abs=1e-15)
        # both half-interval coefficients equal -sqrt(2)/16 for slope-1 data
        assert rows[2][:2] == ["0:1:0", "0"]
        assert float(rows[2][2]) == pytest.approx(-math.sqrt(2) / 16, abs=1e-15)
        assert rows[3][:2] == ["0:1:1", "0"]
        assert float(rows[3][2]) == pytest.approx(-math.sqrt(2) / 16, abs=1e-15)

    def test_seventeen_digit_roundtrip(self):
        win = unit_window(1, 16, 2)
        b = SampledFunction(win, rng(10).standard_normal(16))
        out = haar_transform(b)
        rows = coefficients_csv_rows(out)
        for (idx, val), row in zip(out.sorted_items(), rows[1:]):
            assert float(row[2]) == val
