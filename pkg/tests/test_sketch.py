import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from learnsketch import sketch as sk
from learnsketch.matlin import InvalidInputError, frob2
from learnsketch.sketch import CountSketch


@st.composite
def countsketches(draw, n=None):
    m = draw(st.integers(1, 6))
    n = n or draw(st.integers(1, 12))
    p = draw(st.lists(st.integers(0, m - 1), min_size=n, max_size=n))
    v = draw(st.lists(st.floats(-5, 5, allow_nan=False), min_size=n, max_size=n))
    return CountSketch(m, n, p, v)


class TestCountSketch:
    def test_validation(self):
        with pytest.raises(InvalidInputError):
            CountSketch(2, 3, [0, 1], [1, 1])
        with pytest.raises(InvalidInputError):
            CountSketch(2, 2, [0, 2], [1, 1])
        with pytest.raises(InvalidInputError):
            CountSketch(2, 2, [0, 1], [1, np.inf])
        with pytest.raises(InvalidInputError):
            CountSketch(0, 2, [0, 0], [1, 1])

    def test_immutable(self):
        S = sk.random_countsketch(3, 5, 0)
        with pytest.raises(ValueError):
            S.p[0] = 1

    def test_classical_flag(self):
        assert sk.random_countsketch(3, 20, 1).is_classical
        assert not CountSketch(1, 2, [0, 0], [0.5, 1]).is_classical


class TestRandom:
    def test_single_bin(self):
        assert np.all(sk.random_countsketch(1, 50, 3).p == 0)

    def test_deterministic(self):
        assert sk.random_countsketch(7, 30, 9) == sk.random_countsketch(7, 30, 9)
        assert sk.random_countsketch(7, 30, 9) != sk.random_countsketch(7, 30, 10)

    def test_values_rademacher(self):
        v = sk.random_countsketch(4, 2000, 5).v
        assert set(np.unique(v)) == {-1.0, 1.0}
        assert abs(v.mean()) < 0.1

    def test_bins_uniform_chi2(self):
        m, n = 16, 10_000
        pvals = []
        for seed in range(20):
            counts = np.bincount(sk.random_countsketch(m, n, seed).p, minlength=m)
            pvals.append(stats.chisquare(counts).pvalue)
        # under uniformity p-values are U(0,1); KS test on the sweep
        assert stats.kstest(pvals, "uniform").pvalue > 1e-3
        counts = np.bincount(sk.random_countsketch(m, n, 0).p, minlength=m)
        sigma = np.sqrt(n / m * (1 - 1 / m))
        assert np.all(np.abs(counts - n / m) <= 4 * sigma)

    @pytest.mark.parametrize("m,n", [(0, 3), (3, 0)])
    def test_invalid(self, m, n):
        with pytest.raises(InvalidInputError):
            sk.random_countsketch(m, n, 0)


class TestApply:
    def test_identity_input(self):
        S = CountSketch(2, 3, [0, 1, 0], [1, 1, -1])
        assert np.array_equal(sk.apply_left(S, np.eye(3)), [[1, 0, -1], [0, 1, 0]])

    def test_zero_values(self, rng):
        S = CountSketch(3, 4, [0, 1, 2, 0], np.zeros(4))
        assert np.array_equal(sk.apply_left(S, rng.standard_normal((4, 5))), np.zeros((3, 5)))

    def test_dense_oracle(self, rng, backend):
        S = sk.random_countsketch(5, 40, rng)
        A = rng.standard_normal((40, 7))
        assert np.allclose(sk.apply_left(S, A), sk.to_dense(S) @ A, atol=1e-12)

    def test_right_identity_input(self):
        R = CountSketch(2, 3, [0, 1, 0], [1, 1, -1])
        assert np.array_equal(sk.apply_right(np.eye(3), R), [[1, 0], [0, 1], [-1, 0]])

    def test_right_identity_sketch(self, rng):
        A = rng.standard_normal((4, 6))
        assert np.array_equal(sk.apply_right(A, sk.identity_countsketch(6)), A)

    def test_right_dense_oracle(self, rng):
        R = sk.random_countsketch(3, 9, rng)
        A = rng.standard_normal((5, 9))
        assert np.allclose(sk.apply_right(A, R), A @ sk.to_dense(R).T, atol=1e-12)
        assert np.allclose(sk.apply_right(A, R), sk.apply_left(R, A.T).T)

    def test_shape_mismatch(self):
        S = sk.random_countsketch(2, 4, 0)
        with pytest.raises(InvalidInputError):
            sk.apply_left(S, np.ones((5, 2)))
        with pytest.raises(InvalidInputError):
            sk.apply_right(np.ones((2, 5)), S)

    def test_stacked(self, rng):
        S, T = sk.random_countsketch(3, 10, rng), sk.random_countsketch(2, 10, rng)
        A = rng.standard_normal((10, 4))
        assert np.allclose(sk.apply_left(sk.stack(S, T), A),
                           np.vstack([sk.apply_left(S, A), sk.apply_left(T, A)]))

    @given(countsketches(n=8), st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 1000))
    def test_linear(self, S, a, b, seed):
        r = np.random.default_rng(seed)
        A, B = r.standard_normal((8, 3)), r.standard_normal((8, 3))
        lhs = sk.apply_left(S, a * A + b * B)
        rhs = a * sk.apply_left(S, A) + b * sk.apply_left(S, B)
        assert np.allclose(lhs, rhs, atol=1e-10)

    @given(countsketches())
    def test_dense_one_nonzero_per_column(self, S):
        D = sk.to_dense(S)
        assert D.shape == (S.m, S.n)
        assert np.all(np.count_nonzero(D, axis=0) <= 1)
        assert np.array_equal(D[S.p, np.arange(S.n)], S.v)


class TestDense:
    def test_small(self):
        assert np.array_equal(sk.to_dense(CountSketch(2, 1, [0], [-1])), [[-1], [0]])

    def test_stacked_concat(self, rng):
        S, T = sk.random_countsketch(3, 6, rng), sk.random_countsketch(2, 6, rng)
        assert np.array_equal(sk.to_dense(sk.stack(S, T)),
                              np.vstack([sk.to_dense(S), sk.to_dense(T)]))


def _proj_residual(rows, basis_rows):
    Q, _ = np.linalg.qr(basis_rows.T)
    return np.linalg.norm(rows.T - Q @ (Q.T @ rows.T))


class TestStack:
    def test_rows(self, rng):
        S, T = sk.random_countsketch(3, 6, rng), sk.random_countsketch(5, 6, rng)
        assert sk.stack(S, T).rows == 8

    def test_flattens(self, rng):
        parts = [sk.random_countsketch(2, 6, rng) for _ in range(3)]
        st3 = sk.stack(sk.stack(parts[0], parts[1]), parts[2])
        assert len(st3.parts) == 3 and st3.rows == 6

    def test_rowspace_contains(self, rng):
        for _ in range(20):
            S, T = sk.random_countsketch(3, 12, rng), sk.random_countsketch(4, 12, rng)
            A = rng.standard_normal((12, 20))
            assert _proj_residual(sk.apply_left(S, A), sk.apply_left(sk.stack(S, T), A)) <= 1e-9

    def test_self_stack(self, rng):
        S = sk.random_countsketch(4, 12, rng)
        A = rng.standard_normal((12, 20))
        both = sk.apply_left(sk.stack(S, S), A)
        assert both.shape[0] == 8
        assert _proj_residual(both, sk.apply_left(S, A)) <= 1e-9

    def test_mismatch(self):
        with pytest.raises(InvalidInputError):
            sk.stack(sk.random_countsketch(2, 5, 0), sk.random_countsketch(2, 6, 0))


class TestWithEntry:
    def test_roundtrip(self):
        S = sk.random_countsketch(4, 6, 0)
        T = sk.with_entry(S, 2, 3, 0.25)
        assert (T.p[2], T.v[2]) == (3, 0.25)
        assert S.p[2] != 3 or S.v[2] != 0.25

    def test_zero_removes(self, rng):
        S = sk.random_countsketch(3, 6, rng)
        A = rng.standard_normal((6, 4))
        T = sk.with_entry(S, 1, S.p[1], 0.0)
        expected = sk.apply_left(S, A)
        expected[S.p[1]] -= S.v[1] * A[1]
        assert np.allclose(sk.apply_left(T, A), expected, atol=1e-12)

    def test_rank1_correction(self, rng):
        S = sk.random_countsketch(3, 6, rng)
        A = rng.standard_normal((6, 4))
        T = sk.with_entry(S, 4, 0, 2.5)
        diff = sk.apply_left(T, A) - sk.apply_left(S, A)
        expected = np.zeros((3, 4))
        expected[0] += 2.5 * A[4]
        expected[S.p[4]] -= S.v[4] * A[4]
        assert np.allclose(diff, expected, atol=1e-12)

    @pytest.mark.parametrize("col,bin_", [(-1, 0), (6, 0), (0, 3)])
    def test_out_of_range(self, col, bin_):
        with pytest.raises(InvalidInputError):
            sk.with_entry(sk.random_countsketch(3, 6, 0), col, bin_, 1.0)


class TestFrobeniusEstimate:
    def test_constant_probability(self):
        eps = 0.5
        m = int(np.ceil(1 / eps ** 2))
        A = np.random.default_rng(0).standard_normal((64, 32))
        ref = frob2(A)
        hits = sum(abs(frob2(sk.apply_left(sk.random_countsketch(m, 64, s), A)) / ref - 1) <= eps
                   for s in range(200))
        assert hits >= 2 * 200 / 3


class TestSerialization:
    def test_file_is_one_based(self):
        S = CountSketch(4, 3, [0, 3, 1], [1.0, -1.0, 0.5])
        assert sk.to_dict(S)["p"] == [1, 4, 2]

    def test_bit_exact(self, tmp_path, rng):
        S = CountSketch(5, 30, rng.integers(0, 5, 30), rng.standard_normal(30))
        path = tmp_path / "s.json"
        sk.save(S, path)
        T = sk.load(path)
        assert T == S and T.v.tobytes() == S.v.tobytes()

    def test_stacked_roundtrip(self, rng):
        st2 = sk.stack(sk.random_countsketch(3, 8, rng), sk.random_countsketch(2, 8, rng))
        assert sk.loads(sk.dumps(st2)) == st2

    def test_dense_roundtrip(self, rng):
        D = rng.standard_normal((3, 7))
        assert np.array_equal(sk.loads(sk.dumps(D)), D)

    def test_bad_object(self):
        with pytest.raises(InvalidInputError):
            sk.loads('{"m": 2, "n": 2, "p": [1, 2]}')
        with pytest.raises(InvalidInputError):
            sk.loads('{"m": 2, "n": 2, "p": [0, 1], "v": [1, 1]}')

    @given(countsketches())
    def test_roundtrip_property(self, S):
        assert sk.loads(sk.dumps(S)) == S
