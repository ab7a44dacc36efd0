import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kpwaves import LatticeBox, SpectralField, delta, omega, dx_product, s_map, f_map
from kpwaves.operators import (pair_table, triple_table, segment_sum,
                               convolve, _s_apply)


def conv_oracle(box, u, v):
    """Dictionary convolution sum, written independently of the tables."""
    out = {}
    for k in box:
        for l in box:
            n = (k[0] + l[0], k[1] + l[1])
            if n in box:
                out[n] = out.get(n, 0.0) + u[k] * v[l]
    w = SpectralField.zeros(box)
    for n, val in out.items():
        w.coeffs[box.index(n)] = val
    return w


def f_map_oracle(box, a, b, c):
    """Direct triple sum over j + k + l = n with the inner pair in the box."""
    out = SpectralField.zeros(box)
    for n in box:
        acc = 0.0j
        for j in box:
            for k in box:
                m = (j[0] + k[0], j[1] + k[1])
                if m not in box:
                    continue
                l = (n[0] - m[0], n[1] - m[1])
                if l not in box:
                    continue
                d = delta(n, m, l)
                acc += (n[0] / 2.0) * (j[0] + k[0]) / (1j * d) \
                    * a[j] * b[k] * c[l]
        out.coeffs[box.index(n)] = acc
    return out


class TestTables:
    def test_pair_table_is_complete(self, box22):
        pt = pair_table(box22)
        listed = set()
        for r in range(len(pt)):
            n = tuple(box22.modes[pt.out_idx[r]])
            k = tuple(box22.modes[pt.k_idx[r]])
            l = tuple(box22.modes[pt.l_idx[r]])
            assert (k[0] + l[0], k[1] + l[1]) == n
            assert pt.delta[r] == pytest.approx(delta(n, k, l), rel=1e-15)
            listed.add((n, k, l))
        expected = {((k[0] + l[0], k[1] + l[1]), k, l)
                    for k in box22 for l in box22
                    if (k[0] + l[0], k[1] + l[1]) in box22}
        assert listed == expected

    def test_pair_table_cached(self, box22):
        assert pair_table(box22) is pair_table(LatticeBox(2, 2))

    def test_triple_table_matches_nested_pairs(self, box21):
        tt = triple_table(box21)
        seen = set()
        for r in range(len(tt)):
            n = tuple(box21.modes[tt.out_idx[r]])
            j = tuple(box21.modes[tt.j_idx[r]])
            q = tuple(box21.modes[tt.q_idx[r]])
            k = tuple(box21.modes[tt.k_idx[r]])
            l = (j[0] + q[0], j[1] + q[1])
            assert l in box21
            assert (k[0] + l[0], k[1] + l[1]) == n
            assert tt.l1[r] == l[0]
            assert tt.inner_delta[r] == pytest.approx(delta(l, j, q), rel=1e-15)
            assert tt.outer_delta[r] == pytest.approx(delta(n, k, l), rel=1e-15)
            four = omega(j) + omega(q) + omega(k) - omega(n)
            assert tt.four_wave[r] == pytest.approx(four, rel=1e-14, abs=1e-12)
            seen.add((n, j, q, k))
        expected = set()
        for j in box21:
            for q in box21:
                m = (j[0] + q[0], j[1] + q[1])
                if m not in box21:
                    continue
                for k in box21:
                    n = (m[0] + k[0], m[1] + k[1])
                    if n in box21:
                        expected.add((n, j, q, k))
        assert seen == expected

    def test_empty_box_tables(self):
        box = LatticeBox(1, 0)
        assert len(pair_table(box)) == 0
        assert len(triple_table(box)) == 0


def test_segment_sum_with_empty_segments():
    starts = np.array([0, 0, 2, 5, 5])
    vals = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
    out = segment_sum(vals, starts)
    assert out.tolist() == [0.0, 3.0, 12.0, 0.0]


def test_segment_sum_batched():
    starts = np.array([0, 1, 3])
    vals = np.array([[1.0, 2.0, 3.0], [10.0, 20.0, 30.0]])
    out = segment_sum(vals, starts)
    assert out.tolist() == [[1.0, 5.0], [10.0, 50.0]]


def test_convolve_against_oracle(box22, make_field):
    u = make_field(box22)
    v = make_field(box22)
    got = convolve(box22, u.coeffs, v.coeffs)
    want = conv_oracle(box22, u, v).coeffs
    assert np.allclose(got, want, rtol=1e-13, atol=1e-13)


def test_dx_product_definition(box22, make_field):
    u = make_field(box22)
    v = make_field(box22)
    got = dx_product(u, v).coeffs
    want = 1j * box22.n1 * conv_oracle(box22, u, v).coeffs
    assert np.allclose(got, want, rtol=1e-13, atol=1e-13)


def test_dx_product_unit_pair_example(box22):
    u = SpectralField.from_modes(box22, {(1, 0): 1.0}, hermitian=True)
    w = dx_product(u, u)
    assert w[(2, 0)] == pytest.approx(2j, rel=1e-15)
    assert w[(-2, 0)] == pytest.approx(-2j, rel=1e-15)


def test_s_map_unit_pair_example(box22):
    # the only active split at (2, 0) is (1,0)+(1,0) with phase gap -6
    u = SpectralField.from_modes(box22, {(1, 0): 1.0}, hermitian=True)
    w = s_map(u, u)
    assert w[(2, 0)] == pytest.approx(-1.0 / 6.0, rel=1e-15)
    assert w[(-2, 0)] == pytest.approx(-1.0 / 6.0, rel=1e-15)


def test_s_map_against_sum(box22, make_field):
    u = make_field(box22)
    v = make_field(box22)
    got = s_map(u, v)
    for n in ((1, 0), (2, 1), (-1, -2)):
        acc = 0.0j
        for k in box22:
            l = (n[0] - k[0], n[1] - k[1])
            if l in box22:
                acc += (n[0] / 2.0) * u[k] * v[l] / delta(n, k, l)
        assert got[n] == pytest.approx(acc, rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_s_map_bilinear_symmetric(seed):
    box = LatticeBox(2, 1)
    r = np.random.default_rng(seed)

    def rand():
        return SpectralField(box, r.standard_normal(box.size)
                             + 1j * r.standard_normal(box.size))

    u, v, w = rand(), rand(), rand()
    alpha = complex(r.standard_normal(), r.standard_normal())
    sym = s_map(u, v) - s_map(v, u)
    assert np.abs(sym.coeffs).max() < 1e-12
    lin = s_map(u + alpha * w, v) - s_map(u, v) - alpha * s_map(w, v)
    assert np.abs(lin.coeffs).max() < 1e-11


def test_operators_preserve_reality(box22, make_field):
    u = make_field(box22, hermitian=True)
    v = make_field(box22, hermitian=True)
    assert dx_product(u, v).is_real_symmetric(tol=1e-13)
    assert s_map(u, v).is_real_symmetric(tol=1e-13)
    assert f_map(u, v, u).is_real_symmetric(tol=1e-12)


def test_f_map_against_direct_sum(box21, make_field):
    a = make_field(box21)
    b = make_field(box21)
    c = make_field(box21)
    got = f_map(a, b, c)
    want = f_map_oracle(box21, a, b, c)
    scale = np.abs(want.coeffs).max()
    assert np.abs(got.coeffs - want.coeffs).max() <= 1e-13 * scale


def test_f_map_is_minus_s_of_dx(box22, make_field):
    a = make_field(box22)
    b = make_field(box22)
    c = make_field(box22)
    direct = f_map(a, b, c)
    composed = s_map(c, dx_product(a, b)) * -1.0
    assert np.allclose(direct.coeffs, composed.coeffs, rtol=0, atol=1e-12)


def test_commutator_identity(box33, make_field):
    # generator of the free flow acting on the bilinear map
    om = 1j * box33.dispersion().values

    def lin(x):
        return SpectralField(box33, om * x.coeffs)

    for _ in range(5):
        u = make_field(box33)
        v = make_field(box33)
        lhs = lin(s_map(u, v)) - s_map(lin(u), v) - s_map(u, lin(v))
        rhs = dx_product(u, v) * -0.5
        scale = max(1.0, np.abs(rhs.coeffs).max())
        assert np.abs((lhs - rhs).coeffs).max() <= 1e-12 * scale


def test_box_mismatch_raises(box22, box33, make_field):
    u = make_field(box22)
    v = make_field(box33)
    with pytest.raises(ValueError):
        s_map(u, v)
    with pytest.raises(ValueError):
        dx_product(u, v)


def test_s_apply_matches_public_wrapper(box22, make_field):
    u = make_field(box22)
    v = make_field(box22)
    raw = _s_apply(box22, u.coeffs, v.coeffs)
    assert np.array_equal(raw, s_map(u, v).coeffs)
