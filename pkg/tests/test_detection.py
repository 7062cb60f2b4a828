import numpy as np
import pytest

from homsim.detection import (
    ClickQuery,
    DetectionError,
    accidental_probability,
    coincidence_probability,
    no_click_expectation,
    singles_probability,
)


def vacuum(n):
    z = np.zeros((n, n), dtype=complex)
    return z, z.copy()


def thermal(nbar):
    return np.array([[nbar]], complex), np.zeros((1, 1), complex)


def tmsv(nbar):
    c = np.sqrt(nbar * (1 + nbar))
    n = np.diag([nbar, nbar]).astype(complex)
    m = np.array([[0, c], [c, 0]], complex)
    return n, m


class TestNoClick:
    def test_vacuum_gives_dark_factor(self):
        n, m = vacuum(3)
        q = ClickQuery(weights={"A": np.array([1.0, 0.5, 0.2])},
                       dark_means={"A": 1.6e-4})
        val = no_click_expectation(n, m, q, ("A",))
        assert val == pytest.approx(np.exp(-1.6e-4), rel=1e-12)

    def test_thermal_closed_form(self):
        for nbar, w in [(0.3, 0.7), (2.5, 1.0), (1e-3, 0.01)]:
            n, m = thermal(nbar)
            q = ClickQuery(weights={"A": np.array([w])})
            val = no_click_expectation(n, m, q, ("A",))
            assert val == pytest.approx(1 / (1 + w * nbar), rel=1e-10)

    def test_tmsv_closed_form(self):
        nbar, w = 0.4, 0.6
        n, m = tmsv(nbar)
        q = ClickQuery(weights={"A": np.array([w, 0.0]), "B": np.array([0.0, w])})
        val = no_click_expectation(n, m, q, ("A", "B"))
        expect = 1 / ((1 + w * nbar) ** 2 - w**2 * nbar * (nbar + 1))
        assert val == pytest.approx(expect, rel=1e-10)

    def test_empty_subset_is_one(self):
        n, m = thermal(1.0)
        q = ClickQuery(weights={"A": np.array([1.0])})
        assert no_click_expectation(n, m, q, ()) == 1.0

    def test_weight_above_one_rejected(self):
        n, m = thermal(0.1)
        q = ClickQuery(weights={"A": np.array([1.2])})
        with pytest.raises(DetectionError, match="exceeds 1"):
            no_click_expectation(n, m, q, ("A",))

    def test_nonphysical_moments_rejected(self):
        n = np.array([[0.1]], complex)
        m = np.array([[5.0]], complex)  # |M| >> sqrt(N(N+1)): unphysical
        q = ClickQuery(weights={"A": np.array([1.0])})
        with pytest.raises(DetectionError):
            no_click_expectation(n, m, q, ("A",))

    def test_form_equals_diagonal_weights(self):
        rng = np.random.default_rng(3)
        n, m = tmsv(0.2)
        w = np.array([0.3, 0.8])
        q_diag = ClickQuery(weights={"A": w})
        q_form = ClickQuery(forms={"A": np.diag(w).astype(complex)})
        a = no_click_expectation(n, m, q_diag, ("A",))
        b = no_click_expectation(n, m, q_form, ("A",))
        assert a == pytest.approx(b, rel=1e-13)
        # a rotated form agrees with rotating the state instead
        th = rng.uniform(0, np.pi)
        u = np.array([[np.cos(th), np.sin(th)], [-np.sin(th), np.cos(th)]])
        form = u.T @ np.diag(w) @ u
        n_rot = u.conj() @ n @ u.T
        m_rot = u @ m @ u.T
        lhs = no_click_expectation(n, m, ClickQuery(forms={"A": form.astype(complex)}), ("A",))
        rhs = no_click_expectation(n_rot, m_rot, q_diag, ("A",))
        assert lhs == pytest.approx(rhs, rel=1e-12)


class TestCoincidence:
    def test_independent_blocks_factorize(self):
        n = np.diag([0.2, 0.5]).astype(complex)
        m = np.zeros((2, 2), complex)
        q = ClickQuery(weights={"A": np.array([0.9, 0.0]), "B": np.array([0.0, 0.7])})
        joint = coincidence_probability(n, m, q, ("A", "B")).probability
        pa = singles_probability(n, m, q, "A")
        pb = singles_probability(n, m, q, "B")
        assert joint == pytest.approx(pa * pb, rel=1e-10)

    def test_bonferroni_partial_sums_alternate(self):
        n, m = tmsv(0.3)
        n = n + np.diag([0.05, 0.02])
        q = ClickQuery(weights={"A": np.array([0.8, 0.0]), "B": np.array([0.0, 0.6])},
                       dark_means={"A": 1e-4, "B": 2e-4})
        from itertools import combinations
        subset = ("A", "B")
        terms = []
        for r in range(3):
            terms.append(sum((-1) ** r * no_click_expectation(n, m, q, c)
                             for c in combinations(subset, r)))
        partial_1 = terms[0] + terms[1]           # 1 - sum E_single <= P
        full = sum(terms)
        assert partial_1 <= full + 1e-10
        assert full <= 1.0

    def test_monotone_in_efficiency_and_dark(self):
        n, m = thermal(0.2)
        base = singles_probability(n, m, ClickQuery(weights={"A": np.array([0.5])}), "A")
        higher = singles_probability(n, m, ClickQuery(weights={"A": np.array([0.7])}), "A")
        dark = singles_probability(
            n, m, ClickQuery(weights={"A": np.array([0.5])}, dark_means={"A": 1e-3}), "A")
        assert higher > base
        assert dark > base

    def test_dark_factorization(self):
        n, m = tmsv(0.25)
        w = {"A": np.array([0.5, 0.0]), "B": np.array([0.0, 0.5])}
        mus = {"A": 3e-3, "B": 1e-3}
        q0 = ClickQuery(weights=w)
        q1 = ClickQuery(weights=w, dark_means=mus)
        for subset in [("A",), ("B",), ("A", "B")]:
            e0 = no_click_expectation(n, m, q0, subset)
            e1 = no_click_expectation(n, m, q1, subset)
            assert e1 == pytest.approx(e0 * np.exp(-q1.dark_sum(subset)), rel=1e-12)

    def test_probability_bounds_random(self):
        rng = np.random.default_rng(11)
        for _ in range(30):
            nb1, nb2 = rng.uniform(0.01, 0.8, 2)
            n, m = tmsv(nb1)
            n = n + np.diag([nb2, 0.3 * nb2])
            q = ClickQuery(weights={"A": np.array([rng.uniform(0, 1), 0.0]),
                                    "B": np.array([0.0, rng.uniform(0, 1)])},
                           dark_means={"A": rng.uniform(0, 1e-3)})
            p = coincidence_probability(n, m, q, ("A", "B")).probability
            assert 0.0 <= p <= 1.0


class TestSinglesAccidentals:
    def test_vacuum_dark_singles(self):
        n, m = vacuum(1)
        q = ClickQuery(weights={"A": np.array([0.2])}, dark_means={"A": 1.6e-4})
        p = singles_probability(n, m, q, "A")
        assert p == pytest.approx(1.6e-4, rel=1e-3)

    def test_thermal_singles_closed_form(self):
        nbar, w = 0.7, 0.4
        n, m = thermal(nbar)
        q = ClickQuery(weights={"A": np.array([w])})
        assert singles_probability(n, m, q, "A") == pytest.approx(
            w * nbar / (1 + w * nbar), rel=1e-10)

    def test_zero_efficiency_zero_singles(self):
        n, m = thermal(2.0)
        q = ClickQuery(weights={"A": np.array([0.0])})
        assert singles_probability(n, m, q, "A") == 0.0

    def test_accidental_vacuum(self):
        n, m = vacuum(2)
        q = ClickQuery(weights={"A": np.array([1.0, 0.0]), "B": np.array([0.0, 1.0])},
                       dark_means={"A": 2e-4, "B": 3e-4})
        acc = accidental_probability(n, m, q, ("A", "B"))
        assert acc == pytest.approx((1 - np.exp(-2e-4)) * (1 - np.exp(-3e-4)), rel=1e-9)

    def test_accidental_equals_coincidence_when_uncorrelated(self):
        n = np.diag([0.3, 0.4]).astype(complex)
        m = np.zeros((2, 2), complex)
        q = ClickQuery(weights={"A": np.array([0.6, 0.0]), "B": np.array([0.0, 0.9])})
        acc = accidental_probability(n, m, q, ("A", "B"))
        coin = coincidence_probability(n, m, q, ("A", "B")).probability
        assert acc == pytest.approx(coin, rel=1e-10)

    def test_same_detector_rejected(self):
        n, m = vacuum(1)
        q = ClickQuery(weights={"A": np.array([1.0])})
        with pytest.raises(DetectionError):
            accidental_probability(n, m, q, ("A", "A"))


class TestThermalHomBound:
    def test_two_thermal_sources_dip_visibility_below_half(self):
        # classical bound: two independent equal thermal modes mixed 50:50
        # cannot dip more than 50% below the far-delay coincidence level
        nbar = 0.35
        w = 0.8
        # overlapped: modes (a_r + a_l)/sqrt2 and (a_r - a_l)/sqrt2
        u = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
        n_src = np.diag([nbar, nbar]).astype(complex)
        m_src = np.zeros((2, 2), complex)
        n_mix = u.conj() @ n_src @ u.T
        m_mix = u @ m_src @ u.T
        q = ClickQuery(weights={"A": np.array([w, 0.0]), "B": np.array([0.0, w])})
        p_dip = coincidence_probability(n_mix, m_mix, q, ("A", "B")).probability
        # far delay: the two time slots are orthogonal modes, but each split
        # thermal field stays coherent between the two ports; modes ordered
        # (A_r, A_l, B_r, B_l) with the minus sign on B's left-source slot
        w_map = np.array([[1, 0], [0, 1], [1, 0], [0, -1]]) / np.sqrt(2)
        n_src = np.diag([nbar, nbar]).astype(complex)
        n4 = w_map.conj() @ n_src @ w_map.T
        m4 = np.zeros((4, 4), complex)
        q4 = ClickQuery(weights={"A": np.array([w, w, 0, 0]),
                                 "B": np.array([0, 0, w, w])})
        p_far = coincidence_probability(n4, m4, q4, ("A", "B")).probability
        vis = 1 - p_dip / p_far
        assert vis <= 0.5 + 1e-9
        assert vis > 0.25  # thermal bunching is real (1/3 at low occupation)
