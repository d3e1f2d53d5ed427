"""Posterior summaries: frozen fixtures for the estimators and diagnostics,
plus the normalization/monotonicity properties over random draw sets."""
import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from translink.posterior import (
    LinkCountSummary,
    LinkProbabilityTable,
    concentration_ratio,
    distinct_match_counts,
    estimate,
    group_match_rate,
    link_probabilities,
    posterior_link_count,
    write_group_rates_csv,
    write_link_probabilities_csv,
    write_links_csv,
    write_record_summary_csv,
)
from translink.sampler import ChainConfig, ModelParams, PosteriorDraws, run_chain
from translink.oracle import enumerate_posterior

from toyinstances import toy_matrix


def _draws(n_a, rows):
    """PosteriorDraws from a list of z rows (LinkageState convention)."""
    arr = np.array(rows, np.int32)
    return PosteriorDraws(n_a=n_a, n_b=arr.shape[1], draws=arr)


def _random_draw_set(seed, n_a=4, n_b=3, H=30):
    """H independent uniform-ish valid matchings."""
    rng = np.random.default_rng(seed)
    rows = []
    for _ in range(H):
        r = rng.integers(0, min(n_a, n_b) + 1)
        js = rng.permutation(n_b)[:r]
        is_ = rng.permutation(n_a)[:r]
        z = np.arange(n_a, n_a + n_b, dtype=np.int64)
        z[js] = is_
        rows.append(z)
    return _draws(n_a, rows)


# ---------------------------------------------------------------------------
# link probabilities


def test_single_draw_gives_certainty():
    d = _draws(4, [[0, 5, 2]])
    t = link_probabilities(d)
    assert t.probs[0, 0] == 1.0
    assert t.nolink[1] == 1.0
    assert t.probs[2, 2] == 1.0
    t.validate()


def test_alternating_draws_split_evenly():
    d = _draws(4, [[0, 5, 6], [1, 5, 6]] * 5)
    t = link_probabilities(d)
    assert t.probs[0, 0] == 0.5
    assert t.probs[0, 1] == 0.5
    assert t.nolink[1] == 1.0
    assert t.nolink[2] == 1.0


def test_empty_draw_set_rejected():
    d = PosteriorDraws(n_a=2, n_b=2, draws=np.empty((0, 2), np.int32))
    with pytest.raises(ValueError, match="draw"):
        link_probabilities(d)
    with pytest.raises(ValueError, match="draw"):
        estimate(d, "joint")
    with pytest.raises(ValueError, match="draw"):
        posterior_link_count(d)


@given(seed=st.integers(0, 2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_per_record_probabilities_normalize(seed):
    t = link_probabilities(_random_draw_set(seed))
    t.validate()  # enforces the 1e-9 sum rule
    totals = t.probs.sum(axis=1) + t.nolink
    assert np.abs(totals - 1.0).max() <= 1e-9


def test_chain_frequencies_match_oracle_within_tv(smap):
    """The CI fixture: empirical per-record distributions vs enumeration."""
    mat = toy_matrix(smap)
    hyper = ModelParams.flat(mat.fields)
    draws = run_chain(mat, hyper, ChainConfig(iterations=10_000, burn_in=1_000, seed=17))
    t = link_probabilities(draws)
    post = enumerate_posterior(mat, hyper)
    exact_lm = post.link_marginals()
    exact_nl = post.nolink_probs()
    for j in range(mat.n_b):
        tv = 0.5 * (
            np.abs(t.probs[j] - exact_lm[j]).sum() + abs(t.nolink[j] - exact_nl[j])
        )
        assert tv < 0.02


def test_candidates_sorted_with_index_tiebreak():
    d = _draws(4, [[1, 5, 6], [3, 5, 6], [1, 5, 6], [3, 5, 6], [0, 5, 6], [4, 5, 6]])
    t = link_probabilities(d)
    # record 0: candidates 1 and 3 tie at 2/6, then 0 at 1/6
    assert t.candidates(0) == [(1, pytest.approx(2 / 6)), (3, pytest.approx(2 / 6)), (0, pytest.approx(1 / 6))]
    assert t.candidates(0, top=1) == [(1, pytest.approx(2 / 6))]
    assert t.candidates(1) == []


# ---------------------------------------------------------------------------
# point estimates


def test_all_draws_identical_both_estimates_agree():
    d = _draws(4, [[0, 2, 6]] * 7)
    for kind in ("joint", "marginal"):
        e = estimate(d, kind)
        assert np.array_equal(e.z_hat, [0, 2, 6])
        assert e.is_valid_matching
        assert e.tie_report == []
        e.state().validate()


def test_joint_mode_plurality():
    z1, z2 = [0, 5, 6], [1, 5, 6]
    d = _draws(4, [z1, z2, z1, z2, z1])
    e = estimate(d, "joint")
    assert np.array_equal(e.z_hat, z1)
    assert e.tie_report == []


def test_joint_mode_tie_broken_by_first_occurrence():
    z1, z2 = [1, 5, 6], [0, 5, 6]  # z1 seen first, both appear twice
    d = _draws(4, [z1, z2, z2, z1])
    e = estimate(d, "joint")
    assert np.array_equal(e.z_hat, z1)
    assert len(e.tie_report) == 1
    assert np.array_equal(e.tie_report[0], z2)


@given(seed=st.integers(0, 2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_joint_mode_is_always_a_valid_stored_draw(seed):
    d = _random_draw_set(seed)
    e = estimate(d, "joint")
    assert any(np.array_equal(e.z_hat, row) for row in d.draws)
    e.state().validate()


def test_marginal_mode_flags_one_to_one_violation():
    # both records put their largest link mass on A record 0
    d = _draws(
        3,
        [
            [0, 1],  # draw 1
            [0, 2],  # draw 2
            [1, 0],  # draw 3
            [2, 0],  # draw 4
            [3, 4],  # draw 5: both unlinked
        ],
    )
    e = estimate(d, "marginal")
    assert np.array_equal(e.z_hat, [0, 0])
    assert e.violations == [(0, (0, 1))]
    assert not e.is_valid_matching
    with pytest.raises(ValueError, match="one-to-one"):
        e.state()


def test_marginal_mode_tie_goes_to_nolink():
    d = _draws(2, [[0, 3], [2, 3]])  # record 0: link-0 and no-link tie at 1/2
    e = estimate(d, "marginal")
    assert e.z_hat[0] == 2  # no-link sentinel
    assert (0, (0, None)) in e.tie_report


def test_marginal_mode_link_tie_goes_to_smallest_index():
    d = _draws(3, [[1, 4], [0, 4], [1, 4], [0, 4], [2, 4]])
    e = estimate(d, "marginal")
    assert e.z_hat[0] == 0
    assert (0, (0, 1)) in e.tie_report


def test_estimate_rejects_unknown_kind():
    d = _draws(2, [[0, 3]])
    with pytest.raises(ValueError, match="kind"):
        estimate(d, "map")


# ---------------------------------------------------------------------------
# link-count summary


def test_link_count_constant():
    d = _draws(4, [[0, 1, 6]] * 9)
    s = posterior_link_count(d)
    assert s == LinkCountSummary(mode=2, mean=2.0, lower=2, upper=2)


def test_link_count_nearest_rank_interval():
    # counts 0..39 once each: lower = 1st order stat, upper = 39th
    rows = []
    for r in range(40):
        z = np.arange(40, 80, dtype=np.int64)
        z[:r] = np.arange(r)
        rows.append(z)
    d = _draws(40, rows)
    s = posterior_link_count(d)
    assert s.lower == 0
    assert s.upper == 38
    assert s.mean == pytest.approx(19.5)


def test_link_count_mode_tie_takes_smaller():
    d = _draws(2, [[2, 3], [2, 3], [0, 3], [0, 1]])
    # counts: 0, 0, 1, 2 -> mode tie between 0 (x2)... 0 wins over 1 and 2
    s = posterior_link_count(d)
    assert s.mode == 0


# ---------------------------------------------------------------------------
# concentration ratio


def _table(rows, nolink):
    rows = np.asarray(rows, float)
    t = LinkProbabilityTable(
        n_a=rows.shape[1], n_b=rows.shape[0], probs=rows, nolink=np.asarray(nolink, float)
    )
    t.validate()
    return t


def test_concentration_single_candidate():
    t = _table([[0.7, 0.0, 0.0]], [0.3])
    assert concentration_ratio(t, 0, 1) == pytest.approx(0.7)
    assert concentration_ratio(t, 0, 3) == pytest.approx(0.7)
    assert concentration_ratio(t, 0, 99) == pytest.approx(0.7)


def test_concentration_direct_sum():
    t = _table([[0.5, 0.3, 0.1]], [0.1])
    assert concentration_ratio(t, 0, 1) == pytest.approx(0.5)
    assert concentration_ratio(t, 0, 2) == pytest.approx(0.8)
    assert concentration_ratio(t, 0, 3) == pytest.approx(0.9)


def test_concentration_rejects_c_zero():
    t = _table([[1.0]], [0.0])
    with pytest.raises(ValueError, match="c must"):
        concentration_ratio(t, 0, 0)
    with pytest.raises(ValueError, match="c must"):
        concentration_ratio(t, 0, -2)


@given(seed=st.integers(0, 2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_concentration_monotone_and_complementary(seed):
    d = _random_draw_set(seed)
    t = link_probabilities(d)
    for j in range(t.n_b):
        prev = 0.0
        for c in range(1, t.n_a + 1):
            r = concentration_ratio(t, j, c)
            assert r >= prev - 1e-12
            assert r <= 1.0 + 1e-12
            prev = r
        assert concentration_ratio(t, j, t.n_a) + t.nolink[j] == pytest.approx(
            1.0, abs=1e-9
        )


# ---------------------------------------------------------------------------
# distinct match counts


def test_distinct_counts_constant_draws():
    d = _draws(4, [[0, 5, 6]] * 8)
    assert distinct_match_counts(d).tolist() == [1, 0, 0]


def test_distinct_counts_alternation():
    d = _draws(4, [[0, 5, 6], [1, 5, 6]] * 3)
    assert distinct_match_counts(d).tolist() == [2, 0, 0]


def test_distinct_counts_against_reference_loop():
    d = _random_draw_set(99, n_a=5, n_b=3, H=40)
    got = distinct_match_counts(d)
    for j in range(d.n_b):
        ref = {int(v) for v in d.draws[:, j] if v < d.n_a}
        assert got[j] == len(ref)


# ---------------------------------------------------------------------------
# group match rates


def test_group_rate_all_linked_single_group():
    e = estimate(_draws(4, [[0, 1, 2]] * 3), "joint")
    assert group_match_rate(e, ["g", "g", "g"]) == {"g": 1.0}


def test_group_rate_quarter():
    e = estimate(_draws(5, [[0, 6, 7, 8]] * 3), "joint")
    assert group_match_rate(e, ["g"] * 4) == {"g": 0.25}


def test_group_rate_two_group_fixture():
    # linked: records 0 and 2; groups: x={0,1}, y={2}
    e = estimate(_draws(4, [[0, 5, 1]] * 3), "joint")
    rates = group_match_rate(e, ["x", "x", "y"])
    assert rates == {"x": 0.5, "y": 1.0}


def test_group_rate_invariant_to_labels_and_order():
    d = _draws(4, [[0, 5, 1, 7]] * 3)
    e = estimate(d, "joint")
    a = group_match_rate(e, ["x", "x", "y", "y"])
    b = group_match_rate(e, ["blue", "blue", "red", "red"])
    assert a["x"] == b["blue"] and a["y"] == b["red"]
    # permuting records within a group leaves its rate alone
    d2 = _draws(4, [[5, 0, 1, 7]] * 3)  # swap records 0 and 1
    c = group_match_rate(estimate(d2, "joint"), ["x", "x", "y", "y"])
    assert c == a


def test_group_rate_empty_group_is_undefined():
    e = estimate(_draws(4, [[0, 1, 6]] * 3), "joint")
    rates = group_match_rate(e, ["g", "g", "g"], universe=["g", "h"])
    assert rates["g"] == pytest.approx(2 / 3)
    assert rates["h"] is None


def test_group_rate_label_length_mismatch():
    e = estimate(_draws(4, [[0, 1, 6]] * 3), "joint")
    with pytest.raises(ValueError, match="label"):
        group_match_rate(e, ["g", "g"])


# ---------------------------------------------------------------------------
# exports


def _read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


def test_link_probabilities_csv(tmp_path):
    d = _draws(4, [[0, 5, 6], [1, 5, 6], [0, 5, 6], [0, 5, 2]])
    t = link_probabilities(d)
    out = tmp_path / "probs.csv"
    write_link_probabilities_csv(t, out, ids_a=["a1", "a2", "a3", "a4"], ids_b=["b1", "b2", "b3"])
    rows = _read_csv(out)
    assert rows[0] == ["record_b", "record_a", "probability"]
    assert rows[1] == ["b1", "a1", "0.750000"]
    assert rows[2] == ["b1", "a2", "0.250000"]
    assert rows[3] == ["b1", "NOLINK", "0.000000"]
    assert ["b2", "NOLINK", "1.000000"] in rows
    # every record ends with exactly one no-link row
    assert sum(1 for r in rows[1:] if r[1] == "NOLINK") == 3


def test_link_probabilities_csv_min_probability(tmp_path):
    d = _draws(4, [[0, 5, 6]] * 3 + [[1, 5, 6]])
    t = link_probabilities(d)
    out = tmp_path / "probs.csv"
    write_link_probabilities_csv(t, out, min_probability=0.5)
    rows = _read_csv(out)
    b1_rows = [r for r in rows[1:] if r[0] == "0"]
    assert len(b1_rows) == 2  # the 0.75 candidate and the no-link row


def test_record_summary_csv(tmp_path):
    d = _draws(4, [[0, 5, 6], [1, 5, 6], [0, 5, 6], [0, 5, 6]])
    out = tmp_path / "summary.csv"
    write_record_summary_csv(d, out, ids_a=["a1", "a2", "a3", "a4"], ids_b=["b1", "b2", "b3"])
    rows = _read_csv(out)
    assert rows[0][:4] == ["record_b", "p_nolink", "candidate_1", "p_1"]
    assert rows[0][-3:] == ["r1", "r3", "distinct_candidates"]
    r1 = rows[1]
    assert r1[0] == "b1"
    assert r1[1] == "0.000000"
    assert r1[2:6] == ["a1", "0.750000", "a2", "0.250000"]
    assert r1[6:12] == [""] * 6  # only two candidates; the rest padded blank
    assert r1[12:] == ["0.750000", "1.000000", "2"]
    r2 = rows[2]
    assert r2[1] == "1.000000"
    assert r2[-1] == "0"


def test_links_csv_with_conflict_column(tmp_path):
    d = _draws(3, [[0, 1], [0, 2], [1, 0], [2, 0], [3, 4]])
    e = estimate(d, "marginal")
    out = tmp_path / "links.csv"
    write_links_csv(e, out, ids_a=["a1", "a2", "a3"], ids_b=["b1", "b2"])
    rows = _read_csv(out)
    assert rows[0] == ["record_b", "record_a", "conflict"]
    assert rows[1] == ["b1", "a1", "yes"]
    assert rows[2] == ["b2", "a1", "yes"]


def test_links_csv_nolink_token(tmp_path):
    e = estimate(_draws(2, [[0, 3]] * 2), "joint")
    out = tmp_path / "links.csv"
    write_links_csv(e, out)
    rows = _read_csv(out)
    assert rows[1] == ["0", "0", ""]
    assert rows[2] == ["1", "NOLINK", ""]


def test_group_rates_csv(tmp_path):
    out = tmp_path / "rates.csv"
    write_group_rates_csv({"x": 0.5, "h": None}, out)
    rows = _read_csv(out)
    assert rows == [["group", "match_rate"], ["x", "0.500000"], ["h", "NA"]]


def test_csv_id_length_validation(tmp_path):
    d = _draws(2, [[0, 3]])
    t = link_probabilities(d)
    with pytest.raises(ValueError, match="ids_a"):
        write_link_probabilities_csv(t, tmp_path / "x.csv", ids_a=["only-one"])
