import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from simtruth import (
    Bernoulli,
    BernoulliDraw,
    Dataset,
    Dgm,
    DrawAudit,
    Empirical,
    EmpiricalSource,
    EvalMode,
    ExogenousNode,
    GaussianDraw,
    IngestionError,
    Intervention,
    Link,
    Normal,
    SeedSpec,
    StructuralNode,
    Uniform,
    ValidationError,
    derive_seed,
    expit,
    ingest_empirical,
    simulate,
    simulate_counterfactual_pair,
    substream,
)
from conftest import five_node_dgm, logistic_dgm


def columns_equal(a: Dataset, b: Dataset) -> bool:
    return set(a.columns) == set(b.columns) and all(
        np.array_equal(a.column(k), b.column(k)) for k in a.columns
    )


def test_same_seed_bit_identical(seed):
    a = simulate(logistic_dgm(), 2500, seed)
    b = simulate(logistic_dgm(), 2500, seed)
    assert columns_equal(a, b)


def test_different_seed_differs(seed):
    a = simulate(logistic_dgm(), 2500, seed)
    b = simulate(logistic_dgm(), 2500, SeedSpec(seed.master_seed + 1, seed.chunk_size))
    assert not np.array_equal(a.column("C"), b.column("C"))


def test_thread_count_never_changes_results(seed):
    # 2500 rows over 1000-row chunks: a ragged final chunk is included.
    serial = simulate(logistic_dgm(), 2500, seed, threads=1)
    threaded = simulate(logistic_dgm(), 2500, seed, threads=4)
    assert columns_equal(serial, threaded)


@settings(max_examples=25, deadline=None)
@given(
    n=st.integers(min_value=1, max_value=60),
    chunk=st.integers(min_value=1, max_value=7),
    threads=st.integers(min_value=1, max_value=3),
)
def test_thread_invariance_property(n, chunk, threads):
    spec = SeedSpec(5, chunk_size=chunk)
    base = simulate(logistic_dgm(), n, spec, threads=1)
    other = simulate(logistic_dgm(), n, spec, threads=threads)
    assert columns_equal(base, other)


def test_sibling_streams_survive_graph_edits(seed):
    # Inserting an unrelated node must not shift any other node's draws.
    small = logistic_dgm()
    grown = Dgm(
        nodes=(
            small.nodes[0],
            ExogenousNode("W", Uniform(0.0, 1.0)),
            small.nodes[1],
            small.nodes[2],
        ),
        outcome="Y",
    )
    a = simulate(small, 2500, seed)
    b = simulate(grown, 2500, seed)
    for name in ("C", "A", "Y"):
        assert np.array_equal(a.column(name), b.column(name)), name


def test_intervention_severs_without_disturbing_others(seed):
    natural = simulate(logistic_dgm(), 2500, seed)
    dosed = simulate(logistic_dgm(), 2500, seed, {"A": 1.0})
    assert np.array_equal(natural.column("C"), dosed.column("C"))
    assert np.all(dosed.column("A") == 1.0)
    # Y still uses its own stream; with A pinned high, more events.
    assert dosed.column("Y").mean() >= natural.column("Y").mean()


def test_pair_branches_match_standalone_runs(seed):
    dgm = five_node_dgm()
    pair_a, pair_b = simulate_counterfactual_pair(dgm, 2500, seed, {"A": 1.0}, {"A": 0.0})
    solo_a = simulate(dgm, 2500, seed, {"A": 1.0})
    solo_b = simulate(dgm, 2500, seed, {"A": 0.0})
    assert columns_equal(pair_a, solo_a)
    assert columns_equal(pair_b, solo_b)


def test_pair_equal_interventions_identical(seed):
    a, b = simulate_counterfactual_pair(logistic_dgm(), 1500, seed, {"A": 1.0}, {"A": 1.0})
    assert columns_equal(a, b)


def test_pair_shared_noise_collapses_when_paths_zeroed(seed):
    # With L's coefficient on A set to 0, the branches feed L identical
    # inputs, and the shared noise stream makes the columns bit-equal.
    dgm = five_node_dgm(l_on_a=0.0)
    a, b = simulate_counterfactual_pair(dgm, 2500, seed, {"A": 1.0}, {"A": 0.0})
    assert np.array_equal(a.column("L"), b.column("L"))
    assert np.array_equal(a.column("C"), b.column("C"))
    assert np.array_equal(a.column("U"), b.column("U"))
    # M keeps a live A path, so it must differ somewhere.
    assert not np.array_equal(a.column("M"), b.column("M"))


def test_expectation_mode_stores_conditional_mean(seed):
    data = simulate(logistic_dgm(), 2000, seed, {"A": 1.0}, EvalMode.EXPECTATION)
    from conftest import LN2, LN15

    lp = -2.0 + LN2 * data.column("A") + LN15 * data.column("C")
    want = np.array([expit(v) for v in lp])
    np.testing.assert_allclose(data.column("Y"), want, rtol=1e-15)


def test_draw_audit_counts(seed):
    n = 2500
    audit = DrawAudit()
    simulate(logistic_dgm(), n, seed, audit=audit)
    assert audit.counts == {"C": n, "A": n, "Y": n}

    # Expectation mode: the outcome consumes nothing.
    audit = DrawAudit()
    simulate(logistic_dgm(), n, seed, outcome_mode=EvalMode.EXPECTATION, audit=audit)
    assert audit.counts == {"C": n, "A": n}
    assert audit.total == 2 * n

    # An intervened node consumes nothing either.
    audit = DrawAudit()
    simulate(logistic_dgm(), n, seed, {"A": 1.0}, audit=audit)
    assert audit.counts == {"C": n, "Y": n}


def test_pair_consumes_no_more_than_single_run(seed):
    # Shared streams: the counterfactual pair costs the same randomness
    # as one world, not two.
    n = 2000
    solo = DrawAudit()
    simulate(five_node_dgm(), n, seed, {"A": 1.0}, audit=solo)
    paired = DrawAudit()
    simulate_counterfactual_pair(five_node_dgm(), n, seed, {"A": 1.0}, {"A": 0.0}, audit=paired)
    assert paired.counts == solo.counts


def test_exogenous_marginals(seed):
    dgm = Dgm(
        nodes=(
            ExogenousNode("N", Normal(2.0, 3.0)),
            ExogenousNode("B", Bernoulli(0.25)),
            ExogenousNode("UU", Uniform(-1.0, 5.0)),
        ),
        outcome="N",
    )
    data = simulate(dgm, 40000, seed)
    n_col, b_col, u_col = data.column("N"), data.column("B"), data.column("UU")
    assert n_col.mean() == pytest.approx(2.0, abs=4 * 3.0 / math.sqrt(40000))
    assert n_col.std() == pytest.approx(3.0, rel=0.05)
    assert set(np.unique(b_col)) <= {0.0, 1.0}
    assert b_col.mean() == pytest.approx(0.25, abs=0.02)
    assert u_col.min() >= -1.0 and u_col.max() < 5.0
    assert u_col.mean() == pytest.approx(2.0, abs=0.05)


def test_gaussian_noise_node(seed):
    dgm = Dgm(
        nodes=(
            ExogenousNode("C", Normal(0.0, 1.0)),
            StructuralNode("Y", 1.0, (("C", 2.0),), Link.IDENTITY, GaussianDraw(0.5)),
        ),
        outcome="Y",
    )
    data = simulate(dgm, 40000, seed)
    resid = data.column("Y") - (1.0 + 2.0 * data.column("C"))
    assert resid.mean() == pytest.approx(0.0, abs=4 * 0.5 / math.sqrt(40000))
    assert resid.std() == pytest.approx(0.5, rel=0.05)
    # Expectation mode drops the terminal noise draw entirely.
    exp = simulate(dgm, 500, seed, outcome_mode=EvalMode.EXPECTATION)
    np.testing.assert_allclose(exp.column("Y"), 1.0 + 2.0 * exp.column("C"), rtol=1e-15)


def _toy_source():
    x = np.array([1.0, 2.0, 3.0, 4.0])
    y = np.array([10.0, 20.0, 30.0, 40.0])
    return EmpiricalSource(name="toy", columns={"x": x, "y": y})


def test_empirical_resampling_preserves_rows(seed):
    src = _toy_source()
    dgm = Dgm(
        nodes=(
            ExogenousNode("X", Empirical(src, "x")),
            ExogenousNode("Z", Empirical(src, "y")),
        ),
        outcome="X",
    )
    data = simulate(dgm, 5000, seed)
    x, z = data.column("X"), data.column("Z")
    assert set(np.unique(x)) <= {1.0, 2.0, 3.0, 4.0}
    # Same source, same row stream: the (x, y) pairing is exact.
    np.testing.assert_array_equal(z, 10.0 * x)
    # With replacement at n >> rows, every row appears.
    assert set(np.unique(x)) == {1.0, 2.0, 3.0, 4.0}
    audit = DrawAudit()
    simulate(dgm, 5000, seed, audit=audit)
    assert audit.counts == {"empirical:toy": 5000}


def test_empirical_single_row_source(seed):
    src = EmpiricalSource(name="one", columns={"x": np.array([7.0])})
    dgm = Dgm(nodes=(ExogenousNode("X", Empirical(src, "x")),), outcome="X")
    data = simulate(dgm, 100, seed)
    assert np.all(data.column("X") == 7.0)


def test_empirical_correlation_preserved(tmp_path, seed):
    # Correlated columns written to CSV, ingested, and resampled: the
    # sample correlation must come back.
    rng = np.random.default_rng(4)
    x = rng.normal(size=2000)
    y = 0.8 * x + 0.6 * rng.normal(size=2000)
    path = tmp_path / "corr.csv"
    with open(path, "w") as f:
        f.write("x,y\n")
        for a, b in zip(x, y):
            f.write(f"{float(a)!r},{float(b)!r}\n")
    src = ingest_empirical(path, ["x", "y"])
    dgm = Dgm(
        nodes=(
            ExogenousNode("X", Empirical(src, "x")),
            ExogenousNode("Z", Empirical(src, "y")),
        ),
        outcome="Z",
    )
    data = simulate(dgm, 60000, seed)
    want = np.corrcoef(x, y)[0, 1]
    got = np.corrcoef(data.column("X"), data.column("Z"))[0, 1]
    assert got == pytest.approx(want, abs=0.02)


def test_ingest_happy_path(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("a, b ,c\n1,2.5,x\n-3,4e2,y\n")
    src = ingest_empirical(path, ["a", "b"])
    assert src.name == str(path)
    assert src.n_rows == 2
    np.testing.assert_array_equal(src.columns["a"], [1.0, -3.0])
    np.testing.assert_array_equal(src.columns["b"], [2.5, 400.0])
    assert not src.columns["a"].flags.writeable
    named = ingest_empirical(path, ["a"], name="mydata")
    assert named.name == "mydata"


def test_ingest_errors(tmp_path):
    missing = tmp_path / "nope.csv"
    with pytest.raises(IngestionError, match="cannot open"):
        ingest_empirical(missing, ["a"])

    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(IngestionError, match="header"):
        ingest_empirical(empty, ["a"])

    headeronly = tmp_path / "h.csv"
    headeronly.write_text("a,b\n")
    with pytest.raises(IngestionError, match="no data rows"):
        ingest_empirical(headeronly, ["a"])

    wrongcol = tmp_path / "w.csv"
    wrongcol.write_text("a,b\n1,2\n")
    with pytest.raises(IngestionError, match="missing requested columns"):
        ingest_empirical(wrongcol, ["zz"])

    badcell = tmp_path / "bad.csv"
    badcell.write_text("a,b\n1,2\n3,oops\n")
    with pytest.raises(IngestionError, match=r"line 3: cannot parse 'oops' in column 'b'"):
        ingest_empirical(badcell, ["a", "b"])

    short = tmp_path / "short.csv"
    short.write_text("a,b\n1\n")
    with pytest.raises(IngestionError, match="line 2: row too short"):
        ingest_empirical(short, ["a", "b"])

    ok = tmp_path / "ok.csv"
    ok.write_text("a\n1\n")
    with pytest.raises(ValueError):
        ingest_empirical(ok, [])


def test_simulate_rejects_bad_input(seed):
    with pytest.raises(ValidationError):
        simulate(Dgm(nodes=(ExogenousNode("C", Normal(0, -1)),), outcome="C"), 10, seed)
    with pytest.raises(ValidationError, match="undeclared"):
        simulate(logistic_dgm(), 10, seed, {"Q": 1.0})
    with pytest.raises(ValueError):
        simulate(logistic_dgm(), 0, seed)
    with pytest.raises(ValueError):
        simulate(logistic_dgm(), 10, seed, threads=0)
    with pytest.raises(ValueError):
        SeedSpec(-1)
    with pytest.raises(ValueError):
        SeedSpec(2**64)
    with pytest.raises(ValueError):
        SeedSpec(1, chunk_size=0)


def test_dataset_contract(seed):
    data = simulate(logistic_dgm(), 100, seed)
    assert data.outcome == "Y"
    assert data.n == 100
    with pytest.raises(ValueError):
        data.column("Y")[0] = 5.0
    with pytest.raises(ValueError):
        Dataset(columns={"a": np.zeros(3)}, n=4)


def test_seed_plumbing():
    assert derive_seed(1, 2, 3) == derive_seed(1, 2, 3)
    assert derive_seed(1, 2, 3) != derive_seed(1, 2, 4)
    assert derive_seed(1, 2, 3) != derive_seed(2, 2, 3)
    assert 0 <= derive_seed(123, 7) < 2**64
    a = substream(9, 1, 2).random(5)
    b = substream(9, 1, 2).random(5)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, substream(9, 1, 3).random(5))
