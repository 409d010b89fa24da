import math

import numpy as np
import pytest

from simtruth import (
    BernoulliDraw,
    ContrastScale,
    ControlledDirectEffect,
    DegenerateProbabilityError,
    Dgm,
    EvalMode,
    ExogenousNode,
    GaussianDraw,
    Intervention,
    Link,
    MarginalOddsRatio,
    Normal,
    PotentialOutcomeContrast,
    SeedSpec,
    StructuralNode,
    ValidationError,
    compute_truth,
    controlled_direct_effect,
    expit,
    marginal_odds_ratio,
    potential_outcome_contrast,
    potential_outcome_mean,
)
from conftest import LN2, LN15, five_node_dgm, logistic_dgm

# 50-digit quadrature of the reference logistic-Normal shape
# (b0=-2, b1=ln 2, b2=ln 1.5, C ~ N(0,1)).
REF_PSI = 1.9687675384092026
REF_MU1 = 0.22060463768003628

# Closed form for the identity-link controlled direct effect below:
# 0.6 + 0.25 * (expit(0.1) - expit(-0.3)).
CDE_IDENTITY = 0.62485542607264974


def test_psi_matches_quadrature(seed):
    result = marginal_odds_ratio(logistic_dgm(), MarginalOddsRatio("A"), 100000, seed,
                                 replicates=6)
    assert result.replicate_se is not None and result.replicate_se > 0
    assert abs(result.value - REF_PSI) < 3 * result.replicate_se
    assert result.n == 100000
    assert result.master_seed == seed.master_seed
    assert result.replicates == 6
    assert set(result.potential_means) == {"A=1", "A=0"}
    assert result.potential_means["A=1"] == pytest.approx(REF_MU1, abs=0.01)


def test_single_replicate_has_no_se(seed):
    result = marginal_odds_ratio(logistic_dgm(), MarginalOddsRatio("A"), 20000, seed)
    assert result.replicates == 1
    assert result.replicate_se is None


def test_null_exposure_gives_psi_one(seed):
    # b1 = 0: both branches produce the same outcome probabilities row
    # for row, so in expectation mode the ratio is exactly 1.
    dgm = logistic_dgm(b1=0.0)
    result = marginal_odds_ratio(dgm, MarginalOddsRatio("A"), 20000, seed, replicates=3)
    assert result.value == pytest.approx(1.0, abs=1e-15)


def test_no_confounder_psi_collapses_to_exp_b1(seed):
    # b2 = 0: the marginal and conditional odds ratios coincide; in
    # expectation mode the simulated value is exact up to rounding.
    dgm = logistic_dgm(b2=0.0)
    result = marginal_odds_ratio(dgm, MarginalOddsRatio("A"), 20000, seed, replicates=3)
    assert result.value == pytest.approx(math.exp(LN2), rel=1e-12)


def test_noncollapsibility_attenuates(seed):
    # The marginal odds ratio sits strictly between 1 and exp(b1).
    result = marginal_odds_ratio(logistic_dgm(), MarginalOddsRatio("A"), 200000, seed,
                                 replicates=4)
    gap = 3 * result.replicate_se
    assert 1.0 + gap < result.value < math.exp(LN2) - gap


def test_draw_mode_agrees_but_is_noisier(seed):
    exp_mode = marginal_odds_ratio(logistic_dgm(), MarginalOddsRatio("A"), 50000, seed,
                                   replicates=6)
    draw_mode = marginal_odds_ratio(logistic_dgm(), MarginalOddsRatio("A"), 50000, seed,
                                    replicates=6, outcome_mode=EvalMode.DRAW)
    assert abs(draw_mode.value - REF_PSI) < 4 * draw_mode.replicate_se
    assert draw_mode.replicate_se > exp_mode.replicate_se


def test_same_seed_same_value(seed):
    a = marginal_odds_ratio(logistic_dgm(), MarginalOddsRatio("A"), 30000, seed, replicates=2)
    b = marginal_odds_ratio(logistic_dgm(), MarginalOddsRatio("A"), 30000, seed, replicates=2)
    assert a.value == b.value
    assert a.replicate_se == b.replicate_se
    c = marginal_odds_ratio(logistic_dgm(), MarginalOddsRatio("A"), 30000,
                            SeedSpec(seed.master_seed + 1, seed.chunk_size), replicates=2)
    assert c.value != a.value


def test_marginal_or_equals_generic_contrast(seed):
    # The named estimand is the generic potential-outcome contrast on the
    # odds-ratio scale; identical streams make the match bit-exact.
    named = marginal_odds_ratio(logistic_dgm(), MarginalOddsRatio("A"), 25000, seed,
                                replicates=2)
    generic = potential_outcome_contrast(
        logistic_dgm(),
        PotentialOutcomeContrast(
            Intervention({"A": 1.0}),
            Intervention({"A": 0.0}),
            contrast=ContrastScale.ODDS_RATIO,
        ),
        25000,
        seed,
        replicates=2,
    )
    assert named.value == generic.value
    assert named.potential_means == generic.potential_means


def _identity_cde_dgm(l_noise, y_noise=GaussianDraw(0.3)):
    return Dgm(
        nodes=(
            ExogenousNode("C", Normal(0.0, 1.0)),
            StructuralNode("A", 0.2, (("C", 0.3),), Link.EXPIT, BernoulliDraw()),
            StructuralNode("L", -0.3, (("A", 0.4),), Link.EXPIT, l_noise),
            StructuralNode("M", -0.2, (("A", 0.5), ("L", 0.3)), Link.EXPIT, BernoulliDraw()),
            StructuralNode(
                "Y", 1.0, (("A", 0.6), ("L", 0.25), ("M", 0.1), ("C", 0.2)),
                Link.IDENTITY, y_noise,
            ),
        ),
        outcome="Y",
    )


def test_identity_link_cde_closed_form_deterministic(seed):
    # Deterministic L (no draw): the contrast is exact to rounding.
    spec = ControlledDirectEffect("A", "M", m=0.0)
    result = controlled_direct_effect(_identity_cde_dgm(None), spec, 20000, seed,
                                      replicates=3)
    assert result.value == pytest.approx(CDE_IDENTITY, abs=1e-12)
    assert result.replicate_se < 1e-12


def test_identity_link_cde_closed_form_stochastic(seed):
    # Bernoulli L: same target value, now with real Monte Carlo error.
    spec = ControlledDirectEffect("A", "M", m=0.0)
    result = controlled_direct_effect(_identity_cde_dgm(BernoulliDraw()), spec, 150000,
                                      seed, replicates=5)
    assert result.replicate_se > 0
    assert abs(result.value - CDE_IDENTITY) < 4 * result.replicate_se


def test_cde_zeroed_exposure_paths_gives_zero(seed):
    dgm = Dgm(
        nodes=(
            ExogenousNode("C", Normal(0.0, 1.0)),
            ExogenousNode("U", Normal(0.0, 1.0)),
            StructuralNode("A", 0.2, (("C", 0.3),), Link.EXPIT, BernoulliDraw()),
            StructuralNode("L", -0.3, (("A", 0.0), ("U", 0.5)), Link.EXPIT, BernoulliDraw()),
            StructuralNode("M", -0.2, (("A", 0.0), ("L", 0.3)), Link.EXPIT, BernoulliDraw()),
            StructuralNode(
                "Y", -2.0, (("A", 0.0), ("C", LN15), ("M", 0.5), ("L", 0.4), ("U", 0.3)),
                Link.EXPIT, BernoulliDraw(),
            ),
        ),
        outcome="Y",
    )
    spec = ControlledDirectEffect("A", "M", m=0.0)
    result = controlled_direct_effect(dgm, spec, 20000, seed, replicates=3)
    # Shared streams: both branches are bit-identical, so exactly zero.
    assert result.value == 0.0
    assert result.replicate_se == 0.0


def test_cde_ratio_scale(seed):
    spec = ControlledDirectEffect("A", "M", m=0.0, scale=ContrastScale.RATIO)
    result = controlled_direct_effect(five_node_dgm(), spec, 50000, seed, replicates=3)
    diff = controlled_direct_effect(
        five_node_dgm(), ControlledDirectEffect("A", "M", m=0.0), 50000, seed, replicates=3
    )
    labels = sorted(result.potential_means)
    assert result.value > 1.0  # harmful exposure
    assert diff.value > 0.0
    assert labels == ["A=0, M=0", "A=1, M=0"]


def test_cde_fixes_the_mediator(seed):
    result = controlled_direct_effect(
        five_node_dgm(), ControlledDirectEffect("A", "M", m=1.0), 10000, seed
    )
    assert set(result.potential_means) == {"A=1, M=1", "A=0, M=1"}


def test_potential_outcome_mean(seed):
    mean = potential_outcome_mean(logistic_dgm(), {"A": 1.0}, 100000, seed)
    assert mean == pytest.approx(REF_MU1, abs=0.005)


def test_generic_contrast_scales(seed):
    dgm = logistic_dgm()
    a, b = Intervention({"A": 1.0}), Intervention({"A": 0.0})
    diff = potential_outcome_contrast(
        dgm, PotentialOutcomeContrast(a, b, ContrastScale.DIFFERENCE), 30000, seed
    )
    ratio = potential_outcome_contrast(
        dgm, PotentialOutcomeContrast(a, b, ContrastScale.RATIO), 30000, seed
    )
    m1, m0 = diff.potential_means["A=1"], diff.potential_means["A=0"]
    assert diff.value == pytest.approx(m1 - m0, rel=1e-15)
    assert ratio.value == pytest.approx(m1 / m0, rel=1e-15)
    # Swapping the branches flips the sign / inverts the ratio.
    swapped = potential_outcome_contrast(
        dgm, PotentialOutcomeContrast(b, a, ContrastScale.DIFFERENCE), 30000, seed
    )
    assert swapped.value == pytest.approx(-diff.value, rel=1e-12)


def test_degenerate_means_raise(seed):
    # Identity-link outcome with mean far outside (0,1): odds undefined.
    dgm = Dgm(
        nodes=(
            ExogenousNode("C", Normal(0.0, 1.0)),
            StructuralNode("A", 0.0, (), Link.EXPIT, BernoulliDraw()),
            StructuralNode("Y", 5.0, (("A", 1.0), ("C", 1.0)), Link.IDENTITY,
                           GaussianDraw(1.0)),
        ),
        outcome="Y",
    )
    spec = PotentialOutcomeContrast(
        Intervention({"A": 1.0}), Intervention({"A": 0.0}), ContrastScale.ODDS_RATIO
    )
    with pytest.raises(DegenerateProbabilityError):
        potential_outcome_contrast(dgm, spec, 1000, seed)


def test_marginal_or_requires_logistic_outcome(seed):
    dgm = Dgm(
        nodes=(
            ExogenousNode("C", Normal(0.0, 1.0)),
            StructuralNode("A", 0.0, (), Link.EXPIT, BernoulliDraw()),
            StructuralNode("Y", 0.0, (("A", 1.0), ("C", 1.0)), Link.IDENTITY,
                           GaussianDraw(1.0)),
        ),
        outcome="Y",
    )
    with pytest.raises(ValueError):
        marginal_odds_ratio(dgm, MarginalOddsRatio("A"), 1000, seed)


def test_unknown_exposure_is_a_validation_error(seed):
    with pytest.raises(ValidationError):
        marginal_odds_ratio(logistic_dgm(), MarginalOddsRatio("Q"), 1000, seed)


def test_spec_construction_guards():
    with pytest.raises(ValueError):
        MarginalOddsRatio("A", a1=1.0, a0=1.0)
    with pytest.raises(ValueError):
        ControlledDirectEffect("A", "A")
    with pytest.raises(ValueError):
        ControlledDirectEffect("A", "M", a1=0.0, a0=0.0)
    with pytest.raises(ValueError):
        ControlledDirectEffect("A", "M", scale=ContrastScale.ODDS_RATIO)


def test_compute_truth_dispatch(seed):
    dgm = logistic_dgm()
    for spec in (
        MarginalOddsRatio("A"),
        ControlledDirectEffect("A", "C", m=0.0),
        PotentialOutcomeContrast(Intervention({"A": 1.0}), Intervention({"A": 0.0})),
    ):
        via_dispatch = compute_truth(dgm, spec, 5000, seed)
        assert via_dispatch.value == compute_truth(dgm, spec, 5000, seed).value
    with pytest.raises(TypeError):
        compute_truth(dgm, "not a spec", 5000, seed)


def test_replicate_value_is_mean_of_replicates(seed):
    # Replicates use derived seeds; the reported value is their mean and
    # the SE is the sample SD of the replicate values over sqrt(R).
    r = marginal_odds_ratio(logistic_dgm(), MarginalOddsRatio("A"), 20000, seed,
                            replicates=5)
    assert r.replicate_se < 0.01
