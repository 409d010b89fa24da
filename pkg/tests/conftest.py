"""Shared builders for the test suite.

The logistic one-confounder mechanism and the five-node mediation
mechanism are this package's two reference shapes; most tests run them
at desk scale (small n) so the whole suite stays fast.
"""

import math

import pytest

from simtruth import (
    BernoulliDraw,
    Dgm,
    ExogenousNode,
    Link,
    Normal,
    SeedSpec,
    StructuralNode,
)

LN2 = math.log(2.0)
LN15 = math.log(1.5)


def logistic_dgm(
    b0=-2.0,
    b1=LN2,
    b2=LN15,
    a_intercept=0.2,
    a_coef=0.3,
    c_mean=0.0,
    c_sd=1.0,
):
    """Binary exposure, one Normal confounder, logistic outcome."""
    return Dgm(
        nodes=(
            ExogenousNode("C", Normal(c_mean, c_sd)),
            StructuralNode("A", a_intercept, (("C", a_coef),), Link.EXPIT, BernoulliDraw()),
            StructuralNode("Y", b0, (("A", b1), ("C", b2)), Link.EXPIT, BernoulliDraw()),
        ),
        outcome="Y",
    )


def five_node_dgm(l_on_a=0.4, y_link=Link.EXPIT, y_noise=BernoulliDraw()):
    """Mediation shape: exposure, intermediate confounder, mediator,
    unmeasured mediator-outcome confounder."""
    return Dgm(
        nodes=(
            ExogenousNode("C", Normal(0.0, 1.0)),
            ExogenousNode("U", Normal(0.0, 1.0)),
            StructuralNode("A", 0.2, (("C", 0.3),), Link.EXPIT, BernoulliDraw()),
            StructuralNode("L", -0.3, (("A", l_on_a), ("U", 0.5)), Link.EXPIT, BernoulliDraw()),
            StructuralNode("M", -0.2, (("A", 0.5), ("L", 0.3)), Link.EXPIT, BernoulliDraw()),
            StructuralNode(
                "Y",
                -2.0,
                (("A", 0.4), ("C", LN15), ("M", 0.5), ("L", 0.4), ("U", 0.3)),
                y_link,
                y_noise,
            ),
        ),
        outcome="Y",
    )


@pytest.fixture
def seed():
    # Small chunks on purpose: desk-scale runs then cross chunk
    # boundaries, which is where indexing bugs would hide.
    return SeedSpec(97531, chunk_size=1000)
