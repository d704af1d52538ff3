"""Bundled datasets.

substance_use.csv: counts of 2276 students cross-classified by alcohol,
cigarette, and marijuana use, gender, and race (32 cells).  Coding: each
binary factor is 1 for "yes"/"male"/"white" and 0 otherwise; the 10 pairwise
interaction columns are precomputed products of the main-effect columns.
The public source tabulates the factors without fixing a level order, so a
run elsewhere may use the complementary coding of gender or race; that flips
the signs of the affected coefficients but not the fitted cell means.
"""

from importlib import resources

import numpy as np

from ..models import Family, GlmModel, load_dataset


def substance_use_path():
    return resources.files(__package__) / "substance_use.csv"


def load_substance_use(prior_variance: float = 4.0) -> GlmModel:
    """Poisson log-linear model for the student substance-use table.

    d = 16: intercept, 5 main effects, 10 pairwise interactions; independent
    N(0, prior_variance) priors on all coefficients.
    """
    ds = load_dataset(substance_use_path(), "count", add_intercept=True)
    d = ds.predictors.shape[1]
    return GlmModel(
        design=ds.predictors,
        response=ds.responses,
        family=Family.POISSON_LOG,
        prior_mean=np.zeros(d),
        prior_cov_diag=np.full(d, prior_variance),
        column_names=ds.column_names,
    )
