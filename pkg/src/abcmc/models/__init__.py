"""Generative models, their analytic mean maps and the compatibility diagnostic."""

from .base import ModelSpec, UnsupportedError
from .location import LAPLACE_SCALE, gaussian_model, laplace_model
from .gk import gk_quantile, gk_quantile_model
from .popgen import (
    Genealogy,
    GenealogyBatch,
    PopGenConfig,
    drop_mutations,
    mutate_batch,
    popgen_model,
    simulate_genealogies,
    simulate_genealogy,
)
from .compat import CompatibilityReport, ModelFit, compatibility_report, min_mean_distance
