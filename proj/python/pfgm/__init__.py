"""Poisson flow generative models at desk scale."""

from ._core import (
    __version__,
    empirical_field,
    generate_toy,
    greens_gradient,
    greens_potential,
    hit_probabilities,
    kappa,
    log_likelihood,
    normalized_field,
    rule_of_thumb_M,
    rule_of_thumb_schedule,
    sample,
    sample_prior,
    surface_area_unit_sphere,
    tree_field,
)

__all__ = [
    "__version__",
    "empirical_field",
    "generate_toy",
    "greens_gradient",
    "greens_potential",
    "hit_probabilities",
    "kappa",
    "log_likelihood",
    "normalized_field",
    "rule_of_thumb_M",
    "rule_of_thumb_schedule",
    "sample",
    "sample_prior",
    "surface_area_unit_sphere",
    "tree_field",
]
