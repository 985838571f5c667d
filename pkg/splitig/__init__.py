"""Split Integrated Gradients: attribution along saturating paths."""

from splitig.autodiff import FeatureVector, gradient, gradcheck
from splitig.model_zoo import gen_synthetic, load_model, make_analytic, save_model, to_graph, train_mlp
from splitig.path_integrator import (
    PathSpec,
    find_alpha_star,
    integrated_gradients,
    path_scan,
    split_integrated_gradients,
)

__all__ = [
    'FeatureVector',
    'PathSpec',
    'find_alpha_star',
    'gen_synthetic',
    'gradcheck',
    'gradient',
    'integrated_gradients',
    'load_model',
    'make_analytic',
    'path_scan',
    'save_model',
    'split_integrated_gradients',
    'to_graph',
    'train_mlp',
]
