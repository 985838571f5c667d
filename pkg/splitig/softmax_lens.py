"""
Softmax Lens

Splits the gradient of a softmax output S_t(F(x)) into the target term
S_t (1 - S_t) ∇F_t and the cross terms from the other logits, and profiles
the damping factor S_t (1 - S_t) along an integration path.
"""

from dataclasses import dataclass

import numpy as np

from splitig.autodiff import (
    ComputeGraph,
    FeatureVector,
    as_feature_vector,
    evaluate,
    evaluate_batch,
    gradient,
    stable_softmax,
    with_head,
)
from splitig.errors import PreconditionError
from splitig.model_zoo import ModelSpec, logit_graph
from splitig.path_integrator import integrated_gradients


@dataclass(eq=False)
class SoftmaxDecomposition:
    """
    full_gradient = target_term + cross_terms.

    full_gradient is ∂S_t/∂x by reverse mode, target_term is
    damping_factor * ∂F_t/∂x and cross_terms the remainder.
    """
    full_gradient: FeatureVector
    target_term: FeatureVector
    cross_terms: FeatureVector
    damping_factor: float
    softmax_value: float
    target: int

    def to_dict(self):
        return {
            'target': self.target,
            'softmax_value': self.softmax_value,
            'damping_factor': self.damping_factor,
            'full_gradient': [float(v) for v in self.full_gradient.values],
            'target_term': [float(v) for v in self.target_term.values],
            'cross_terms': [float(v) for v in self.cross_terms.values],
        }


def _logits(model):
    if isinstance(model, ModelSpec):
        return logit_graph(model)
    if isinstance(model, ComputeGraph):
        return model
    raise TypeError(f"expected ComputeGraph or ModelSpec, got {type(model).__name__}")


def _check_target(graph, t):
    if not 0 <= t < graph.output_size:
        raise PreconditionError(f"target {t} outside [0, {graph.output_size})")


def decompose_softmax_gradient(logit_model, x, t):
    """
    Decompose ∂S_t(F(x))/∂x for a multi-logit model.

    Args:
        logit_model: ComputeGraph with vector output, or a ModelSpec
        x: Input point
        t: Target class index

    Returns:
        SoftmaxDecomposition
    """
    graph = _logits(logit_model)
    t = int(t)
    _check_target(graph, t)
    x = as_feature_vector(x)

    full = gradient(with_head(graph, t, softmax=True), x).values
    logit_gradient = gradient(with_head(graph, t), x).values
    s_t = float(stable_softmax(evaluate(graph, x))[0, t])
    damping = s_t * (1.0 - s_t)
    target_term = damping * logit_gradient

    return SoftmaxDecomposition(
        full_gradient=FeatureVector(full, x.shape),
        target_term=FeatureVector(target_term, x.shape),
        cross_terms=FeatureVector(full - target_term, x.shape),
        damping_factor=damping,
        softmax_value=s_t,
        target=t,
    )


def damping_scan(logit_model, path, t):
    """
    S_t (1 - S_t) at each of the n_steps + 1 master-grid nodes.

    Returns:
        1-D array aligned with path.master_grid()
    """
    graph = _logits(logit_model)
    t = int(t)
    _check_target(graph, t)
    logits = evaluate_batch(graph, path.points(path.master_grid()))
    s_t = stable_softmax(logits)[:, t]
    return s_t * (1.0 - s_t)


def softmax_integrated_gradients(logit_model, path, t):
    """
    IG of the softmax output S_t instead of the logit.

    Completeness is measured against S_t(x) - S_t(x').
    """
    graph = _logits(logit_model)
    t = int(t)
    _check_target(graph, t)
    return integrated_gradients(with_head(graph, t, softmax=True), path)


def peak_softmax(logit_model, path, t):
    """Largest S_t along the path; a value near 1 marks a saturated target."""
    graph = _logits(logit_model)
    _check_target(graph, int(t))
    logits = evaluate_batch(graph, path.points(path.master_grid()))
    return float(np.max(stable_softmax(logits)[:, int(t)]))
