"""
Path Integrator

Integrated Gradients along the straight line x' + α(x - x'), the saturation
threshold α*, and Split IG: LeftIG over [0, α*] (where the output still
changes) and RightIG over [α*, 1] (the saturated part of the path).

All three segments of a split share one master grid of n_steps + 1 nodes
α_k = k / n_steps. α* is always a master-grid node, so LeftIG + RightIG
equals full IG up to floating-point associativity. Gradients are computed
once per node; the output values used for the threshold scan come from the
same batched evaluation.
"""

from dataclasses import dataclass

import numpy as np
import pandas as pd

from splitig.autodiff import (
    ComputeGraph,
    FeatureVector,
    as_feature_vector,
    value_and_gradient_batch,
)
from splitig.errors import InputShapeError, PreconditionError
from splitig.model_zoo import ModelSpec, to_graph

RULES = ('right-riemann', 'left-riemann', 'trapezoid')
SEGMENTS = ('full', 'left', 'right')

# Protocol defaults: right Riemann sum with 200 steps
DEFAULT_N_STEPS = 200
DEFAULT_RULE = 'right-riemann'


def as_graph(model):
    """Accept either a ComputeGraph or a ModelSpec."""
    if isinstance(model, ComputeGraph):
        return model
    if isinstance(model, ModelSpec):
        return to_graph(model)
    raise TypeError(f"expected ComputeGraph or ModelSpec, got {type(model).__name__}")


@dataclass(frozen=True, eq=False)
class PathSpec:
    """
    Straight-line integration path and its quadrature grid.

    Args:
        baseline: x'
        input: x
        n_steps: Number of grid intervals (>= 1)
        rule: 'right-riemann', 'left-riemann' or 'trapezoid'
    """
    baseline: FeatureVector
    input: FeatureVector
    n_steps: int = DEFAULT_N_STEPS
    rule: str = DEFAULT_RULE

    def __post_init__(self):
        baseline = as_feature_vector(self.baseline)
        x = as_feature_vector(self.input)
        if baseline.shape != x.shape:
            raise InputShapeError(f"baseline shape {baseline.shape} != input shape {x.shape}")
        if int(self.n_steps) < 1:
            raise PreconditionError(f"n_steps must be at least 1, got {self.n_steps}")
        if self.rule not in RULES:
            raise PreconditionError(f"unknown quadrature rule '{self.rule}' (choose from {', '.join(RULES)})")
        object.__setattr__(self, 'baseline', baseline)
        object.__setattr__(self, 'input', x)
        object.__setattr__(self, 'n_steps', int(self.n_steps))

    @property
    def delta(self):
        return self.input.values - self.baseline.values

    def master_grid(self):
        return np.arange(self.n_steps + 1) / self.n_steps

    def points(self, alphas):
        """Path points x' + α(x - x') as rows."""
        return self.baseline.values + np.asarray(alphas)[:, None] * self.delta

    def with_input(self, x):
        return PathSpec(self.baseline, x, self.n_steps, self.rule)


@dataclass(eq=False)
class AttributionResult:
    """
    Attribution vector plus provenance.

    completeness_gap is |sum(attributions) - expected_total| where the
    expected total is F(end) - F(start) for a full range, ψΔ for LeftIG and
    (1 - ψ)Δ for RightIG (Δ = F(x) - F(x')). threshold_gap is how far the
    output at the grid α* sits from the exact threshold value.
    """
    attributions: FeatureVector
    segment: str = 'full'
    psi: float = None
    alpha_star: float = None
    completeness_gap: float = 0.0
    expected_total: float = 0.0
    threshold_gap: float = None
    at_endpoint: bool = False
    alpha_range: tuple = (0.0, 1.0)
    n_steps: int = DEFAULT_N_STEPS
    rule: str = DEFAULT_RULE

    def __post_init__(self):
        if self.segment not in SEGMENTS:
            raise PreconditionError(f"unknown segment '{self.segment}'")
        self.attributions = as_feature_vector(self.attributions)

    @property
    def values(self):
        return self.attributions.values

    @property
    def total(self):
        return float(np.sum(self.attributions.values))

    def to_dict(self):
        return {
            'segment': self.segment,
            'psi': self.psi,
            'alpha_star': self.alpha_star,
            'alpha_range': list(self.alpha_range),
            'rule': self.rule,
            'n_steps': self.n_steps,
            'completeness_gap': self.completeness_gap,
            'expected_total': self.expected_total,
            'threshold_gap': self.threshold_gap,
            'at_endpoint': self.at_endpoint,
            'attributions': [float(v) for v in self.attributions.values],
            'shape': list(self.attributions.shape),
        }

    def to_frame(self):
        """One row per feature."""
        return pd.DataFrame({
            'feature': np.arange(self.attributions.size),
            'segment': self.segment,
            'attribution': self.attributions.values,
        })


@dataclass(eq=False)
class SplitResult:
    """LeftIG, RightIG and full IG sharing one master grid."""
    left: AttributionResult
    right: AttributionResult
    full: AttributionResult
    alpha_star: float
    node_index: int
    at_endpoint: bool
    threshold: float
    output_start: float
    output_end: float

    def variants(self):
        return {'left': self.left, 'right': self.right, 'full': self.full}

    def to_dict(self):
        return {
            'alpha_star': self.alpha_star,
            'node_index': self.node_index,
            'at_endpoint': self.at_endpoint,
            'threshold': self.threshold,
            'output_baseline': self.output_start,
            'output_input': self.output_end,
            'left': self.left.to_dict(),
            'right': self.right.to_dict(),
            'full': self.full.to_dict(),
        }

    def to_frame(self):
        """One row per feature with all three segments side by side."""
        return pd.DataFrame({
            'feature': np.arange(self.full.attributions.size),
            'left': self.left.values,
            'right': self.right.values,
            'full': self.full.values,
        })


@dataclass(eq=False)
class PathProfile:
    """F and the gradient L2 norm at every master-grid node."""
    alphas: np.ndarray
    outputs: np.ndarray
    grad_l2_norms: np.ndarray
    damping: np.ndarray = None
    alpha_star: float = None

    def __post_init__(self):
        self.alphas = np.asarray(self.alphas, dtype=np.float64)
        self.outputs = np.asarray(self.outputs, dtype=np.float64)
        self.grad_l2_norms = np.asarray(self.grad_l2_norms, dtype=np.float64)
        if not (self.alphas.shape == self.outputs.shape == self.grad_l2_norms.shape):
            raise InputShapeError("profile arrays must have equal length")
        if self.damping is not None:
            self.damping = np.asarray(self.damping, dtype=np.float64)
            if self.damping.shape != self.alphas.shape:
                raise InputShapeError("damping column must match the grid length")
        if self.alphas[0] != 0.0 or self.alphas[-1] != 1.0 or np.any(np.diff(self.alphas) <= 0):
            raise PreconditionError("profile grid must increase strictly from 0 to 1")

    def __len__(self):
        return self.alphas.size

    def to_frame(self):
        df = pd.DataFrame({
            'alpha': self.alphas,
            'output': self.outputs,
            'grad_l2_norm': self.grad_l2_norms,
        })
        if self.damping is not None:
            df['damping'] = self.damping
        return df


@dataclass(eq=False)
class AlphaStar:
    """Result of the threshold scan."""
    node_index: int
    alpha: float
    at_endpoint: bool
    threshold: float
    threshold_gap: float


def _rule_weights(rule, k0, k1, n_nodes, step):
    """Quadrature weights on nodes k0..k1 (inclusive) of the master grid."""
    weights = np.zeros(n_nodes)
    if k1 <= k0:
        return weights
    if rule == 'right-riemann':
        weights[k0 + 1:k1 + 1] = step
    elif rule == 'left-riemann':
        weights[k0:k1] = step
    else:
        weights[k0:k1 + 1] = step
        weights[k0] = step / 2.0
        weights[k1] = step / 2.0
    return weights


def _accumulate(weights, grads, delta):
    """(x - x') * sum_k w_k grad_k, summed in fixed grid order."""
    return delta * np.sum(weights[:, None] * grads, axis=0)


def _scan(graph, path, alphas):
    if graph.input_size != path.input.size:
        raise InputShapeError(
            f"model expects {graph.input_size} features but the path has {path.input.size}"
        )
    return value_and_gradient_batch(graph, path.points(alphas))


def _check_psi(psi):
    if not 0.0 < psi < 1.0:
        raise PreconditionError(f"psi must lie strictly between 0 and 1, got {psi}")


def integrated_gradients(model, path, alpha_lo=0.0, alpha_hi=1.0):
    """
    Integrated Gradients over [alpha_lo, alpha_hi].

    Args:
        model: ComputeGraph or ModelSpec
        path: PathSpec
        alpha_lo: Start of the α range
        alpha_hi: End of the α range

    Returns:
        AttributionResult; completeness_gap is measured against
        F(x' + alpha_hi (x - x')) - F(x' + alpha_lo (x - x'))
    """
    if not 0.0 <= alpha_lo < alpha_hi <= 1.0:
        raise PreconditionError(f"need 0 <= alpha_lo < alpha_hi <= 1, got [{alpha_lo}, {alpha_hi}]")
    graph = as_graph(model)
    n = path.n_steps
    alphas = alpha_lo + (alpha_hi - alpha_lo) * (np.arange(n + 1) / n)
    values, grads = _scan(graph, path, alphas)

    weights = _rule_weights(path.rule, 0, n, n + 1, (alpha_hi - alpha_lo) / n)
    attributions = _accumulate(weights, grads, path.delta)
    expected = float(values[-1] - values[0])
    return AttributionResult(
        attributions=FeatureVector(attributions, path.input.shape),
        segment='full',
        completeness_gap=abs(float(np.sum(attributions)) - expected),
        expected_total=expected,
        alpha_range=(float(alpha_lo), float(alpha_hi)),
        n_steps=n,
        rule=path.rule,
    )


def _alpha_star_from_values(values, psi):
    """
    First grid node whose output has crossed ψ of the way from F(x') to F(x).

    For an increasing path output this is the first node with
    F > F(x') + ψ (F(x) - F(x')); for a decreasing one the mirror crossing
    below the same threshold. No crossing (including F(x) == F(x')) gives
    the last node with the endpoint flag set.
    """
    n = values.size - 1
    start = values[0]
    span = values[-1] - start
    threshold = start + psi * span

    if span > 0:
        hits = np.flatnonzero(values > threshold)
    elif span < 0:
        hits = np.flatnonzero(values < threshold)
    else:
        hits = np.array([], dtype=np.int64)

    if hits.size == 0:
        node, at_endpoint = n, True
    else:
        node, at_endpoint = int(hits[0]), False
    return AlphaStar(
        node_index=node,
        alpha=node / n,
        at_endpoint=at_endpoint,
        threshold=float(threshold),
        threshold_gap=abs(float(values[node] - threshold)),
    )


def find_alpha_star_node(model, path, psi):
    """Threshold scan on the master grid; returns an AlphaStar record."""
    _check_psi(psi)
    graph = as_graph(model)
    values, _ = _scan(graph, path, path.master_grid())
    return _alpha_star_from_values(values, psi)


def find_alpha_star(model, path, psi):
    """
    Smallest master-grid α whose output exceeds F(x') + ψ (F(x) - F(x')).

    Returns:
        α* as a float; 1.0 when no node crosses (see find_alpha_star_node
        for the endpoint flag)
    """
    return find_alpha_star_node(model, path, psi).alpha


def split_integrated_gradients(model, path, psi):
    """
    LeftIG over [0, α*], RightIG over [α*, 1] and full IG on one master grid.

    LeftIG completeness is measured against ψΔ, RightIG against (1 - ψ)Δ and
    full IG against Δ = F(x) - F(x').

    Returns:
        SplitResult
    """
    _check_psi(psi)
    graph = as_graph(model)
    n = path.n_steps
    values, grads = _scan(graph, path, path.master_grid())
    star = _alpha_star_from_values(values, psi)
    k = star.node_index

    step = 1.0 / n
    span = float(values[-1] - values[0])
    segments = {
        'left': ((0, k), psi * span, (0.0, star.alpha)),
        'right': ((k, n), (1.0 - psi) * span, (star.alpha, 1.0)),
        'full': ((0, n), span, (0.0, 1.0)),
    }

    results = {}
    for segment, ((k0, k1), expected, alpha_range) in segments.items():
        weights = _rule_weights(path.rule, k0, k1, n + 1, step)
        attributions = _accumulate(weights, grads, path.delta)
        results[segment] = AttributionResult(
            attributions=FeatureVector(attributions, path.input.shape),
            segment=segment,
            psi=None if segment == 'full' else float(psi),
            alpha_star=None if segment == 'full' else star.alpha,
            completeness_gap=abs(float(np.sum(attributions)) - expected),
            expected_total=expected,
            threshold_gap=None if segment == 'full' else star.threshold_gap,
            at_endpoint=star.at_endpoint,
            alpha_range=alpha_range,
            n_steps=n,
            rule=path.rule,
        )

    return SplitResult(
        left=results['left'],
        right=results['right'],
        full=results['full'],
        alpha_star=star.alpha,
        node_index=k,
        at_endpoint=star.at_endpoint,
        threshold=star.threshold,
        output_start=float(values[0]),
        output_end=float(values[-1]),
    )


def path_scan(model, path):
    """
    F and ||∇F||₂ at each of the n_steps + 1 master-grid nodes.

    Returns:
        PathProfile
    """
    graph = as_graph(model)
    alphas = path.master_grid()
    values, grads = _scan(graph, path, alphas)
    return PathProfile(alphas=alphas, outputs=values, grad_l2_norms=np.linalg.norm(grads, axis=1))


def saturated_gradient_share(profile, alpha_star):
    """
    Fraction of the path's gradient-norm mass lying beyond α*.

    A share well above 1 - α* means the saturated part of the path carries
    gradients comparable to the part where the output actually moves.
    """
    total = float(np.sum(profile.grad_l2_norms))
    if total == 0.0:
        return 0.0
    return float(np.sum(profile.grad_l2_norms[profile.alphas > alpha_star])) / total
