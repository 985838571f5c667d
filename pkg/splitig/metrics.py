"""
Attribution Metrics

Segment norm ratios, cosine similarity between attribution maps, ABPC
faithfulness (area between the bottom-ablation and top-ablation curves) and
Monte-Carlo sensitivity under L∞-bounded perturbations. MetricsReport holds
one sample's numbers at one ψ; aggregate() averages them over a sample set.
"""

from dataclasses import dataclass, field

import numpy as np

from splitig.autodiff import FeatureVector, as_feature_vector, forward
from splitig.errors import (
    InputShapeError,
    PreconditionError,
    UndefinedRatioError,
    UndefinedSensitivityError,
    UndefinedSimilarityError,
)
from splitig.path_integrator import AttributionResult, as_graph, split_integrated_gradients

VARIANTS = ('left', 'right', 'full')
SCALAR_METRICS = (
    'alpha_star',
    'norm_ratio_l1',
    'norm_ratio_l2',
    'cosine_left_right',
    'cosine_left_full',
    'cosine_right_full',
)


def _values(attribution):
    if isinstance(attribution, AttributionResult):
        return attribution.attributions.values
    if isinstance(attribution, FeatureVector):
        return attribution.values
    return np.asarray(attribution, dtype=np.float64).reshape(-1)


def _same_shape(a, b, what):
    if a.shape != b.shape:
        raise InputShapeError(f"{what}: shapes {a.shape} and {b.shape} differ")


def norm_ratio(right, left, p=2):
    """‖right‖_p / ‖left‖_p for p in {1, 2}."""
    if p not in (1, 2):
        raise PreconditionError(f"p must be 1 or 2, got {p}")
    right, left = _values(right), _values(left)
    _same_shape(right, left, "norm_ratio")
    denominator = np.linalg.norm(left, ord=p)
    if denominator == 0:
        raise UndefinedRatioError(f"left attribution has zero L{p} norm")
    return float(np.linalg.norm(right, ord=p) / denominator)


def cosine_similarity(a, b):
    """a·b / (‖a‖₂‖b‖₂) over the flattened attribution vectors."""
    a, b = _values(a), _values(b)
    _same_shape(a, b, "cosine_similarity")
    norm_a = np.linalg.norm(a)
    norm_b = np.linalg.norm(b)
    if norm_a == 0 or norm_b == 0:
        raise UndefinedSimilarityError("cosine similarity of a zero attribution vector")
    return float(np.clip(np.dot(a, b) / (norm_a * norm_b), -1.0, 1.0))


# ABPC

@dataclass(eq=False)
class AblationCurves:
    """Top- and bottom-ablation curves over the ablation fraction."""
    fractions: np.ndarray
    top: np.ndarray
    bottom: np.ndarray
    ties: bool
    normalized: bool

    @property
    def area(self):
        """Trapezoid-rule area of (bottom - top) over [0, 1]."""
        gap = self.bottom - self.top
        area = 0.0
        for k in range(self.fractions.size - 1):
            area += (gap[k] + gap[k + 1]) * 0.5 * (self.fractions[k + 1] - self.fractions[k])
        return float(area)


def ablation_orders(scores):
    """
    Feature orders for top and bottom ablation.

    Top ablates the largest signed scores first, bottom the smallest; equal
    scores go in ascending feature index.

    Returns:
        Tuple (top_order, bottom_order, ties)
    """
    scores = np.asarray(scores, dtype=np.float64)
    index = np.arange(scores.size)
    top_order = np.lexsort((index, -scores))
    bottom_order = np.lexsort((index, scores))
    ties = np.unique(scores).size < scores.size
    return top_order, bottom_order, bool(ties)


def _ablated(x, baseline, features):
    values = x.values.copy()
    values[features] = baseline.values[features]
    return FeatureVector(values, x.shape)


def abpc_curves(model, x, attribution, ablation_baseline, n_increments=10):
    """
    Perturbation curves for ABPC.

    At fraction k / n_increments the first floor(k d / n_increments)
    features of each order are set to the ablation baseline. Curves are
    normalised as (F - F_full) / (F(x) - F_full) when F(x) != F_full, where
    F_full is the output with every feature ablated.
    """
    if int(n_increments) < 1:
        raise PreconditionError(f"n_increments must be at least 1, got {n_increments}")
    n_increments = int(n_increments)
    graph = as_graph(model)
    x = as_feature_vector(x)
    baseline = as_feature_vector(ablation_baseline)
    scores = _values(attribution)
    _same_shape(x.values, baseline.values, "abpc baseline")
    _same_shape(x.values, scores, "abpc attribution")

    top_order, bottom_order, ties = ablation_orders(scores)
    d = x.size
    f_x = forward(graph, x)
    f_full = forward(graph, baseline)

    top = [f_x]
    bottom = [f_x]
    for k in range(1, n_increments + 1):
        m = (k * d) // n_increments
        top.append(forward(graph, _ablated(x, baseline, top_order[:m])))
        bottom.append(forward(graph, _ablated(x, baseline, bottom_order[:m])))
    top = np.array(top)
    bottom = np.array(bottom)

    span = f_x - f_full
    normalized = span != 0
    if normalized:
        top = (top - f_full) / span
        bottom = (bottom - f_full) / span

    return AblationCurves(
        fractions=np.arange(n_increments + 1) / n_increments,
        top=top,
        bottom=bottom,
        ties=ties,
        normalized=bool(normalized),
    )


def abpc(model, x, attribution, ablation_baseline, n_increments=10):
    """Area between the bottom- and top-ablation curves (positive is faithful)."""
    return abpc_curves(model, x, attribution, ablation_baseline, n_increments).area


# Sensitivity

def _check_sensitivity_args(r, n_samples):
    if not r > 0:
        raise PreconditionError(f"r must be positive, got {r}")
    if int(n_samples) < 1:
        raise PreconditionError(f"n_samples must be at least 1, got {n_samples}")


def sensitivity_by_variant(procedure, model, x, r=0.05, n_samples=10, seed=0):
    """
    Sensitivity of several attribution variants on one set of draws.

    Args:
        procedure: Callable (model, x) -> mapping of variant name to attribution
        model: Passed through to procedure
        x: Input point
        r: L∞ radius of the perturbation ball
        n_samples: Number of perturbations
        seed: Seed (or seed sequence) for numpy's default_rng

    Returns:
        Dict variant -> max_δ ‖Φ(x+δ) - Φ(x)‖₂ / ‖Φ(x)‖₂, None where ‖Φ(x)‖₂ = 0
    """
    _check_sensitivity_args(r, n_samples)
    x = as_feature_vector(x)
    base = {name: _values(a) for name, a in procedure(model, x).items()}
    norms = {name: float(np.linalg.norm(phi)) for name, phi in base.items()}

    rng = np.random.default_rng(seed)
    worst = dict.fromkeys(base, 0.0)
    for _ in range(int(n_samples)):
        delta = rng.uniform(-r, r, size=x.size)
        perturbed = procedure(model, FeatureVector(x.values + delta, x.shape))
        for name, phi in base.items():
            change = float(np.linalg.norm(_values(perturbed[name]) - phi))
            worst[name] = max(worst[name], change)

    return {name: (worst[name] / norms[name] if norms[name] > 0 else None) for name in base}


def sensitivity(procedure, model, x, r=0.05, n_samples=10, seed=0):
    """
    Max normalised attribution change over n_samples uniform perturbations.

    Args:
        procedure: Callable (model, x) -> attribution
    """
    _check_sensitivity_args(r, n_samples)
    x = as_feature_vector(x)
    if np.linalg.norm(_values(procedure(model, x))) == 0:
        raise UndefinedSensitivityError("attribution at x has zero L2 norm")
    result = sensitivity_by_variant(
        lambda m, point: {'value': procedure(m, point)}, model, x, r, n_samples, seed
    )
    return result['value']


def split_procedure(path, psi):
    """Sensitivity procedure returning LeftIG, RightIG and full IG at a point."""

    def attribute(model, x):
        return split_integrated_gradients(model, path.with_input(x), psi).variants()

    return attribute


# Reports

@dataclass(eq=False)
class MetricsReport:
    """
    Metrics for one sample at one ψ, or their mean over a sample set.

    Undefined entries are None. skip_counts records, per metric, how many
    samples were undefined when this is an aggregate.
    """
    psi: float
    alpha_star: float = None
    at_endpoint: int = 0
    norm_ratio_l1: float = None
    norm_ratio_l2: float = None
    cosine_left_right: float = None
    cosine_left_full: float = None
    cosine_right_full: float = None
    abpc: dict = field(default_factory=dict)
    sensitivity: dict = field(default_factory=dict)
    run_params: dict = field(default_factory=dict)
    skip_counts: dict = field(default_factory=dict)
    n_samples: int = 1
    sample_index: int = None
    target: int = None
    correct: bool = None
    abpc_ties: bool = False

    def metric_items(self):
        """(name, value) for every averaged quantity, flat."""
        items = [(name, getattr(self, name)) for name in SCALAR_METRICS]
        items += [(f'abpc_{v}', self.abpc.get(v)) for v in VARIANTS]
        items += [(f'sensitivity_{v}', self.sensitivity.get(v)) for v in VARIANTS]
        return items

    def to_row(self):
        row = {
            'sample_index': self.sample_index,
            'psi': self.psi,
            'n_samples': self.n_samples,
            'target': self.target,
            'correct': self.correct,
            'at_endpoint': self.at_endpoint,
        }
        row.update(self.metric_items())
        for name, _ in self.metric_items():
            row[f'skipped_{name}'] = self.skip_counts.get(name, 0)
        return row

    def to_dict(self):
        return {
            'sample_index': self.sample_index,
            'psi': self.psi,
            'n_samples': self.n_samples,
            'target': self.target,
            'correct': self.correct,
            'alpha_star': self.alpha_star,
            'at_endpoint': self.at_endpoint,
            'norm_ratio_l1': self.norm_ratio_l1,
            'norm_ratio_l2': self.norm_ratio_l2,
            'cosine_left_right': self.cosine_left_right,
            'cosine_left_full': self.cosine_left_full,
            'cosine_right_full': self.cosine_right_full,
            'abpc': {v: self.abpc.get(v) for v in VARIANTS},
            'abpc_ties': self.abpc_ties,
            'sensitivity': {v: self.sensitivity.get(v) for v in VARIANTS},
            'run_params': self.run_params,
            'skip_counts': self.skip_counts,
        }


def _guarded(compute, *args):
    try:
        return compute(*args)
    except (UndefinedRatioError, UndefinedSimilarityError):
        return None


def evaluate_split(model, path, psi, *, sample_index=None, target=None, correct=None,
                   ablation_baseline=None, n_increments=10, r=0.05, n_perturbations=10,
                   seed=0, with_abpc=True, with_sensitivity=True, run_params=None):
    """
    All metrics for one sample at one ψ.

    Sensitivity draws come from default_rng([seed, sample_index]) so the
    result does not depend on which worker evaluates the sample.
    """
    graph = as_graph(model)
    split = split_integrated_gradients(graph, path, psi)
    left, right, full = split.left, split.right, split.full

    report = MetricsReport(
        psi=float(psi),
        alpha_star=split.alpha_star,
        at_endpoint=int(split.at_endpoint),
        norm_ratio_l1=_guarded(norm_ratio, right, left, 1),
        norm_ratio_l2=_guarded(norm_ratio, right, left, 2),
        cosine_left_right=_guarded(cosine_similarity, left, right),
        cosine_left_full=_guarded(cosine_similarity, left, full),
        cosine_right_full=_guarded(cosine_similarity, right, full),
        run_params=dict(run_params or {}),
        sample_index=sample_index,
        target=target,
        correct=correct,
    )

    if with_abpc:
        baseline = path.baseline if ablation_baseline is None else ablation_baseline
        for name, result in split.variants().items():
            curves = abpc_curves(graph, path.input, result, baseline, n_increments)
            report.abpc[name] = curves.area
            report.abpc_ties = report.abpc_ties or curves.ties

    if with_sensitivity:
        stream = [int(seed), int(sample_index or 0)]
        report.sensitivity = sensitivity_by_variant(
            split_procedure(path, psi), graph, path.input, r, n_perturbations, stream
        )

    return report


def aggregate(per_sample_reports):
    """
    Mean of every metric over the reports, skipping undefined entries.

    A metric undefined in every report stays None. All reports must share ψ.
    """
    reports = list(per_sample_reports)
    if not reports:
        raise PreconditionError("cannot aggregate an empty list of reports")
    psis = {r.psi for r in reports}
    if len(psis) != 1:
        raise PreconditionError(f"reports mix psi values {sorted(psis)}")

    means = {}
    skip_counts = {}
    for name, _ in reports[0].metric_items():
        values = []
        for report in reports:
            value = dict(report.metric_items())[name]
            if value is not None and not np.isnan(value):
                values.append(value)
        skip_counts[name] = len(reports) - len(values)
        means[name] = float(np.mean(values)) if values else None

    return MetricsReport(
        psi=reports[0].psi,
        alpha_star=means['alpha_star'],
        at_endpoint=sum(r.at_endpoint for r in reports),
        norm_ratio_l1=means['norm_ratio_l1'],
        norm_ratio_l2=means['norm_ratio_l2'],
        cosine_left_right=means['cosine_left_right'],
        cosine_left_full=means['cosine_left_full'],
        cosine_right_full=means['cosine_right_full'],
        abpc={v: means[f'abpc_{v}'] for v in VARIANTS},
        sensitivity={v: means[f'sensitivity_{v}'] for v in VARIANTS},
        run_params=dict(reports[0].run_params),
        skip_counts=skip_counts,
        n_samples=len(reports),
        abpc_ties=any(r.abpc_ties for r in reports),
    )
