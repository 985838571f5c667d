"""
Split IG command line.

Subcommands:
- attribute: LeftIG / RightIG / full IG per sample for every ψ
- scan-path: output and gradient-norm profile along the path, with SVG chart
- metrics: norm ratios, cosines, ABPC and sensitivity per sample and aggregated
- train-fixture: train an MLP on generated (or imported) data and save it
- gradcheck: reverse-mode gradients against finite differences

Exit codes: 0 success (warnings allowed), 2 configuration or input error,
3 numeric failure aborting the run.
"""

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields
from functools import lru_cache
from pathlib import Path

import numpy as np

from splitig.autodiff import FeatureVector, forward, gradcheck
from splitig.config import RunConfig, resolve_config
from splitig.errors import (
    ConfigError,
    NumericOverflowError,
    SplitIGError,
    TrainingDivergedError,
)
from splitig.logging_utils import log_message
from splitig.metrics import aggregate, evaluate_split
from splitig.model_zoo import (
    gen_synthetic,
    load_dataset_csv,
    load_model,
    logit_graph,
    make_analytic,
    predict,
    save_dataset_csv,
    save_model,
    to_graph,
    train_mlp,
)
from splitig.path_integrator import (
    PathSpec,
    find_alpha_star_node,
    path_scan,
    saturated_gradient_share,
    split_integrated_gradients,
)
from splitig.report import write_csv, write_json, write_text
from splitig.softmax_lens import damping_scan, peak_softmax
from splitig.svg_chart import render_path_chart

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

GRADCHECK_TOLERANCE = 1e-5
PROGRESS_EVERY = 50

ANALYTIC_FIXTURES = {
    'linear-2d': dict(kind='linear', w=(1.0, 2.0), bias=0.0),
    'logistic-1d': dict(kind='logistic-saturator', w=(1.0,), bias=0.0, scale=10.0),
}

# Blob fixtures: generator arguments (seed, n_samples, n_features, n_classes) and layer widths
BLOB_FIXTURES = {
    'blob-mlp': dict(data=(7, 200, 2, 2), layer_sizes=(2, 8, 2)),
    'blob-mlp-6d': dict(data=(7, 300, 6, 3), layer_sizes=(6, 16, 3)),
}
FIXTURE_TRAINING = dict(activation='tanh', epochs=500, learning_rate=0.1, seed=7)

FIXTURES = tuple(ANALYTIC_FIXTURES) + tuple(BLOB_FIXTURES)


@lru_cache(maxsize=None)
def fixture_dataset(name):
    """Training data of a blob fixture."""
    return gen_synthetic(*BLOB_FIXTURES[name]['data'])


@lru_cache(maxsize=None)
def fixture_model(name):
    """ModelSpec for a built-in fixture; blob fixtures are trained on first use."""
    if name in ANALYTIC_FIXTURES:
        return make_analytic(**ANALYTIC_FIXTURES[name])
    if name in BLOB_FIXTURES:
        spec = train_mlp(fixture_dataset(name), BLOB_FIXTURES[name]['layer_sizes'], **FIXTURE_TRAINING)
        spec.metadata['fixture'] = name
        return spec
    raise ConfigError(f"unknown fixture '{name}' (available: {', '.join(FIXTURES)})")


def resolve_model(config):
    if config.model in FIXTURES:
        return fixture_model(config.model)
    path = Path(config.model)
    if not path.is_file():
        raise ConfigError(f"model '{config.model}' is neither a fixture name nor an existing file: {path}")
    return load_model(path)


def resolve_dataset(config, spec):
    if config.dataset:
        path = Path(config.dataset)
        if not path.is_file():
            raise ConfigError(f"dataset file not found: {path}")
        dataset = load_dataset_csv(path)
    elif config.model in BLOB_FIXTURES:
        dataset = fixture_dataset(config.model)
    else:
        dataset = gen_synthetic(config.seed, config.n_samples, spec.input_size, config.n_classes)

    if len(dataset) == 0:
        raise ConfigError("dataset is empty")
    if dataset.n_features != spec.input_size:
        raise ConfigError(f"dataset has {dataset.n_features} features but the model expects {spec.input_size}")
    return dataset


@dataclass
class Sample:
    index: int
    x: FeatureVector
    label: int
    target: int
    correct: bool = None


def select_samples(config, spec, dataset, limit=True):
    """Samples to evaluate, in dataset order, with their target logit.

    With limit=False every eligible row is returned regardless of max_samples.
    """
    multi_class = spec.output_size > 1
    predicted = predict(spec, dataset.inputs) if multi_class else None

    samples = []
    for i in range(len(dataset)):
        label = int(dataset.labels[i])
        correct = bool(predicted[i] == label) if multi_class else None
        if config.exclude_misclassified and correct is False:
            continue

        if config.target == 'label':
            target = label if multi_class else 0
        elif config.target == 'predicted':
            target = int(predicted[i]) if multi_class else 0
        else:
            target = int(config.target)
        if not 0 <= target < spec.output_size:
            raise ConfigError(f"target {target} outside the model's {spec.output_size} outputs")

        samples.append(Sample(i, dataset.feature_vector(i), label, target, correct))

    if limit and config.max_samples:
        samples = samples[:config.max_samples]
    if not samples:
        raise ConfigError("no samples left to evaluate")
    return samples


def make_baseline(config, dataset):
    if config.baseline == 'mean':
        return FeatureVector(dataset.inputs.mean(axis=0))
    return FeatureVector(np.zeros(dataset.n_features))


def run_samples(config, samples, work):
    """
    Apply work to every sample, optionally on a thread pool.

    Results come back in sample order. A sample whose evaluation overflows is
    skipped and recorded.

    Returns:
        Tuple (list of (sample, result), list of skipped-sample records)
    """

    def guarded(sample):
        try:
            return sample, work(sample), None
        except NumericOverflowError as e:
            return sample, None, str(e)

    done = []
    skipped = []
    if config.workers > 1:
        pool = ThreadPoolExecutor(max_workers=config.workers)
        outcomes = pool.map(guarded, samples)
    else:
        pool = None
        outcomes = map(guarded, samples)

    try:
        for count, (sample, result, error) in enumerate(outcomes, start=1):
            if error is None:
                done.append((sample, result))
            else:
                log_message(f"Sample {sample.index} skipped: {error}", "WARNING")
                skipped.append({'sample_index': sample.index, 'reason': error})
            if count % PROGRESS_EVERY == 0:
                log_message(f"  Progress: {count}/{len(samples)} samples processed")
    finally:
        if pool is not None:
            pool.shutdown()

    if samples and not done:
        raise NumericOverflowError(f"all {len(samples)} samples failed numerically")
    return done, skipped


def _prepare(config, limit=True):
    spec = resolve_model(config)
    dataset = resolve_dataset(config, spec)
    samples = select_samples(config, spec, dataset, limit)
    graphs = {t: to_graph(spec, t) for t in sorted({s.target for s in samples})}
    baseline = make_baseline(config, dataset)
    return spec, dataset, samples, graphs, baseline


def _finish(skipped):
    if skipped:
        log_message(f"Completed with {len(skipped)} warning(s)", "WARNING")
    return EXIT_OK


def cmd_attribute(config, args=None):
    """Split IG for every sample and ψ: per-sample JSON plus a summary CSV."""
    spec, dataset, samples, graphs, baseline = _prepare(config)
    out_dir = Path(config.output_dir) / 'attribute'
    log_message(f"Attributing {len(samples)} samples of '{config.model}' at psi {list(config.psi)}")

    def work(sample):
        path = PathSpec(baseline, sample.x, config.n_steps, config.rule)
        graph = graphs[sample.target]
        return {psi: split_integrated_gradients(graph, path, psi) for psi in config.psi}

    done, skipped = run_samples(config, samples, work)

    rows = []
    for sample, splits in done:
        payload = {
            'sample_index': sample.index,
            'label': sample.label,
            'target': sample.target,
            'correct': sample.correct,
            'input': [float(v) for v in sample.x.values],
            'baseline': [float(v) for v in baseline.values],
            'splits': {repr(psi): split.to_dict() for psi, split in splits.items()},
        }
        write_json(out_dir / f'sample_{sample.index:04d}.json', payload, config)

        for psi, split in splits.items():
            rows.append({
                'sample_index': sample.index,
                'target': sample.target,
                'correct': sample.correct,
                'psi': psi,
                'alpha_star': split.alpha_star,
                'node_index': split.node_index,
                'at_endpoint': split.at_endpoint,
                'output_baseline': split.output_start,
                'output_input': split.output_end,
                'sum_left': split.left.total,
                'sum_right': split.right.total,
                'sum_full': split.full.total,
                'completeness_gap_left': split.left.completeness_gap,
                'completeness_gap_right': split.right.completeness_gap,
                'completeness_gap_full': split.full.completeness_gap,
                'threshold_gap': split.left.threshold_gap,
            })

    summary_csv = write_csv(out_dir / 'summary.csv', rows)
    write_json(out_dir / 'summary.json', {
        'n_samples': len(done),
        'skipped': skipped,
        'summary_csv': summary_csv.name,
    }, config)

    log_message(f"Data saved to: {summary_csv}")
    if rows:
        gaps = [row['completeness_gap_full'] for row in rows]
        log_message(f"  Max full-IG completeness gap: {max(gaps):.3e}")
    return _finish(skipped)


def cmd_scan_path(config, args=None):
    """Output and gradient-norm profile along the path of one sample."""
    spec, dataset, samples, graphs, baseline = _prepare(config, limit=False)
    if not 0 <= config.sample_index < len(dataset):
        raise ConfigError(f"sample {config.sample_index} is outside the dataset ({len(dataset)} rows)")
    matches = [s for s in samples if s.index == config.sample_index]
    if not matches:
        raise ConfigError(f"sample {config.sample_index} is misclassified and excluded from evaluation")
    sample = matches[0]

    path = PathSpec(baseline, sample.x, config.n_steps, config.rule)
    graph = graphs[sample.target]
    profile = path_scan(graph, path)
    star = find_alpha_star_node(graph, path, config.quality_psi)
    profile.alpha_star = star.alpha

    payload = {
        'sample_index': sample.index,
        'target': sample.target,
        'psi': config.quality_psi,
        'alpha_star': star.alpha,
        'node_index': star.node_index,
        'at_endpoint': star.at_endpoint,
        'threshold': star.threshold,
        'saturated_gradient_share': saturated_gradient_share(profile, star.alpha),
    }
    if spec.output_size > 1:
        logits = logit_graph(spec)
        profile.damping = damping_scan(logits, path, sample.target)
        payload['peak_softmax'] = peak_softmax(logits, path, sample.target)

    out_dir = Path(config.output_dir) / 'scan_path'
    stem = f'sample_{sample.index:04d}'
    csv_path = write_csv(out_dir / f'{stem}.csv', profile.to_frame())
    payload['profile_csv'] = csv_path.name
    write_json(out_dir / f'{stem}.json', payload, config)
    chart = render_path_chart(profile, star.alpha, title=f"sample {sample.index}", config=config)
    svg_path = write_text(out_dir / f'{stem}.svg', chart)

    log_message(f"alpha* = {star.alpha:.4f} (psi={config.quality_psi}, node {star.node_index})")
    if star.at_endpoint:
        log_message("Threshold not crossed before the input; alpha* set to 1", "WARNING")
    log_message(f"Data saved to: {csv_path}")
    log_message(f"Chart saved to: {svg_path}")
    return EXIT_OK


def _metric_psis(config):
    return tuple(sorted(set(config.psi) | {config.quality_psi}))


def cmd_metrics(config, args=None):
    """Per-sample and aggregate MetricsReports for every ψ."""
    spec, dataset, samples, graphs, baseline = _prepare(config)
    psis = _metric_psis(config)
    run_params = {
        'n_steps': config.n_steps,
        'rule': config.rule,
        'seed': config.seed,
        'r': config.r,
        'n_perturbations': config.n_perturbations,
        'n_increments': config.n_increments,
        'baseline': config.baseline,
    }
    log_message(f"Evaluating metrics on {len(samples)} samples of '{config.model}' at psi {list(psis)}")

    def work(sample):
        path = PathSpec(baseline, sample.x, config.n_steps, config.rule)
        reports = []
        for psi in psis:
            quality = psi == config.quality_psi
            reports.append(evaluate_split(
                graphs[sample.target], path, psi,
                sample_index=sample.index,
                target=sample.target,
                correct=sample.correct,
                n_increments=config.n_increments,
                r=config.r,
                n_perturbations=config.n_perturbations,
                seed=config.seed,
                with_abpc=config.abpc and quality,
                with_sensitivity=config.sensitivity and quality,
                run_params=run_params,
            ))
        return reports

    done, skipped = run_samples(config, samples, work)
    per_sample = [report for _, reports in done for report in reports]
    summaries = [aggregate([r for r in per_sample if r.psi == psi]) for psi in psis]

    out_dir = Path(config.output_dir) / 'metrics'
    per_sample_csv = write_csv(out_dir / 'per_sample.csv', [r.to_row() for r in per_sample])
    aggregate_csv = write_csv(out_dir / 'aggregate.csv', [r.to_row() for r in summaries])
    write_json(out_dir / 'metrics.json', {
        'aggregate': [r.to_dict() for r in summaries],
        'per_sample': [r.to_dict() for r in per_sample],
        'skipped': skipped,
    }, config)

    log_message("\nSummary Statistics:")
    for summary in summaries:
        ratio = summary.norm_ratio_l2
        ratio_text = "n/a" if ratio is None else f"{ratio:.4f}"
        log_message(f"  psi={summary.psi}: mean alpha* {summary.alpha_star:.4f}, "
                    f"mean L2 ratio right/left {ratio_text}")
        if summary.abpc.get('left') is not None:
            log_message("    ABPC left/right/full: " + ", ".join(
                f"{summary.abpc[v]:.4f}" for v in ('left', 'right', 'full')))
        if summary.sensitivity.get('left') is not None:
            log_message("    Sensitivity left/right/full: " + ", ".join(
                f"{summary.sensitivity[v]:.4f}" for v in ('left', 'right', 'full')))
    log_message(f"Data saved to: {per_sample_csv}")
    log_message(f"Data saved to: {aggregate_csv}")
    return _finish(skipped)


def cmd_train_fixture(config, args=None):
    """Train an MLP and write its weight file (and the training data as CSV)."""
    if config.dataset:
        path = Path(config.dataset)
        if not path.is_file():
            raise ConfigError(f"dataset file not found: {path}")
        dataset = load_dataset_csv(path)
    else:
        dataset = gen_synthetic(config.seed, config.n_samples, config.n_features, config.n_classes)

    log_message(f"Training {'-'.join(str(s) for s in config.layer_sizes)} {config.activation} MLP "
                f"on {len(dataset)} samples for {config.epochs} epochs")
    spec = train_mlp(dataset, config.layer_sizes, config.activation, config.epochs,
                     config.learning_rate, config.seed)

    out_dir = Path(config.output_dir) / 'models'
    model_path = Path(args.out) if args is not None and getattr(args, 'out', None) else out_dir / 'model.txt'
    save_model(spec, model_path)
    data_path = save_dataset_csv(dataset, model_path.with_name(model_path.stem + '_data.csv'))
    write_json(model_path.with_suffix('.json'), {
        'model_file': model_path.name,
        'dataset_file': data_path.name,
        'metadata': spec.metadata,
    }, config)

    log_message(f"Training accuracy: {spec.metadata['training_accuracy']:.4f}, "
                f"final loss {spec.metadata['final_loss']:.4f}")
    log_message(f"Model saved to: {model_path}")
    return EXIT_OK


def cmd_gradcheck(config, args=None):
    """Relative error between reverse-mode and central-difference gradients per sample."""
    spec, dataset, samples, graphs, baseline = _prepare(config)

    def work(sample):
        graph = graphs[sample.target]
        return {
            'sample_index': sample.index,
            'target': sample.target,
            'output': forward(graph, sample.x),
            'max_relative_error': gradcheck(graph, sample.x, config.fd_step),
        }

    done, skipped = run_samples(config, samples, work)
    rows = [row for _, row in done]
    for row in rows:
        row['passed'] = row['max_relative_error'] <= GRADCHECK_TOLERANCE

    out_dir = Path(config.output_dir) / 'gradcheck'
    csv_path = write_csv(out_dir / 'gradcheck.csv', rows)
    failures = sum(not row['passed'] for row in rows)
    worst = max(row['max_relative_error'] for row in rows)
    write_json(out_dir / 'gradcheck.json', {
        'n_samples': len(rows),
        'max_relative_error': worst,
        'tolerance': GRADCHECK_TOLERANCE,
        'failures': failures,
        'skipped': skipped,
    }, config)

    log_message(f"Max relative gradient error: {worst:.3e} over {len(rows)} samples")
    if failures:
        log_message(f"{failures} sample(s) above tolerance {GRADCHECK_TOLERANCE:g}", "WARNING")
    log_message(f"Data saved to: {csv_path}")
    return _finish(skipped)


COMMANDS = {
    'attribute': cmd_attribute,
    'scan-path': cmd_scan_path,
    'metrics': cmd_metrics,
    'train-fixture': cmd_train_fixture,
    'gradcheck': cmd_gradcheck,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', default=None,
                        help='Config file of KEY=value lines (default: $SPLITIG_CONFIG)')
    for f in fields(RunConfig):
        common.add_argument(f"--{f.name.replace('_', '-')}", dest=f.name, default=None,
                            help=f"overrides {f.name} (default: {f.default})")

    parser = argparse.ArgumentParser(prog='splitig', description='Split Integrated Gradients toolkit')
    subparsers = parser.add_subparsers(dest='command', required=True)
    for name, command in COMMANDS.items():
        sub = subparsers.add_parser(name, parents=[common], help=command.__doc__.splitlines()[0])
        if name == 'train-fixture':
            sub.add_argument('--out', default=None, help='Weight file path (default: <output_dir>/models/model.txt)')
    return parser


def main(argv=None):
    """Parse arguments, run one subcommand and return its exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    overrides = {f.name: getattr(args, f.name) for f in fields(RunConfig)}

    try:
        config = resolve_config(args.config, overrides)
        return COMMANDS[args.command](config, args)
    except ConfigError as e:
        log_message(f"Configuration error: {e}", "ERROR")
        return EXIT_CONFIG
    except (NumericOverflowError, TrainingDivergedError) as e:
        log_message(f"Numeric failure: {e}", "ERROR")
        return EXIT_NUMERIC
    except SplitIGError as e:
        log_message(f"Input error: {e}", "ERROR")
        return EXIT_CONFIG
    except OSError as e:
        log_message(f"File error: {e}", "ERROR")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
