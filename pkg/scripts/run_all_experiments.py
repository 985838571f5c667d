"""
Automated Experiment Pipeline

Runs the Split IG experiment steps in sequence and stops at the first
failure:
- train-fixture: train the saturating MLP and save its weight file
- attribute: LeftIG / RightIG / full IG for every sample and ψ
- scan-path: output and gradient-norm profile of one sample
- metrics: norm ratios, cosines, ABPC and sensitivity

Completed steps are saved to a JSON checkpoint; --resume skips them.
"""

import argparse
import json
import os
import sys
import traceback
from pathlib import Path

SCRIPT_DIR = Path(__file__).resolve().parent
PROJECT_ROOT = SCRIPT_DIR.parent
sys.path.insert(0, str(PROJECT_ROOT))

from splitig.cli import main as splitig_main
from splitig.logging_utils import log_message

CHECKPOINT_NAME = 'pipeline_checkpoint.json'


def load_checkpoint(path):
    """Load checkpoint data."""
    path = Path(path)
    if path.exists():
        try:
            with open(path, 'r') as f:
                return json.load(f)
        except (OSError, json.JSONDecodeError):
            log_message(f"Unreadable checkpoint {path}, starting over", "WARNING")
            return {}
    return {}


def save_checkpoint(path, data):
    """Save checkpoint data."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w') as f:
        json.dump(data, f, indent=2, sort_keys=True)


def pipeline_steps(output_dir, extra_args=()):
    """
    (name, argv) for every step.

    The trained weight file from the first step is the model for the rest.
    """
    output_dir = Path(output_dir)
    model_file = output_dir / 'models' / 'blob_mlp_6d.txt'
    common = ['--output-dir', str(output_dir), *extra_args]
    return [
        ('train-fixture', ['train-fixture', '--out', str(model_file), *common]),
        ('attribute', ['attribute', '--model', str(model_file), *common]),
        ('scan-path', ['scan-path', '--model', str(model_file), *common]),
        ('metrics', ['metrics', '--model', str(model_file), *common]),
    ]


def run_step(name, argv):
    """
    Run one CLI step in-process.

    Returns:
        Exit code of the step (1 when it raised)
    """
    log_message(f"Running {name}: {' '.join(argv)}")
    try:
        code = splitig_main(argv)
    except Exception as e:
        log_message(f"Exception running {name}: {str(e)}", "ERROR")
        log_message(traceback.format_exc(), "ERROR")
        return 1

    if code == 0:
        log_message(f"Successfully completed {name}")
    else:
        log_message(f"Error in {name}: exit code {code}", "ERROR")
    return code


def run_pipeline(output_dir, extra_args=(), resume=False, checkpoint_file=None):
    """
    Run all steps, skipping those already checkpointed when resuming.

    Returns:
        0 when every step succeeded, otherwise the failing step's exit code
    """
    checkpoint_file = Path(checkpoint_file or Path(output_dir) / CHECKPOINT_NAME)
    checkpoint = load_checkpoint(checkpoint_file) if resume else {}
    completed = list(checkpoint.get('completed', []))

    log_message("=" * 80)
    log_message("Starting Split IG Experiment Pipeline")
    log_message("=" * 80)

    steps = pipeline_steps(output_dir, extra_args)
    for number, (name, argv) in enumerate(steps, start=1):
        log_message(f"\n--- Step {number}: {name} ---")
        if name in completed:
            log_message(f"Already completed, skipping {name}")
            continue

        code = run_step(name, argv)
        if code != 0:
            save_checkpoint(checkpoint_file, {'completed': completed, 'failed': name, 'exit_code': code})
            log_message(f"Pipeline stopped at {name}. Rerun with --resume after fixing it.", "ERROR")
            return code

        completed.append(name)
        save_checkpoint(checkpoint_file, {'completed': completed})

    log_message("\n" + "=" * 80)
    log_message("Experiment Pipeline Complete")
    log_message("=" * 80)
    return 0


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description='Run the Split IG experiment pipeline')
    parser.add_argument('--output-dir', default=None,
                        help='Output directory (default: $SPLITIG_OUTPUT_DIR or data/output)')
    parser.add_argument('--config', default=None,
                        help='Config file passed to every step')
    parser.add_argument('--max-samples', type=int, default=None,
                        help='Limit the number of evaluated samples')
    parser.add_argument('--resume', action='store_true',
                        help='Skip steps recorded as completed in the checkpoint')

    args = parser.parse_args()

    output_dir = args.output_dir or os.getenv('SPLITIG_OUTPUT_DIR', 'data/output')
    extra = []
    if args.config:
        extra += ['--config', args.config]
    if args.max_samples is not None:
        extra += ['--max-samples', str(args.max_samples)]

    sys.exit(run_pipeline(output_dir, extra, resume=args.resume))
