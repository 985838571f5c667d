"""
Model Zoo

Oracle models with closed forms (linear, logistic saturator), a small
full-batch-trained MLP classifier whose class logits saturate along the
integration path, a Gaussian-blob dataset generator, and weight/dataset
persistence.

Every ModelSpec lowers to a ComputeGraph; the logit of one class (selected
by index) is the scalar F used for attribution.
"""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from splitig.autodiff import GraphBuilder, as_feature_vector, evaluate_batch
from splitig.errors import (
    InvalidSpecError,
    ModelFileParseError,
    ModelFileVersionError,
    PreconditionError,
    TrainingDivergedError,
)

KINDS = ('linear', 'logistic-saturator', 'mlp-classifier')
ANALYTIC_KINDS = ('linear', 'logistic-saturator')
ACTIVATIONS = ('relu', 'tanh')

MODEL_FILE_MAGIC = '# splitig model file'
MODEL_FILE_VERSION = 1

# Blob geometry for gen_synthetic
BLOB_RADIUS = 5.0
BLOB_SPREAD = 1.0


@dataclass(eq=False)
class ModelSpec:
    """
    Description of a model that lowers to a ComputeGraph.

    Args:
        kind: One of KINDS
        parameters: Named float arrays (w, b, scale for analytic kinds;
            W0, b0, W1, b1, ... for the MLP)
        layer_sizes: Layer widths, input first (MLP only)
        activation: Hidden activation (MLP only)
        target_index: Logit used as the scalar output F
        metadata: Seed, training accuracy and other provenance
    """
    kind: str
    parameters: dict
    layer_sizes: tuple = ()
    activation: str = 'tanh'
    target_index: int = 0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidSpecError(f"unknown model kind '{self.kind}'")
        if self.activation not in ACTIVATIONS:
            raise InvalidSpecError(f"unknown activation '{self.activation}'")
        self.parameters = {name: np.array(value, dtype=np.float64) for name, value in self.parameters.items()}
        self.layer_sizes = tuple(int(s) for s in self.layer_sizes)
        self.target_index = int(self.target_index)

        if self.kind in ANALYTIC_KINDS:
            self._validate_analytic()
        else:
            self._validate_mlp()

        if not 0 <= self.target_index < self.output_size:
            raise InvalidSpecError(
                f"target index {self.target_index} outside output dimension {self.output_size}"
            )

    def _validate_analytic(self):
        w = self.parameters.get('w')
        b = self.parameters.get('b')
        if w is None or w.ndim != 1 or w.size == 0:
            raise InvalidSpecError("analytic model needs a non-empty weight vector 'w'")
        if b is None or b.shape != (1,):
            raise InvalidSpecError("analytic model needs a scalar bias 'b'")
        if self.kind == 'logistic-saturator':
            scale = self.parameters.get('scale')
            if scale is None or scale.shape != (1,):
                raise InvalidSpecError("logistic saturator needs a scalar 'scale'")

    def _validate_mlp(self):
        sizes = self.layer_sizes
        if len(sizes) < 2 or any(s < 1 for s in sizes):
            raise InvalidSpecError(f"invalid layer sizes {sizes}")
        for k in range(len(sizes) - 1):
            W = self.parameters.get(f'W{k}')
            b = self.parameters.get(f'b{k}')
            if W is None or W.shape != (sizes[k + 1], sizes[k]):
                raise InvalidSpecError(
                    f"W{k} should have shape {(sizes[k + 1], sizes[k])}, got {None if W is None else W.shape}"
                )
            if b is None or b.shape != (sizes[k + 1],):
                raise InvalidSpecError(f"b{k} should have shape {(sizes[k + 1],)}")

    @property
    def input_size(self):
        if self.kind in ANALYTIC_KINDS:
            return self.parameters['w'].size
        return self.layer_sizes[0]

    @property
    def output_size(self):
        if self.kind in ANALYTIC_KINDS:
            return 1
        return self.layer_sizes[-1]


@dataclass(eq=False)
class Dataset:
    """
    Labelled feature vectors sharing one shape.

    Args:
        inputs: (n_samples, n_features) array
        labels: Class index per sample
        seed: Generator seed, None for imported data
        n_classes: Number of classes (defaults to max label + 1)
    """
    inputs: np.ndarray
    labels: np.ndarray
    seed: int = None
    n_classes: int = None

    def __post_init__(self):
        self.inputs = np.array(self.inputs, dtype=np.float64)
        self.labels = np.array(self.labels, dtype=np.int64).reshape(-1)
        if self.inputs.ndim != 2:
            raise InvalidSpecError("dataset inputs must be a 2-D array (samples x features)")
        if self.labels.size != self.inputs.shape[0]:
            raise InvalidSpecError("dataset needs exactly one label per input")
        if self.n_classes is None:
            self.n_classes = int(self.labels.max()) + 1 if self.labels.size else 0
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
            raise InvalidSpecError(f"labels must lie in [0, {self.n_classes})")

    def __len__(self):
        return self.inputs.shape[0]

    @property
    def n_features(self):
        return self.inputs.shape[1]

    def feature_vector(self, index):
        return as_feature_vector(self.inputs[index])


def make_analytic(kind, w, bias=0.0, scale=1.0):
    """
    Build an analytic oracle model.

    Args:
        kind: 'linear' (F = w.x + bias) or 'logistic-saturator'
            (F = sigmoid(scale * (w.x + bias)))
        w: Weight vector
        bias: Scalar bias
        scale: Positive gain for the logistic saturator

    Returns:
        ModelSpec
    """
    if kind not in ANALYTIC_KINDS:
        raise InvalidSpecError(f"'{kind}' is not an analytic model kind")
    w = np.asarray(w, dtype=np.float64).reshape(-1)
    if w.size == 0:
        raise InvalidSpecError("weight vector must not be empty")

    parameters = {'w': w, 'b': np.array([float(bias)])}
    if kind == 'logistic-saturator':
        if not scale > 0:
            raise PreconditionError(f"logistic saturator scale must be positive, got {scale}")
        parameters['scale'] = np.array([float(scale)])
    return ModelSpec(kind=kind, parameters=parameters)


def _build_logits(spec):
    builder = GraphBuilder(spec.input_size)
    if spec.kind == 'linear':
        builder.affine(spec.parameters['w'][None, :], spec.parameters['b'])
    elif spec.kind == 'logistic-saturator':
        scale = spec.parameters['scale'][0]
        builder.affine(scale * spec.parameters['w'][None, :], scale * spec.parameters['b'])
        builder.add('sigmoid')
    else:
        n_layers = len(spec.layer_sizes) - 1
        for k in range(n_layers):
            builder.affine(spec.parameters[f'W{k}'], spec.parameters[f'b{k}'])
            if k < n_layers - 1:
                builder.add(spec.activation)
    return builder


def logit_graph(spec):
    """ComputeGraph whose output is the full logit vector."""
    return _build_logits(spec).build()


def to_graph(spec, target_index=None):
    """
    Lower a ModelSpec to a scalar-output ComputeGraph.

    Args:
        spec: ModelSpec
        target_index: Logit to select; defaults to spec.target_index
    """
    index = spec.target_index if target_index is None else int(target_index)
    if not 0 <= index < spec.output_size:
        raise InvalidSpecError(f"target index {index} outside output dimension {spec.output_size}")
    builder = _build_logits(spec)
    builder.add('select', index=index)
    return builder.build()


def predict(spec, inputs):
    """Predicted class (argmax logit) for each row of inputs."""
    logits = evaluate_batch(logit_graph(spec), np.atleast_2d(inputs))
    return np.argmax(logits, axis=1)


def accuracy(spec, dataset):
    """Fraction of dataset samples whose predicted class equals the label."""
    if len(dataset) == 0:
        return float('nan')
    return float(np.mean(predict(spec, dataset.inputs) == dataset.labels))


def gen_synthetic(seed, n_samples, n_features, n_classes):
    """
    Gaussian class blobs.

    Class c is centred at BLOB_RADIUS * (cos 2πc/K, sin 2πc/K) in the first
    two features (evenly spaced on a line when there is only one feature);
    every other feature is zero-mean noise. Labels are assigned round-robin.

    Returns:
        Dataset
    """
    if n_samples < 1 or n_features < 1:
        raise PreconditionError("sample and feature counts must be positive")
    if n_classes < 2:
        raise PreconditionError(f"need at least 2 classes, got {n_classes}")

    rng = np.random.default_rng(seed)
    means = np.zeros((n_classes, n_features))
    if n_features == 1:
        means[:, 0] = BLOB_RADIUS * np.linspace(-1.0, 1.0, n_classes)
    else:
        angles = 2.0 * np.pi * np.arange(n_classes) / n_classes
        means[:, 0] = BLOB_RADIUS * np.cos(angles)
        means[:, 1] = BLOB_RADIUS * np.sin(angles)

    labels = np.arange(n_samples) % n_classes
    inputs = means[labels] + rng.normal(0.0, BLOB_SPREAD, size=(n_samples, n_features))
    return Dataset(inputs=inputs, labels=labels, seed=seed, n_classes=n_classes)


def _activate(z, activation):
    if activation == 'tanh':
        return np.tanh(z)
    return np.maximum(z, 0.0)


def _activation_slope(z, h, activation):
    if activation == 'tanh':
        return 1.0 - h * h
    return (z > 0.0).astype(np.float64)


def train_mlp(dataset, layer_sizes, activation='tanh', epochs=500, learning_rate=0.1, seed=0):
    """
    Train an MLP classifier with full-batch gradient descent.

    Minimises mean softmax cross-entropy of the logits. Weights start from a
    seeded normal draw scaled by 1/sqrt(fan_in), biases at zero; there is no
    shuffling, so the result depends only on the arguments.

    Args:
        dataset: Training Dataset
        layer_sizes: Widths including input and output layers
        activation: 'tanh' or 'relu'
        epochs: Number of full-batch steps (>= 1)
        learning_rate: Step size
        seed: Initialisation seed

    Returns:
        ModelSpec of kind 'mlp-classifier' with training accuracy in metadata
    """
    if len(dataset) == 0:
        raise PreconditionError("cannot train on an empty dataset")
    if epochs < 1:
        raise PreconditionError(f"epochs must be at least 1, got {epochs}")
    if not learning_rate > 0:
        raise PreconditionError(f"learning rate must be positive, got {learning_rate}")
    if activation not in ACTIVATIONS:
        raise InvalidSpecError(f"unknown activation '{activation}'")

    sizes = tuple(int(s) for s in layer_sizes)
    if len(sizes) < 2 or any(s < 1 for s in sizes):
        raise InvalidSpecError(f"invalid layer sizes {sizes}")
    if sizes[0] != dataset.n_features:
        raise InvalidSpecError(f"input layer width {sizes[0]} != dataset features {dataset.n_features}")
    if sizes[-1] < dataset.n_classes:
        raise InvalidSpecError(f"output layer width {sizes[-1]} < number of classes {dataset.n_classes}")

    rng = np.random.default_rng(seed)
    weights = []
    biases = []
    for k in range(len(sizes) - 1):
        weights.append(rng.normal(0.0, 1.0 / np.sqrt(sizes[k]), size=(sizes[k + 1], sizes[k])))
        biases.append(np.zeros(sizes[k + 1]))

    X = dataset.inputs
    n = X.shape[0]
    targets = np.zeros((n, sizes[-1]))
    targets[np.arange(n), dataset.labels] = 1.0

    loss = float('nan')
    for epoch in range(1, epochs + 1):
        pre_activations = []
        activations = [X]
        with np.errstate(all='ignore'):
            for k in range(len(weights)):
                z = activations[-1] @ weights[k].T + biases[k]
                pre_activations.append(z)
                activations.append(z if k == len(weights) - 1 else _activate(z, activation))

            logits = activations[-1]
            shifted = logits - np.max(logits, axis=1, keepdims=True)
            log_norm = np.log(np.sum(np.exp(shifted), axis=1))
            loss = float(np.mean(log_norm - shifted[np.arange(n), dataset.labels]))
        if not np.isfinite(loss):
            raise TrainingDivergedError(f"loss became non-finite at epoch {epoch}")

        probabilities = np.exp(shifted - log_norm[:, None])
        delta = (probabilities - targets) / n
        for k in range(len(weights) - 1, -1, -1):
            grad_W = delta.T @ activations[k]
            grad_b = delta.sum(axis=0)
            if k > 0:
                delta = (delta @ weights[k]) * _activation_slope(pre_activations[k - 1], activations[k], activation)
            weights[k] = weights[k] - learning_rate * grad_W
            biases[k] = biases[k] - learning_rate * grad_b

    parameters = {}
    for k in range(len(weights)):
        parameters[f'W{k}'] = weights[k]
        parameters[f'b{k}'] = biases[k]

    spec = ModelSpec(
        kind='mlp-classifier',
        parameters=parameters,
        layer_sizes=sizes,
        activation=activation,
        target_index=0,
        metadata={
            'seed': int(seed),
            'epochs': int(epochs),
            'learning_rate': float(learning_rate),
            'final_loss': loss,
        },
    )
    spec.metadata['training_accuracy'] = accuracy(spec, dataset)
    return spec


def _format_value(value):
    if value is None:
        return 'none'
    if isinstance(value, (bool, np.bool_)):
        return 'true' if value else 'false'
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), '.17g')
    return str(value)


def _parse_value(text):
    lowered = text.lower()
    if lowered == 'none':
        return None
    if lowered in ('true', 'false'):
        return lowered == 'true'
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def save_model(spec, path):
    """
    Write a ModelSpec as a self-describing text weight file.

    Layout: magic line, 'key: value' header lines, then one
    'param NAME d1,d2' block per array with one 17-significant-digit float
    per line, closed by 'end'.
    """
    lines = [
        MODEL_FILE_MAGIC,
        f"format_version: {MODEL_FILE_VERSION}",
        f"kind: {spec.kind}",
        f"activation: {spec.activation}",
        f"layer_sizes: {','.join(str(s) for s in spec.layer_sizes)}",
        f"target_index: {spec.target_index}",
    ]
    for key in sorted(spec.metadata):
        lines.append(f"{key}: {_format_value(spec.metadata[key])}")

    for name in sorted(spec.parameters):
        array = spec.parameters[name]
        lines.append(f"param {name} {','.join(str(s) for s in array.shape)}")
        lines.extend(format(float(v), '.17g') for v in array.reshape(-1))
    lines.append('end')

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text('\n'.join(lines) + '\n')
    return path


def load_model(path):
    """
    Read a weight file written by save_model.

    Raises:
        ModelFileParseError: malformed or truncated file (with line/field context)
        ModelFileVersionError: unknown format version or model kind
    """
    path = Path(path)
    try:
        lines = path.read_text(encoding='utf-8').splitlines()
    except UnicodeDecodeError:
        raise ModelFileParseError("not a text file", line=1) from None
    if not lines or lines[0].strip() != MODEL_FILE_MAGIC:
        raise ModelFileParseError("not a splitig model file", line=1)

    header = {}
    parameters = {}
    position = 1
    finished = False

    while position < len(lines):
        line_number = position + 1
        line = lines[position].strip()
        position += 1
        if not line:
            continue
        if line == 'end':
            finished = True
            break

        if line.startswith('param '):
            parts = line.split()
            if len(parts) != 3:
                raise ModelFileParseError("expected 'param NAME SHAPE'", line=line_number)
            name = parts[1]
            try:
                shape = tuple(int(s) for s in parts[2].split(','))
            except ValueError:
                raise ModelFileParseError("bad parameter shape", line=line_number, field=name) from None
            count = int(np.prod(shape))
            if position + count > len(lines):
                raise ModelFileParseError("file ends inside parameter block", line=len(lines), field=name)
            values = []
            for offset in range(count):
                text = lines[position + offset].strip()
                try:
                    values.append(float(text))
                except ValueError:
                    raise ModelFileParseError(
                        f"bad number '{text}'", line=position + offset + 1, field=name
                    ) from None
            position += count
            parameters[name] = np.array(values, dtype=np.float64).reshape(shape)
            continue

        if ':' not in line:
            raise ModelFileParseError(f"unexpected line '{line}'", line=line_number)
        key, value = line.split(':', 1)
        header[key.strip()] = value.strip()

    if not finished:
        raise ModelFileParseError("file is truncated (missing 'end')", line=len(lines))

    version = header.get('format_version')
    if version is None:
        raise ModelFileParseError("missing header", field='format_version')
    if version != str(MODEL_FILE_VERSION):
        raise ModelFileVersionError(f"unsupported model file version {version}")
    kind = header.get('kind')
    if kind is None:
        raise ModelFileParseError("missing header", field='kind')
    if kind not in KINDS:
        raise ModelFileVersionError(f"unknown model kind '{kind}'")

    reserved = ('format_version', 'kind', 'activation', 'layer_sizes', 'target_index')
    metadata = {key: _parse_value(value) for key, value in header.items() if key not in reserved}
    try:
        layer_text = header.get('layer_sizes', '')
        layer_sizes = tuple(int(s) for s in layer_text.split(',')) if layer_text else ()
        return ModelSpec(
            kind=kind,
            parameters=parameters,
            layer_sizes=layer_sizes,
            activation=header.get('activation', 'tanh'),
            target_index=int(header.get('target_index', 0)),
            metadata=metadata,
        )
    except (ValueError, InvalidSpecError) as e:
        raise ModelFileParseError(f"inconsistent model description: {e}", field='parameters') from None


def save_dataset_csv(dataset, path):
    """Export a dataset as CSV: feature columns f0..f{d-1}, then label."""
    columns = [f'f{i}' for i in range(dataset.n_features)]
    df = pd.DataFrame(dataset.inputs, columns=columns)
    df['label'] = dataset.labels
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False, float_format='%.17g')
    return path


def load_dataset_csv(path):
    """Import a dataset CSV written by save_dataset_csv (label column last)."""
    try:
        df = pd.read_csv(path, float_precision='round_trip')
    except (UnicodeDecodeError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise InvalidSpecError(f"{path}: unreadable CSV ({e})") from None
    if df.shape[1] < 2 or df.columns[-1] != 'label':
        raise InvalidSpecError(f"{path}: expected feature columns followed by a 'label' column")
    try:
        inputs = df.iloc[:, :-1].to_numpy(dtype=np.float64)
        labels = df['label'].to_numpy(dtype=np.int64)
    except (ValueError, TypeError) as e:
        raise InvalidSpecError(f"{path}: non-numeric value ({e})") from None
    return Dataset(inputs=inputs, labels=labels, seed=None)
