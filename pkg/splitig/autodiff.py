"""
Reverse-Mode Differentiation Kernel

Exact input gradients of a scalar model output. A ComputeGraph is an ordered
list of primitive nodes over a flat float64 input vector: slot 0 holds the
input and node k writes slot k + 1, reading only earlier slots.

Primitives: affine, relu, tanh, sigmoid, softmax, select (one component of a
vector) and sum (weighted sum of earlier slots of equal width).

Evaluation works on a batch of rows (one row per input point) so the path
integrator can push a whole quadrature grid through the graph in one call.
Rows never interact; a graph is immutable and all scratch buffers are local
to a call, so graphs can be shared between threads.
"""

from dataclasses import dataclass, field
from math import prod

import numpy as np

from splitig.errors import (
    InputShapeError,
    InvalidSpecError,
    NumericOverflowError,
    PreconditionError,
)

OPS = ('affine', 'relu', 'tanh', 'sigmoid', 'softmax', 'select', 'sum')


@dataclass(frozen=True, eq=False)
class FeatureVector:
    """
    Flat real-valued feature array with shape metadata.

    Args:
        values: Feature values (any array-like; stored flat as float64)
        shape: Logical shape; defaults to the flat length
    """
    values: np.ndarray
    shape: tuple = None

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64).reshape(-1)
        shape = (values.size,) if self.shape is None else tuple(int(s) for s in self.shape)

        if not shape or any(s <= 0 for s in shape):
            raise InputShapeError(f"shape must be a list of positive integers, got {shape}")
        if prod(shape) != values.size:
            raise InputShapeError(
                f"shape {shape} holds {prod(shape)} elements but {values.size} values were given"
            )
        if not np.all(np.isfinite(values)):
            raise NumericOverflowError("feature vector contains NaN or infinite entries")

        values.setflags(write=False)
        object.__setattr__(self, 'values', values)
        object.__setattr__(self, 'shape', shape)

    @classmethod
    def from_array(cls, array):
        """Build a FeatureVector keeping the array's own shape."""
        array = np.asarray(array, dtype=np.float64)
        return cls(array.reshape(-1), array.shape if array.ndim > 0 else (1,))

    @property
    def size(self):
        return self.values.size

    def as_array(self):
        """Values reshaped to the logical shape."""
        return self.values.reshape(self.shape)

    def __len__(self):
        return self.values.size

    def __repr__(self):
        return f"FeatureVector(shape={self.shape}, values={np.array2string(self.values, precision=6)})"


def as_feature_vector(x):
    """Coerce an array-like or FeatureVector to a FeatureVector."""
    if isinstance(x, FeatureVector):
        return x
    return FeatureVector.from_array(x)


def _readonly(array):
    array = np.array(array, dtype=np.float64)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Node:
    """One primitive operation reading earlier slots."""
    op: str
    inputs: tuple
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.op not in OPS:
            raise InvalidSpecError(f"unknown node operation '{self.op}'")
        object.__setattr__(self, 'inputs', tuple(int(i) for i in self.inputs))
        params = {}
        for name, value in self.params.items():
            params[name] = int(value) if name == 'index' else _readonly(value)
        object.__setattr__(self, 'params', params)


@dataclass(frozen=True, eq=False)
class ComputeGraph:
    """
    Topologically ordered graph with one designated output slot.

    Args:
        input_size: Number of input features
        nodes: Tuple of Node; node k writes slot k + 1
        output: Output slot (defaults to the last node)
    """
    input_size: int
    nodes: tuple
    output: int = None

    def __post_init__(self):
        nodes = tuple(self.nodes)
        output = len(nodes) if self.output is None else int(self.output)
        object.__setattr__(self, 'nodes', nodes)
        object.__setattr__(self, 'output', output)

        if self.input_size < 1:
            raise InvalidSpecError("graph input size must be positive")
        if not 0 <= output <= len(nodes):
            raise InvalidSpecError(f"output slot {output} does not exist")

        sizes = [int(self.input_size)]
        for k, node in enumerate(nodes):
            slot = k + 1
            if not node.inputs or any(not 0 <= i < slot for i in node.inputs):
                raise InvalidSpecError(f"node {k} ({node.op}) must read earlier slots only")
            sizes.append(_output_size(node, [sizes[i] for i in node.inputs], k))
        object.__setattr__(self, 'slot_sizes', tuple(sizes))

    @property
    def output_size(self):
        return self.slot_sizes[self.output]


def _output_size(node, in_sizes, k):
    """Width of a node's output; validates parameter shapes."""
    if node.op == 'sum':
        coefficients = node.params.get('coefficients')
        if coefficients is None or coefficients.shape != (len(node.inputs),):
            raise InvalidSpecError(f"sum node {k} needs one coefficient per input")
        if len(set(in_sizes)) != 1:
            raise InvalidSpecError(f"sum node {k} inputs differ in width: {in_sizes}")
        return in_sizes[0]

    if len(node.inputs) != 1:
        raise InvalidSpecError(f"{node.op} node {k} takes exactly one input")
    width = in_sizes[0]

    if node.op == 'affine':
        W = node.params.get('W')
        b = node.params.get('b')
        if W is None or b is None or W.ndim != 2 or W.shape[1] != width or b.shape != (W.shape[0],):
            raise InvalidSpecError(f"affine node {k} parameters do not fit input width {width}")
        return W.shape[0]
    if node.op == 'select':
        index = node.params.get('index')
        if index is None or not 0 <= index < width:
            raise InvalidSpecError(f"select node {k} index out of range for width {width}")
        return 1
    return width


class GraphBuilder:
    """
    Incremental graph construction.

    Each add() returns the slot written by the new node; the input defaults
    to the most recently written slot.
    """

    def __init__(self, input_size):
        self.input_size = int(input_size)
        self.nodes = []

    @property
    def last(self):
        return len(self.nodes)

    def add(self, op, inputs=None, **params):
        if inputs is None:
            inputs = (self.last,)
        self.nodes.append(Node(op, tuple(inputs), params))
        return self.last

    def affine(self, W, b, source=None):
        return self.add('affine', None if source is None else (source,), W=W, b=b)

    def build(self, output=None):
        return ComputeGraph(self.input_size, tuple(self.nodes), output)


def _stable_sigmoid(z):
    e = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def stable_softmax(z):
    """Row-wise softmax with max-subtraction."""
    z = np.atleast_2d(z)
    e = np.exp(z - np.max(z, axis=1, keepdims=True))
    return e / np.sum(e, axis=1, keepdims=True)


def _as_batch(graph, X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != graph.input_size:
        raise InputShapeError(
            f"graph expects {graph.input_size} input features, got array of shape {X.shape}"
        )
    return X


def _forward_slots(graph, X):
    """Evaluate every slot for a batch of rows."""
    slots = [X]
    with np.errstate(all='ignore'):
        for k, node in enumerate(graph.nodes):
            a = slots[node.inputs[0]]
            if node.op == 'affine':
                out = a @ node.params['W'].T + node.params['b']
            elif node.op == 'relu':
                out = np.maximum(a, 0.0)
            elif node.op == 'tanh':
                out = np.tanh(a)
            elif node.op == 'sigmoid':
                out = _stable_sigmoid(a)
            elif node.op == 'softmax':
                out = stable_softmax(a)
            elif node.op == 'select':
                index = node.params['index']
                out = a[:, index:index + 1]
            else:
                coefficients = node.params['coefficients']
                out = coefficients[0] * slots[node.inputs[0]]
                for c, i in zip(coefficients[1:], node.inputs[1:]):
                    out = out + c * slots[i]

            if not np.all(np.isfinite(out)):
                raise NumericOverflowError(f"non-finite value produced by node {k} ({node.op})")
            slots.append(out)
    return slots


def _backward(graph, slots, upstream):
    """Accumulate adjoints from the output slot back to the input."""
    adjoints = [None] * len(slots)
    adjoints[graph.output] = upstream

    with np.errstate(all='ignore'):
        for k in range(graph.output - 1, -1, -1):
            g = adjoints[k + 1]
            if g is None:
                continue
            node = graph.nodes[k]
            y = slots[k + 1]
            a = slots[node.inputs[0]]

            if node.op == 'affine':
                contributions = [g @ node.params['W']]
            elif node.op == 'relu':
                # subgradient 0 at exactly 0
                contributions = [g * (a > 0.0)]
            elif node.op == 'tanh':
                contributions = [g * (1.0 - y * y)]
            elif node.op == 'sigmoid':
                contributions = [g * y * (1.0 - y)]
            elif node.op == 'softmax':
                contributions = [(g - np.sum(g * y, axis=1, keepdims=True)) * y]
            elif node.op == 'select':
                grad = np.zeros_like(a)
                grad[:, node.params['index']] = g[:, 0]
                contributions = [grad]
            else:
                contributions = [c * g for c in node.params['coefficients']]

            for i, contribution in zip(node.inputs, contributions):
                adjoints[i] = contribution if adjoints[i] is None else adjoints[i] + contribution

            if not np.all(np.isfinite(contributions[0])):
                raise NumericOverflowError(f"non-finite gradient at node {k} ({node.op})")

    if adjoints[0] is None:
        return np.zeros_like(slots[0])
    return adjoints[0]


def evaluate(graph, x):
    """
    Value of the output slot at a single input.

    Returns:
        1-D array (length output_size); vector outputs are allowed here
    """
    x = as_feature_vector(x)
    return _forward_slots(graph, _as_batch(graph, x.values))[graph.output][0].copy()


def evaluate_batch(graph, X):
    """Output slot for each row of X; returns an (m, output_size) array."""
    return _forward_slots(graph, _as_batch(graph, X))[graph.output].copy()


def _require_scalar(graph):
    if graph.output_size != 1:
        raise InputShapeError(
            f"graph output has {graph.output_size} components; select one to get a scalar"
        )


def forward(graph, x):
    """F(x) for a scalar-output graph."""
    _require_scalar(graph)
    x = as_feature_vector(x)
    return float(_forward_slots(graph, _as_batch(graph, x.values))[graph.output][0, 0])


def gradient(graph, x):
    """
    Exact gradient of a scalar-output graph by reverse-mode accumulation.

    Returns:
        FeatureVector with the same shape as x
    """
    _require_scalar(graph)
    x = as_feature_vector(x)
    _, grads = value_and_gradient_batch(graph, x.values[None, :])
    return FeatureVector(grads[0], x.shape)


def forward_batch(graph, X):
    """F for each row of X; returns a 1-D array."""
    _require_scalar(graph)
    return _forward_slots(graph, _as_batch(graph, X))[graph.output][:, 0].copy()


def value_and_gradient_batch(graph, X):
    """
    F and its input gradient for each row of X.

    Returns:
        Tuple (values of shape (m,), gradients of shape (m, n))
    """
    _require_scalar(graph)
    X = _as_batch(graph, X)
    slots = _forward_slots(graph, X)
    values = slots[graph.output][:, 0].copy()
    grads = _backward(graph, slots, np.ones((X.shape[0], 1)))
    return values, grads


def gradcheck(graph, x, fd_step=1e-5):
    """
    Compare reverse-mode gradients against central finite differences.

    Args:
        graph: Scalar-output ComputeGraph
        x: Input point
        fd_step: Finite-difference step (> 0)

    Returns:
        Maximum over features of |analytic - numeric| / max(|analytic|, |numeric|, 1e-12)
    """
    if not fd_step > 0:
        raise PreconditionError(f"fd_step must be positive, got {fd_step}")
    x = as_feature_vector(x)
    analytic = gradient(graph, x).values

    n = x.size
    offsets = np.eye(n) * fd_step
    plus = forward_batch(graph, x.values + offsets)
    minus = forward_batch(graph, x.values - offsets)
    numeric = (plus - minus) / (2.0 * fd_step)

    denominator = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-12)
    return float(np.max(np.abs(analytic - numeric) / denominator))


def with_head(graph, index=None, softmax=False):
    """
    Extend a graph's output with a softmax and/or a component select.

    Args:
        graph: Graph whose output is a vector of logits
        index: Component to select (None keeps the vector)
        softmax: Apply softmax before selecting
    """
    builder = GraphBuilder(graph.input_size)
    builder.nodes = list(graph.nodes)
    source = graph.output
    if softmax:
        source = builder.add('softmax', (source,))
    if index is not None:
        source = builder.add('select', (source,), index=index)
    return builder.build(source)


def linear_combination(graphs, coefficients):
    """
    Graph computing sum_k c_k * G_k(x) through a single summation node.

    All graphs must share input size and output width.
    """
    graphs = list(graphs)
    coefficients = np.asarray(coefficients, dtype=np.float64).reshape(-1)
    if not graphs or len(graphs) != coefficients.size:
        raise InvalidSpecError("need one coefficient per graph")
    input_size = graphs[0].input_size
    if any(g.input_size != input_size for g in graphs):
        raise InvalidSpecError("combined graphs must share the input size")

    nodes = []
    outputs = []
    for g in graphs:
        offset = len(nodes)

        def remap(slot, offset=offset):
            return 0 if slot == 0 else slot + offset

        for node in g.nodes:
            nodes.append(Node(node.op, tuple(remap(i) for i in node.inputs), dict(node.params)))
        outputs.append(remap(g.output))

    nodes.append(Node('sum', tuple(outputs), {'coefficients': coefficients}))
    return ComputeGraph(input_size, tuple(nodes))


def scaled(graph, factor):
    """Graph computing factor * G(x)."""
    return linear_combination([graph], [factor])
