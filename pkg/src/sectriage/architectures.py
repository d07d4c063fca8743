"""Builders for the four issue-classifier networks.

Two families:

* shallow / deep: parallel 1-, 3-, and 5-gram convolution branches, each
  globally max-pooled to one cell per filter, concatenated into a merged
  vector feeding a 2-way softmax head. The deep variant inserts a second
  convolution (after an intermediate max pool) in every branch.
* alex / alpha: a sequential five-convolution ladder (7, 5, 3, 3, 3 grams)
  with interleaved max pools, three fully connected layers with dropout,
  and the same 2-way softmax head. The alpha variant uses the published
  filter counts 32/64/128/64 for its first four convolutions.

Only the shallow configuration's parameter count (116,354) is pinned;
the other three are reported beside their reference counts because their
exact widths are under-specified.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, asdict

import numpy as np

from .neuralcore import (
    Conv,
    Dense,
    Dropout,
    Flatten,
    GlobalMaxPool,
    MaxPool,
    Network,
    Parallel,
    ReLU,
    Sequential,
    ShapeError,
    Softmax,
)

logger = logging.getLogger(__name__)

# Parameter counts reported for the original configurations. Only the
# shallow count is reproducible from the published description; the rest
# are logged for comparison, never asserted.
REFERENCE_PARAM_COUNTS = {
    "shallow": 116_354,
    "deep": 662_018,
    "alex": 6_052_866,
    "alpha": 100_946,
}

ARCHITECTURE_NAMES = ("shallow", "deep", "alex", "alpha")


@dataclass
class ArchitectureSpec:
    """Declarative description of a network; sufficient to rebuild it."""

    name: str
    input_len: int
    embedding_dim: int = 100
    kernel_plan: list[list[int]] = field(default_factory=list)  # [n_gram, filters]
    second_conv: list[int] | None = None                        # deep branches only
    fc_plan: list[int] = field(default_factory=list)
    dropout_rate: float = 0.2
    pool_window: int = 2
    seed: int = 0

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ArchitectureSpec":
        data = json.loads(text)
        return cls(**data)


def count_params(network: Network) -> int:
    """Total number of weight and bias entries across the network."""
    return int(sum(p.size for p in network.params()))


def _glorot(rng: np.random.Generator, shape: tuple[int, ...],
            fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def _init_conv(conv: Conv, rng: np.random.Generator) -> None:
    fan_in = conv.kernel_len * conv.in_width
    conv.kernels[...] = _glorot(rng, conv.kernels.shape, fan_in, conv.filters)


def _init_dense(dense: Dense, rng: np.random.Generator) -> None:
    dense.weights[...] = _glorot(rng, dense.weights.shape,
                                 dense.in_features, dense.out_features)


def _pooled_len(length: int, window: int) -> int:
    if length < window:
        raise ShapeError(f"max pool window {window} exceeds length {length}")
    return (length - window) // window + 1


def _conv_len(length: int, kernel: int) -> int:
    if kernel > length:
        raise ShapeError(f"kernel {kernel} exceeds remaining length {length}")
    return length - kernel + 1


def build_network(spec: ArchitectureSpec) -> Network:
    """Construct and initialize a network from its declarative spec."""
    if spec.name in ("shallow", "deep"):
        net = _build_branching(spec)
    elif spec.name in ("alex", "alpha"):
        net = _build_ladder(spec)
    else:
        raise ValueError(f"unknown architecture {spec.name!r}")
    net.spec = spec
    return net


def _build_branching(spec: ArchitectureSpec) -> Network:
    length, dim = spec.input_len, spec.embedding_dim
    max_kernel = max(n for n, _ in spec.kernel_plan)
    if length < max_kernel:
        raise ShapeError(
            f"input length {length} below the largest kernel {max_kernel}"
        )
    rng = np.random.default_rng(spec.seed)
    branches = []
    merged_width = 0
    for n_gram, filters in spec.kernel_plan:
        layers: list = []
        conv = Conv(n_gram, dim, filters)
        _init_conv(conv, rng)
        layers += [conv, ReLU()]
        branch_len = _conv_len(length, n_gram)
        out_filters = filters
        if spec.second_conv is not None:
            n2, f2 = spec.second_conv
            branch_len = _pooled_len(branch_len, spec.pool_window)
            conv2 = Conv(n2, filters, f2)
            _init_conv(conv2, rng)
            layers += [MaxPool(spec.pool_window), conv2, ReLU()]
            branch_len = _conv_len(branch_len, n2)
            out_filters = f2
        layers.append(GlobalMaxPool())
        branches.append(Sequential(layers))
        merged_width += out_filters
    head = Dense(merged_width, 2)
    _init_dense(head, rng)
    root = Sequential([
        Parallel(branches),
        Dropout(spec.dropout_rate),
        head,
        Softmax(),
    ])
    return Network(root)


def _build_ladder(spec: ArchitectureSpec) -> Network:
    length, dim = spec.input_len, spec.embedding_dim
    rng = np.random.default_rng(spec.seed)
    # Max pools follow the first, second, and (alex only) fifth convolution.
    pool_after = {0, 1, 4} if spec.name == "alex" else {0, 1}
    layers: list = []
    width = dim
    cur_len = length
    for i, (n_gram, filters) in enumerate(spec.kernel_plan):
        conv = Conv(n_gram, width, filters)
        _init_conv(conv, rng)
        layers += [conv, ReLU()]
        cur_len = _conv_len(cur_len, n_gram)
        if i in pool_after:
            layers.append(MaxPool(spec.pool_window))
            cur_len = _pooled_len(cur_len, spec.pool_window)
        width = filters
    layers.append(Flatten())
    features = cur_len * width
    for fc_width in spec.fc_plan:
        dense = Dense(features, fc_width)
        _init_dense(dense, rng)
        layers += [dense, ReLU(), Dropout(spec.dropout_rate)]
        features = fc_width
    head = Dense(features, 2)
    _init_dense(head, rng)
    layers += [head, Softmax()]
    return Network(Sequential(layers))


def shallow_spec(input_len: int, dim: int = 100, filters_per_kernel: int = 128,
                 dropout_rate: float = 0.2, seed: int = 0) -> ArchitectureSpec:
    return ArchitectureSpec(
        name="shallow",
        input_len=input_len,
        embedding_dim=dim,
        kernel_plan=[[1, filters_per_kernel], [3, filters_per_kernel],
                     [5, filters_per_kernel]],
        fc_plan=[],
        dropout_rate=dropout_rate,
        seed=seed,
    )


def build_shallow(input_len: int, dim: int = 100, filters_per_kernel: int = 128,
                  dropout_rate: float = 0.2, seed: int = 0) -> Network:
    """Three parallel n-gram branches (n = 1, 3, 5), merged vector, softmax."""
    return build_network(shallow_spec(input_len, dim, filters_per_kernel,
                                      dropout_rate, seed))


def deep_spec(input_len: int, dim: int = 100, filters_per_kernel: int = 128,
              second_conv_filters: int = 128, dropout_rate: float = 0.2,
              seed: int = 0) -> ArchitectureSpec:
    return ArchitectureSpec(
        name="deep",
        input_len=input_len,
        embedding_dim=dim,
        kernel_plan=[[1, filters_per_kernel], [3, filters_per_kernel],
                     [5, filters_per_kernel]],
        second_conv=[3, second_conv_filters],
        fc_plan=[],
        dropout_rate=dropout_rate,
        seed=seed,
    )


def build_deep(input_len: int, dim: int = 100, filters_per_kernel: int = 128,
               second_conv_filters: int = 128, dropout_rate: float = 0.2,
               seed: int = 0) -> Network:
    """Shallow plus an intermediate max pool and a second convolution in
    every branch before global pooling."""
    return build_network(deep_spec(input_len, dim, filters_per_kernel,
                                   second_conv_filters, dropout_rate, seed))


def alex_spec(input_len: int, dim: int = 100, dropout_rate: float = 0.2,
              seed: int = 0) -> ArchitectureSpec:
    return ArchitectureSpec(
        name="alex",
        input_len=input_len,
        embedding_dim=dim,
        kernel_plan=[[7, 96], [5, 256], [3, 384], [3, 384], [3, 256]],
        fc_plan=[1024, 512],
        dropout_rate=dropout_rate,
        seed=seed,
    )


def build_alex(input_len: int, dim: int = 100, dropout_rate: float = 0.2,
               seed: int = 0) -> Network:
    """Five-convolution ladder with classic proportions, three dense stages."""
    if input_len < 63:
        raise ShapeError(
            f"alex variant needs input length >= 63 to survive its five "
            f"convolution/pool stages, got {input_len}"
        )
    return build_network(alex_spec(input_len, dim, dropout_rate, seed))


def alpha_spec(input_len: int, dim: int = 100, conv5_filters: int = 64,
               fc_widths: tuple[int, int, int] = (128, 64, 32),
               dropout_rate: float = 0.2, seed: int = 0) -> ArchitectureSpec:
    return ArchitectureSpec(
        name="alpha",
        input_len=input_len,
        embedding_dim=dim,
        kernel_plan=[[7, 32], [5, 64], [3, 128], [3, 64], [3, conv5_filters]],
        fc_plan=list(fc_widths),
        dropout_rate=dropout_rate,
        seed=seed,
    )


def build_alpha(input_len: int, dim: int = 100, conv5_filters: int = 64,
                fc_widths: tuple[int, int, int] = (128, 64, 32),
                dropout_rate: float = 0.2, seed: int = 0) -> Network:
    """n-gram ladder: 7-gram/32, 5-gram/64, 3-gram/128, 3-gram/64, 3-gram,
    then three dense layers with dropout."""
    return build_network(alpha_spec(input_len, dim, conv5_filters, fc_widths,
                                    dropout_rate, seed))


def build_by_name(name: str, input_len: int, dim: int = 100,
                  dropout_rate: float = 0.2, seed: int = 0,
                  **overrides) -> Network:
    builders = {
        "shallow": build_shallow,
        "deep": build_deep,
        "alex": build_alex,
        "alpha": build_alpha,
    }
    if name not in builders:
        raise ValueError(
            f"unknown architecture {name!r}; expected one of {ARCHITECTURE_NAMES}"
        )
    return builders[name](input_len, dim=dim, dropout_rate=dropout_rate,
                          seed=seed, **overrides)


def log_param_count(network: Network) -> int:
    """Log the built parameter count beside the reference figure."""
    spec: ArchitectureSpec = network.spec
    count = count_params(network)
    reference = REFERENCE_PARAM_COUNTS.get(spec.name)
    logger.info(
        "arch=%s params=%d reference_params=%s config=%s",
        spec.name, count, reference, spec.to_json(),
    )
    return count
