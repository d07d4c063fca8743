"""Training loop: mini-batch optimization of binary cross-entropy with
validation-loss early stopping, best-weight snapshots, and durable
checkpoints.

Checkpoint container: magic + length-prefixed JSON header (format
version, architecture spec, history), length-prefixed row-major float64
weight arrays in network order, and a sha256 trailer over everything
before it.
"""

from __future__ import annotations

import copy
import hashlib
import json
import struct
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .architectures import ArchitectureSpec, build_network
from .neuralcore import (
    Network,
    NumericError,
    accuracy_from_probs,
    bce_loss,
    bce_prob_grad,
    make_optimizer,
)

CHECKPOINT_MAGIC = b"STRIAGE1"
FORMAT_VERSION = 1


class CheckpointError(Exception):
    """Raised for unreadable, truncated, or mismatched checkpoint files."""


@dataclass
class TrainingConfig:
    max_epochs: int = 2000
    patience: int = 100
    batch_size: int = 32
    optimizer: str = "adam"
    learning_rate: float | None = None   # None = optimizer default
    min_delta: float = 0.0
    dropout_rate: float = 0.2
    seed: int = 0
    max_len: int = 200
    checkpoint_dir: str | None = None

    def __post_init__(self):
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float


@dataclass
class TrainingHistory:
    records: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    stopped_epoch: int = 0

    def to_dict(self) -> dict:
        return {
            "records": [asdict(r) for r in self.records],
            "best_epoch": self.best_epoch,
            "stopped_epoch": self.stopped_epoch,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TrainingHistory":
        return cls(
            records=[EpochRecord(**r) for r in data.get("records", [])],
            best_epoch=data.get("best_epoch", 0),
            stopped_epoch=data.get("stopped_epoch", 0),
        )

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("epoch,train_loss,train_acc,val_loss,val_acc\n")
            for r in self.records:
                fh.write(
                    f"{r.epoch},{r.train_loss!r},{r.train_acc!r},"
                    f"{r.val_loss!r},{r.val_acc!r}\n"
                )


class EarlyStopping:
    """Stop after `patience` epochs without validation-loss improvement.

    An improvement is a strict decrease below best - min_delta; it resets
    the stall counter and snapshots the network weights.
    """

    def __init__(self, patience: int = 100, min_delta: float = 0.0):
        self.patience = patience
        self.min_delta = min_delta
        self.best_loss = float("inf")
        self.best_epoch = 0
        self.stall = 0
        self.best_snapshot: list[np.ndarray] | None = None

    def update(self, epoch: int, val_loss: float,
               network: Network | None = None) -> bool:
        """Record one epoch; True means training should stop now."""
        if val_loss < self.best_loss - self.min_delta:
            self.best_loss = val_loss
            self.best_epoch = epoch
            self.stall = 0
            if network is not None:
                self.best_snapshot = network.snapshot()
            return False
        self.stall += 1
        return self.stall >= self.patience

    def restore(self, network: Network) -> None:
        if self.best_snapshot is None:
            raise RuntimeError("no snapshot recorded yet")
        network.restore(self.best_snapshot)


def _infer_metrics(network: Network, x: np.ndarray, y: np.ndarray,
                   batch_size: int = 256) -> tuple[float, float]:
    """Loss and accuracy with dropout off."""
    losses = []
    correct = 0
    for start in range(0, len(x), batch_size):
        xb = x[start:start + batch_size]
        yb = y[start:start + batch_size]
        probs = network.forward(xb, train=False)
        losses.append(bce_loss(probs[:, 1], yb) * len(xb))
        correct += int(((probs[:, 1] >= 0.5).astype(np.int64) == yb).sum())
    return sum(losses) / len(x), correct / len(x)


def train(network: Network,
          train_data: tuple[np.ndarray, np.ndarray],
          val_data: tuple[np.ndarray, np.ndarray],
          config: TrainingConfig) -> tuple[Network, Network, TrainingHistory]:
    """Run the training protocol and return (best, final, history).

    Validation metrics are computed in inference mode after each epoch;
    weights are snapshotted whenever validation loss strictly improves.
    Fully deterministic for a fixed config seed.
    """
    x_train, y_train = train_data
    x_val, y_val = val_data
    if len(x_train) == 0 or len(x_val) == 0:
        raise ValueError("train and validation sets must be non-empty")
    y_train = np.asarray(y_train, dtype=np.int64)
    y_val = np.asarray(y_val, dtype=np.int64)

    rng = np.random.default_rng(config.seed)
    optimizer = make_optimizer(config.optimizer, config.learning_rate)
    stopper = EarlyStopping(config.patience, config.min_delta)
    history = TrainingHistory()
    ckpt_dir = Path(config.checkpoint_dir) if config.checkpoint_dir else None
    if ckpt_dir is not None:
        ckpt_dir.mkdir(parents=True, exist_ok=True)

    n = len(x_train)
    for epoch in range(1, config.max_epochs + 1):
        perm = rng.permutation(n)
        loss_sum = 0.0
        acc_sum = 0.0
        for start in range(0, n, config.batch_size):
            idx = perm[start:start + config.batch_size]
            xb, yb = x_train[idx], y_train[idx]
            probs = network.forward(xb, train=True, rng=rng)
            loss = bce_loss(probs[:, 1], yb)
            if not np.isfinite(loss):
                raise NumericError(
                    f"non-finite training loss at epoch {epoch}; "
                    "last best checkpoint (if any) is preserved on disk"
                )
            network.backward(bce_prob_grad(probs, yb))
            optimizer.step(network.params(), network.grads())
            loss_sum += loss * len(idx)
            acc_sum += accuracy_from_probs(probs, yb) * len(idx)

        val_loss, val_acc = _infer_metrics(network, x_val, y_val)
        if not np.isfinite(val_loss):
            raise NumericError(
                f"non-finite validation loss at epoch {epoch}; "
                "last best checkpoint (if any) is preserved on disk"
            )
        history.records.append(EpochRecord(
            epoch=epoch,
            train_loss=loss_sum / n,
            train_acc=acc_sum / n,
            val_loss=val_loss,
            val_acc=val_acc,
        ))
        improved_before = stopper.best_epoch
        should_stop = stopper.update(epoch, val_loss, network)
        history.best_epoch = stopper.best_epoch
        history.stopped_epoch = epoch
        if ckpt_dir is not None and stopper.best_epoch != improved_before:
            save_checkpoint(network, ckpt_dir / "best.ckpt", history=history)
        if should_stop:
            break

    final_network = network
    best_network = copy.deepcopy(network)
    stopper.restore(best_network)
    if ckpt_dir is not None:
        # Rewrite best.ckpt so its embedded history covers the full run.
        save_checkpoint(best_network, ckpt_dir / "best.ckpt", history=history)
        save_checkpoint(final_network, ckpt_dir / "final.ckpt", history=history)
        history.write_csv(ckpt_dir / "history.csv")
    return best_network, final_network, history


def save_checkpoint(network: Network, path: str | Path,
                    history: TrainingHistory | None = None,
                    spec: ArchitectureSpec | None = None) -> None:
    """Serialize spec, history, and weights with an integrity trailer."""
    if spec is None:
        spec = getattr(network, "spec", None)
    if spec is None:
        raise ValueError("a checkpoint needs the network's ArchitectureSpec")
    header = {
        "format_version": FORMAT_VERSION,
        "spec": asdict(spec),
        "history": history.to_dict() if history is not None else None,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    params = network.params()
    blob = bytearray()
    blob += CHECKPOINT_MAGIC
    blob += struct.pack("<Q", len(header_bytes))
    blob += header_bytes
    blob += struct.pack("<I", len(params))
    for p in params:
        raw = np.ascontiguousarray(p, dtype="<f8").tobytes()
        blob += struct.pack("<Q", len(raw))
        blob += raw
    blob += hashlib.sha256(bytes(blob)).digest()
    Path(path).write_bytes(bytes(blob))


def load_checkpoint(path: str | Path) -> tuple[Network, ArchitectureSpec,
                                               TrainingHistory | None]:
    """Rebuild a network from a checkpoint; inverse of save_checkpoint."""
    raw = Path(path).read_bytes()
    if len(raw) < len(CHECKPOINT_MAGIC) + 32:
        raise CheckpointError(f"{path}: file too short to be a checkpoint")
    if not raw.startswith(CHECKPOINT_MAGIC):
        raise CheckpointError(
            f"{path}: bad magic; not a checkpoint or unsupported version"
        )
    body, digest = raw[:-32], raw[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise CheckpointError(f"{path}: checksum mismatch (truncated or corrupt)")
    offset = len(CHECKPOINT_MAGIC)

    def take(n: int) -> bytes:
        nonlocal offset
        if offset + n > len(body):
            raise CheckpointError(f"{path}: unexpected end of file")
        piece = body[offset:offset + n]
        offset += n
        return piece

    (header_len,) = struct.unpack("<Q", take(8))
    try:
        header = json.loads(take(header_len).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: unreadable header: {exc}") from exc
    if header.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(
            f"{path}: format version {header.get('format_version')} "
            f"unsupported (expected {FORMAT_VERSION})"
        )
    spec = ArchitectureSpec(**header["spec"])
    network = build_network(spec)
    params = network.params()
    (n_arrays,) = struct.unpack("<I", take(4))
    if n_arrays != len(params):
        raise CheckpointError(
            f"{path}: checkpoint has {n_arrays} arrays, architecture "
            f"expects {len(params)}"
        )
    for p in params:
        (nbytes,) = struct.unpack("<Q", take(8))
        if nbytes != p.size * 8:
            raise CheckpointError(
                f"{path}: array size mismatch ({nbytes} bytes vs "
                f"expected {p.size * 8})"
            )
        p[...] = np.frombuffer(take(nbytes), dtype="<f8").reshape(p.shape)
    if offset != len(body):
        raise CheckpointError(f"{path}: {len(body) - offset} trailing bytes")
    history = None
    if header.get("history") is not None:
        history = TrainingHistory.from_dict(header["history"])
    return network, spec, history
