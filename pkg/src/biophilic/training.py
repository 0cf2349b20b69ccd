"""Optimizers, the train/validation epoch loop, and hyperparameter search.

The loop follows the study protocol: shuffled batches of 12, validation
weighted F1 at threshold 0.5 after every epoch, 50 epochs, and the model
with the best validation score is kept (earliest epoch wins ties). The
search space is {Adam, SGD} x {0.001 ... 0.01}; trials are sampled
uniformly without replacement and scored by their best validation F1.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import decoder as dec
from .data import Dataset, LabelTaxonomy
from .errors import TrainingError, ValidationError
from .metrics import classification_report
from .rng import derive_seed, seeded_stream
from .tagging import binarize

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

# Search grid used in the study: two optimizers, ten learning rates.
DEFAULT_OPTIMIZERS = ("adam", "sgd")
DEFAULT_LEARNING_RATES = tuple(round(0.001 * k, 3) for k in range(1, 11))


@dataclass(frozen=True)
class TrainConfig:
    optimizer: str = "adam"
    learning_rate: float = 0.001
    batch_size: int = 12
    epochs: int = 50
    seed: int = 0
    eval_threshold: float = 0.5
    dropout: float = dec.DROPOUT_P

    def __post_init__(self):
        if self.optimizer not in ("adam", "sgd"):
            raise ValidationError(f"unknown optimizer {self.optimizer!r}")
        if self.learning_rate <= 0:
            raise ValidationError("learning_rate must be positive")
        if self.batch_size < 2:
            raise ValidationError("batch_size must be at least 2")
        if self.epochs < 1:
            raise ValidationError("epochs must be at least 1")

    def to_dict(self) -> dict:
        return {
            "optimizer": self.optimizer,
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "seed": self.seed,
            "eval_threshold": self.eval_threshold,
            "dropout": self.dropout,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    eps: float = ADAM_EPS


def init_adam_state(params: dec.DecoderParams) -> AdamState:
    zeros = lambda a: np.zeros_like(a)
    return AdamState(
        m={name: zeros(t) for name, t in params.learnable_tensors()},
        v={name: zeros(t) for name, t in params.learnable_tensors()},
    )


def adam_step(
    params: dec.DecoderParams,
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float,
):
    """One Adam update; mutates params and state in place and returns them."""
    if lr <= 0:
        raise ValidationError("learning rate must be positive")
    state.t += 1
    bc1 = 1.0 - state.beta1 ** state.t
    bc2 = 1.0 - state.beta2 ** state.t
    for name, tensor in params.learnable_tensors():
        g = grads[name]
        if g.shape != tensor.shape:
            raise ValidationError(f"gradient shape mismatch for {name}")
        if not np.isfinite(g).all():
            raise TrainingError(f"non-finite gradient in {name}")
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        tensor -= lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return params, state


def sgd_step(params: dec.DecoderParams, grads: dict[str, np.ndarray], lr: float):
    """Plain gradient descent (no momentum); mutates params in place."""
    if lr <= 0:
        raise ValidationError("learning rate must be positive")
    for name, tensor in params.learnable_tensors():
        g = grads[name]
        if g.shape != tensor.shape:
            raise ValidationError(f"gradient shape mismatch for {name}")
        if not np.isfinite(g).all():
            raise TrainingError(f"non-finite gradient in {name}")
        tensor -= lr * g
    return params


@dataclass
class TrainReport:
    train_loss: list[float]
    val_weighted_f1: list[float]
    best_epoch: int
    best_checkpoint: str | None = None
    best_params: dec.DecoderParams | None = field(default=None, repr=False, compare=False)

    @property
    def best_val_f1(self) -> float:
        return self.val_weighted_f1[self.best_epoch]

    def to_dict(self) -> dict:
        return {
            "train_loss": self.train_loss,
            "val_weighted_f1": self.val_weighted_f1,
            "best_epoch": self.best_epoch,
            "best_val_weighted_f1": self.best_val_f1,
            "best_checkpoint": self.best_checkpoint,
        }


def evaluate_weighted_f1(
    params: dec.DecoderParams,
    dataset: Dataset,
    taxonomy: LabelTaxonomy,
    threshold: float = 0.5,
    chunk: int = 4096,
) -> float:
    """Validation metric: weighted F1 of thresholded eval-mode predictions."""
    preds = predict_probs(params, dataset.x, chunk=chunk)
    report = classification_report(binarize(preds, threshold), dataset.y, taxonomy)
    return report.weighted.f1


def predict_probs(params: dec.DecoderParams, x: np.ndarray, chunk: int = 4096) -> np.ndarray:
    """Eval-mode probabilities, computed in row chunks."""
    outs = []
    for start in range(0, x.shape[0], chunk):
        probs, _ = dec.forward(params, x[start : start + chunk], mode="eval")
        outs.append(probs)
    return np.concatenate(outs, axis=0)


def train(
    config: TrainConfig,
    train_ds: Dataset,
    val_ds: Dataset,
    taxonomy: LabelTaxonomy,
    checkpoint_path=None,
    history_path=None,
) -> TrainReport:
    """Full training run; deterministic for a fixed config.

    Per epoch: shuffle from a child stream of (seed, epoch), step the
    optimizer on batches of ``batch_size`` (a trailing batch of one row is
    dropped), then score validation weighted F1 and keep the best params.
    """
    if len(train_ds) == 0 or len(val_ds) == 0:
        raise ValidationError("train and validation datasets must be nonempty")
    n_labels = len(taxonomy)
    if train_ds.y.shape[1] != n_labels or val_ds.y.shape[1] != n_labels:
        raise ValidationError("label width does not match the taxonomy")

    # Training runs in float32; checkpoints then round-trip bit-exactly.
    params = dec.init_params(
        n_labels, seed=derive_seed(config.seed, 0),
        dropout_p=config.dropout, dtype=np.float32,
    )
    adam = init_adam_state(params) if config.optimizer == "adam" else None

    x = train_ds.x.astype(np.float32, copy=False)
    y = train_ds.y.astype(np.float32)
    n = x.shape[0]

    history_fh = open(history_path, "w", encoding="utf-8") if history_path else None
    losses: list[float] = []
    val_scores: list[float] = []
    best_epoch = -1
    best_f1 = -1.0
    best_params = None
    try:
        for epoch in range(config.epochs):
            rng = seeded_stream(config.seed).child(epoch + 1)
            order = rng.permutation(n)
            batch_losses = []
            for bi, start in enumerate(range(0, n, config.batch_size)):
                idx = order[start : start + config.batch_size]
                if idx.shape[0] < 2:
                    continue  # batch statistics need >= 2 rows
                xb, yb = x[idx], y[idx]
                probs, cache = dec.forward(params, xb, mode="train", rng=rng)
                loss = dec.batch_bce(probs, yb)
                if not np.isfinite(loss):
                    raise TrainingError(
                        f"non-finite training loss at epoch {epoch}, batch {bi}"
                    )
                grads = dec.backward(params, cache, probs, yb)
                try:
                    if adam is not None:
                        adam_step(params, grads, adam, config.learning_rate)
                    else:
                        sgd_step(params, grads, config.learning_rate)
                except TrainingError as exc:
                    raise TrainingError(f"epoch {epoch}, batch {bi}: {exc}") from exc
                batch_losses.append(loss)
            epoch_loss = float(np.mean(batch_losses)) if batch_losses else float("nan")
            val_f1 = evaluate_weighted_f1(params, val_ds, taxonomy, config.eval_threshold)
            losses.append(epoch_loss)
            val_scores.append(val_f1)
            if val_f1 > best_f1:
                best_f1 = val_f1
                best_epoch = epoch
                best_params = params.copy()
            if history_fh:
                history_fh.write(json.dumps({
                    "epoch": epoch,
                    "train_loss": epoch_loss,
                    "val_weighted_f1": val_f1,
                }) + "\n")
                history_fh.flush()
    finally:
        if history_fh:
            history_fh.close()

    saved_path = None
    if checkpoint_path is not None:
        dec.save_checkpoint(best_params, checkpoint_path)
        saved_path = str(checkpoint_path)
    return TrainReport(
        train_loss=losses,
        val_weighted_f1=val_scores,
        best_epoch=best_epoch,
        best_checkpoint=saved_path,
        best_params=best_params,
    )


@dataclass(frozen=True)
class HpoSpace:
    optimizers: tuple[str, ...] = DEFAULT_OPTIMIZERS
    learning_rates: tuple[float, ...] = DEFAULT_LEARNING_RATES

    def cells(self) -> list[tuple[str, float]]:
        return [(o, lr) for o in self.optimizers for lr in self.learning_rates]


@dataclass
class TrialResult:
    cell: int
    optimizer: str
    learning_rate: float
    score: float
    error: str | None = None


def _run_trial(args):
    cell, optimizer, lr, base, train_ds, val_ds, taxonomy = args
    cfg = replace(base, optimizer=optimizer, learning_rate=lr,
                  seed=derive_seed(base.seed, cell + 1))
    try:
        report = train(cfg, train_ds, val_ds, taxonomy)
        score = report.best_val_f1
        err = None
    except TrainingError as exc:
        score = 0.0  # divergent trials lose
        err = str(exc)
    return TrialResult(cell=cell, optimizer=optimizer, learning_rate=lr,
                       score=score, error=err)


def hpo_search(
    space: HpoSpace,
    trials: int,
    epochs_per_trial: int,
    train_ds: Dataset,
    val_ds: Dataset,
    taxonomy: LabelTaxonomy,
    seed: int = 0,
    batch_size: int = 12,
    jobs: int = 1,
    on_trial=None,
) -> TrainConfig:
    """Sample ``trials`` distinct grid cells and return the winning config.

    Ties break toward the lower learning rate, then Adam over SGD. The
    returned config carries the winning optimizer and learning rate with
    the sampled trial's seed and epoch budget.
    """
    cells = space.cells()
    if not cells:
        raise ValidationError("hyperparameter space is empty")
    if trials < 1 or trials > len(cells):
        raise ValidationError(
            f"trials must be in [1, {len(cells)}] for sampling without replacement"
        )
    rng = seeded_stream(seed).child(0)
    chosen = sorted(rng.permutation(len(cells))[:trials].tolist())
    base = TrainConfig(batch_size=batch_size, epochs=epochs_per_trial, seed=seed)
    work = [(c, cells[c][0], cells[c][1], base, train_ds, val_ds, taxonomy)
            for c in chosen]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_trial, work))
    else:
        results = [_run_trial(w) for w in work]
    results.sort(key=lambda r: r.cell)  # deterministic merge order
    for r in results:
        if on_trial:
            on_trial(r)
    winner = min(
        results,
        key=lambda r: (-r.score, r.learning_rate, 0 if r.optimizer == "adam" else 1),
    )
    return replace(
        base,
        optimizer=winner.optimizer,
        learning_rate=winner.learning_rate,
        seed=derive_seed(seed, winner.cell + 1),
    )
