"""Epoch loop wiring the neighbor schedule into the loss and optimizer.

Training is single threaded and bit-reproducible: the epoch shuffle is
derived from (seed, epoch), so a given configuration always visits the
same batches, and every numeric step is deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .encoder import Adam, Encoder, EncoderConfig, OptimConfig, init_encoder
from .errors import ConfigError, InputError, NumericalError
from .geometry import DistanceNorm
from .kernels import KernelSpec
from .losses import LossConfig, LossVariant, NeighborSpace, Reduction, loss_with_gradient
from .schedule import ScheduleConfig, neighbors_at_epoch


@dataclass(frozen=True)
class TrainConfig:
    """Full recipe for one training run."""

    epochs: int = 50
    batch_size: int = 32
    seed: int = 0
    variant: LossVariant = LossVariant.DYN_LOC_REP
    kernel: KernelSpec = KernelSpec()
    nn_final: int = 14
    nn_step_size: int = 1
    distance_norm: DistanceNorm = DistanceNorm.MANHATTAN
    temperature: float = 0.5
    nn_space: NeighborSpace = NeighborSpace.EMBEDDING
    reduction: Reduction = Reduction.SUM
    export_epochs: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 4:
            raise ConfigError(f"batch_size must be >= 4, got {self.batch_size}")
        if any(e < 1 for e in self.export_epochs):
            raise ConfigError("export epochs are 1-based and must be >= 1")

    def loss_config(self) -> LossConfig:
        return LossConfig(
            variant=self.variant,
            kernel=self.kernel,
            temperature=self.temperature,
            distance_norm=self.distance_norm,
            nn_space=self.nn_space,
            reduction=self.reduction,
        )

    def schedule_config(self) -> ScheduleConfig:
        return ScheduleConfig(
            batch_size=self.batch_size,
            nn_final=self.nn_final,
            step_size=self.nn_step_size,
            max_epochs=self.epochs,
        )


@dataclass(frozen=True)
class TrainResult:
    """Trained encoder, per-epoch trace, and any exported embeddings.

    Each trace entry is a JSON-ready dict {epoch, lr, nn_count, mean_loss};
    nn_count is None for the global baselines, which ignore the schedule.
    exports maps a 1-based count of completed epochs to the unit embeddings
    of the full training set at that point.
    """

    encoder: Encoder
    trace: list[dict] = field(repr=False)
    exports: dict[int, np.ndarray] = field(repr=False)


def _epoch_batches(n: int, batch_size: int, seed: int, epoch: int) -> list[np.ndarray]:
    """Seeded shuffle, then consecutive slices; a trailing singleton is dropped."""
    rng = np.random.default_rng([seed, epoch])
    perm = rng.permutation(n)
    batches = [perm[start : start + batch_size] for start in range(0, n, batch_size)]
    if len(batches[-1]) < 2:
        batches.pop()
    return batches


def train(
    dataset: Dataset,
    config: TrainConfig,
    optim: OptimConfig,
    encoder_config: EncoderConfig,
) -> TrainResult:
    """Train the encoder on the dataset with the configured loss.

    Per epoch: shuffle, split into batches, clamp the scheduled neighbor
    count to each batch's size minus one, take one Adam step per batch at
    the epoch's decayed learning rate. Raises NumericalError naming the
    epoch if a loss turns non-finite.
    """
    if dataset.feature_dim != encoder_config.input_dim:
        raise ConfigError(
            f"encoder expects {encoder_config.input_dim} features, "
            f"dataset has {dataset.feature_dim}"
        )
    if dataset.n < 2:
        raise InputError(f"need at least 2 samples to train, got {dataset.n}")

    encoder = init_encoder(encoder_config, config.seed)
    adam = Adam(encoder.parameters(), optim)
    loss_config = config.loss_config()
    localized = config.variant is LossVariant.DYN_LOC_REP
    schedule = config.schedule_config() if localized and config.epochs > 0 else None

    trace: list[dict] = []
    exports: dict[int, np.ndarray] = {}
    for epoch in range(config.epochs):
        lr = optim.learning_rate_at_epoch(epoch)
        nn_count = neighbors_at_epoch(schedule, epoch) if schedule is not None else None
        batch_losses = []
        for rows in _epoch_batches(dataset.n, config.batch_size, config.seed, epoch):
            features = dataset.features[rows]
            batch = encoder.forward(features)
            try:
                out = loss_with_gradient(
                    loss_config,
                    batch,
                    dataset.labels[rows],
                    neighbor_count=min(nn_count, len(rows) - 1) if localized else None,
                    input_features=features,
                )
            except NumericalError as exc:
                raise NumericalError(f"epoch {epoch}: {exc}") from exc
            adam.step(encoder.parameters(), encoder.backward(out.grad_raw), lr)
            batch_losses.append(out.value)
        trace.append(
            {
                "epoch": epoch,
                "lr": lr,
                "nn_count": nn_count,
                "mean_loss": float(np.mean(batch_losses)),
            }
        )
        if (epoch + 1) in config.export_epochs:
            exports[epoch + 1] = encoder.forward(dataset.features).unit
    return TrainResult(encoder=encoder, trace=trace, exports=exports)
