"""Contrastive regression losses: forward values and analytic gradients.

Five variants share one algebraic skeleton. For anchor i with pair
weights a_{i,k}, exponent scalings b_{i,t} and a per-pair candidate set
M(i, k), the total loss is

    L = -sum_i sum_{k != i} a_{i,k} * [ s_{i,k} - log sum_{t in M(i,k)} exp(s_{i,t} * b_{i,t}) ]

where s is the temperature-scaled cosine similarity matrix. The variants
differ only in (a, b, M):

  dynlocrep    a = w_{i,k} / sum_{t != i} w_{i,t}; b = 1 - w; M = the
               anchor's current nearest-neighbor set (same for every k).
  yaware       same a; b = 1; M = all t not in {i, k}.
  exponential  same a; b = 1 - w; M = all t not in {i, k}.
  threshold    a = w_{i,k} / sum over {t : w_{i,t} < w_{i,k}} of w_{i,t};
               b = 1; M = {t : w_{i,t} < w_{i,k}}; pairs with an empty
               set are skipped.
  rnc          a = 1; b = 1; M = {t != i : |y_i - y_t| >= |y_i - y_k|}
               (k is always a member, so the set is never empty).

Anchors never pair with themselves: every sum over k and t excludes i.
Inner sums are evaluated with max-shifted log-sum-exp, which matters at
temperatures as low as 0.1 where |s| reaches 10. Gradients treat the
neighbor selection and all kernel weights as constants and are chained
through the cosine similarity and the row normalization back to the raw
embeddings.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InputError, NumericalError
from .geometry import (
    NORM_EPS,
    DistanceNorm,
    EmbeddingBatch,
    NeighborSets,
    SimilarityMatrix,
    distance_matrix,
    select_neighbors,
    similarity_matrix,
)
from .kernels import KernelSpec, PositivenessMatrix, positiveness_matrix

# An anchor whose off-diagonal kernel weights sum below this contributes 0
# instead of dividing by ~0. Unreachable with a gaussian kernel.
WEIGHT_SUM_EPS = 1e-12


class LossVariant(str, enum.Enum):
    """The dynamic localized repulsion loss and its four baselines."""

    DYN_LOC_REP = "dynlocrep"
    Y_AWARE = "yaware"
    THRESHOLD = "threshold"
    EXPONENTIAL = "exponential"
    RANK_N_CONTRAST = "rnc"


class NeighborSpace(str, enum.Enum):
    """Space in which nearest neighbors are selected."""

    EMBEDDING = "embedding"
    INPUT = "input"


class Reduction(str, enum.Enum):
    """Sum over anchors (the definition) or mean per anchor (optional)."""

    SUM = "sum"
    MEAN = "mean"


@dataclass(frozen=True)
class LossConfig:
    """Everything a loss evaluation needs besides the batch itself."""

    variant: LossVariant = LossVariant.DYN_LOC_REP
    kernel: KernelSpec = KernelSpec()
    temperature: float = 0.5
    distance_norm: DistanceNorm = DistanceNorm.MANHATTAN
    nn_space: NeighborSpace = NeighborSpace.EMBEDDING
    reduction: Reduction = Reduction.SUM

    def __post_init__(self) -> None:
        if not (np.isfinite(self.temperature) and self.temperature > 0):
            raise ConfigError(f"temperature must be positive, got {self.temperature}")


@dataclass(frozen=True)
class LossOutput:
    """Scalar loss plus its gradient with respect to the raw embeddings."""

    value: float
    grad_raw: np.ndarray = field(repr=False)


def _normalized_pair_weights(w: np.ndarray) -> np.ndarray:
    """Rows of w_{i,k} / sum_{t != i} w_{i,t} with zero diagonal.

    Off-diagonal entries of each row sum to 1 unless the row's weight mass
    is below WEIGHT_SUM_EPS, in which case the whole row is zeroed.
    """
    n = w.shape[0]
    off = w * (1.0 - np.eye(n))
    row_sums = off.sum(axis=1, keepdims=True)
    safe = np.where(row_sums < WEIGHT_SUM_EPS, 1.0, row_sums)
    return np.where(row_sums < WEIGHT_SUM_EPS, 0.0, off / safe)


def _threshold_pair_weights(w: np.ndarray) -> np.ndarray:
    """Per-pair weights w_{i,k} / sum over {t : w_{i,t} < w_{i,k}} of w_{i,t}.

    A pair whose strict-inequality candidate set is empty, or whose
    candidate weight mass falls below WEIGHT_SUM_EPS, gets weight 0 and
    drops out of the loss; without the mass guard a near-empty candidate
    set would blow the per-pair weight up to ~1/underflow.
    """
    n = w.shape[0]
    a = np.zeros((n, n))
    for i in range(n):
        below = w[i][None, :] < w[i][:, None]  # below[k, t]: t is strictly less positive than k
        below[:, i] = False
        sums = below @ w[i]
        usable = sums >= WEIGHT_SUM_EPS
        a[i] = np.where(usable, w[i] / np.where(usable, sums, 1.0), 0.0)
    np.fill_diagonal(a, 0.0)
    return a


def _pair_weights(variant: LossVariant, w: np.ndarray | None, n: int) -> np.ndarray:
    if variant is LossVariant.RANK_N_CONTRAST:
        return 1.0 - np.eye(n)
    if variant is LossVariant.THRESHOLD:
        return _threshold_pair_weights(w)
    return _normalized_pair_weights(w)


def _exponent_scaling(variant: LossVariant, w: np.ndarray | None, n: int) -> np.ndarray:
    if variant in (LossVariant.DYN_LOC_REP, LossVariant.EXPONENTIAL):
        return 1.0 - w
    return np.ones((n, n))


def _candidate_mask(
    variant: LossVariant,
    i: int,
    n: int,
    w_row: np.ndarray | None,
    label_gap_row: np.ndarray | None,
    neighbor_row: np.ndarray | None,
) -> np.ndarray:
    """Boolean (k, t) matrix of repulsion candidates for anchor i."""
    if variant is LossVariant.DYN_LOC_REP:
        mask = np.zeros((n, n), dtype=bool)
        mask[:, neighbor_row] = True
        return mask
    if variant is LossVariant.THRESHOLD:
        mask = w_row[None, :] < w_row[:, None]
        mask[:, i] = False
        return mask
    if variant is LossVariant.RANK_N_CONTRAST:
        mask = label_gap_row[None, :] >= label_gap_row[:, None]
        mask[:, i] = False
        return mask
    # yaware / exponential: everyone except the anchor and the partner
    mask = ~np.eye(n, dtype=bool)
    mask[:, i] = False
    return mask


def _evaluate(
    s: np.ndarray,
    pair_weights: np.ndarray,
    exponent_scaling: np.ndarray,
    masks: list[np.ndarray] | None = None,
    mask_for_anchor=None,
    want_grad: bool = False,
) -> tuple[float, np.ndarray | None]:
    """Shared forward/backward core over the (a, b, M) parameterization.

    Returns the total loss and, when requested, dL/ds as an (n, n) matrix
    with rows indexed by anchors. Pairs whose candidate set is empty are
    dropped (their weight is forced to 0), so no log of an empty sum is
    ever taken.
    """
    n = s.shape[0]
    total = 0.0
    grad_s = np.zeros((n, n)) if want_grad else None
    for i in range(n):
        mask = masks[i] if masks is not None else mask_for_anchor(i)
        a = pair_weights[i]
        logits = np.where(mask, (exponent_scaling[i] * s[i])[None, :], -np.inf)
        peak = logits.max(axis=1)
        usable = np.isfinite(peak)
        a = np.where(usable, a, 0.0)
        shifted = np.exp(logits - np.where(usable, peak, 0.0)[:, None])
        sums = shifted.sum(axis=1)
        safe_sums = np.where(sums > 0.0, sums, 1.0)
        log_denom = np.where(usable, peak, 0.0) + np.log(safe_sums)
        total -= float(a @ (s[i] - log_denom))
        if want_grad:
            softmaxes = shifted / safe_sums[:, None]
            grad_s[i] = -a + exponent_scaling[i] * (a @ softmaxes)
    return total, grad_s


def _check_square(name: str, values: np.ndarray, n: int) -> None:
    if values.shape != (n, n):
        raise InputError(f"{name} must have shape ({n}, {n}), got {values.shape}")


def dynlocrep_forward(
    sim: SimilarityMatrix, weights: PositivenessMatrix, neighbors: NeighborSets
) -> float:
    """Total dynamic localized repulsion loss over all anchors.

    The numerator sum runs over every partner k != i; only the repulsion
    denominator is restricted to the anchor's neighbor set (which may
    include k itself).
    """
    n = sim.n
    _check_square("positiveness matrix", weights.weights, n)
    if neighbors.n != n:
        raise InputError(f"neighbor sets cover {neighbors.n} anchors, expected {n}")
    if neighbors.count < 1:
        raise InputError("every anchor needs a non-empty neighbor set")
    w = weights.weights
    masks = [
        _candidate_mask(LossVariant.DYN_LOC_REP, i, n, None, None, neighbors.indices[i])
        for i in range(n)
    ]
    value, _ = _evaluate(
        sim.values, _normalized_pair_weights(w), 1.0 - w, masks=masks
    )
    return value


def baseline_forward(
    variant: LossVariant,
    sim: SimilarityMatrix,
    weights: PositivenessMatrix | None = None,
    labels: np.ndarray | None = None,
) -> float:
    """Total loss for one of the four global (non-localized) baselines.

    Rank-N-Contrast consumes raw labels; the other three consume the
    positiveness matrix.
    """
    if variant is LossVariant.DYN_LOC_REP:
        raise ConfigError("use dynlocrep_forward for the localized loss")
    n = sim.n
    if variant is LossVariant.RANK_N_CONTRAST:
        if labels is None:
            raise InputError("rank-n-contrast needs labels")
        labels = np.asarray(labels, dtype=np.float64)
        if labels.shape != (n,):
            raise InputError(f"labels must have shape ({n},), got {labels.shape}")
        gaps = np.abs(labels[:, None] - labels[None, :])
        masks = [
            _candidate_mask(variant, i, n, None, gaps[i], None) for i in range(n)
        ]
        w = None
    else:
        if weights is None:
            raise InputError(f"{variant.value} needs a positiveness matrix")
        _check_square("positiveness matrix", weights.weights, n)
        w = weights.weights
        masks = [_candidate_mask(variant, i, n, w[i], None, None) for i in range(n)]
    value, _ = _evaluate(
        sim.values,
        _pair_weights(variant, w, n),
        _exponent_scaling(variant, w, n),
        masks=masks,
    )
    return value


def loss_with_gradient(
    config: LossConfig,
    batch: EmbeddingBatch,
    labels: np.ndarray,
    neighbor_count: int | None = None,
    input_features: np.ndarray | None = None,
) -> LossOutput:
    """Forward value plus the analytic gradient w.r.t. raw embeddings.

    Neighbor selection (for the localized variant) and the kernel weights
    are constants of the differentiation; the similarity and normalization
    Jacobians are applied analytically. ``neighbor_count`` is required for
    the localized variant and must already be clamped into [1, n - 1];
    ``input_features`` is required when neighbors are selected in input
    space.
    """
    n = batch.n
    if n < 2:
        raise InputError(f"need a batch of at least 2 samples, got {n}")
    labels = np.asarray(labels, dtype=np.float64)
    if labels.shape != (n,):
        raise InputError(f"labels must have shape ({n},), got {labels.shape}")

    sim = similarity_matrix(batch.unit, config.temperature)
    s = sim.values
    variant = config.variant

    w = None
    gaps = None
    neighbor_rows = None
    if variant is LossVariant.RANK_N_CONTRAST:
        gaps = np.abs(labels[:, None] - labels[None, :])
    else:
        w = positiveness_matrix(labels, config.kernel).weights
    if variant is LossVariant.DYN_LOC_REP:
        if neighbor_count is None:
            raise ConfigError("the localized variant needs a neighbor count")
        if config.nn_space is NeighborSpace.INPUT:
            if input_features is None:
                raise ConfigError("input-space neighbor selection needs input features")
            points = np.asarray(input_features, dtype=np.float64)
            if points.shape[0] != n:
                raise InputError(
                    f"input features must have {n} rows, got {points.shape[0]}"
                )
        else:
            points = batch.unit
        distances = distance_matrix(points, config.distance_norm)
        neighbor_rows = select_neighbors(distances, neighbor_count).indices

    def mask_for_anchor(i: int) -> np.ndarray:
        return _candidate_mask(
            variant,
            i,
            n,
            w[i] if w is not None else None,
            gaps[i] if gaps is not None else None,
            neighbor_rows[i] if neighbor_rows is not None else None,
        )

    value, grad_s = _evaluate(
        s,
        _pair_weights(variant, w, n),
        _exponent_scaling(variant, w, n),
        mask_for_anchor=mask_for_anchor,
        want_grad=True,
    )

    # Chain rule: s = U U^T / tau, then u = z / max(||z||, eps) per row.
    grad_unit = (grad_s + grad_s.T) @ batch.unit / config.temperature
    norms = np.linalg.norm(batch.raw, axis=1, keepdims=True)
    divisor = np.maximum(norms, NORM_EPS)
    radial = (grad_unit * batch.unit).sum(axis=1, keepdims=True)
    grad_raw = np.where(
        norms > NORM_EPS,
        (grad_unit - radial * batch.unit) / divisor,
        grad_unit / divisor,
    )

    if config.reduction is Reduction.MEAN:
        value /= n
        grad_raw = grad_raw / n

    if not np.isfinite(value) or not np.all(np.isfinite(grad_raw)):
        raise NumericalError(f"{variant.value} loss produced non-finite output")
    return LossOutput(value=value, grad_raw=grad_raw)
