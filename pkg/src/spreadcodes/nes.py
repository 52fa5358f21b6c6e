"""Search-distribution training loop for spreading-code design.

Each iteration samples a batch from the Gaussian proposal, discretizes every
sample into a code family at the midpoint threshold, scores the families,
and updates the network with a baseline-corrected score-function gradient.

All randomness is drawn from streams keyed by (master_seed, iteration,
sample index), so runs are reproducible bit for bit and independent of any
batch-evaluation parallelism.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .bitseq import CodeFamily
from .correlation import ObjectiveReport, evaluate_chips
from .network import (
    NetworkConfig,
    ProposalParams,
    _activations,
    adam_step,
    backprop_mean_gradient,
    forward,
    grad_norm,
    init_network,
    load_checkpoint,
    save_checkpoint,
)

__all__ = [
    "NesConfig",
    "IterationRecord",
    "TrainLog",
    "TrainResult",
    "TrainingDiverged",
    "default_learning_rate",
    "batch_rngs",
    "sample_batch",
    "compute_baseline",
    "estimate_gradient",
    "train",
    "write_trainlog_csv",
    "save_train_checkpoint",
    "TRAINLOG_COLUMNS",
]

# RNG stream domains under the master seed.
_INIT_KEY = 0
_BATCH_KEY = 1

TRAINLOG_COLUMNS = ("iteration", "mean_f", "min_f", "baseline", "best_f", "grad_norm")


def default_learning_rate(code_length: int) -> float:
    """Constant rate, reduced for long sequences."""
    return 5e-5 if code_length > 500 else 1e-4


@dataclass(frozen=True)
class NesConfig:
    num_codes: int
    code_length: int
    variance: float = 0.1
    batch_size: int = 100
    num_iterations: int = 10_000
    learning_rate: float | None = None  # None resolves by code length
    master_seed: int = 0
    use_baseline: bool = True
    eval_method: str = "auto"

    def __post_init__(self):
        if self.num_codes < 2:
            raise ValueError(f"need at least 2 codes, got {self.num_codes}")
        if self.code_length < 2:
            raise ValueError(f"code length must be >= 2, got {self.code_length}")
        if self.variance <= 0:
            raise ValueError(f"variance must be positive, got {self.variance}")
        if self.batch_size < 2:
            raise ValueError(f"batch size must be >= 2, got {self.batch_size}")
        if self.num_iterations < 0:
            raise ValueError(f"iteration count must be >= 0, got {self.num_iterations}")

    @property
    def resolved_learning_rate(self) -> float:
        if self.learning_rate is not None:
            return self.learning_rate
        return default_learning_rate(self.code_length)

    @property
    def dim(self) -> int:
        return self.num_codes * self.code_length


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    mean_f: float
    min_f: float
    baseline: float
    best_f: float
    grad_norm: float
    mean_family_f: float = float("nan")  # objective of the discretized proposal mean


@dataclass
class TrainLog:
    records: list = field(default_factory=list)
    wall_clock_s: float = 0.0

    def best_f_curve(self) -> np.ndarray:
        return np.array([r.best_f for r in self.records])


@dataclass
class TrainResult:
    champion: CodeFamily
    report: ObjectiveReport
    log: TrainLog
    params: ProposalParams
    config: NesConfig


class TrainingDiverged(RuntimeError):
    """Raised when gradients or parameters go non-finite.

    Carries the last-good parameters and the failing iteration so the caller
    can write a diagnostic checkpoint.
    """

    def __init__(self, message: str, params: ProposalParams, iteration: int):
        super().__init__(message)
        self.params = params
        self.iteration = iteration

    def __reduce__(self):
        return (type(self), (self.args[0], self.params, self.iteration))


def batch_rngs(master_seed: int, iteration: int, batch_size: int) -> list:
    """One independent generator per sample of one iteration's batch."""
    return [
        np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(_BATCH_KEY, iteration, i)))
        for i in range(batch_size)
    ]


def sample_batch(params: ProposalParams, batch_size: int, rngs, mean: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Draw continuous design points and their discretized bit vectors.

    Returns (points, bits): points[i] ~ Normal(mean, variance) per component;
    bits[i] = 1 where the component is >= the midpoint threshold 0 (tanh
    output bounds are symmetric). Rows reshape to (num_codes, code_length)
    families in C order.
    """
    if mean is None:
        mean = forward(params)
    sigma = np.sqrt(params.variance)
    dim = mean.size
    points = np.empty((batch_size, dim))
    for i, rng in enumerate(rngs):
        points[i] = mean + sigma * rng.standard_normal(dim)
    bits = (points >= 0.0).astype(np.uint8)
    return points, bits


def compute_baseline(objectives) -> float:
    """Mean objective of the batch.

    An all-equal batch returns the common value exactly (floating-point
    summation of identical values may otherwise drift off it), which keeps
    the corrected gradient exactly zero in that case.
    """
    objectives = np.asarray(objectives, dtype=np.float64)
    if objectives.size == 0:
        raise ValueError("cannot take the baseline of an empty batch")
    if np.all(objectives == objectives[0]):
        return float(objectives[0])
    return float(np.mean(objectives))


def estimate_gradient(
    params: ProposalParams,
    points: np.ndarray,
    objectives,
    use_baseline: bool = True,
    mean: np.ndarray | None = None,
    activations: list | None = None,
) -> tuple[list, list]:
    """Monte Carlo gradient of the expected objective w.r.t. the network.

    Averages (f_i - b) * grad log p(x_i) over the batch; b is the batch mean
    when use_baseline is set, else 0. Because the mean vector is shared by
    the whole batch, the per-sample score gradients collapse into a single
    backward pass on the weighted sum of (x_i - mean).
    """
    points = np.asarray(points, dtype=np.float64)
    objectives = np.asarray(objectives, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] != objectives.size:
        raise ValueError(
            f"batch/objective mismatch: {points.shape} points vs {objectives.size} objectives"
        )
    b = compute_baseline(objectives) if use_baseline else 0.0
    mu = forward(params) if mean is None else mean
    weights = objectives - b
    dmean = (weights[:, None] * (points - mu)).sum(axis=0) / (objectives.size * params.variance)
    return backprop_mean_gradient(params, dmean, activations)


def _discretize_mean(mean: np.ndarray) -> np.ndarray:
    return (mean >= 0.0).astype(np.uint8)


def train(cfg: NesConfig, resume_from=None) -> TrainResult:
    """Run the full optimization and return the best family ever sampled.

    The champion is the lowest-f discretized sample seen across all batches
    (ties keep the earliest), not the final proposal mean; the objective of
    the discretized mean is logged alongside for comparison. With
    num_iterations == 0 a single evaluation-only pass is made.

    resume_from: path to a checkpoint written by save_train_checkpoint;
    continues the identical trajectory from the stored iteration.
    """
    k, length = cfg.num_codes, cfg.code_length
    start_iteration = 0
    best_chips = None
    best_report = None
    if resume_from is None:
        params = init_network(
            NetworkConfig(k, length),
            np.random.default_rng(np.random.SeedSequence(cfg.master_seed, spawn_key=(_INIT_KEY,))),
            variance=cfg.variance,
        )
    else:
        params, extra = load_checkpoint(resume_from)
        if (params.config.num_codes, params.config.code_length) != (k, length):
            raise ValueError("checkpoint dimensions do not match the config")
        if extra.get("master_seed") != cfg.master_seed:
            raise ValueError("checkpoint master seed does not match the config")
        start_iteration = int(extra["iteration"])
        if extra.get("best_chips"):
            best_chips = np.array(
                [[int(c) for c in row] for row in extra["best_chips"]], dtype=np.uint8
            )
            best_report = ObjectiveReport(**extra["best_report"])

    lr = cfg.resolved_learning_rate
    log = TrainLog()
    started = time.perf_counter()
    apply_updates = cfg.num_iterations > 0
    total_passes = cfg.num_iterations if apply_updates else 1

    for t in range(start_iteration, total_passes):
        acts = _activations(params)
        mean = acts[-1]
        points, bits = sample_batch(params, cfg.batch_size, batch_rngs(cfg.master_seed, t, cfg.batch_size), mean=mean)
        reports = [evaluate_chips(bits[i].reshape(k, length), cfg.eval_method) for i in range(cfg.batch_size)]
        objectives = np.array([r.f for r in reports])

        batch_best = int(np.argmin(objectives))
        if best_report is None or objectives[batch_best] < best_report.f:
            best_chips = bits[batch_best].reshape(k, length).copy()
            best_report = reports[batch_best]

        baseline = compute_baseline(objectives)
        grads = estimate_gradient(params, points, objectives, cfg.use_baseline, mean=mean, activations=acts)
        gnorm = grad_norm(grads)
        if apply_updates:
            try:
                adam_step(params, grads, lr)
            except FloatingPointError as err:
                raise TrainingDiverged(str(err), params, t) from err

        mean_family_f = evaluate_chips(_discretize_mean(mean).reshape(k, length), cfg.eval_method).f
        log.records.append(
            IterationRecord(
                iteration=t,
                mean_f=float(np.mean(objectives)),
                min_f=float(objectives[batch_best]),
                baseline=baseline,
                best_f=best_report.f,
                grad_norm=gnorm,
                mean_family_f=mean_family_f,
            )
        )

    log.wall_clock_s = time.perf_counter() - started
    if best_report is None:
        raise ValueError(
            "no batches were evaluated: the checkpoint is already past "
            f"iteration {cfg.num_iterations} and carries no champion"
        )
    return TrainResult(
        champion=CodeFamily(best_chips),
        report=best_report,
        log=log,
        params=params,
        config=cfg,
    )


def save_train_checkpoint(path, params: ProposalParams, cfg: NesConfig, iteration: int, best_chips=None, best_report=None) -> None:
    """Checkpoint a training run so it can be resumed bit-exactly.

    Sampling streams are keyed by iteration, so the resume point plus the
    master seed fully determines all future randomness. For a completed
    TrainResult pass iteration=cfg.num_iterations with the champion state.
    """
    extra = {
        "master_seed": cfg.master_seed,
        "iteration": int(iteration),
        "best_chips": ["".join(str(int(c)) for c in row) for row in best_chips] if best_chips is not None else [],
        "best_report": {
            "f_ac": best_report.f_ac,
            "f_cc": best_report.f_cc,
            "f": best_report.f,
        } if best_report is not None else {},
    }
    save_checkpoint(path, params, extra)


def _fmt(value: float) -> str:
    return repr(float(value))


def write_trainlog_csv(path, log: TrainLog) -> None:
    """Emit the per-iteration curve in the shared training-log CSV schema."""
    lines = [",".join(TRAINLOG_COLUMNS)]
    for r in log.records:
        lines.append(
            ",".join(
                [str(r.iteration), _fmt(r.mean_f), _fmt(r.min_f), _fmt(r.baseline), _fmt(r.best_f), _fmt(r.grad_norm)]
            )
        )
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
