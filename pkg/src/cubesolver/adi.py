"""Autodidactic Iteration: self-generated training data for the cube network.

Every iteration scrambles ``l`` fresh sequences of ``k`` moves out of the
solved cube, labels each visited state with a one-step lookahead through the
current network, and fits the network to those labels with per-sample weight
``1 / depth``.
"""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, NamedTuple

import numpy as np

from . import cube
from . import network as nn

log = logging.getLogger(__name__)

# Fixed so that chunking (and therefore floating point) never depends on the
# number of workers.
TARGET_CHUNK = 512


@dataclass
class AdiConfig:
    k: int = 5
    l: int = 100
    iterations: int = 2000
    batch_size: int = 10
    checkpoint_interval: int = 500
    seed: int = 0
    target_workers: int = 1
    divergence_alarm: float = 50.0

    @property
    def samples_per_iteration(self) -> int:
        return self.k * self.l

    def validate(self) -> None:
        if self.k < 1 or self.l < 1:
            raise ValueError("k and l must be >= 1")
        if self.iterations < 0 or self.batch_size < 1 or self.checkpoint_interval < 1:
            raise ValueError("iterations >= 0, batch_size >= 1, checkpoint_interval >= 1 required")
        if self.target_workers < 1:
            raise ValueError("target_workers must be >= 1")


@dataclass(frozen=True)
class TrainingSample:
    state: cube.CubeState
    depth: int
    origin_sequence_index: int

    @property
    def weight(self) -> float:
        return 1.0 / self.depth


class Target(NamedTuple):
    value_target: float
    policy_target: int


class SampleSet(NamedTuple):
    """Column form of a list of TrainingSample."""

    states: np.ndarray    # (N, 20) uint8
    depths: np.ndarray    # (N,)
    sequences: np.ndarray  # (N,)

    def __len__(self):
        return len(self.depths)

    def samples(self) -> list[TrainingSample]:
        return [
            TrainingSample(cube.CubeState.from_array(s), int(d), int(q))
            for s, d, q in zip(self.states, self.depths, self.sequences)
        ]

    @property
    def weights(self) -> np.ndarray:
        return 1.0 / self.depths


def generate_samples(config: AdiConfig, rng: np.random.Generator) -> SampleSet:
    """k*l states: l independent scramble walks, each recorded after every move."""
    k, l = config.k, config.l
    moves = rng.integers(0, cube.NUM_MOVES, size=(l, k))
    cur = np.tile(cube.SOLVED_ARRAY, (l, 1))
    states = np.empty((l, k, cube.NUM_CUBIES), dtype=np.uint8)
    for j in range(k):
        cur = cube.apply_moves_batch(cur, moves[:, j])
        states[:, j] = cur
    depths = np.tile(np.arange(1, k + 1), l)
    sequences = np.repeat(np.arange(l), k)
    return SampleSet(states.reshape(l * k, cube.NUM_CUBIES), depths, sequences)


ValueFn = Callable[[np.ndarray], np.ndarray]


def _value_fn(model) -> ValueFn:
    if isinstance(model, nn.NetworkParams):
        return lambda states: nn.forward_states(model, states).value
    return model


def child_scores(model, states: np.ndarray) -> np.ndarray:
    """R(child) + v(child) for every child, shape (n, 12).

    A solved child scores exactly 1: the goal is absorbing, so the network's
    opinion of it is not added.
    """
    value_fn = _value_fn(model)
    kids = cube.children_batch(states)
    flat = kids.reshape(-1, cube.NUM_CUBIES)
    values = np.asarray(value_fn(flat), dtype=np.float64).reshape(len(states), cube.NUM_MOVES)
    return np.where(cube.solved_mask(kids), 1.0, -1.0 + values)


def make_targets(model, states: np.ndarray, workers: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Value and policy targets for an (n, 20) state array.

    ``model`` is either NetworkParams or any callable mapping an (m, 20) state
    array to m values.  Ties in the argmax go to the lowest action index.
    """
    states = np.asarray(states, dtype=np.uint8)
    chunks = [states[i:i + TARGET_CHUNK] for i in range(0, len(states), TARGET_CHUNK)]
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(workers) as pool:
            scores = list(pool.map(lambda c: child_scores(model, c), chunks))
    else:
        scores = [child_scores(model, c) for c in chunks]
    scores = np.concatenate(scores) if scores else np.zeros((0, cube.NUM_MOVES))
    return scores.max(axis=1), scores.argmax(axis=1)


def make_target(model, sample: TrainingSample | cube.CubeState) -> Target:
    state = sample.state if isinstance(sample, TrainingSample) else sample
    yv, yp = make_targets(model, state.to_array()[None, :])
    return Target(float(yv[0]), int(yp[0]))


@dataclass
class IterationStats:
    iteration: int
    samples_seen: int
    loss: float
    value_loss: float
    policy_loss: float
    mean_value_target_by_depth: dict[int, float]
    max_abs_value_target: float
    wall_time: float
    cumulative_wall_time: float = 0.0

    def to_record(self) -> dict:
        rec = asdict(self)
        rec["mean_value_target_by_depth"] = {
            str(d): v for d, v in self.mean_value_target_by_depth.items()
        }
        return rec


class TrainingDiverged(FloatingPointError):
    pass


def train_iteration(params: nn.NetworkParams, config: AdiConfig, rng: np.random.Generator,
                    iteration: int = 0) -> tuple[nn.NetworkParams, IterationStats]:
    """One pass of sample generation, frozen-snapshot targets, and RMSProp."""
    start = time.perf_counter()
    samples = generate_samples(config, rng)
    # Targets use the pre-update params; the update below works on a copy.
    yv, yp = make_targets(params, samples.states, workers=config.target_workers)
    x = cube.encode_batch(samples.states, dtype=params.config.dtype)
    weights = samples.weights

    new = params.copy()
    order = rng.permutation(len(samples))
    total = value_total = policy_total = 0.0
    batches = 0
    try:
        for lo in range(0, len(order), config.batch_size):
            idx = order[lo:lo + config.batch_size]
            batch = nn.Batch(x[idx], yv[idx], yp[idx], weights[idx])
            loss, grads, (vl, pl) = nn.loss_and_gradients(new, batch, with_parts=True)
            nn.rmsprop_step(new, grads, inplace=True)
            total += loss
            value_total += vl
            policy_total += pl
            batches += 1
    except nn.NonFiniteError as exc:
        raise TrainingDiverged(
            f"iteration {iteration}: non-finite values at {exc.where} "
            f"(max |y_v| = {np.abs(yv).max():.3g})"
        ) from exc

    by_depth = {int(d): float(yv[samples.depths == d].mean()) for d in range(1, config.k + 1)}
    stats = IterationStats(
        iteration=iteration,
        samples_seen=len(samples),
        loss=total / batches,
        value_loss=value_total / batches,
        policy_loss=policy_total / batches,
        mean_value_target_by_depth=by_depth,
        max_abs_value_target=float(np.abs(yv).max()),
        wall_time=time.perf_counter() - start,
    )
    if stats.max_abs_value_target > config.divergence_alarm:
        log.warning("iteration %d: max |y_v| = %.3g exceeds alarm %.3g",
                    iteration, stats.max_abs_value_target, config.divergence_alarm)
    return new, stats


# ---------------------------------------------------------------------------
# full runs
# ---------------------------------------------------------------------------

def checkpoint_name(iteration: int) -> str:
    return f"ckpt_{iteration:07d}.bin"


def _metadata(iteration: int, adi: AdiConfig, rng: np.random.Generator) -> dict:
    # No timings here: identical seeds must give byte-identical checkpoints.
    return {
        "iteration": iteration,
        "adi_config": asdict(adi),
        "rng_state": rng.bit_generator.state,
    }


@dataclass
class TrainingResult:
    params: nn.NetworkParams
    checkpoint: Path
    log_path: Path
    history: list[IterationStats] = field(default_factory=list)


def run_training(adi: AdiConfig, net: nn.NetworkConfig, out_dir, resume=None,
                 stop_after: int | None = None, progress: Callable[[IterationStats], None] | None = None
                 ) -> TrainingResult:
    """Run ADI up to ``adi.iterations``, checkpointing into ``out_dir``.

    ``resume`` names a checkpoint written by a previous run; training continues
    from its iteration count and RNG state.  ``stop_after`` halts early after
    that many total iterations (used to simulate an interrupted run).
    """
    adi.validate()
    net.validate()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    log_path = out_dir / "train_log.jsonl"

    if resume is not None:
        params, net, meta = nn.load_checkpoint(Path(resume).read_bytes())
        done = int(meta["iteration"])
        rng = np.random.default_rng()
        rng.bit_generator.state = meta["rng_state"]
        wall = _truncate_log(log_path, done)
    else:
        params = nn.init_params(net, adi.seed)
        # Separate stream from init so changing the network does not reshuffle data.
        rng = np.random.default_rng([adi.seed, 1])
        done, wall = 0, 0.0
        log_path.write_text("")
        _write_checkpoint(out_dir / checkpoint_name(0), params, net, _metadata(0, adi, rng))

    last = out_dir / checkpoint_name(done)
    history = []
    target = adi.iterations if stop_after is None else min(adi.iterations, stop_after)
    with log_path.open("a") as fh:
        for it in range(done + 1, target + 1):
            params, stats = train_iteration(params, adi, rng, iteration=it)
            wall += stats.wall_time
            stats.cumulative_wall_time = wall
            fh.write(json.dumps(stats.to_record()) + "\n")
            fh.flush()
            history.append(stats)
            if progress:
                progress(stats)
            if it % adi.checkpoint_interval == 0 or it == adi.iterations:
                last = out_dir / checkpoint_name(it)
                _write_checkpoint(last, params, net, _metadata(it, adi, rng))
        if target > done and target < adi.iterations and target % adi.checkpoint_interval:
            last = out_dir / checkpoint_name(target)
            _write_checkpoint(last, params, net, _metadata(target, adi, rng))
    return TrainingResult(params, last, log_path, history)


def _write_checkpoint(path: Path, params, net, meta) -> None:
    try:
        tmp = path.with_suffix(".tmp")
        tmp.write_bytes(nn.save_checkpoint(params, net, meta))
        tmp.replace(path)
    except OSError as exc:
        raise OSError(f"writing checkpoint for iteration {meta['iteration']} failed: {exc}") from exc


def _truncate_log(log_path: Path, done: int) -> float:
    """Drop log records past the resume point; return the wall time so far."""
    if not log_path.exists():
        return 0.0
    kept = [line for line in log_path.read_text().splitlines()
            if line.strip() and json.loads(line)["iteration"] <= done]
    log_path.write_text("".join(line + "\n" for line in kept))
    return float(json.loads(kept[-1])["cumulative_wall_time"]) if kept else 0.0


def read_log(path) -> list[dict]:
    return [json.loads(line) for line in Path(path).read_text().splitlines() if line.strip()]


def smoothed(values, window: int = 50) -> np.ndarray:
    """Trailing moving average (shorter window at the start)."""
    values = np.asarray(values, dtype=np.float64)
    csum = np.concatenate([[0.0], np.cumsum(values)])
    idx = np.arange(1, len(values) + 1)
    lo = np.maximum(0, idx - window)
    return (csum[idx] - csum[lo]) / (idx - lo)
