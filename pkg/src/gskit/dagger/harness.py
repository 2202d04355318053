"""Closed-loop corrective data collection.

The loop: roll out, record failures, uniformly sample a recovery state where
the task is still achievable, restore the environment to it exactly, let the
expert finish, and aggregate everything per iteration. Policies exposing
fit(records) are refitted on the growing aggregate between iterations, which
is what closes the loop for the shipped nearest-neighbor mimic.
"""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..env.dataset import DatasetWriter, TrajectoryRecord, read_dataset
from ..env.sim import Env
from ..scene import EnvState


@dataclass
class AggregatedDataset:
    """Per-iteration trajectory collections plus imported real data."""

    iterations: dict[int, list[TrajectoryRecord]] = field(default_factory=dict)
    real_records: list[TrajectoryRecord] = field(default_factory=list)
    import_hashes: list[str] = field(default_factory=list)
    duplicate_imports: list[str] = field(default_factory=list)
    summary: list[dict] = field(default_factory=list)

    def add_iteration(self, tag: int, records: list[TrajectoryRecord]) -> None:
        expected = len(self.iterations) + 1
        if tag != expected:
            raise ValueError(f"iteration tags must be dense from 1; expected {expected}, got {tag}")
        self.iterations[tag] = list(records)

    @property
    def counts(self) -> dict[int, int]:
        return {tag: len(recs) for tag, recs in self.iterations.items()}

    @property
    def provenance_counts(self) -> dict[str, int]:
        return {
            "sim": sum(len(r) for r in self.iterations.values()),
            "real": len(self.real_records),
        }

    @property
    def total(self) -> int:
        return sum(self.provenance_counts.values())

    def training_records(self) -> list[TrajectoryRecord]:
        out: list[TrajectoryRecord] = []
        for tag in sorted(self.iterations):
            out.extend(r for r in self.iterations[tag] if not r.excluded_from_training)
        out.extend(r for r in self.real_records if not r.excluded_from_training)
        return out


def rollout(
    env: Env,
    policy,
    max_steps: int | None = None,
    seed: int | None = None,
    from_current: bool = False,
    writer: DatasetWriter | None = None,
    iteration: int = 0,
    corrective_of: dict | None = None,
) -> TrajectoryRecord:
    """Roll a policy out to termination/truncation and record the trajectory.

    With from_current=True the environment is not reset (used after state
    restoration); seed is then only a label.
    """
    if from_current:
        obs = env.render_observation()
    else:
        if seed is None:
            raise ValueError("seed required unless rolling out from the current state")
        obs = env.reset(seed)
    if hasattr(policy, "begin_episode"):
        policy.begin_episode(seed if seed is not None else 0)

    budget = max_steps if max_steps is not None else env.task.max_steps
    qs, actions, states, observations = [], [], [], []
    outcome = "failure"
    diagnostic = None
    terminated = False

    for _ in range(budget):
        state_before = env.state.copy()
        obs_before = obs  # o_t pairs with (q_t, a_t, s_t)
        action = np.asarray(policy.act(obs, state_before), dtype=np.float64)
        if not np.isfinite(action).all():
            diagnostic = f"policy {getattr(policy, 'policy_id', '?')} produced non-finite action"
            break
        obs, reward, terminated, truncated, _ = env.step(action)
        qs.append(state_before.q)
        actions.append(action)
        states.append(state_before)
        if writer is not None:
            observations.append(obs_before)
        if terminated or truncated:
            break

    final_state = env.state.copy()
    if terminated:
        outcome = "success"
    elif env.task.partial_credit(final_state, env.assets):
        outcome = "partial"

    if not states:  # policy failed before the first step completed
        states = [env.state.copy()]
        qs = [env.state.q]
        actions = [np.full_like(env.state.q, np.nan)]

    record = TrajectoryRecord(
        q=np.asarray(qs, dtype=np.float32),
        actions=np.asarray(actions, dtype=np.float32),
        states=states,
        final_state=final_state,
        outcome=outcome,
        seed=int(seed) if seed is not None else -1,
        policy_id=str(getattr(policy, "policy_id", "policy")),
        iteration=iteration,
        corrective_of=corrective_of,
    )
    if diagnostic is not None:
        record.excluded_from_training = True
        record.corrective_of = {**(corrective_of or {}), "diagnostic": diagnostic}
    if writer is not None:
        writer.add(record, observations, env.task.cameras)
    return record


def sample_recovery_state(
    failure: TrajectoryRecord,
    solvable,
    rng: np.random.Generator,
) -> tuple[int, EnvState]:
    """Uniform draw over the recorded states where the task is still achievable."""
    if failure.outcome == "success":
        raise ValueError("recovery states are sampled from non-success trajectories")
    candidates = [t for t, s in enumerate(failure.states) if solvable(s)]
    if not candidates:
        raise ValueError("failure recording contains no solvable state")
    index = candidates[int(rng.integers(len(candidates)))]
    return index, failure.states[index]


def restore_and_correct(
    env: Env,
    failure: TrajectoryRecord,
    state_index: int,
    expert,
    iteration: int = 0,
    writer: DatasetWriter | None = None,
    failure_ref: str | None = None,
) -> TrajectoryRecord:
    """Restore the env to a recorded state exactly, then let the expert finish.

    The corrective episode starts exactly at the restored state with a fresh
    step budget; failed corrections are kept but excluded from training.
    """
    target = failure.states[state_index]
    env.restore(target)
    if not env.state.allclose(target, tol=1e-12):
        raise RuntimeError("state restoration mismatch")
    fresh = env.state.copy()
    fresh.step_index = 0
    env.restore(fresh)

    record = rollout(
        env,
        expert,
        seed=failure.seed,
        from_current=True,
        writer=writer,
        iteration=iteration,
        corrective_of={
            "trajectory": failure_ref or f"seed:{failure.seed}",
            "step_index": state_index,
        },
    )
    if record.outcome != "success":
        record.excluded_from_training = True
    return record


def _solvable_for(env: Env):
    return lambda state: env.task.solvable(state, env.assets)


def dagger_iterate(
    envs,
    policy,
    expert,
    per_iter: int,
    iterations: int,
    seed: int = 0,
    eval_episodes: int | None = None,
    eval_seeds=None,
    out_dir=None,
) -> AggregatedDataset:
    """Expert demos first, then per-iteration corrective collection.

    Iteration 1 collects per_iter expert demonstrations. Every later iteration
    evaluates the current policy, identifies all failed trajectories, samples
    recovery states uniformly, and collects per_iter corrective expert
    trajectories from them. If the policy has fit(records), it is refitted on
    the aggregate after each iteration; eval success rates land in .summary.
    """
    if per_iter < 1 or iterations < 1:
        raise ValueError("per_iter and iterations must be >= 1")
    env_list = list(envs.envs) if hasattr(envs, "envs") else [envs]
    env = env_list[0]
    rng = np.random.default_rng((seed, 0xDA66E5))
    solvable = _solvable_for(env)
    dataset = AggregatedDataset()

    def writer_for(tag: str) -> DatasetWriter | None:
        if out_dir is None:
            return None
        return DatasetWriter(
            Path(out_dir) / tag,
            task=env.task.name,
            scene_hash=env.assets.gsdf_hash or "",
            cameras=[
                {"name": c.name, "width": c.width, "height": c.height}
                for c in env.assets.description.cameras
                if c.name in env.task.cameras
            ],
        )

    def refit() -> None:
        if hasattr(policy, "fit"):
            policy.fit(dataset.training_records())

    def run_policy(seeds, tag_name: str, tag: int) -> list[TrajectoryRecord]:
        ewriter = writer_for(tag_name)
        out = []
        for j, s in enumerate(seeds):
            e = env_list[j % len(env_list)]
            out.append(rollout(e, policy, seed=s, writer=ewriter, iteration=tag))
        return out

    def heldout_rate(tag: int) -> None:
        if eval_seeds is None:
            return
        evals = run_policy(list(eval_seeds), f"heldout_{tag:02d}", tag)
        dataset.summary.append(
            {
                "iteration": tag,
                "heldout_episodes": len(evals),
                "success_rate": float(np.mean([r.outcome == "success" for r in evals])),
            }
        )

    demo_seed = int(seed)
    for tag in range(1, iterations + 1):
        writer = writer_for(f"iter_{tag:02d}")
        records: list[TrajectoryRecord] = []

        if tag == 1:
            for j in range(per_iter):
                e = env_list[j % len(env_list)]
                records.append(
                    rollout(e, expert, seed=demo_seed + j, writer=writer, iteration=tag)
                )
        else:
            # Identify all failed trajectories of the current policy on a
            # fresh evaluation stream, then correct from their states.
            n_eval = eval_episodes if eval_episodes is not None else per_iter
            eval_stream = [int(seed) + 100_000 * tag + j for j in range(n_eval)]
            evals = run_policy(eval_stream, f"eval_{tag:02d}", tag)
            failures = [r for r in evals if r.outcome != "success"]
            n_fail = len(failures)
            if not failures:
                warnings.warn(
                    f"iteration {tag}: policy produced no failures; "
                    "collecting fresh expert demonstrations instead"
                )
                for j in range(per_iter):
                    e = env_list[j % len(env_list)]
                    records.append(
                        rollout(e, expert, seed=demo_seed + 10_000 * tag + j,
                                writer=writer, iteration=tag)
                    )
            else:
                for j in range(per_iter):
                    failure = failures[j % n_fail]
                    e = env_list[j % len(env_list)]
                    idx, _ = sample_recovery_state(failure, solvable, rng)
                    records.append(
                        restore_and_correct(
                            e, failure, idx, expert, iteration=tag, writer=writer,
                            failure_ref=f"eval_{tag:02d}/seed:{failure.seed}",
                        )
                    )
            dataset.summary.append(
                {
                    "iteration": tag,
                    "eval_episodes": len(evals),
                    "eval_success_rate": float(np.mean([r.outcome == "success" for r in evals])),
                    "failures": n_fail,
                }
            )

        dataset.add_iteration(tag, records)
        refit()
        heldout_rate(tag)

    if out_dir is not None:
        report = {
            "per_iteration_counts": dataset.counts,
            "provenance": dataset.provenance_counts,
            "summary": dataset.summary,
        }
        Path(out_dir, "report.json").write_text(json.dumps(report, indent=1), encoding="utf-8")
    return dataset


def merge_real(real_root, sim: AggregatedDataset) -> AggregatedDataset:
    """Union real teleoperation data with a simulation aggregate (no dedup of
    trajectories; duplicate dataset imports are flagged by manifest hash)."""
    real_root = Path(real_root)
    manifest_hash = hashlib.sha256((real_root / "manifest.json").read_bytes()).hexdigest()
    _, records = read_dataset(real_root)

    merged = AggregatedDataset(
        iterations={k: list(v) for k, v in sim.iterations.items()},
        real_records=list(sim.real_records),
        import_hashes=list(sim.import_hashes),
        duplicate_imports=list(sim.duplicate_imports),
        summary=list(sim.summary),
    )
    if manifest_hash in merged.import_hashes:
        merged.duplicate_imports.append(manifest_hash)
        warnings.warn(f"dataset {real_root} was already merged (manifest hash match)")
    merged.import_hashes.append(manifest_hash)
    merged.real_records.extend(records)
    return merged
