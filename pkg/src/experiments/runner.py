from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Generic, List, Optional, Tuple, TypeVar

from tqdm import tqdm

from src import __version__
from src.errors import LabError, ReplicaShortfallError
from src.experiments.estimators import Criterion
from src.utils.fs import content_hash
from src.utils.logging import setup_logger


logger = setup_logger()

T = TypeVar("T")
ProgressFn = Callable[[str, float, Dict[str, Any]], None]


@dataclass
class RunManifest:
    experiment: str
    seed: int
    config_hash: str
    version: str = __version__
    timestamp: float = field(default_factory=time.time)
    replicas: int = 0
    excluded: int = 0

    def to_json(self, with_timestamp: bool = True) -> Dict[str, Any]:
        out: Dict[str, Any] = {
            "experiment": self.experiment,
            "seed": self.seed,
            "config_hash": self.config_hash,
            "version": self.version,
            "replicas": self.replicas,
            "excluded": self.excluded,
        }
        if with_timestamp:
            out["timestamp"] = self.timestamp
        return out


def make_manifest(experiment: str, seed: int, config: Any) -> RunManifest:
    return RunManifest(experiment=experiment, seed=int(seed), config_hash=content_hash(config))


@dataclass
class ReplicaBatch(Generic[T]):
    """Successful replica results in replica order, plus the failures that were excluded."""

    indices: List[int]
    values: List[T]
    failures: Dict[int, str] = field(default_factory=dict)

    @property
    def excluded(self) -> int:
        return len(self.failures)

    def __len__(self) -> int:
        return len(self.values)

    def require(self, minimum: int, stage: str) -> None:
        if len(self.values) < minimum:
            raise ReplicaShortfallError(stage, len(self.values), minimum, self.failures)


def _call(task: Callable[[int], T], replica: int) -> Tuple[int, Optional[T], Optional[str]]:
    try:
        return replica, task(replica), None
    except LabError as e:
        return replica, None, f"{type(e).__name__}: {e}"


def run_replicas(
    task: Callable[[int], T],
    replicas: int,
    threads: int = 1,
    desc: str = "replicas",
    progress_cb: Optional[ProgressFn] = None,
    stage: str = "replicas",
) -> ReplicaBatch[T]:
    """Run task(0..replicas-1), each replica seeding itself from its own index.

    `task` must be picklable when threads > 1 (module-level function or functools.partial).
    Results are reduced in replica order, so the thread count never changes the output.
    """
    if replicas < 0:
        raise ValueError(f"replicas must be >= 0, got {replicas}")
    outcomes: List[Tuple[int, Optional[T], Optional[str]]] = []

    def _tick(done: int) -> None:
        if progress_cb and replicas:
            progress_cb(stage, 100.0 * done / replicas, {"done": done, "total": replicas})

    if threads <= 1:
        for r in tqdm(range(replicas), desc=desc):
            outcomes.append(_call(task, r))
            _tick(len(outcomes))
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(_call, task, r) for r in range(replicas)]
            for fut in tqdm(as_completed(futures), total=replicas, desc=desc):
                outcomes.append(fut.result())
                _tick(len(outcomes))

    outcomes.sort(key=lambda o: o[0])
    batch: ReplicaBatch[T] = ReplicaBatch(indices=[], values=[])
    for r, value, err in outcomes:
        if err is not None:
            batch.failures[r] = err
            continue
        batch.indices.append(r)
        batch.values.append(value)  # type: ignore[arg-type]
    if batch.failures:
        first = min(batch.failures)
        logger.warning(f"[{desc}] excluded {batch.excluded}/{replicas} replicas (first: #{first} {batch.failures[first]})")
    return batch


@dataclass
class ExperimentResult:
    """Criteria plus the flat tables an experiment writes (file stem -> rows)."""

    experiment: str
    criteria: List[Criterion]
    tables: Dict[str, List[Dict[str, Any]]] = field(default_factory=dict)
    excluded: int = 0
    extra: Dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.criteria)
