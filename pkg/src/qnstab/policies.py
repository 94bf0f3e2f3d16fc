"""Per-station queue configurations and their transition operators.

Three encodings of a station's content, one per service discipline family:

* ``FcfsConfig`` — the full ordered sequence of class labels, head first.
* ``SbpConfig`` — static buffer priority, non-preemptive: the class at the
  server (head) plus a count vector of buffered jobs.  When the head
  departs, the highest-priority buffered class is promoted.
* ``PsConfig`` — processor sharing: a count vector only.  Jobs of one class
  are interchangeable, so counts are a complete state description.

Each config answers three questions: what happens when a class-k job is
inserted, what happens when one is deleted, and how the server's unit
capacity is allocated across classes (the weights W_k).  Operations are
pure — they return new configs and never mutate.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Union

from .network import NetworkSpec, StationPolicy


@dataclass(frozen=True, eq=True)
class FcfsConfig:
    classes: tuple[int, ...]
    queue: deque = field(default_factory=deque)


@dataclass(frozen=True)
class SbpConfig:
    classes: tuple[int, ...]
    priority: tuple[int, ...]  # permutation of classes, highest first
    head: int | None = None
    buffer: tuple[int, ...] = ()  # counts aligned with `classes`

    def __post_init__(self):
        if not self.buffer:
            object.__setattr__(self, "buffer", (0,) * len(self.classes))


@dataclass(frozen=True)
class PsConfig:
    classes: tuple[int, ...]
    discipline: str  # equalitarian | proportional | preferential
    priority: tuple[int, ...] | None = None
    counts: tuple[int, ...] = ()

    def __post_init__(self):
        if not self.counts:
            object.__setattr__(self, "counts", (0,) * len(self.classes))


QueueConfig = Union[FcfsConfig, SbpConfig, PsConfig]


def empty_config(spec: NetworkSpec, station: int) -> QueueConfig:
    """The empty configuration of `station` under its policy."""
    classes = spec.classes_at(station)
    pol: StationPolicy = spec.station_policies[station]
    if pol.kind == "fcfs":
        return FcfsConfig(classes)
    if pol.kind == "sbp":
        return SbpConfig(classes, pol.priority)
    discipline = pol.kind.removeprefix("ps-")
    return PsConfig(classes, discipline, pol.priority)


def job_count(config: QueueConfig) -> int:
    if isinstance(config, FcfsConfig):
        return len(config.queue)
    if isinstance(config, SbpConfig):
        return (0 if config.head is None else 1) + sum(config.buffer)
    return sum(config.counts)


def insert(config: QueueConfig, cls: int) -> QueueConfig:
    """Add one class-`cls` job: FCFS appends at the tail, SBP seeds the head
    if idle (else buffers), PS increments the count."""
    if cls not in config.classes:
        raise ValueError(f"class {cls} is not served at this station")
    if isinstance(config, FcfsConfig):
        q = deque(config.queue)
        q.append(cls)
        return FcfsConfig(config.classes, q)
    if isinstance(config, SbpConfig):
        if config.head is None:
            return SbpConfig(config.classes, config.priority, cls, config.buffer)
        buf = list(config.buffer)
        buf[config.classes.index(cls)] += 1
        return SbpConfig(config.classes, config.priority, config.head, tuple(buf))
    counts = list(config.counts)
    counts[config.classes.index(cls)] += 1
    return PsConfig(config.classes, config.discipline, config.priority, tuple(counts))


def delete(config: QueueConfig, cls: int) -> QueueConfig:
    """Remove one class-`cls` job that has just completed service.

    FCFS removes the head when the class matches; a mismatched class is a
    silent no-op by definition of the operator (the engine never issues
    such a call — see `service_allocation`).  SBP removes the head and
    promotes the highest-priority buffered class.  PS decrements the count.
    """
    if isinstance(config, FcfsConfig):
        if not config.queue:
            raise ValueError("delete on empty queue")
        if config.queue[0] != cls:
            return config  # the operator leaves foreign sequences alone
        q = deque(config.queue)
        q.popleft()
        return FcfsConfig(config.classes, q)
    if isinstance(config, SbpConfig):
        if config.head is None:
            raise ValueError("delete on empty queue")
        if config.head != cls:
            raise ValueError(f"class {cls} is not at the server (head={config.head})")
        buf = list(config.buffer)
        for p in config.priority:  # highest priority first
            j = config.classes.index(p)
            if buf[j] > 0:
                buf[j] -= 1
                return SbpConfig(config.classes, config.priority, p, tuple(buf))
        return SbpConfig(config.classes, config.priority, None, tuple(buf))
    j = config.classes.index(cls)
    if config.counts[j] == 0:
        raise ValueError(f"delete of class {cls} with zero count")
    counts = list(config.counts)
    counts[j] -= 1
    return PsConfig(config.classes, config.discipline, config.priority, tuple(counts))


def service_allocation(config: QueueConfig) -> dict[int, float]:
    """The weights W_k: how the server splits its unit capacity.

    Empty config -> all weights 0.  Nonempty -> weights sum to exactly 1
    (the server never idles while jobs are present).
    """
    w = {k: 0.0 for k in config.classes}
    if isinstance(config, FcfsConfig):
        if config.queue:
            w[config.queue[0]] = 1.0
        return w
    if isinstance(config, SbpConfig):
        if config.head is not None:
            w[config.head] = 1.0
        return w
    counts = config.counts
    total = sum(counts)
    if total == 0:
        return w
    if config.discipline == "equalitarian":
        support = [k for k, x in zip(config.classes, counts) if x > 0]
        share = 1.0 / len(support)
        for k in support:
            w[k] = share
    elif config.discipline == "proportional":
        for k, x in zip(config.classes, counts):
            if x > 0:
                w[k] = x / total
    elif config.discipline == "preferential":
        for p in config.priority:
            if counts[config.classes.index(p)] > 0:
                w[p] = 1.0
                break
    else:  # pragma: no cover
        raise ValueError(f"unknown discipline {config.discipline!r}")
    return w
