"""
Sample-and-hold communication with event triggering.

Each signal (station current ``y_i``, central setpoint ``x_p_i``, reported
ac-GFM conductance ``G_Pi``) travels over its own channel. A channel
transmits when the minimum dwell ``T_min`` has elapsed and either the value
drifted more than ``sigma`` from the held sample or the heartbeat ``T_max``
expired. Conditions are checked at integrator step boundaries.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

# slack for comparing elapsed times built from integer step counts
TIME_EPS = 1e-9

KINDS = ("y", "x_p", "G_P")


@dataclass(frozen=True)
class TriggerConfig:
    sigma_y: float = 5.0
    sigma_x: float = 20.0
    sigma_G: float = 1e-4
    T_min: float = 0.01
    T_max: float = 1.0

    def __post_init__(self):
        if not 0 < self.T_min <= self.T_max:
            raise ValueError("require 0 < T_min <= T_max")
        if min(self.sigma_y, self.sigma_x, self.sigma_G) < 0:
            raise ValueError("thresholds must be nonnegative")

    def sigma(self, kind: str) -> float:
        return {"y": self.sigma_y, "x_p": self.sigma_x, "G_P": self.sigma_G}[kind]


@dataclass
class SampledChannel:
    kind: str
    node_id: str
    held_value: float = float("nan")
    last_sample_time: float = float("-inf")
    trigger_log: list = field(default_factory=list)
    value_log: list = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown channel kind {self.kind!r}")

    @property
    def started(self) -> bool:
        return bool(self.trigger_log)

    def sample(self, value: float, now: float):
        self.held_value = float(value)
        self.last_sample_time = float(now)
        self.trigger_log.append(float(now))
        self.value_log.append(float(value))

    def maybe_trigger(self, value: float, now: float, cfg: TriggerConfig) -> bool:
        """Event rule; the first call always samples."""
        if not self.started:
            self.sample(value, now)
            return True
        elapsed = now - self.last_sample_time
        if elapsed < -TIME_EPS:
            raise ValueError("time went backwards on channel")
        if elapsed < cfg.T_min - TIME_EPS:
            return False
        if abs(value - self.held_value) > cfg.sigma(self.kind) or elapsed > cfg.T_max + TIME_EPS:
            self.sample(value, now)
            return True
        return False

    def periodic_trigger(self, value: float, now: float, period: float) -> bool:
        if period <= 0:
            raise ValueError("period must be positive")
        if not self.started or now - self.last_sample_time >= period - TIME_EPS:
            self.sample(value, now)
            return True
        return False


def maybe_trigger(channel: SampledChannel, value: float, now: float,
                  cfg: TriggerConfig) -> tuple[SampledChannel, bool]:
    return channel, channel.maybe_trigger(value, now, cfg)


def periodic_trigger(channel: SampledChannel, value: float, now: float,
                     period: float) -> tuple[SampledChannel, bool]:
    return channel, channel.periodic_trigger(value, now, period)


class ChannelBank:
    """All channels of one kind, indexed like the signal vector they carry."""

    def __init__(self, kind: str, node_ids: Iterable[str]):
        self.kind = kind
        self.channels = [SampledChannel(kind, str(i)) for i in node_ids]

    def held(self) -> np.ndarray:
        return np.array([c.held_value for c in self.channels])

    def update(self, values, now: float, mode: str, cfg: TriggerConfig, period: float) -> int:
        fired = 0
        for c, v in zip(self.channels, values):
            if mode == "event":
                fired += c.maybe_trigger(float(v), now, cfg)
            else:
                fired += c.periodic_trigger(float(v), now, period)
        return fired

    def count(self) -> int:
        return sum(len(c.trigger_log) for c in self.channels)


@dataclass
class TriggerStats:
    count: int
    min_interval: float
    mean_interval: float
    max_interval: float
    violations: int


def trigger_report(channels: Iterable[SampledChannel], T_min: float | None = None,
                   T_max: float | None = None, step: float = 0.0) -> dict:
    """Per-kind trigger counts and inter-event statistics.

    ``violations`` counts intervals outside ``[T_min, T_max + step]`` when the
    bounds are given.
    """
    by_kind: dict[str, list] = {k: [] for k in KINDS}
    counts = {k: 0 for k in KINDS}
    for c in channels:
        counts[c.kind] += len(c.trigger_log)
        by_kind[c.kind].extend(np.diff(c.trigger_log).tolist())
    report = {}
    for k in KINDS:
        iv = np.asarray(by_kind[k])
        viol = 0
        if iv.size and T_min is not None:
            viol += int(np.sum(iv < T_min - TIME_EPS))
        if iv.size and T_max is not None:
            viol += int(np.sum(iv > T_max + step + TIME_EPS))
        report[k] = TriggerStats(
            count=counts[k],
            min_interval=float(iv.min()) if iv.size else float("nan"),
            mean_interval=float(iv.mean()) if iv.size else float("nan"),
            max_interval=float(iv.max()) if iv.size else float("nan"),
            violations=viol,
        )
    return report


def format_trigger_report(report: dict) -> str:
    lines = []
    for k, s in report.items():
        lines += [f"{k}.count = {s.count}", f"{k}.min_interval = {s.min_interval:.9g}",
                  f"{k}.mean_interval = {s.mean_interval:.9g}",
                  f"{k}.max_interval = {s.max_interval:.9g}", f"{k}.violations = {s.violations}"]
    return "\n".join(lines) + "\n"


def write_trigger_csv(path, channels: Iterable[SampledChannel]):
    """Rows ``time_s, channel_kind, node_id, value`` sorted by time then channel order."""
    rows = []
    for order, c in enumerate(channels):
        for t, v in zip(c.trigger_log, c.value_log):
            rows.append((t, order, c.kind, c.node_id, v))
    rows.sort(key=lambda r: (r[0], r[1]))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time_s", "channel_kind", "node_id", "value"])
        for t, _, kind, node, v in rows:
            w.writerow([f"{t:.9g}", kind, node, f"{v:.9g}"])
