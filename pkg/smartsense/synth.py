"""Synthetic smart-home logs with planted structure and an exact oracle.

Every emitted event carries the exact distribution it was drawn from, given
the generator's full state (previous control, routine progress, context).
Ranking controls by that distribution is the Bayes-optimal predictor, so the
expected metrics under it bound what any model can reach on the data.

Per step the intended control comes from, in order of precedence:
    1. the next device of a routine in progress (its control_0);
    2. a routine start, each routine with its trigger_p;
    3. the first pattern rule matching (previous control, new context), with fire_p;
    4. the base distribution of the event's hour bin.
With capricious_p the intent is replaced by a uniform draw over controls of
devices outside the active routine/rule devices; routine progress is kept.
"""

import dataclasses
import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, NamedTuple

import numpy as np

from smartsense.common import SynthSpecError
from smartsense.constants import (
    DEFAULT_WINDOW_LENGTH,
    METRIC_KS,
    N_DOW,
    N_HOUR_BINS,
)
from smartsense.data.pipeline import LOG_COLUMNS, ROUTINE_COLUMNS, ROUTINE_SEPARATOR, bin_timestamp
from smartsense.export.utils import ensure_directory, format_csv, write_json

logger = logging.getLogger(__name__)

SYNTH_EPOCH = 1637539200  # 2021-11-22 00:00 UTC, a Monday
SESSION_START_SPREAD = 28 * 24 * 3600
GAP_MINUTES = (10, 120)

LOG_NAME = "log.csv"
ROUTINES_NAME = "routines.csv"
MANIFEST_NAME = "manifest.json"
SIDECAR_NAME = "synth.json"


@dataclass(frozen=True)
class PatternRule:
    """After trigger_control, emit next_control with fire_p in matching contexts."""

    trigger_control: int
    next_control: int
    fire_p: float = 1.0
    dows: frozenset[int] | None = None
    hour_bins: frozenset[int] | None = None

    def matches(self, previous: int | None, dow: int, hour_bin: int) -> bool:
        return (
            previous == self.trigger_control
            and (self.dows is None or dow in self.dows)
            and (self.hour_bins is None or hour_bin in self.hour_bins)
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "trigger_control": self.trigger_control,
            "next_control": self.next_control,
            "fire_p": self.fire_p,
            "dows": sorted(self.dows) if self.dows is not None else None,
            "hour_bins": sorted(self.hour_bins) if self.hour_bins is not None else None,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "PatternRule":
        dows = data.get("dows")
        hour_bins = data.get("hour_bins")
        return cls(
            trigger_control=int(data["trigger_control"]),
            next_control=int(data["next_control"]),
            fire_p=float(data.get("fire_p", 1.0)),
            dows=frozenset(int(v) for v in dows) if dows is not None else None,
            hour_bins=frozenset(int(v) for v in hour_bins) if hour_bins is not None else None,
        )


@dataclass(frozen=True)
class RoutineSpec:
    devices: tuple[int, ...]
    trigger_p: float

    def to_dict(self) -> dict[str, Any]:
        return {"devices": list(self.devices), "trigger_p": self.trigger_p}


@dataclass(frozen=True)
class SynthSpec:
    """Sizes, planted structure and noise of one synthetic dataset.

    covering_rules replaces `rules` with one rule per (control, hour group),
    each pointing at a seeded control of another device with rule_fire_p.
    """

    n_devices: int
    n_controls_per_device: int
    n_sessions: int
    session_len: int
    rules: tuple[PatternRule, ...] = ()
    routine_specs: tuple[RoutineSpec, ...] = ()
    capricious_p: float = 0.0
    seed: int = 0
    window_length: int = DEFAULT_WINDOW_LENGTH
    tz_offset_minutes: int = 0
    base_concentration: float = 1.0
    covering_rules: bool = False
    rule_fire_p: float = 1.0
    hour_groups: int = 2

    @property
    def n_controls(self) -> int:
        return self.n_devices * self.n_controls_per_device

    def violations(self) -> list[str]:
        problems = []
        for name in ("n_devices", "n_controls_per_device", "n_sessions", "session_len"):
            if getattr(self, name) < 1:
                problems.append(f"{name} must be positive")
        if self.window_length < 2:
            problems.append("window_length must be >= 2")
        if self.session_len < self.window_length:
            problems.append(
                f"session_len ({self.session_len}) must be >= window_length ({self.window_length})"
            )
        for name in ("capricious_p", "rule_fire_p"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                problems.append(f"{name} must be in [0, 1]")
        if self.base_concentration <= 0:
            problems.append("base_concentration must be > 0")
        if not 1 <= self.hour_groups <= N_HOUR_BINS:
            problems.append(f"hour_groups must be in [1, {N_HOUR_BINS}]")
        if self.covering_rules and self.n_devices < 2:
            problems.append("covering rules need at least 2 devices")
        for i, rule in enumerate(self.rules):
            for name in ("trigger_control", "next_control"):
                if not 0 <= getattr(rule, name) < self.n_controls:
                    problems.append(f"rule {i}: {name} out of range")
            if not 0.0 <= rule.fire_p <= 1.0:
                problems.append(f"rule {i}: fire_p must be in [0, 1]")
            if rule.dows is not None and not all(0 <= v < N_DOW for v in rule.dows):
                problems.append(f"rule {i}: dows must be in [0, {N_DOW})")
            if rule.hour_bins is not None and not all(
                0 <= v < N_HOUR_BINS for v in rule.hour_bins
            ):
                problems.append(f"rule {i}: hour_bins must be in [0, {N_HOUR_BINS})")
        for i, routine in enumerate(self.routine_specs):
            if len(routine.devices) < 2:
                problems.append(f"routine {i}: needs at least 2 devices")
            if len(set(routine.devices)) != len(routine.devices):
                problems.append(f"routine {i}: devices must be distinct")
            if not all(0 <= d < self.n_devices for d in routine.devices):
                problems.append(f"routine {i}: device out of range")
            if not 0.0 <= routine.trigger_p <= 1.0:
                problems.append(f"routine {i}: trigger_p must be in [0, 1]")
        return problems

    def validate(self) -> "SynthSpec":
        problems = self.violations()
        if problems:
            raise SynthSpecError(problems)
        return self

    def to_dict(self) -> dict[str, Any]:
        data = {
            f.name: getattr(self, f.name)
            for f in dataclasses.fields(self)
            if f.name not in ("rules", "routine_specs", "covering_rules")
        }
        data["rules"] = "covering" if self.covering_rules else [r.to_dict() for r in self.rules]
        data["routine_specs"] = [r.to_dict() for r in self.routine_specs]
        return data

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SynthSpec":
        """Build and validate a spec from its JSON form.

        Raises:
            SynthSpecError: Listing every unknown key, malformed field or violation.
        """
        known = {f.name for f in dataclasses.fields(cls)} - {"covering_rules"}
        problems = [f"unknown key '{key}'" for key in sorted(set(data) - known)]
        for name in ("n_devices", "n_controls_per_device", "n_sessions", "session_len"):
            if name not in data:
                problems.append(f"missing required key '{name}'")
        if problems:
            raise SynthSpecError(problems)

        values = dict(data)
        rules = values.pop("rules", [])
        try:
            if rules == "covering":
                values["covering_rules"] = True
                values["rules"] = ()
            else:
                values["rules"] = tuple(PatternRule.from_dict(r) for r in rules)
            values["routine_specs"] = tuple(
                RoutineSpec(tuple(int(d) for d in r["devices"]), float(r.get("trigger_p", 0.0)))
                for r in values.pop("routine_specs", [])
            )
            spec = cls(**values)
        except (KeyError, TypeError, ValueError) as e:
            raise SynthSpecError([f"malformed spec: {e}"]) from e
        return spec.validate()


def device_name(device: int) -> str:
    return f"device_{device:02d}"


def control_name(j: int) -> str:
    return f"control_{j}"


def make_covering_rules(
    n_devices: int,
    n_controls_per_device: int,
    fire_p: float,
    hour_groups: int,
    rng: np.random.Generator,
) -> list[PatternRule]:
    """One rule per (control, hour group), each leading to another device's control."""
    n_controls = n_devices * n_controls_per_device
    groups = np.array_split(np.arange(N_HOUR_BINS), hour_groups)
    rules = []
    for control in range(n_controls):
        device = control // n_controls_per_device
        candidates = [c for c in range(n_controls) if c // n_controls_per_device != device]
        for group in groups:
            rules.append(
                PatternRule(
                    trigger_control=control,
                    next_control=int(rng.choice(candidates)),
                    fire_p=fire_p,
                    hour_bins=frozenset(int(h) for h in group),
                )
            )
    return rules


@dataclass(frozen=True)
class SyntheticEvent:
    timestamp: int
    control: int
    dow: int
    hour_bin: int
    distribution: np.ndarray = field(repr=False)


@dataclass
class SyntheticSession:
    session_id: str
    events: list[SyntheticEvent] = field(default_factory=list)


class _Branch(NamedTuple):
    weight: float
    intent: np.ndarray
    active_devices: frozenset[int]
    kind: str  # "continue", "start", "rule" or "base"
    routine: int | None = None


class _Simulator:
    def __init__(self, spec: SynthSpec):
        self.spec = spec
        self.rng = np.random.default_rng(spec.seed)
        n = spec.n_controls
        self.base = self.rng.dirichlet(np.full(n, spec.base_concentration), size=N_HOUR_BINS)
        if spec.covering_rules:
            self.rules = make_covering_rules(
                spec.n_devices,
                spec.n_controls_per_device,
                spec.rule_fire_p,
                spec.hour_groups,
                self.rng,
            )
        else:
            self.rules = list(spec.rules)
        self.rules_by_trigger: dict[int, list[PatternRule]] = {}
        for rule in self.rules:
            self.rules_by_trigger.setdefault(rule.trigger_control, []).append(rule)
        self.control_device = np.arange(n) // spec.n_controls_per_device

    def _one_hot(self, control: int) -> np.ndarray:
        vector = np.zeros(self.spec.n_controls)
        vector[control] = 1.0
        return vector

    def _uniform_outside(self, devices: frozenset[int]) -> np.ndarray:
        allowed = ~np.isin(self.control_device, list(devices))
        if not allowed.any():
            allowed[:] = True
        return allowed / allowed.sum()

    def _first_control(self, device: int) -> int:
        return device * self.spec.n_controls_per_device

    def branches(
        self,
        previous: int | None,
        pending: tuple[int, ...],
        routine_devices: frozenset[int],
        dow: int,
        hour_bin: int,
    ) -> list[_Branch]:
        if pending:
            return [
                _Branch(
                    1.0,
                    self._one_hot(self._first_control(pending[0])),
                    routine_devices,
                    "continue",
                )
            ]
        branches = []
        remaining = 1.0
        for index, routine in enumerate(self.spec.routine_specs):
            weight = remaining * routine.trigger_p
            if weight > 0:
                branches.append(
                    _Branch(
                        weight,
                        self._one_hot(self._first_control(routine.devices[0])),
                        frozenset(routine.devices),
                        "start",
                        index,
                    )
                )
            remaining -= weight
        rule = next(
            (
                r
                for r in self.rules_by_trigger.get(previous, ())
                if r.matches(previous, dow, hour_bin)
            ),
            None,
        )
        if rule is not None:
            weight = remaining * rule.fire_p
            if weight > 0:
                devices = frozenset(
                    {
                        int(self.control_device[rule.trigger_control]),
                        int(self.control_device[rule.next_control]),
                    }
                )
                branches.append(_Branch(weight, self._one_hot(rule.next_control), devices, "rule"))
            remaining -= weight
        if remaining > 1e-15:
            branches.append(_Branch(remaining, self.base[hour_bin], frozenset(), "base"))
        return branches

    def distribution(self, branches: Sequence[_Branch]) -> np.ndarray:
        cp = self.spec.capricious_p
        total = np.zeros(self.spec.n_controls)
        for branch in branches:
            total += branch.weight * (
                (1.0 - cp) * branch.intent + cp * self._uniform_outside(branch.active_devices)
            )
        return total / total.sum()

    def session(self, session_id: str) -> SyntheticSession:
        spec = self.spec
        rng = self.rng
        timestamp = SYNTH_EPOCH + int(rng.integers(0, SESSION_START_SPREAD))
        previous: int | None = None
        pending: tuple[int, ...] = ()
        routine_devices: frozenset[int] = frozenset()
        session = SyntheticSession(session_id)

        for step in range(spec.session_len):
            if step > 0:
                timestamp += 60 * int(rng.integers(GAP_MINUTES[0], GAP_MINUTES[1] + 1))
            dow, hour_bin = bin_timestamp(timestamp, spec.tz_offset_minutes)
            branches = self.branches(previous, pending, routine_devices, dow, hour_bin)
            distribution = self.distribution(branches)

            weights = np.array([b.weight for b in branches])
            branch = branches[int(rng.choice(len(branches), p=weights / weights.sum()))]
            capricious = rng.random() < spec.capricious_p
            if capricious:
                source = self._uniform_outside(branch.active_devices)
            else:
                source = branch.intent
            control = int(rng.choice(spec.n_controls, p=source))

            if branch.kind == "start":
                devices = spec.routine_specs[branch.routine].devices
                routine_devices = frozenset(devices)
                pending = devices if capricious else devices[1:]
            elif branch.kind == "continue" and not capricious:
                pending = pending[1:]
            if not pending:
                routine_devices = frozenset()

            session.events.append(SyntheticEvent(timestamp, control, dow, hour_bin, distribution))
            previous = control
        return session


def simulate(spec: SynthSpec) -> list[SyntheticSession]:
    """Sample every session of the spec, each event with its true distribution."""
    spec.validate()
    simulator = _Simulator(spec)
    width = max(5, len(str(spec.n_sessions)))
    return [simulator.session(f"s{index:0{width}d}") for index in range(spec.n_sessions)]


def bayes_optimal(sessions: Sequence[SyntheticSession], window_length: int) -> dict[str, float]:
    """Expected mAP@k / HR@k of ranking by the true distribution at window targets.

    Ranking uses descending probability with ascending-index tie-break; the
    expectation is over the target drawn from that same distribution.
    """
    cumulative_map = {k: 0.0 for k in METRIC_KS}
    cumulative_hr = {k: 0.0 for k in METRIC_KS}
    positions = 0
    for session in sessions:
        for event in session.events[window_length - 1 :]:
            p = event.distribution
            ranked = p[np.argsort(-p, kind="stable")]
            for k in METRIC_KS:
                top = ranked[:k]
                cumulative_hr[k] += float(top.sum())
                cumulative_map[k] += float(np.sum(top / np.arange(1, len(top) + 1)))
            positions += 1
    result: dict[str, float] = {}
    for k in METRIC_KS:
        result[f"map{k}"] = cumulative_map[k] / positions if positions else 0.0
    for k in METRIC_KS:
        result[f"hr{k}"] = cumulative_hr[k] / positions if positions else 0.0
    result["positions"] = positions
    return result


@dataclass
class SyntheticDataset:
    log_csv: str
    routines_csv: str
    bayes_optimal: dict[str, float]
    sessions: list[SyntheticSession] = field(repr=False)


def generate(spec: SynthSpec) -> SyntheticDataset:
    """Render a spec as log and routine CSV text plus its Bayes-optimal metrics."""
    sessions = simulate(spec)
    n_cpd = spec.n_controls_per_device
    log_rows = [
        {
            "session_id": session.session_id,
            "timestamp": event.timestamp,
            "device": device_name(event.control // n_cpd),
            "control": control_name(event.control % n_cpd),
        }
        for session in sessions
        for event in session.events
    ]
    routine_rows = [
        {
            "routine_id": f"routine_{index}",
            "devices": ROUTINE_SEPARATOR.join(device_name(d) for d in routine.devices),
        }
        for index, routine in enumerate(spec.routine_specs)
    ]
    oracle = bayes_optimal(sessions, spec.window_length)
    logger.debug(
        "Generated %d sessions, %d events; oracle mAP@1 %.4f",
        len(sessions),
        len(log_rows),
        oracle["map1"],
    )
    return SyntheticDataset(
        log_csv=format_csv(log_rows, LOG_COLUMNS),
        routines_csv=format_csv(routine_rows, ROUTINE_COLUMNS),
        bayes_optimal=oracle,
        sessions=sessions,
    )


def write_synthetic(spec: SynthSpec, out_dir) -> SyntheticDataset:
    """Write log.csv, routines.csv, manifest.json and synth.json to out_dir."""
    dataset = generate(spec)
    out = ensure_directory(out_dir)
    (out / LOG_NAME).write_text(dataset.log_csv, encoding="utf-8")
    (out / ROUTINES_NAME).write_text(dataset.routines_csv, encoding="utf-8")
    write_json(
        {"tz_offset_minutes": spec.tz_offset_minutes, "window_length": spec.window_length},
        out,
        MANIFEST_NAME,
    )
    write_json({"bayes_optimal": dataset.bayes_optimal, "spec": spec.to_dict()}, out, SIDECAR_NAME)
    logger.info("Wrote synthetic dataset to %s", Path(out))
    return dataset
