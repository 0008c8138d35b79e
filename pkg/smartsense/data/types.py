"""Domain records of the data pipeline."""

from dataclasses import dataclass, field
from typing import NamedTuple


@dataclass(frozen=True, slots=True)
class ActionEvent:
    """One device-control event with its temporal context."""

    device_id: int
    control_id: int
    dow: int
    hour_bin: int

    def as_row(self) -> tuple[int, int, int, int]:
        """Indices in action-encoder slot order (device, control, dow, hour)."""
        return (self.device_id, self.control_id, self.dow, self.hour_bin)


@dataclass(slots=True)
class Session:
    """Time-ordered events sharing one session id."""

    session_id: str
    events: list[tuple[int, ActionEvent]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.events)


@dataclass(frozen=True, slots=True)
class Instance:
    """A fixed-length training window: W-1 input events plus the target."""

    history: tuple[ActionEvent, ...]
    target_dow: int
    target_hour_bin: int
    target_control_id: int


@dataclass(frozen=True, slots=True)
class Routine:
    """An ordered group of devices sharing one user intention."""

    routine_id: str
    devices: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.devices)


class DatasetManifest(NamedTuple):
    tz_offset_minutes: int
    window_length: int
