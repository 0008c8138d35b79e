"""Device and device-control vocabularies."""

import logging
from collections.abc import Iterable
from typing import Any

from smartsense.common import DataError
from smartsense.data.types import Instance

logger = logging.getLogger(__name__)


class Vocabulary:
    """Bidirectional name <-> index maps for devices and device controls.

    A device control is identified by its (device name, control name) pair, so
    every control index also determines its device. Indices are dense from 0.
    A frozen vocabulary refuses new names; lookups of unknown names return None.
    """

    def __init__(self):
        self._device_names: list[str] = []
        self._device_index: dict[str, int] = {}
        self._control_keys: list[tuple[str, str]] = []
        self._control_index: dict[tuple[str, str], int] = {}
        self._control_device: list[int] = []
        self.counts: list[int] = []
        self.frozen = False

    @property
    def n_devices(self) -> int:
        return len(self._device_names)

    @property
    def n_controls(self) -> int:
        return len(self._control_keys)

    @property
    def device_names(self) -> list[str]:
        return list(self._device_names)

    def add_device(self, name: str) -> int:
        if name in self._device_index:
            return self._device_index[name]
        if self.frozen:
            raise DataError(f"Cannot add device '{name}' to a frozen vocabulary")
        index = len(self._device_names)
        self._device_names.append(name)
        self._device_index[name] = index
        return index

    def add_control(self, device: str, control: str) -> int:
        key = (device, control)
        if key in self._control_index:
            return self._control_index[key]
        if self.frozen:
            raise DataError(
                f"Cannot add control '{device}:{control}' to a frozen vocabulary"
            )
        device_id = self.add_device(device)
        index = len(self._control_keys)
        self._control_keys.append(key)
        self._control_index[key] = index
        self._control_device.append(device_id)
        self.counts.append(0)
        return index

    def extend(self, controls: Iterable[tuple[str, str]]) -> None:
        """Add (device, control) pairs in sorted order, skipping known ones."""
        for device, control in sorted(set(controls)):
            self.add_control(device, control)

    def freeze(self) -> "Vocabulary":
        self.frozen = True
        return self

    def device_id(self, name: str) -> int | None:
        return self._device_index.get(name)

    def control_id(self, device: str, control: str) -> int | None:
        return self._control_index.get((device, control))

    def device_name(self, device_id: int) -> str:
        return self._device_names[device_id]

    def control_key(self, control_id: int) -> tuple[str, str]:
        return self._control_keys[control_id]

    def control_label(self, control_id: int) -> str:
        device, control = self._control_keys[control_id]
        return f"{device}:{control}"

    def device_of(self, control_id: int) -> int:
        return self._control_device[control_id]

    @property
    def control_devices(self) -> list[int]:
        """Owning device id of every control, indexed by control id."""
        return list(self._control_device)

    def check_instances(self, instances: Iterable[Instance]) -> None:
        """Raise DataError unless every history event names its control's device."""
        for position, instance in enumerate(instances):
            for event in instance.history:
                if not 0 <= event.control_id < self.n_controls:
                    raise DataError(
                        f"Instance {position}: control {event.control_id} is not in the vocabulary"
                    )
                owner = self._control_device[event.control_id]
                if event.device_id != owner:
                    raise DataError(
                        f"Instance {position}: control {self.control_label(event.control_id)} "
                        f"belongs to device {owner}, not {event.device_id}"
                    )

    def count_controls(self, instances: Iterable[Instance]) -> list[int]:
        """Reset counts to the target-label frequencies of instances."""
        counts = [0] * self.n_controls
        for instance in instances:
            counts[instance.target_control_id] += 1
        self.counts = counts
        return counts

    def to_dict(self) -> dict[str, Any]:
        return {
            "devices": list(self._device_names),
            "controls": [[device, control] for device, control in self._control_keys],
            "counts": list(self.counts),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any], frozen: bool = True) -> "Vocabulary":
        vocab = cls()
        for name in data["devices"]:
            vocab.add_device(name)
        for device, control in data["controls"]:
            if device not in vocab._device_index:
                raise DataError(f"Control '{device}:{control}' has an unknown device")
            vocab.add_control(device, control)
        counts = data.get("counts") or [0] * vocab.n_controls
        if len(counts) != vocab.n_controls or any(c < 0 for c in counts):
            raise DataError("Vocabulary counts do not match the control table")
        vocab.counts = [int(c) for c in counts]
        vocab.frozen = frozen
        return vocab

    def __repr__(self) -> str:
        state = "frozen" if self.frozen else "open"
        return (
            f"Vocabulary({self.n_devices} devices, {self.n_controls} controls, {state})"
        )
