"""Named parameter collections."""

from __future__ import annotations

from typing import Iterator, Mapping

import numpy as np

from ..errors import DimensionError, NumericError
from .tape import Tape, Var


class ParameterSet(Mapping[str, np.ndarray]):
    """Immutable mapping from parameter name to a float64 array.

    Arrays are copied on construction and marked read-only; updates produce a
    new set via :meth:`replace`.
    """

    def __init__(self, entries: Mapping[str, np.ndarray]):
        arrays = {}
        for name, value in entries.items():
            arr = np.array(value, dtype=np.float64)
            if not np.all(np.isfinite(arr)):
                raise NumericError(f"parameter {name!r} contains non-finite values")
            arr.setflags(write=False)
            arrays[name] = arr
        self._arrays = arrays

    def __getitem__(self, name: str) -> np.ndarray:
        return self._arrays[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self._arrays)

    def __len__(self) -> int:
        return len(self._arrays)

    def __repr__(self):
        shapes = ", ".join(f"{k}{v.shape}" for k, v in self._arrays.items())
        return f"ParameterSet({shapes})"

    @property
    def shapes(self) -> dict[str, tuple[int, ...]]:
        return {k: v.shape for k, v in self._arrays.items()}

    def replace(self, updates: Mapping[str, np.ndarray]) -> "ParameterSet":
        merged = dict(self._arrays)
        for name, value in updates.items():
            if name not in merged:
                raise KeyError(name)
            value = np.asarray(value, dtype=np.float64)
            if value.shape != merged[name].shape:
                raise DimensionError(f"{name!r}: shape {value.shape} != {merged[name].shape}")
            merged[name] = value
        return ParameterSet(merged)

    def attach(self, tape: Tape) -> dict[str, Var]:
        """Place every parameter on ``tape`` as a named leaf."""
        return {name: tape.leaf(arr, name=name) for name, arr in self._arrays.items()}

    def select(self, grads: Mapping[str, np.ndarray]) -> dict[str, np.ndarray]:
        """Restrict a gradient dict to this set's names."""
        return {name: grads[name] for name in self._arrays}

    def equals(self, other: "ParameterSet") -> bool:
        """Bitwise equality of names, shapes and values."""
        if list(self) != list(other):
            return False
        return all(np.array_equal(self[k], other[k]) and self[k].tobytes() == other[k].tobytes() for k in self)
