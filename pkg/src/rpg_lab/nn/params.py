"""Flat parameter storage with named slices."""

from __future__ import annotations

import hashlib

import numpy as np


class ParamVector:
    """All of a network's parameters in one flat float64 array.

    Named views alias the flat storage, so optimizers mutate `flat` in place
    and models read the views; pack/unpack round-trips exactly.
    """

    def __init__(self, arrays: dict[str, np.ndarray]):
        spec = []
        offset = 0
        for name, arr in arrays.items():
            arr = np.asarray(arr, dtype=np.float64)
            spec.append((name, offset, arr.shape))
            offset += arr.size
        self.spec: tuple = tuple(spec)
        self.flat = np.empty(offset, dtype=np.float64)
        for (name, off, shape), arr in zip(spec, arrays.values()):
            self.flat[off : off + np.prod(shape, dtype=int)] = np.asarray(arr).ravel()

    @property
    def names(self) -> list[str]:
        return [name for name, _, _ in self.spec]

    def view(self, name: str) -> np.ndarray:
        for n, off, shape in self.spec:
            if n == name:
                return self.flat[off : off + np.prod(shape, dtype=int)].reshape(shape)
        raise KeyError(name)

    def unpack(self) -> dict[str, np.ndarray]:
        return {name: self.view(name).copy() for name in self.names}

    @classmethod
    def pack(cls, arrays: dict[str, np.ndarray]) -> "ParamVector":
        return cls(arrays)

    def copy(self) -> "ParamVector":
        out = object.__new__(ParamVector)
        out.spec = self.spec
        out.flat = self.flat.copy()
        return out

    def copy_from(self, other: "ParamVector") -> None:
        if self.spec != other.spec:
            raise ValueError("parameter layouts differ")
        self.flat[:] = other.flat

    def sha256(self) -> str:
        return hashlib.sha256(self.flat.tobytes()).hexdigest()

    @property
    def size(self) -> int:
        return self.flat.size

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, ParamVector)
            and self.spec == other.spec
            and np.array_equal(self.flat, other.flat)
        )
