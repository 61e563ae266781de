from __future__ import annotations

from collections import OrderedDict
from typing import Iterator

import numpy as np

from .tensor import Tensor, get_default_dtype

TRANSCEIVER_PARTITIONS = ("alpha", "beta", "chi", "delta")


def glorot_uniform(rng: np.random.Generator, shape: tuple, dtype=None) -> np.ndarray:
    fan_in, fan_out = (shape[0], shape[-1]) if len(shape) > 1 else (shape[0], shape[0])
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype or get_default_dtype())


class ParamSet:
    """Named trainable tensors, each tagged with exactly one partition.

    Partition tags for the transceiver are ``alpha`` (channel encoder),
    ``beta`` (semantic encoder), ``chi`` (semantic decoder) and ``delta``
    (channel decoder); other models use their own tags.
    """

    def __init__(self):
        self._tensors: "OrderedDict[str, Tensor]" = OrderedDict()
        self._partition: dict[str, str] = {}

    def add(self, name: str, value, partition: str, dtype=None) -> Tensor:
        if name in self._tensors:
            raise KeyError(f"parameter {name!r} already exists")
        arr = np.array(value, dtype=dtype or get_default_dtype())
        t = Tensor(arr, requires_grad=True, dtype=arr.dtype, name=name)
        self._tensors[name] = t
        self._partition[name] = partition
        return t

    def __getitem__(self, name: str) -> Tensor:
        try:
            return self._tensors[name]
        except KeyError:
            raise KeyError(f"missing parameter {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def __iter__(self) -> Iterator[str]:
        return iter(self._tensors)

    def __len__(self) -> int:
        return len(self._tensors)

    def items(self):
        return self._tensors.items()

    def names(self) -> list[str]:
        return list(self._tensors)

    def partition_of(self, name: str) -> str:
        return self._partition[name]

    def partitions(self) -> dict[str, str]:
        return dict(self._partition)

    def by_partition(self, tag: str) -> dict[str, Tensor]:
        return {n: t for n, t in self._tensors.items() if self._partition[n] == tag}

    def tensors(self) -> list[Tensor]:
        return list(self._tensors.values())

    def zero_grad(self) -> None:
        for t in self._tensors.values():
            t.grad = None

    def num_values(self) -> int:
        return sum(t.size for t in self._tensors.values())

    def state(self) -> dict[str, np.ndarray]:
        return {n: t.data.copy() for n, t in self._tensors.items()}

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        for n, arr in state.items():
            t = self[n]
            if t.shape != arr.shape:
                raise ValueError(f"shape mismatch for {n}: {t.shape} vs {arr.shape}")
            t.data = np.array(arr, dtype=t.dtype)

    def copy(self) -> "ParamSet":
        other = ParamSet()
        for n, t in self._tensors.items():
            other.add(n, t.data, self._partition[n], dtype=t.dtype)
        return other

    def astype(self, dtype) -> "ParamSet":
        other = ParamSet()
        for n, t in self._tensors.items():
            other.add(n, t.data, self._partition[n], dtype=dtype)
        return other

    def pair(self, prefix: str) -> tuple[Tensor, Tensor]:
        return self[f"{prefix}.W"], self[f"{prefix}.b"]
