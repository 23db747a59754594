"""Shared plumbing: seeded RNG construction, dtype resolution, error types."""

from __future__ import annotations

import numpy as np
import torch


class NonFiniteError(ArithmeticError):
    """A numerical quantity became NaN/Inf; carries whatever partial state exists."""

    def __init__(self, message: str, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


def philox(seed: int) -> np.random.Generator:
    """Counter-based generator; the single source of pseudo-randomness."""
    return np.random.Generator(np.random.Philox(int(seed)))


_DTYPES = {"float32": torch.float32, "float64": torch.float64}


def resolve_dtype(name: str | torch.dtype) -> torch.dtype:
    if isinstance(name, torch.dtype):
        return name
    try:
        return _DTYPES[name]
    except KeyError:
        raise ValueError(f"unsupported dtype {name!r}; expected one of {sorted(_DTYPES)}") from None


def dtype_name(dtype: torch.dtype) -> str:
    for name, dt in _DTYPES.items():
        if dt == dtype:
            return name
    raise ValueError(f"unsupported dtype {dtype!r}")
