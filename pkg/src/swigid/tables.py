"""Dense joint probability tables.

A JointTable stores a joint distribution over named axes (variable ids for
observational tables, counterfactual terms for oracle output) as a dense
ndarray.  Values are either float64 or exact Fractions in an object array;
all operations preserve whichever arithmetic the table carries.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Hashable, Sequence

import numpy as np


@dataclass
class JointTable:
    axes: tuple[Hashable, ...]
    sizes: tuple[int, ...]
    values: np.ndarray
    labels: tuple[tuple[str, ...] | None, ...] | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        self.axes = tuple(self.axes)
        self.sizes = tuple(self.sizes)
        if len(set(self.axes)) != len(self.axes):
            raise ValueError("duplicate axis keys")
        if tuple(self.values.shape) != self.sizes:
            raise ValueError(f"shape {self.values.shape} != sizes {self.sizes}")
        if self.labels is not None:
            self.labels = tuple(
                tuple(l) if l is not None else None for l in self.labels
            )
            if len(self.labels) != len(self.axes):
                raise ValueError("labels must align with axes")

    # -- basics -----------------------------------------------------------

    @property
    def is_exact(self) -> bool:
        return self.values.dtype == object

    def axis(self, key: Hashable) -> int:
        try:
            return self.axes.index(key)
        except ValueError:
            raise KeyError(f"no axis {key!r} in table over {self.axes!r}")

    def state_index(self, key: Hashable, state: "str | int") -> int:
        i = self.axis(key)
        if isinstance(state, (int, np.integer)):
            idx = int(state)
        else:
            if self.labels is None or self.labels[i] is None:
                raise KeyError(f"axis {key!r} has no state labels")
            try:
                idx = self.labels[i].index(state)
            except ValueError:
                raise KeyError(f"{state!r} is not a state of axis {key!r}")
        if not 0 <= idx < self.sizes[i]:
            raise KeyError(f"state index {idx} out of range for axis {key!r}")
        return idx

    def total(self):
        if "total" not in self._cache:
            self._cache["total"] = self.values.sum()
        return self._cache["total"]

    def item(self):
        if self.values.size != 1:
            raise ValueError("item() on a non-scalar table")
        return self.values.reshape(())[()]

    # -- marginals ----------------------------------------------------------

    def marginal(self, keys: Sequence[Hashable]) -> np.ndarray:
        """Marginal over ``keys``, axes ordered as requested."""
        keys = tuple(keys)
        if keys in self._cache:
            return self._cache[keys]
        pos = [self.axis(k) for k in keys]
        if len(set(pos)) != len(pos):
            raise ValueError("repeated axis in marginal request")
        others = tuple(i for i in range(len(self.axes)) if i not in pos)
        m = self.values.sum(axis=others) if others else self.values
        kept = sorted(pos)
        m = m.transpose([kept.index(p) for p in pos]) if pos else m
        self._cache[keys] = m
        return m

    def marginal_table(self, keys: Sequence[Hashable]) -> "JointTable":
        keys = tuple(keys)
        pos = [self.axis(k) for k in keys]
        return JointTable(
            axes=keys,
            sizes=tuple(self.sizes[p] for p in pos),
            values=self.marginal(keys).copy(),
            labels=tuple(self.labels[p] for p in pos) if self.labels else None,
        )

    # -- conversions ---------------------------------------------------------

    def to_float(self) -> "JointTable":
        if not self.is_exact:
            return self
        vals = np.array(
            [float(x) for x in self.values.reshape(-1)], dtype=np.float64
        ).reshape(self.sizes)
        return JointTable(self.axes, self.sizes, vals, self.labels)

    def to_exact(self) -> "JointTable":
        if self.is_exact:
            return self
        flat = [Fraction(float(x)) for x in self.values.reshape(-1)]
        vals = np.empty(self.values.size, dtype=object)
        vals[:] = flat
        return JointTable(self.axes, self.sizes, vals.reshape(self.sizes), self.labels)

    def renormalized(self) -> "JointTable":
        t = self.total()
        if t == 0:
            raise ZeroDivisionError("cannot renormalize a zero table")
        return JointTable(self.axes, self.sizes, self.values / t, self.labels)


def table_from_fn(axes, sizes, fn, labels=None, exact: bool = False) -> JointTable:
    """Build a table by evaluating ``fn(index_tuple)`` over the full grid."""
    sizes = tuple(sizes)
    if exact:
        vals = np.empty(int(np.prod(sizes, dtype=np.int64)), dtype=object)
        for flat, idx in enumerate(np.ndindex(*sizes)):
            vals[flat] = fn(idx)
        vals = vals.reshape(sizes)
    else:
        vals = np.zeros(sizes, dtype=np.float64)
        for idx in np.ndindex(*sizes):
            vals[idx] = fn(idx)
    return JointTable(tuple(axes), sizes, vals, labels)
