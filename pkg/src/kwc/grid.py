"""Uniform cell-centred grids in one or two dimensions and their text format."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidArgument


@dataclass(frozen=True, eq=False)
class GridField:
    """Scalar samples at cell centres ``origin + (i + 1/2) h``.

    ``origin`` is the lower corner of the domain, so the domain of a field with
    ``n`` nodes along an axis has length ``n h`` along it.
    """

    values: np.ndarray
    spacing: float
    origin: tuple

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim not in (1, 2):
            raise InvalidArgument("only 1D and 2D fields are supported")
        if not self.spacing > 0:
            raise InvalidArgument("spacing must be positive")
        if not np.all(np.isfinite(vals)):
            raise InvalidArgument("field has non-finite values")
        origin = tuple(float(o) for o in np.atleast_1d(self.origin))
        if len(origin) != vals.ndim:
            raise InvalidArgument("origin does not match field dimension")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "spacing", float(self.spacing))
        object.__setattr__(self, "origin", origin)

    @classmethod
    def on_domain(cls, lower, upper, shape, values=None, fill=0.0):
        """Build a field over the box ``[lower, upper]`` with ``shape`` cells."""
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        shape = tuple(int(n) for n in np.atleast_1d(shape))
        hs = (upper - lower) / np.asarray(shape)
        if np.any(np.abs(hs - hs[0]) > 1e-12 * abs(hs[0])):
            raise InvalidArgument(f"non-square cells: spacings {hs}")
        if values is None:
            values = np.full(shape, fill, dtype=float)
        return cls(np.asarray(values, dtype=float).reshape(shape), float(hs[0]), tuple(lower))

    @property
    def dims(self) -> int:
        return self.values.ndim

    @property
    def shape(self) -> tuple:
        return self.values.shape

    @property
    def h(self) -> float:
        return self.spacing

    @property
    def lower(self) -> np.ndarray:
        return np.asarray(self.origin)

    @property
    def upper(self) -> np.ndarray:
        return self.lower + self.spacing * np.asarray(self.shape)

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.dims

    def coords(self, axis: int = 0) -> np.ndarray:
        return self.origin[axis] + (np.arange(self.shape[axis]) + 0.5) * self.spacing

    def mesh(self):
        """Node coordinates; ``(x,)`` in 1D, ``(X, Y)`` with ``indexing='ij'`` in 2D."""
        if self.dims == 1:
            return (self.coords(0),)
        return tuple(np.meshgrid(self.coords(0), self.coords(1), indexing="ij"))

    def with_values(self, values) -> "GridField":
        return GridField(np.asarray(values, dtype=float).reshape(self.shape), self.spacing, self.origin)

    def same_grid(self, other: "GridField") -> bool:
        return (
            self.shape == other.shape
            and abs(self.spacing - other.spacing) <= 1e-12 * self.spacing
            and np.allclose(self.origin, other.origin, atol=1e-12)
        )

    def contains(self, point) -> bool:
        p = np.atleast_1d(np.asarray(point, dtype=float))
        return bool(np.all(p > self.lower) and np.all(p < self.upper))


def require_same_grid(a: GridField, b: GridField):
    if not a.same_grid(b):
        raise InvalidArgument(f"grid mismatch: {a.shape} vs {b.shape}")


def write_field(path, field: GridField):
    shape = ",".join(str(n) for n in field.shape)
    origin = ",".join(repr(float(o)) for o in field.origin)
    rows = field.values.reshape(field.shape[0], -1)
    with open(Path(path), "w") as fh:
        fh.write(f"dims={field.dims} shape={shape} spacing={float(field.spacing)!r} origin={origin}\n")
        for row in rows:
            fh.write(" ".join(repr(float(x)) for x in row) + "\n")


def read_field(path) -> GridField:
    with open(Path(path)) as fh:
        header = fh.readline().split()
        meta = dict(tok.split("=", 1) for tok in header)
        try:
            dims = int(meta["dims"])
            shape = tuple(int(n) for n in meta["shape"].split(","))
            spacing = float(meta["spacing"])
            origin = tuple(float(o) for o in meta["origin"].split(","))
        except (KeyError, ValueError) as exc:
            raise InvalidArgument(f"{path}: bad grid-field header {header}") from exc
        values = np.loadtxt(fh, ndmin=1).ravel()
    if len(shape) != dims or values.size != int(np.prod(shape)):
        raise InvalidArgument(f"{path}: expected {shape} values, found {values.size}")
    return GridField(values.reshape(shape), spacing, origin)
