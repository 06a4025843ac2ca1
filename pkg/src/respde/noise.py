"""Brownian-sheet cell increments with seed determinism and refinement coupling.

A sample at resolution n assigns to every cell C_i = prod_j [i_j h, (i_j+1) h),
i in {0,...,n-1}^d, the increment DW(C_i) of a Brownian sheet, an independent
centered normal with variance h^d.  Increments are stored flat with the first
cell coordinate varying fastest (the cell analogue of the field ordering).

Refinement halves the mesh while staying on the same sheet path: the 2^d
child increments of a parent cell are drawn conditionally on their sum being
the parent increment (iid N(0, v_child) conditioned on the sum), realized as

    child = parent / 2^d + (Y - mean(Y) over the block),   Y iid N(0, v_child).

Child sums reproduce the parent up to floating-point addition; each refined
sample keeps a reference to its parent, so a refinement chain couples every
resolution to one sheet path exactly.

Streams are generated by the counter-based Philox generator keyed on
(seed, purpose, level), which makes samples reproducible bit for bit and
independent of evaluation order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from respde.lattice import DomainError, GridField, GridSpec

_SAMPLE_STREAM = 0
_REFINE_STREAM = 1


def _generator(seed: int, stream: int, level: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(stream, level))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class NoiseSample:
    """Cell increments of one Brownian-sheet path at one resolution.

    ``level`` counts refinement generations (0 for a directly sampled field);
    ``parent`` records the coarser member of the refinement chain, if any.
    """

    spec: GridSpec
    increments: np.ndarray
    seed: int
    level: int = 0
    parent: Optional["NoiseSample"] = field(default=None, repr=False)

    def __post_init__(self) -> None:
        vals = np.asarray(self.increments, dtype=np.float64)
        if vals.shape != (self.spec.cell_count,):
            raise DomainError(
                f"increment vector length {vals.shape} != cell count {self.spec.cell_count}"
            )
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "increments", vals)

    def as_array(self) -> np.ndarray:
        """Increments as an (n,)^d array, axis j indexing cell coordinate j."""
        return self.increments.reshape(self.spec.cells_shape, order="F")

    def interior_increments(self) -> np.ndarray:
        """Increments of the forward cells anchored at interior lattice points.

        The cell attached to the interior point hi is the one with lower
        corner hi, i.e. cell index i for each i in {1,...,n-1}^d; returned
        flat in the natural ordering of the anchoring points.
        """
        n = self.spec.n
        return self.as_array()[(slice(1, n),) * self.spec.d].ravel(order="F")


def sample_noise(spec: GridSpec, seed: int) -> NoiseSample:
    """Draw the n^d independent N(0, h^d) cell increments for (spec, seed)."""
    rng = _generator(seed, _SAMPLE_STREAM, 0)
    std = spec.h ** (spec.d / 2.0)
    vals = rng.normal(0.0, std, size=spec.cell_count)
    return NoiseSample(spec, vals, seed=int(seed), level=0)


def sample_noise_batch(spec: GridSpec, seed: int, count: int) -> np.ndarray:
    """Increment vectors for `count` independent replicates, shape (count, n^d).

    Statistically identical to `count` independent samples; intended for
    Monte Carlo estimates where per-replicate chains are not needed.
    """
    rng = _generator(seed, _SAMPLE_STREAM, 0)
    std = spec.h ** (spec.d / 2.0)
    return rng.normal(0.0, std, size=(count, spec.cell_count))


def refine_noise(parent: NoiseSample, factor: int = 2) -> NoiseSample:
    """Conditionally sample the 2n-resolution increments of the same sheet path.

    Every parent cell is split into 2^d children whose increments are iid
    N(0, (h/2)^d) conditioned on summing to the parent increment.
    """
    if factor != 2:
        raise DomainError("only factor-2 refinement is supported; compose for more")
    spec = parent.spec
    d, n = spec.d, spec.n
    child_spec = GridSpec(d, 2 * n)
    m = 2**d
    rng = _generator(parent.seed, _REFINE_STREAM, parent.level + 1)
    std_child = child_spec.h ** (d / 2.0)
    y = rng.normal(0.0, std_child, size=child_spec.cells_shape)

    # block view: axis pairs (parent index, child offset) per coordinate
    block_shape = sum(((n, 2),) * d, ())
    yb = y.reshape(block_shape)
    offset_axes = tuple(range(1, 2 * d, 2))
    fluct = yb - yb.mean(axis=offset_axes, keepdims=True)

    parent_arr = parent.as_array().reshape(sum(((n, 1),) * d, ()))
    child = parent_arr / m + fluct
    return NoiseSample(
        child_spec,
        child.reshape(child_spec.cells_shape).ravel(order="F"),
        seed=parent.seed,
        level=parent.level + 1,
        parent=parent,
    )


def coarsen_increments(sample: NoiseSample) -> np.ndarray:
    """Sum the 2^d child increments of every coarse cell; flat coarse ordering.

    Requires an even resolution.  Up to floating-point addition this inverts
    :func:`refine_noise`; for the chain member itself use ``sample.parent``.
    """
    n = sample.spec.n
    if n % 2:
        raise DomainError("coarsening needs an even resolution")
    d = sample.spec.d
    block_shape = sum(((n // 2, 2),) * d, ())
    arr = sample.as_array().reshape(block_shape)
    summed = arr.sum(axis=tuple(range(1, 2 * d, 2)))
    return summed.ravel(order="F")


def refinement_chain(spec: GridSpec, seed: int, finest_n: int) -> list[NoiseSample]:
    """Samples at spec.n, 2 spec.n, ..., finest_n, all coupled to one sheet path."""
    ratio = finest_n // spec.n
    if spec.n * ratio != finest_n or ratio & (ratio - 1):
        raise DomainError(f"finest resolution {finest_n} is not spec.n times a power of two")
    chain = [sample_noise(spec, seed)]
    while chain[-1].spec.n < finest_n:
        chain.append(refine_noise(chain[-1]))
    return chain


def discrete_noise_term(sample: NoiseSample, sigma_values: GridField) -> GridField:
    """The white-noise forcing vector: entry k is n^d sigma_k DW(cell at x_k).

    The cell attached to an interior point is the forward cell with that
    point as lower corner, matching the iterated forward differences of the
    sheet.
    """
    if sigma_values.spec != sample.spec:
        raise DomainError("noise sample and sigma field live on different grids")
    nd = float(sample.spec.n**sample.spec.d)
    return GridField(
        sample.spec, nd * sigma_values.values * sample.interior_increments()
    )


def write_increments(sample: NoiseSample, path: str) -> None:
    """Dump increments as little-endian float64 in the flat cell ordering."""
    sample.increments.astype("<f8").tofile(path)


def read_increments(spec: GridSpec, path: str, seed: int = -1, level: int = 0) -> NoiseSample:
    """Load a binary increment dump written by :func:`write_increments`."""
    vals = np.fromfile(path, dtype="<f8")
    return NoiseSample(spec, vals, seed=seed, level=level)
