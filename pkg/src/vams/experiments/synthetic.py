"""Synthetic binary datasets with planted frequent element sets.

Each planted set's support is hit exactly (round(support * r) records
carry it; background draws for its columns are conditioned on not
producing the full pattern), so realized supports sit within 1/(2r) of
target. Planted sets must occupy disjoint element columns; everything
else is independent background noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import UnachievableSpecError


@dataclass(frozen=True)
class PlantedSet:
    elements: tuple[int, ...]  # 1-based element indices
    support: float


@dataclass(frozen=True)
class SyntheticSpec:
    r: int
    t: int
    planted: tuple[PlantedSet, ...] = ()
    background_density: float = 0.25

    def validate(self) -> None:
        if self.r < 1 or self.t < 1:
            raise UnachievableSpecError("need at least one record and one element")
        if not 0.0 <= self.background_density <= 1.0:
            raise UnachievableSpecError("background density must lie in [0, 1]")
        if self.planted and self.background_density >= 1.0:
            raise UnachievableSpecError(
                "background density 1.0 cannot coexist with exact planted supports"
            )
        used: set[int] = set()
        for planted in self.planted:
            if not planted.elements:
                raise UnachievableSpecError("planted set with no elements")
            if not 0.0 < planted.support < 1.0:
                raise UnachievableSpecError(
                    f"planted support {planted.support} outside (0, 1) for {planted.elements}"
                )
            for element in planted.elements:
                if not 1 <= element <= self.t:
                    raise UnachievableSpecError(
                        f"planted element {element} outside [1, {self.t}]"
                    )
                if element in used:
                    raise UnachievableSpecError(
                        f"element {element} claimed by two planted sets; "
                        "planted sets must be disjoint"
                    )
                used.add(element)
            if round(planted.support * self.r) < 1:
                raise UnachievableSpecError(
                    f"support {planted.support} under-resolves at r={self.r}"
                )


def gen_synthetic(spec: SyntheticSpec, seed: int | np.random.Generator) -> np.ndarray:
    """Deterministic (r, t) binary matrix realizing the spec."""
    spec.validate()
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    r, t, density = spec.r, spec.t, spec.background_density
    values = (rng.random((r, t)) < density).astype(np.uint8)
    for planted in spec.planted:
        cols = [e - 1 for e in planted.elements]
        carriers = rng.choice(r, size=round(planted.support * r), replace=False)
        mask = np.zeros(r, dtype=bool)
        mask[carriers] = True
        values[np.ix_(mask, cols)] = 1
        # Background rows must not complete the pattern by chance: redraw
        # their columns conditioned on at least one zero.
        others = ~mask
        block = values[np.ix_(others, cols)]
        while True:
            full = np.all(block == 1, axis=1)
            if not full.any():
                break
            block[full] = (rng.random((int(full.sum()), len(cols))) < density).astype(np.uint8)
        values[np.ix_(others, cols)] = block
    return values
