"""Per-realization seed derivation.

Realization ``i`` of a run with master seed ``m`` uses
``derive_seed(m, i)``, a hash of the pair ``(m, i)`` through
:class:`numpy.random.SeedSequence`.  The seed of a realization therefore does
not depend on how many realizations are drawn or on which worker draws it.
"""

from __future__ import annotations

from ..lattice_model import derive_seed

__all__ = ["derive_seed", "realization_seeds"]


def realization_seeds(master: int, count: int) -> list:
    return [derive_seed(master, i) for i in range(count)]
