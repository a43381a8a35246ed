"""Synthetic corpora for desk-scale runs and tests.

Two generators share a 20-element universe spanning the electronegativity
range. Pretraining structures tie geometry to chemistry: the cell size is an
affine function of the two elements' size proxies, so self-supervision can
imprint element properties into the embeddings. Labeled structures use a
FIXED cell size, so their target (mean electronegativity of the composition)
is unreadable from geometry alone and a downstream model must rely on its
atom features, which is exactly what the transfer benchmark needs to measure.
"""

import numpy as np

from .elements import electronegativity
from .errors import ValidationError
from .structures import CrystalStructure

# spread across the electronegativity scale, a few near-collisions included
SYNTHETIC_ELEMENTS = (
    3, 4, 6, 7, 8, 9, 11, 12, 13, 14,
    15, 16, 17, 19, 20, 26, 29, 30, 47, 79,
)

LABELED_CELL = 4.0  # fixed lattice constant for every labeled structure


def element_size(z: int) -> float:
    """Size proxy, affine in electronegativity: large for electropositive."""
    return 2.3 - 0.25 * electronegativity(z)


def _two_site_cell(a: float, rng: np.random.Generator, jitter: float):
    frac = np.array([[0.0, 0.0, 0.0], [0.5, 0.5, 0.5]])
    if jitter > 0.0:
        frac = frac + rng.uniform(-jitter, jitter, size=(2, 3))
    return a * np.eye(3), frac


def make_pretraining_structures(n: int, seed: int = 0) -> list:
    """Two-site cells whose size tracks the mean element size (about 2% noise).

    The element universe is cycled so every element appears, keeping later
    embedding extraction total.
    """
    if n < 1:
        raise ValidationError("corpus size must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence((seed & (2**63 - 1), 0)))
    out = []
    for i in range(n):
        z1 = SYNTHETIC_ELEMENTS[i % len(SYNTHETIC_ELEMENTS)]
        z2 = int(rng.choice(SYNTHETIC_ELEMENTS))
        a = 1.1 * (element_size(z1) + element_size(z2))
        a *= 1.0 + 0.02 * rng.standard_normal()
        lattice, frac = _two_site_cell(a, rng, jitter=0.02)
        out.append(CrystalStructure(
            lattice=lattice,
            frac_coords=frac,
            atomic_numbers=np.array([z1, z2]),
            id=f"pre-{i}",
        ))
    return out


def make_labeled_structures(n: int, seed: int = 0) -> list:
    """Fixed-size two-site cells labeled with mean electronegativity."""
    if n < 1:
        raise ValidationError("corpus size must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence((seed & (2**63 - 1), 1)))
    out = []
    for i in range(n):
        z1 = SYNTHETIC_ELEMENTS[i % len(SYNTHETIC_ELEMENTS)]
        z2 = int(rng.choice(SYNTHETIC_ELEMENTS))
        lattice, frac = _two_site_cell(LABELED_CELL, rng, jitter=0.03)
        label = 0.5 * (electronegativity(z1) + electronegativity(z2))
        out.append(CrystalStructure(
            lattice=lattice,
            frac_coords=frac,
            atomic_numbers=np.array([z1, z2]),
            label=label,
            id=f"lab-{i}",
        ))
    return out
