"""Independent oracles and small builders shared across the test suite.

Everything here is deliberately naive (brute force, explicit loops) so it
stays independent of the library code paths it checks.
"""

from collections import Counter
from itertools import product

import numpy as np

from crystalembed.structures import CrystalStructure


def brute_force_edges(structure, cutoff, pad=2):
    """Enumerate a generously padded offset box and return the directed edge
    multiset {(i, j, (o1, o2, o3)): count} with 0 < dist <= cutoff."""
    lat = structure.lattice
    r = structure.frac_coords @ lat
    inv = np.linalg.inv(lat)
    bounds = np.ceil(cutoff * np.linalg.norm(inv, axis=0)).astype(int) + 1 + pad
    edges = Counter()
    n = len(r)
    for o1, o2, o3 in product(*(range(-b, b + 1) for b in bounds)):
        shift = np.array([o1, o2, o3], dtype=float) @ lat
        for i in range(n):
            for j in range(n):
                d = np.linalg.norm(r[j] + shift - r[i])
                if 0.0 < d <= cutoff:
                    edges[(i, j, (o1, o2, o3))] += 1
    return edges


def brute_force_multiplicities(edges, n):
    """Unordered image-connection counts from a directed edge multiset."""
    counts = np.zeros((n, n), dtype=int)
    for (i, j, _o), c in edges.items():
        counts[i, j] += c
    for i in range(n):
        counts[i, i] //= 2
    return np.minimum(counts, 5)


def cubic_structure(a=1.0, numbers=(11,), coords=((0.0, 0.0, 0.0)), sid="cubic"):
    coords = np.atleast_2d(coords)
    return CrystalStructure(
        lattice=a * np.eye(3),
        frac_coords=coords,
        atomic_numbers=np.array(numbers),
        id=sid,
    )


def rocksalt_structure(a=1.0):
    return CrystalStructure(
        lattice=a * np.eye(3),
        frac_coords=np.array([[0.0, 0.0, 0.0], [0.5, 0.5, 0.5]]),
        atomic_numbers=np.array([11, 17]),
        id="rocksalt",
    )


def random_structure(rng, max_sites=6, skewed=False):
    """Random small cell; skewed=True forces one angle >= 60 deg off 90."""
    from crystalembed.structures import lattice_from_cell

    while True:
        lengths = rng.uniform(2.0, 6.0, size=3)
        if skewed:
            angles = np.array(
                [
                    rng.uniform(60.0, 120.0),
                    rng.uniform(60.0, 120.0),
                    rng.choice([rng.uniform(20.0, 30.0), rng.uniform(150.0, 160.0)]),
                ]
            )
        else:
            angles = rng.uniform(60.0, 120.0, size=3)
        try:
            lat = lattice_from_cell(*lengths, *angles)
        except Exception:
            continue
        n = int(rng.integers(1, max_sites + 1))
        return CrystalStructure(
            lattice=lat,
            frac_coords=rng.random((n, 3)),
            atomic_numbers=rng.integers(1, 119, size=n),
            id="random",
        )
