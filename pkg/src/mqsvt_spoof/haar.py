"""Haar-random unitaries and the seed-splitting scheme used everywhere else."""

from __future__ import annotations

import numpy as np


def haar_unitary(dim: int, rng: np.random.Generator, size: tuple[int, ...] = ()) -> np.ndarray:
    """Haar-distributed ``dim x dim`` unitaries via QR of a complex Ginibre matrix.

    The diagonal of R is phase-fixed so the distribution is exactly Haar.
    Returns an array of shape ``size + (dim, dim)``.
    """
    g = rng.standard_normal(size + (dim, dim, 2))
    return ginibre_to_haar(g)


def ginibre_to_haar(g: np.ndarray) -> np.ndarray:
    """Map real normals of shape ``(..., dim, dim, 2)`` to Haar unitaries."""
    z = (g[..., 0] + 1j * g[..., 1]) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r, axis1=-2, axis2=-1)
    ph = d / np.abs(d)
    return q * ph[..., None, :]


def child_rng(master_seed: int, *key: int) -> np.random.Generator:
    """Generator for stream ``key`` of ``master_seed``.

    Streams are addressed by a counter tuple (``spawn_key``), so the draw for a
    given circuit or chunk does not depend on how work is scheduled.
    """
    ss = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in key))
    return np.random.default_rng(ss)


# Stream tags for child_rng.
STREAM_CIRCUIT = 0
STREAM_NOISE = 1
STREAM_SAMPLING = 2
STREAM_MOMENT = 3
