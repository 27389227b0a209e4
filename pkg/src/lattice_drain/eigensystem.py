"""Energy eigenmodes of the lattice and their coupling to the drain site."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError
from .lattice import LatticeModel, check_hermitian

__all__ = ["EigenSystem", "diagonalize_coupled", "level_spacings", "write_eigensystem_csv"]

DEGENERACY_TOL = 1e-9
DROP_TOL = 1e-12


@dataclass(frozen=True)
class EigenSystem:
    """Drain-coupled part of the spectrum.

    ``energies``, ``wavefunctions`` (columns), ``drain_amp``, ``drain_phase``,
    ``drain_weight`` (``|psi_i(n0)|**2``) and ``spacing`` refer to the ``M``
    retained modes. ``all_energies``/``all_wavefunctions`` hold the complete
    orthonormal basis (retained and dropped) after the degenerate-subspace
    rotation, with ``retained`` indexing into it.
    """

    energies: np.ndarray
    wavefunctions: np.ndarray
    drain_amp: np.ndarray
    drain_phase: np.ndarray
    drain_weight: np.ndarray
    spacing: np.ndarray
    drain: int
    hop_scale: float
    all_energies: np.ndarray
    all_wavefunctions: np.ndarray
    retained: np.ndarray
    n_dropped: int

    @property
    def n_modes(self) -> int:
        return len(self.energies)

    @property
    def n_sites(self) -> int:
        return self.wavefunctions.shape[0]


def _fix_phase(vecs: np.ndarray) -> np.ndarray:
    # largest component real positive; the first index among near-ties keeps it deterministic
    out = vecs.copy()
    for k in range(out.shape[1]):
        mag = np.abs(out[:, k])
        idx = int(np.argmax(mag >= mag.max() * (1 - 1e-8)))
        out[:, k] *= np.exp(-1j * np.angle(out[idx, k]))
    return out


def _rotate_degenerate(energies, vecs, drain, tol):
    """Within each degenerate block put all drain weight on a single vector."""
    energies = energies.copy()
    vecs = vecs.copy()
    n = len(energies)
    start = 0
    while start < n:
        stop = start + 1
        while stop < n and energies[stop] - energies[stop - 1] < tol:
            stop += 1
        if stop - start > 1:
            block = slice(start, stop)
            u = vecs[drain, block].reshape(1, -1)
            if np.linalg.norm(u) > 0:
                _, _, vh = np.linalg.svd(u)
                vecs[:, block] = vecs[:, block] @ vh.conj().T
            energies[block] = energies[block].mean()
        start = stop
    return energies, vecs


def diagonalize_coupled(model: LatticeModel, drop_tol: float = DROP_TOL,
                        degeneracy_tol: float = DEGENERACY_TOL) -> EigenSystem:
    """Diagonalize ``model.hamiltonian`` and keep the modes that see the drain.

    Degenerate subspaces (gaps below ``degeneracy_tol * J``) are rotated so one
    combination carries the whole drain amplitude; modes with drain weight at
    or below ``drop_tol`` are dropped.
    """
    h = np.asarray(model.hamiltonian)
    check_hermitian(h, model.hop_scale)
    energies, vecs = np.linalg.eigh(h)
    energies, vecs = _rotate_degenerate(energies, vecs, model.drain,
                                        degeneracy_tol * model.hop_scale)
    vecs = _fix_phase(vecs)
    amp = vecs[model.drain, :]
    keep = np.flatnonzero(np.abs(amp) ** 2 > drop_tol)
    eps = energies[keep]
    psi = vecs[:, keep]
    amp = amp[keep]
    es = EigenSystem(
        energies=eps,
        wavefunctions=psi,
        drain_amp=amp,
        drain_phase=np.angle(amp),
        drain_weight=np.abs(amp) ** 2,
        spacing=np.full(len(eps), np.nan),
        drain=model.drain,
        hop_scale=model.hop_scale,
        all_energies=energies,
        all_wavefunctions=vecs,
        retained=keep,
        n_dropped=len(energies) - len(keep),
    )
    if len(eps) >= 2:
        object.__setattr__(es, "spacing", level_spacings(es))
    return es


def level_spacings(es: EigenSystem) -> np.ndarray:
    """Local level spacing; centred difference inside, one-sided at the ends."""
    eps = np.asarray(es.energies if isinstance(es, EigenSystem) else es, dtype=float)
    if len(eps) < 2:
        raise InputError("level spacings need at least two modes")
    delta = np.empty_like(eps)
    delta[1:-1] = (eps[2:] - eps[:-2]) / 2
    delta[0] = eps[1] - eps[0]
    delta[-1] = eps[-1] - eps[-2]
    return delta


def write_eigensystem_csv(es: EigenSystem, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "energy", "spacing", "drain_weight", "drain_phase"])
        for i in range(es.n_modes):
            w.writerow([i] + [f"{x:.17g}" for x in (es.energies[i], es.spacing[i],
                                                    es.drain_weight[i], es.drain_phase[i])])
