"""Photon-mediated coupling matrix and its collective modes."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EigensolverError
from .model import ArrayConfig

DEFAULT_TOL = 1e-9


def coupling_matrix(array: ArrayConfig) -> np.ndarray:
    """Guided-mode propagator between emitters, ``-i G1D/2 exp(i|phi_n - phi_m|)``.

    Complex symmetric (not Hermitian). Detunings and the non-guided decay are
    not included.
    """
    phi = array.positions
    return -0.5j * array.gamma_1d * np.exp(1j * np.abs(phi[:, None] - phi[None, :]))


@dataclass(frozen=True)
class ModeSet:
    """Eigen-decomposition ``g = sum_xi lambda_xi v_xi v_xi^T``.

    Eigenvectors (columns) are normalised with the non-conjugated bilinear
    product, ``v^T v = 1``. ``clusters`` partitions the indices into groups of
    numerically coincident eigenvalues; ``zero_modes`` are modes decoupled from
    the waveguide; ``exceptional`` flags modes whose bilinear norm vanished.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    gamma_1d: float
    clusters: tuple[tuple[int, ...], ...]
    zero_modes: tuple[int, ...]
    exceptional: tuple[int, ...]
    tol: float = DEFAULT_TOL

    @property
    def n(self) -> int:
        return self.eigenvalues.size

    @property
    def shifts(self) -> np.ndarray:
        return self.eigenvalues.real

    @property
    def decays(self) -> np.ndarray:
        return -2.0 * self.eigenvalues.imag

    @property
    def active(self) -> np.ndarray:
        """Indices of modes that couple to the waveguide (non-zero eigenvalue)."""
        mask = np.ones(self.n, dtype=bool)
        mask[list(self.zero_modes)] = False
        return np.flatnonzero(mask)

    @property
    def active_eigenvalues(self) -> np.ndarray:
        return self.eigenvalues[self.active]

    @property
    def degenerate_clusters(self) -> list[tuple[int, ...]]:
        """Clusters of coincident *non-zero* eigenvalues (simple-pole formulas fail there)."""
        zero = set(self.zero_modes)
        return [c for c in self.clusters if len(c) > 1 and not zero.issuperset(c)]

    @property
    def simple(self) -> bool:
        return not self.degenerate_clusters and not self.exceptional

    def scaled(self, factor: float) -> "ModeSet":
        """Mode set of the same geometry with ``gamma_1d`` multiplied by ``factor``."""
        return ModeSet(self.eigenvalues * factor, self.eigenvectors, self.gamma_1d * factor,
                       self.clusters, self.zero_modes, self.exceptional, self.tol)


def _cluster(values: np.ndarray, radius: float) -> list[list[int]]:
    n = values.size
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    order = np.argsort(values.real)
    # sweep in Re order; only neighbours within `radius` in Re can merge
    for a_pos, a in enumerate(order):
        for b in order[a_pos + 1:]:
            if values[b].real - values[a].real > radius:
                break
            if abs(values[b] - values[a]) <= radius:
                ra, rb = find(a), find(b)
                if ra != rb:
                    parent[max(ra, rb)] = min(ra, rb)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return sorted(groups.values())


def _bilinear_normalise(vecs: np.ndarray, clusters, eps: float):
    """Make eigenvectors bilinearly orthonormal; Gram-Schmidt inside clusters."""
    vecs = vecs.copy()
    bad = []
    for cl in clusters:
        done = []
        for j in cl:
            v = vecs[:, j]
            for i in done:
                v = v - (vecs[:, i] @ v) * vecs[:, i]
            norm2 = v @ v
            if abs(norm2) < eps:
                bad.append(j)
                vecs[:, j] = v / np.linalg.norm(v)
                continue
            vecs[:, j] = v / np.sqrt(norm2)
            done.append(j)
    return vecs, tuple(sorted(bad))


def eigenmodes(matrix: np.ndarray, gamma_1d: float | None = None, tol: float = DEFAULT_TOL
               ) -> ModeSet:
    """Full dense non-Hermitian eigendecomposition of a coupling matrix.

    ``gamma_1d`` sets the scale for the zero-mode and clustering tolerances; it
    is read off the diagonal (``-i G1D/2``) when omitted.
    """
    g = np.asarray(matrix, dtype=complex)
    if not np.all(np.isfinite(g)):
        raise EigensolverError("coupling matrix has non-finite entries")
    if gamma_1d is None:
        gamma_1d = float(-2.0 * g[0, 0].imag) if g.size else 0.0
    scale = gamma_1d if gamma_1d > 0 else max(np.abs(g).max(initial=0.0), 1.0)
    try:
        lam, vecs = np.linalg.eig(g)
    except np.linalg.LinAlgError as exc:
        cond = np.linalg.cond(g)
        raise EigensolverError(f"eigensolver failed ({exc}); condition number {cond:.3e}") from exc
    radius = tol * scale
    zero = tuple(int(i) for i in np.flatnonzero(np.abs(lam) < radius))
    clusters = _cluster(lam, radius)
    vecs, bad = _bilinear_normalise(vecs, clusters, eps=1e3 * np.finfo(float).eps)
    return ModeSet(
        eigenvalues=lam,
        eigenvectors=vecs,
        gamma_1d=float(gamma_1d),
        clusters=tuple(tuple(c) for c in clusters),
        zero_modes=zero,
        exceptional=bad,
        tol=tol,
    )


def array_modes(array: ArrayConfig, tol: float = DEFAULT_TOL) -> ModeSet:
    return eigenmodes(coupling_matrix(array), array.gamma_1d, tol)


def classify_modes(modes: ModeSet, rel_tol: float = 1e-9) -> list[str]:
    """Label each mode 'superradiant', 'subradiant' or 'boundary' (decay equal to G1D)."""
    g1 = modes.gamma_1d
    labels = []
    for d in modes.decays:
        if d > g1 * (1 + rel_tol):
            labels.append("superradiant")
        elif d < g1 * (1 - rel_tol):
            labels.append("subradiant")
        else:
            labels.append("boundary")
    return labels


def extremal_rates(modes: ModeSet) -> dict:
    d = modes.decays
    return {
        "max_decay": float(d.max()),
        "min_decay": float(d.min()),
        "max_index": int(d.argmax()),
        "min_index": int(d.argmin()),
    }


MODES_CSV_HEADER = ["index", "re_lambda", "im_lambda", "shift", "decay", "label"]


def write_modes_csv(modes: ModeSet, path) -> Path:
    path = Path(path)
    labels = classify_modes(modes)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(MODES_CSV_HEADER)
        for i, lam in enumerate(modes.eigenvalues):
            w.writerow([i, repr(float(lam.real)), repr(float(lam.imag)), repr(float(lam.real)),
                        repr(float(-2 * lam.imag)), labels[i]])
    return path
