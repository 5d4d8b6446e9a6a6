"""Empirical measures on R^d and their tangent fields.

A measure is N uniform-weight Dirac masses; a tangent field assigns one
vector per particle. Everything downstream (objectives, Hessians, steps)
works on these two containers.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

W2_CAP = 1000


def _as_matrix(arr, name):
    out = np.asarray(arr, dtype=np.float64)
    if out.ndim != 2:
        raise ValueError(f"{name} must be an N x d matrix, got shape {out.shape}")
    if out.shape[0] < 1 or out.shape[1] < 1:
        raise ValueError(f"{name} must be non-empty, got shape {out.shape}")
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{name} contains non-finite entries")
    return out


@dataclass(frozen=True)
class ParticleEnsemble:
    """N points in R^d with implicit uniform weights 1/N."""

    positions: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "positions", _as_matrix(self.positions, "positions"))

    @property
    def count(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]


@dataclass(frozen=True)
class TangentField:
    """One R^d vector per particle, an element of L^2_mu."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _as_matrix(self.values, "values"))

    @property
    def count(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]


def _check_match(a, b, what):
    if a.count != b.count or a.dim != b.dim:
        raise ValueError(
            f"shape mismatch between {what}: ({a.count},{a.dim}) vs ({b.count},{b.dim})"
        )


def l2_inner(v: TangentField, w: TangentField) -> float:
    """Inner product (1/N) sum_i v_i . w_i on L^2_mu."""
    _check_match(v, w, "tangent fields")
    return float(np.sum(v.values * w.values) / v.count)


def l2_norm(v: TangentField) -> float:
    return float(np.sqrt(l2_inner(v, v)))


def push(mu: ParticleEnsemble, v: TangentField, scale: float) -> ParticleEnsemble:
    """Pushforward of mu by the map Id + scale * v. Returns a new ensemble."""
    _check_match(mu, v, "ensemble and field")
    if not np.isfinite(scale):
        raise ValueError("scale must be finite")
    return ParticleEnsemble(mu.positions + scale * v.values)


def w2_exact(a: ParticleEnsemble, b: ParticleEnsemble, cap: int = W2_CAP) -> float:
    """Exact 2-Wasserstein distance between equal-size uniform ensembles.

    Solves the linear assignment problem on the squared-distance cost matrix
    and returns sqrt(mean matched cost). Refuses counts above `cap` since the
    dense solve is O(N^3); this is a verification tool, not a training loss.
    """
    if a.count != b.count:
        raise ValueError(f"unequal particle counts unsupported: {a.count} vs {b.count}")
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    if a.count > cap:
        raise ValueError(f"count {a.count} exceeds the exact-assignment cap {cap}")
    diff = a.positions[:, None, :] - b.positions[None, :, :]
    cost = np.sum(diff * diff, axis=2)
    rows, cols = linear_sum_assignment(cost)
    return float(np.sqrt(cost[rows, cols].sum() / a.count))


def w2_1d(a: ParticleEnsemble, b: ParticleEnsemble) -> float:
    """Exact W2 in one dimension via sorted quantile matching (oracle for w2_exact)."""
    if a.dim != 1 or b.dim != 1:
        raise ValueError("w2_1d requires dim == 1")
    if a.count != b.count:
        raise ValueError(f"unequal particle counts unsupported: {a.count} vs {b.count}")
    xa = np.sort(a.positions[:, 0])
    xb = np.sort(b.positions[:, 0])
    return float(np.sqrt(np.mean((xa - xb) ** 2)))


# ---------------------------------------------------------------------------
# serialization: CSV with header x0,...,x{d-1}; optional first comment row
# "# dim=<d> count=<N>"


def ensemble_to_csv(mu: ParticleEnsemble) -> str:
    buf = io.StringIO()
    buf.write(f"# dim={mu.dim} count={mu.count}\n")
    buf.write(",".join(f"x{k}" for k in range(mu.dim)) + "\n")
    for row in mu.positions:
        buf.write(",".join(repr(float(x)) for x in row) + "\n")
    return buf.getvalue()


def save_ensemble(path, mu: ParticleEnsemble) -> None:
    with open(path, "w") as fh:
        fh.write(ensemble_to_csv(mu))


def load_ensemble(path) -> ParticleEnsemble:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if lines and lines[0].startswith("#"):
        lines = lines[1:]
    if not lines:
        raise ValueError(f"{path}: empty ensemble file")
    header = lines[0].split(",")
    d = len(header)
    expected = [f"x{k}" for k in range(d)]
    if header != expected:
        raise ValueError(f"{path}: bad header {header!r}, expected {expected!r}")
    rows = [[float(tok) for tok in ln.split(",")] for ln in lines[1:]]
    arr = np.array(rows, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != d:
        raise ValueError(f"{path}: ragged or empty data")
    return ParticleEnsemble(arr)
