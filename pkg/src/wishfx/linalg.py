"""Dense matrix kernel: symmetric/PSD value types, matrix exponential and square
root, and a branch-continuous log-determinant along a path of complex matrices.

All types are immutable after construction (backing arrays are write-locked) and
all operations are pure functions, so everything here is safe to share across
threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg

from .errors import DataError, NumericError, TransformExplosionError

__all__ = [
    "SymMat",
    "PsdMat",
    "expm",
    "sqrtm_psd",
    "logm_path",
    "accumulate_logdet",
    "sym_sqrt_batch",
    "clamp_psd_batch",
]

# Relative eigenvalue slack for "is PSD" checks; calibration routinely probes
# matrices sitting on the cone boundary.
PSD_EIG_RTOL = 1e-10

# Refinement trigger/cap for branch tracking along a path.
_ARG_JUMP_LIMIT = 0.9 * np.pi
_MAX_PATH_STEPS = 16384


def _locked(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


class SymMat:
    """Real symmetric matrix with triangular storage (symmetry is structural)."""

    __slots__ = ("dim", "_tri")

    def __init__(self, full: np.ndarray):
        a = np.asarray(full, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DataError(f"symmetric matrix must be square, got shape {a.shape}")
        if a.shape[0] < 1:
            raise DataError("dimension must be >= 1")
        if not np.all(np.isfinite(a)):
            raise DataError("symmetric matrix has non-finite entries")
        scale = max(1.0, float(np.abs(a).max()))
        if np.abs(a - a.T).max() > 1e-12 * scale:
            raise DataError("matrix is not symmetric")
        self.dim = a.shape[0]
        iu = np.triu_indices(self.dim)
        self._tri = _locked(a[iu])

    @property
    def full(self) -> np.ndarray:
        d = self.dim
        out = np.zeros((d, d))
        iu = np.triu_indices(d)
        out[iu] = self._tri
        out = out + np.triu(out, 1).T
        return out

    def __array__(self, dtype=None, copy=None):
        a = self.full
        return a.astype(dtype) if dtype is not None else a

    def __eq__(self, other) -> bool:
        return isinstance(other, SymMat) and self.dim == other.dim and np.array_equal(
            self._tri, other._tri
        )

    def __repr__(self) -> str:
        return f"SymMat(dim={self.dim})"

    @staticmethod
    def zeros(dim: int) -> "SymMat":
        return SymMat(np.zeros((dim, dim)))


@dataclass(frozen=True, eq=False)
class PsdMat:
    """Symmetric matrix validated to lie in the PSD cone (within tolerance)."""

    base: SymMat
    min_eig: float = field(init=False)

    def __post_init__(self):
        eigs = np.linalg.eigvalsh(self.base.full)
        spectral = float(np.abs(eigs).max()) if eigs.size else 0.0
        tol = PSD_EIG_RTOL * max(1.0, spectral)
        if eigs[0] < -tol:
            raise DataError(
                f"matrix is not PSD: min eigenvalue {eigs[0]:.3e} below -{tol:.3e}"
            )
        object.__setattr__(self, "min_eig", float(eigs[0]))

    @property
    def dim(self) -> int:
        return self.base.dim

    @property
    def full(self) -> np.ndarray:
        return self.base.full

    def __array__(self, dtype=None, copy=None):
        return self.base.__array__(dtype)

    @staticmethod
    def from_full(a: np.ndarray) -> "PsdMat":
        return PsdMat(SymMat(a))


def expm(a: np.ndarray) -> np.ndarray:
    """Matrix exponential of a real or complex square matrix.

    Scaling-and-squaring with Pade approximants (order picked from the norm),
    as provided by scipy.
    """
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DataError(f"expm needs a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NumericError("expm input has non-finite entries")
    return scipy.linalg.expm(a)


def sqrtm_psd(a: PsdMat | np.ndarray) -> SymMat:
    """Symmetric PSD square root S with S @ S = a.

    Eigenvalues within the PSD tolerance below zero are clamped to zero;
    anything further below is rejected at PsdMat construction.
    """
    if not isinstance(a, PsdMat):
        a = PsdMat.from_full(np.asarray(a, dtype=float))
    w, v = np.linalg.eigh(a.full)
    w = np.clip(w, 0.0, None)
    s = (v * np.sqrt(w)) @ v.T
    return SymMat(0.5 * (s + s.T))


def accumulate_logdet(dets: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Branch-continuous log-determinant from determinants along a path.

    ``dets[..., k]`` is det F(tau_k) on an increasing grid with F(0) regular.
    The argument is unwound step by step, each increment taken in (-pi, pi].

    Returns ``(logdet, max_jump)`` where ``max_jump`` is the largest per-step
    argument increment (used to decide whether the subdivision needs refining).
    """
    dets = np.asarray(dets, dtype=complex)
    if np.any(dets == 0) or not np.all(np.isfinite(dets)):
        raise TransformExplosionError("determinant vanished along the path")
    ratios = dets[..., 1:] / dets[..., :-1]
    dargs = np.angle(ratios)
    total_arg = np.angle(dets[..., 0]) + dargs.sum(axis=-1)
    logdet = np.log(np.abs(dets[..., -1])) + 1j * total_arg
    max_jump = np.abs(dargs).max(axis=-1) if dargs.shape[-1] else np.zeros(dets.shape[:-1])
    return logdet, max_jump


def logm_path(
    f: Callable[[float], np.ndarray],
    tau_end: float,
    n_steps: int = 64,
) -> np.ndarray:
    """Matrix L whose trace is the branch-continuous log det of ``f(tau_end)``.

    ``f`` maps tau to a nonsingular complex matrix with f(0) = I.  The trace is
    accumulated over a subdivision of [0, tau_end]; the subdivision doubles
    whenever a single step winds the determinant's argument by >= 0.9*pi.
    Only the trace carries the branch correction - it is the quantity consumed
    downstream (Tr log M = log det M).
    """
    if n_steps < 1:
        raise DataError("n_steps must be >= 1")
    f0 = np.asarray(f(0.0))
    dim = f0.shape[0]
    if tau_end == 0.0:
        return np.zeros((dim, dim), dtype=complex)

    n = n_steps
    while True:
        taus = np.linspace(0.0, tau_end, n + 1)
        mats = np.stack([np.asarray(f(t), dtype=complex) for t in taus])
        dets = np.linalg.det(mats)
        bad = np.flatnonzero(np.abs(dets) == 0.0)
        if bad.size or not np.all(np.isfinite(dets)):
            k = bad[0] if bad.size else int(np.flatnonzero(~np.isfinite(dets))[0])
            raise TransformExplosionError(
                f"det F vanished at tau={taus[k]:.6g}", tau_star=float(taus[k])
            )
        logdet, max_jump = accumulate_logdet(dets)
        if max_jump < _ARG_JUMP_LIMIT:
            break
        if 2 * n > _MAX_PATH_STEPS:
            raise NumericError(
                f"branch tracking needs more than {_MAX_PATH_STEPS} steps "
                f"(argument jump {max_jump:.3f} rad at n={n})"
            )
        n *= 2

    principal = scipy.linalg.logm(np.asarray(f(tau_end), dtype=complex))
    # Spread the winding correction over the diagonal so Tr L is exactly the
    # branch-continuous value.
    correction = (complex(logdet) - np.trace(principal)) / dim
    return principal + correction * np.eye(dim)


# ---------------------------------------------------------------------------
# Batched helpers for small real symmetric matrices (Monte Carlo hot path).
# ---------------------------------------------------------------------------


def sym_sqrt_batch(s: np.ndarray) -> np.ndarray:
    """PSD square roots of a stack of symmetric matrices, shape (n, d, d).

    Inputs are assumed PSD up to roundoff (clamp first if unsure). d == 1 and
    d == 2 use closed forms; larger d falls back to batched eigendecomposition.
    """
    d = s.shape[-1]
    if d == 1:
        return np.sqrt(np.clip(s, 0.0, None))
    if d == 2:
        a = s[:, 0, 0]
        b = s[:, 0, 1]
        c = s[:, 1, 1]
        det = np.clip(a * c - b * b, 0.0, None)
        r = np.sqrt(det)
        t = np.sqrt(np.clip(a + c + 2.0 * r, 0.0, None))
        safe_t = np.where(t > 0, t, 1.0)
        out = s.copy()
        out[:, 0, 0] = (a + r) / safe_t
        out[:, 1, 1] = (c + r) / safe_t
        out[:, 0, 1] = b / safe_t
        out[:, 1, 0] = out[:, 0, 1]
        out[t == 0] = 0.0
        return out
    w, v = np.linalg.eigh(s)
    w = np.clip(w, 0.0, None)
    return np.einsum("nij,nj,nkj->nik", v, np.sqrt(w), v)


def clamp_psd_batch(s: np.ndarray) -> tuple[np.ndarray, int]:
    """Project a stack of symmetric matrices onto the PSD cone.

    Returns the projected stack and the number of matrices that actually
    needed clamping (negative eigenvalue floored at zero).
    """
    d = s.shape[-1]
    if d == 1:
        mask = s[:, 0, 0] < 0.0
        out = np.clip(s, 0.0, None)
        return out, int(mask.sum())
    if d == 2:
        a = s[:, 0, 0]
        b = s[:, 0, 1]
        c = s[:, 1, 1]
        lam_min = 0.5 * ((a + c) - np.sqrt((a - c) ** 2 + 4.0 * b * b))
        mask = lam_min < 0.0
    else:
        lam_min = np.linalg.eigvalsh(s)[:, 0]
        mask = lam_min < 0.0
    n_clamped = int(mask.sum())
    if n_clamped == 0:
        return s, 0
    out = s.copy()
    w, v = np.linalg.eigh(s[mask])
    w = np.clip(w, 0.0, None)
    out[mask] = np.einsum("nij,nj,nkj->nik", v, w, v)
    return out, n_clamped
