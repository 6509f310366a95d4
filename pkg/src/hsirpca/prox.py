"""Shrinkage operators for the alternating solver and their optimality
certificates.

`singular_value_shrink` is the proximal operator of the nuclear norm
(soft-thresholds the singular values); `group_soft_threshold` is the
proximal operator of the column-wise l2,1 norm. The paired `*_optimality_gap`
functions measure how far a candidate is from satisfying the subgradient
conditions that characterize each prox, so solver updates can be certified
rather than trusted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

NDArrayF = npt.NDArray[np.floating]

_ORTHO_TOL = 1e-10


@dataclass(frozen=True)
class ThinSvd:
    """Rank-truncated SVD: U diag(S) V^T reconstructs the input."""
    U: NDArrayF               # [n, rank], orthonormal columns
    S: NDArrayF               # [rank], descending, nonnegative
    V: NDArrayF               # [p, rank], orthonormal columns
    rank: int

    def __post_init__(self):
        if self.U.ndim != 2 or self.V.ndim != 2 or self.S.ndim != 1:
            raise ValueError("ThinSvd factors have wrong dimensionality")
        r = self.rank
        if not (self.U.shape[1] == self.V.shape[1] == self.S.shape[0] == r):
            raise ValueError("ThinSvd factor shapes disagree on the rank")
        if np.any(self.S < 0) or np.any(np.diff(self.S) > 0):
            raise ValueError("ThinSvd.S must be nonnegative and descending")
        eye = np.eye(r)
        for name, f in (("U", self.U), ("V", self.V)):
            if r and np.linalg.norm(f.T @ f - eye, 2) > _ORTHO_TOL:
                raise ValueError("ThinSvd.%s columns are not orthonormal" % name)

    def compose(self) -> NDArrayF:
        return (self.U * self.S) @ self.V.T


def thin_svd(m: NDArrayF, rank_tol: float = 1e-12) -> ThinSvd:
    """SVD truncated at singular values <= rank_tol * (largest)."""
    m = np.asarray(m, dtype=np.float64)
    if not np.all(np.isfinite(m)):
        raise ValueError("thin_svd input must be finite")
    U, s, Vt = np.linalg.svd(m, full_matrices=False)
    if s.size and s[0] > 0:
        r = int(np.sum(s > rank_tol * s[0]))
    else:
        r = 0
    return ThinSvd(U=U[:, :r].copy(), S=s[:r].copy(), V=Vt[:r].T.copy(), rank=r)


def singular_value_shrink(m: NDArrayF, theta: float) -> NDArrayF:
    """Soft-threshold the singular values of m by theta (SVT)."""
    if theta < 0:
        raise ValueError("theta must be nonnegative")
    m = np.asarray(m, dtype=np.float64)
    U, s, Vt = np.linalg.svd(m, full_matrices=False)
    return (U * np.maximum(s - theta, 0.0)) @ Vt


def svt_optimality_gap(m: NDArrayF, theta: float, L_hat: NDArrayF,
                       rank_tol: float = 1e-12) -> float:
    """Violation of the subgradient conditions for
    L_hat = argmin theta*||X||_* + 0.5*||X - m||_F^2.

    With G = (m - L_hat)/theta and U0, V0 spanning L_hat's column/row
    spaces, optimality requires ||G||_2 <= 1, U0^T (G - U0 V0^T) = 0 and
    (G - U0 V0^T) V0 = 0. Returns the largest violation; for theta = 0 the
    prox is the identity and the gap is ||m - L_hat||_F.
    """
    m = np.asarray(m, dtype=np.float64)
    L_hat = np.asarray(L_hat, dtype=np.float64)
    if theta == 0:
        return float(np.linalg.norm(m - L_hat, "fro"))
    G = (m - L_hat) / theta
    gap = max(float(np.linalg.norm(G, 2)) - 1.0, 0.0)
    f = thin_svd(L_hat, rank_tol=rank_tol)
    if f.rank:
        W = G - f.U @ f.V.T
        gap = max(gap,
                  float(np.abs(f.U.T @ W).max()),
                  float(np.abs(W @ f.V).max()))
    return gap


def group_soft_threshold(m: NDArrayF, kappa: float) -> NDArrayF:
    """Shrink each column's l2 norm by kappa; columns at or below kappa
    become zero. Zero columns stay zero (the prox of ||.||_2 at 0)."""
    if kappa < 0:
        raise ValueError("kappa must be nonnegative")
    m = np.asarray(m, dtype=np.float64)
    norms = np.linalg.norm(m, axis=0)
    factor = np.zeros_like(norms)
    nz = norms > 0
    factor[nz] = np.maximum(norms[nz] - kappa, 0.0) / norms[nz]
    return m * factor


def group_threshold_optimality_gap(m: NDArrayF, kappa: float,
                                   F_hat: NDArrayF) -> float:
    """Violation of the per-column stationarity of
    F_hat = argmin kappa*||X||_{2,1} + 0.5*||X - m||_F^2.

    Nonzero columns must satisfy m_j = F_j + kappa*F_j/||F_j||; zero
    columns must satisfy ||m_j|| <= kappa. Returns the largest violation.
    """
    m = np.asarray(m, dtype=np.float64)
    F_hat = np.asarray(F_hat, dtype=np.float64)
    if m.shape != F_hat.shape:
        raise ValueError("shape mismatch between m and F_hat")
    norms = np.linalg.norm(F_hat, axis=0)
    nz = norms > 0
    gap = 0.0
    if nz.any():
        resid = m[:, nz] - F_hat[:, nz] * (1.0 + kappa / norms[nz])
        gap = float(np.linalg.norm(resid, axis=0).max())
    if (~nz).any():
        slack = np.linalg.norm(m[:, ~nz], axis=0) - kappa
        gap = max(gap, float(np.maximum(slack, 0.0).max()))
    return gap
