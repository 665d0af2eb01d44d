"""Small matrix-product-state toolkit for open chains.

Conventions: each site tensor has axes (left bond, physical, right bond);
boundary bonds have dimension 1.  The state keeps an explicit
orthogonality center — tensors left of it are left-isometries, tensors
right of it right-isometries — moved around with exact QR steps.  Gates
act on 2 or 3 adjacent sites and are re-split with truncated SVDs.

Truncation bookkeeping: every SVD reports
``eps = sqrt(sum of discarded singular values squared)``; the state
accumulates ``sqrt(sum eps_i^2)``.  Truncated states are not
renormalized, so the norm decreases exactly by the reported amount.

Determinism: QR and SVD factors are gauge-fixed (first significant
component of each left vector rotated to the positive real axis), so
repeated runs produce identical tensors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    ShapeMismatch,
    SiteOutOfRange,
    SvdFailure,
    TruncationBudgetExceeded,
)


@dataclass(frozen=True)
class TruncationPolicy:
    """Bond truncation rule for gate applications.

    chi_max     : hard cap on kept singular values
    svd_cutoff  : drop singular values below this fraction of the largest
    budget      : optional ceiling on the state's cumulative truncation
                  error (sqrt of summed squared discarded weights)
    """

    chi_max: int = 64
    svd_cutoff: float = 1e-10
    budget: float | None = None


def robust_svd(mat: np.ndarray):
    """SVD with a divide-and-conquer -> general-purpose driver fallback."""
    try:
        return np.linalg.svd(mat, full_matrices=False)
    except np.linalg.LinAlgError:
        try:
            return scipy.linalg.svd(mat, full_matrices=False, lapack_driver="gesvd")
        except Exception as exc:  # pragma: no cover - pathological input
            raise SvdFailure(f"SVD failed on shape {mat.shape}: {exc}") from exc


def _fix_phases(u: np.ndarray, vh: np.ndarray):
    """Rotate each left vector's first significant entry to real positive."""
    for k in range(u.shape[1]):
        col = u[:, k]
        idx = np.flatnonzero(np.abs(col) > 1e-12)
        if idx.size == 0:
            continue
        ph = col[idx[0]] / abs(col[idx[0]])
        u[:, k] = col * np.conj(ph)
        vh[k, :] *= ph
    return u, vh


def split_svd(theta: np.ndarray, left_dim: int, policy: TruncationPolicy):
    """Split a matrix into (left iso, rest) with truncation.

    theta is (left_dim, right_dim); returns (U, SVh, eps) where U has
    orthonormal columns, SVh = diag(S) @ Vh carries the weight, and eps
    is the reported truncation error of this split.
    """
    if theta.ndim != 2 or theta.shape[0] != left_dim:
        raise ShapeMismatch(f"expected ({left_dim}, *) matrix, got {theta.shape}")
    u, s, vh = robust_svd(theta)
    if s.size == 0 or s[0] == 0.0:
        keep = 1
    else:
        keep = int(np.sum(s > policy.svd_cutoff * s[0]))
        keep = max(1, min(keep, policy.chi_max))
    eps = math.sqrt(float(np.sum(s[keep:] ** 2)))
    u, vh = _fix_phases(u[:, :keep], vh[:keep, :])
    return u, s[:keep, None] * vh, eps


class MPS:
    """Open-chain MPS with an explicit orthogonality center."""

    def __init__(self, tensors, center: int | None = None, labels=None):
        self.tensors = [np.asarray(t, dtype=complex) for t in tensors]
        if not self.tensors:
            raise ShapeMismatch("empty chain")
        if self.tensors[0].shape[0] != 1 or self.tensors[-1].shape[2] != 1:
            raise ShapeMismatch("boundary bonds must have dimension 1")
        for i in range(len(self.tensors) - 1):
            if self.tensors[i].shape[2] != self.tensors[i + 1].shape[0]:
                raise ShapeMismatch(
                    f"bond mismatch between sites {i} and {i + 1}:"
                    f" {self.tensors[i].shape} vs {self.tensors[i + 1].shape}"
                )
        self.center = center
        self.labels = list(labels) if labels is not None else [""] * len(self.tensors)
        self._trunc_sq = 0.0

    # -- basic queries ---------------------------------------------------

    @property
    def n_sites(self) -> int:
        return len(self.tensors)

    @property
    def bond_dims(self) -> list:
        return [t.shape[2] for t in self.tensors[:-1]]

    @property
    def truncation_error(self) -> float:
        """Cumulative reported truncation error, sqrt(sum eps^2)."""
        return math.sqrt(self._trunc_sq)

    def _check_site(self, i: int):
        if not 0 <= i < self.n_sites:
            raise SiteOutOfRange(f"site {i} not in chain of {self.n_sites}")

    def norm(self) -> float:
        """<psi|psi>^(1/2) by full transfer contraction (no gauge assumed)."""
        env = np.ones((1, 1), dtype=complex)
        for t in self.tensors:
            env = np.einsum("ab,apc,bpd->cd", env, np.conj(t), t, optimize=True)
        return math.sqrt(abs(float(env.real[0, 0])))

    def copy(self) -> "MPS":
        out = MPS([t.copy() for t in self.tensors], self.center, list(self.labels))
        out._trunc_sq = self._trunc_sq
        return out

    def to_dense(self) -> np.ndarray:
        """Full state vector, physical axes in site order (small chains only)."""
        acc = self.tensors[0][0]  # (p0, chi)
        for t in self.tensors[1:]:
            acc = np.tensordot(acc, t, axes=(acc.ndim - 1, 0))
        return acc[..., 0]

    # -- canonical form --------------------------------------------------

    def _shift_center_right(self, i: int):
        """QR step making site i a left isometry, center moves to i+1."""
        t = self.tensors[i]
        l, p, r = t.shape
        q, rr = np.linalg.qr(t.reshape(l * p, r))
        ph = np.ones(rr.shape[0], dtype=complex)
        d = np.diagonal(rr)
        nz = np.abs(d) > 1e-300
        ph[nz] = d[nz] / np.abs(d[nz])
        q = q * ph[None, :]
        rr = np.conj(ph)[:, None] * rr
        self.tensors[i] = q.reshape(l, p, q.shape[1])
        self.tensors[i + 1] = np.tensordot(rr, self.tensors[i + 1], axes=(1, 0))

    def _shift_center_left(self, i: int):
        """Make site i a right isometry, center moves to i-1."""
        t = self.tensors[i]
        l, p, r = t.shape
        q, rr = np.linalg.qr(t.reshape(l, p * r).conj().T)
        ph = np.ones(rr.shape[0], dtype=complex)
        d = np.diagonal(rr)
        nz = np.abs(d) > 1e-300
        ph[nz] = d[nz] / np.abs(d[nz])
        q = q * ph[None, :]
        rr = np.conj(ph)[:, None] * rr
        self.tensors[i] = q.conj().T.reshape(q.shape[1], p, r)
        self.tensors[i - 1] = np.tensordot(self.tensors[i - 1], rr.conj().T, axes=(2, 0))

    def canonicalize(self, center: int = 0):
        self._check_site(center)
        for i in range(center):
            self._shift_center_right(i)
        for i in range(self.n_sites - 1, center, -1):
            self._shift_center_left(i)
        self.center = center

    def move_center(self, to: int):
        self._check_site(to)
        if self.center is None:
            self.canonicalize(to)
            return
        while self.center < to:
            self._shift_center_right(self.center)
            self.center += 1
        while self.center > to:
            self._shift_center_left(self.center)
            self.center -= 1

    # -- gates -----------------------------------------------------------

    def apply_gate(self, first: int, gate: np.ndarray, policy: TruncationPolicy,
                   out_perm: tuple | None = None, n_sites: int = 2) -> float:
        """Apply a unitary on ``n_sites`` adjacent sites starting at ``first``.

        ``gate`` is a matrix over the joint physical space (row index =
        output, kron ordering = site order).  ``out_perm`` optionally
        redistributes the output physical axes over the sites — e.g.
        (1, 2, 0) realizes gate-then-cyclic-swap in a single splitting
        pass.  The center must sit inside the gate footprint; afterwards
        it is at the last site of the footprint.  Returns the truncation
        error added by this application.
        """
        last = first + n_sites - 1
        self._check_site(first)
        self._check_site(last)
        if self.center is None or not first <= self.center <= last:
            raise SiteOutOfRange(
                f"center {self.center} outside gate footprint [{first}, {last}]"
            )
        dims = [self.tensors[i].shape[1] for i in range(first, last + 1)]
        dim_joint = int(np.prod(dims))
        if gate.shape != (dim_joint, dim_joint):
            raise ShapeMismatch(
                f"gate shape {gate.shape} does not match joint dimension {dim_joint}"
            )
        theta = self.tensors[first]
        for i in range(first + 1, last + 1):
            theta = np.tensordot(theta, self.tensors[i], axes=(theta.ndim - 1, 0))
        # theta: (l, p1, .., pn, r) -> apply gate on the physical block
        l = theta.shape[0]
        r = theta.shape[-1]
        mat = theta.reshape(l, dim_joint, r)
        mat = np.einsum("PQ,lQr->lPr", gate, mat, optimize=True)
        out_dims = dims
        theta = mat.reshape([l] + dims + [r])
        if out_perm is not None:
            if sorted(out_perm) != list(range(n_sites)):
                raise ShapeMismatch(f"bad output permutation {out_perm!r}")
            theta = np.transpose(theta, [0] + [1 + p for p in out_perm] + [n_sites + 1])
            out_dims = [dims[p] for p in out_perm]
        added_sq = 0.0
        for k in range(n_sites - 1):
            ld = theta.shape[0] * out_dims[k]
            rest = theta.reshape(ld, -1)
            u, sv, eps = split_svd(rest, ld, policy)
            added_sq += eps * eps
            self.tensors[first + k] = u.reshape(theta.shape[0], out_dims[k], -1)
            theta = sv.reshape([u.shape[1]] + out_dims[k + 1:] + [r])
        self.tensors[last] = theta.reshape(theta.shape[0], out_dims[-1], r)
        self.center = last
        self._trunc_sq += added_sq
        if policy.budget is not None and self.truncation_error > policy.budget:
            raise TruncationBudgetExceeded(
                f"cumulative truncation error {self.truncation_error:.3e}"
                f" exceeds budget {policy.budget:.3e}"
            )
        return math.sqrt(added_sq)

    def apply_two_site_gate(self, site: int, gate: np.ndarray,
                            policy: TruncationPolicy) -> float:
        """Two-site convenience wrapper around :meth:`apply_gate`."""
        return self.apply_gate(site, gate, policy, n_sites=2)

    # -- expectations ----------------------------------------------------

    def expectation_local(self, site: int, op: np.ndarray) -> complex:
        """<op> at one site; moves the center there (state is mutated)."""
        self._check_site(site)
        self.move_center(site)
        t = self.tensors[site]
        if op.shape != (t.shape[1], t.shape[1]):
            raise ShapeMismatch(f"op shape {op.shape} vs physical dim {t.shape[1]}")
        num = np.einsum("lpr,pq,lqr->", np.conj(t), op, t, optimize=True)
        den = np.einsum("lpr,lpr->", np.conj(t), t, optimize=True)
        return complex(num / den)

    def expectation_product(self, ops: dict) -> complex:
        """<prod_i op_i> for single-site operators at distinct sites.

        Does not assume any canonical form; normalized by <psi|psi>.
        """
        env_o = np.ones((1, 1), dtype=complex)
        env_n = np.ones((1, 1), dtype=complex)
        for i, t in enumerate(self.tensors):
            env_n = np.einsum("ab,apc,bpd->cd", env_n, np.conj(t), t, optimize=True)
            if i in ops:
                op = ops[i]
                if op.shape != (t.shape[1], t.shape[1]):
                    raise ShapeMismatch(
                        f"op shape {op.shape} vs physical dim {t.shape[1]} at site {i}"
                    )
                tq = np.einsum("pq,lqr->lpr", op, t, optimize=True)
            else:
                tq = t
            env_o = np.einsum("ab,apc,bpd->cd", env_o, np.conj(t), tq, optimize=True)
        return complex(env_o[0, 0] / env_n[0, 0])

    # -- persistence -----------------------------------------------------

    def save(self, path):
        arrays = {f"tensor_{i}": t for i, t in enumerate(self.tensors)}
        np.savez(
            path,
            n_sites=self.n_sites,
            center=-1 if self.center is None else self.center,
            trunc_sq=self._trunc_sq,
            labels=np.array(self.labels),
            **arrays,
        )

    @staticmethod
    def load(path) -> "MPS":
        data = np.load(path, allow_pickle=False)
        n = int(data["n_sites"])
        tensors = [data[f"tensor_{i}"] for i in range(n)]
        center = int(data["center"])
        mps = MPS(tensors, None if center < 0 else center,
                  [str(x) for x in data["labels"]])
        mps._trunc_sq = float(data["trunc_sq"])
        return mps
