"""Truncated Fock-space diagonalization of the driven Rabi Hamiltonian.

Independent ground truth for the G-function solver.  The Hamiltonian is
assembled in the product basis ``|n> (x) |s>`` with ``s`` the eigenvalue of
``sigma_x``; there the coupling and the bias are spin-diagonal and ``Delta``
is the only spin flip.  Eigenvalues come from an in-house dense symmetric
solver (Householder tridiagonalization + implicit QL), with a cyclic Jacobi
solver kept alongside for small matrices and cross-checks.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .model import InvalidParams, ModelParams, NonConvergence

DEFAULT_M = 60


@dataclass
class TruncatedHamiltonian:
    params: ModelParams
    M: int
    matrix: np.ndarray

    @property
    def dim(self) -> int:
        return 2 * (self.M + 1)


def build_hamiltonian(params: ModelParams, M: int = DEFAULT_M) -> TruncatedHamiltonian:
    """Dense H for bosons ``n = 0..M``; row index ``2 n + (0 for s=+1, 1 for s=-1)``."""
    if int(M) != M or M < 1:
        raise InvalidParams(f"M must be a positive integer, got {M}")
    w, g, d, e = params.omega, params.g, params.delta, params.epsilon
    dim = 2 * (M + 1)
    H = np.zeros((dim, dim))
    for n in range(M + 1):
        for j, s in enumerate((1.0, -1.0)):
            i = 2 * n + j
            H[i, i] = w * n + s * e
            if n < M:
                c = s * g * math.sqrt(n + 1)
                H[i + 2, i] = c
                H[i, i + 2] = c
        H[2 * n, 2 * n + 1] = d
        H[2 * n + 1, 2 * n] = d
    return TruncatedHamiltonian(params, int(M), H)


def tridiagonalize(A: np.ndarray):
    """Householder reduction of a symmetric matrix; returns ``(diag, offdiag)``."""
    A = np.array(A, dtype=float, copy=True)
    n = A.shape[0]
    d = np.zeros(n)
    e = np.zeros(n)
    for k in range(n - 2):
        x = A[k + 1:, k]
        alpha = np.linalg.norm(x)
        if alpha == 0.0:
            e[k] = 0.0
            d[k] = A[k, k]
            continue
        if x[0] > 0:
            alpha = -alpha
        v = x.copy()
        v[0] -= alpha
        vnorm2 = v @ v
        if vnorm2 == 0.0:
            e[k] = x[0]
            d[k] = A[k, k]
            continue
        # A' = P A P with P = I - 2 v v^T / (v^T v), applied to the trailing block
        B = A[k + 1:, k + 1:]
        p = B @ v * (2.0 / vnorm2)
        K = (v @ p) / vnorm2
        q = p - K * v
        B -= np.outer(v, q) + np.outer(q, v)
        d[k] = A[k, k]
        e[k] = alpha
    if n >= 2:
        d[n - 2] = A[n - 2, n - 2]
        e[n - 2] = A[n - 1, n - 2]
    d[n - 1] = A[n - 1, n - 1]
    return d, e[: max(n - 1, 0)]


def tridiagonal_ql(d, e, max_iter: int = 60) -> np.ndarray:
    """Eigenvalues of a symmetric tridiagonal matrix by implicit QL with Wilkinson shifts."""
    d = [float(v) for v in d]
    n = len(d)
    e = [float(v) for v in e] + [0.0]
    for l in range(n):
        it = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= 2.2e-16 * dd:
                    break
                m += 1
            if m == l:
                break
            it += 1
            if it > max_iter:
                raise NonConvergence("implicit QL did not converge")
            gg = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(gg, 1.0)
            gg = d[m] - d[l] + e[l] / (gg + math.copysign(r, gg))
            s = c = 1.0
            p = 0.0
            i = m - 1
            underflow = False
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, gg)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = gg / r
                gg = d[i + 1] - p
                r = (d[i] - gg) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = gg + p
                gg = c * r - b
                i -= 1
            if underflow:
                continue
            d[l] -= p
            e[l] = gg
            e[m] = 0.0
    return np.sort(np.array(d))


def jacobi_eigenvalues(A: np.ndarray, tol: float = 1e-12, max_sweeps: int = 50) -> np.ndarray:
    """Cyclic Jacobi rotations until the off-diagonal norm is below ``tol * ||A||_F``."""
    A = np.array(A, dtype=float, copy=True)
    n = A.shape[0]
    fro = np.linalg.norm(A)
    if fro == 0.0:
        return np.zeros(n)
    for _ in range(max_sweeps):
        off = math.sqrt(np.sum(np.triu(A, 1) ** 2) * 2.0)
        if off <= tol * fro:
            return np.sort(np.diag(A).copy())
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) < 1e-300:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                rp = A[p, :].copy()
                rq = A[q, :].copy()
                A[p, :] = c * rp - s * rq
                A[q, :] = s * rp + c * rq
                cp = A[:, p].copy()
                cq = A[:, q].copy()
                A[:, p] = c * cp - s * cq
                A[:, q] = s * cp + c * cq
                A[p, q] = A[q, p] = 0.0
    raise NonConvergence(f"Jacobi did not converge in {max_sweeps} sweeps")


def symmetric_eigenvalues(A: np.ndarray) -> np.ndarray:
    d, e = tridiagonalize(A)
    return tridiagonal_ql(d, e)


def eigenvalues(h, count: int | None = None) -> np.ndarray:
    """The ``count`` smallest eigenvalues of a TruncatedHamiltonian (or bare matrix), ascending."""
    A = h.matrix if isinstance(h, TruncatedHamiltonian) else np.asarray(h, dtype=float)
    n = A.shape[0]
    count = n if count is None else count
    if not 1 <= count <= n:
        raise InvalidParams(f"count must be in [1, {n}], got {count}")
    return symmetric_eigenvalues(A)[:count]


def oracle_energies(params: ModelParams, count: int, M: int = DEFAULT_M) -> np.ndarray:
    return eigenvalues(build_hamiltonian(params, M), count)


def oracle_gap(params: ModelParams, level: int, M: int = DEFAULT_M) -> float:
    """``E_{level+1} - E_level`` from the truncated Hamiltonian."""
    ev = oracle_energies(params, level + 2, M)
    return float(ev[level + 1] - ev[level])


FIXTURE_COLUMNS = ("omega", "g", "delta", "epsilon", "M", "level_index", "energy")


def write_fixture(path, points, count: int = 8, M: int = DEFAULT_M) -> None:
    """Pin oracle eigenvalues for each ModelParams in ``points`` as CSV (17 significant digits)."""
    with open(path, "w", newline="") as fh:
        fh.write(",".join(FIXTURE_COLUMNS) + "\n")
        for p in points:
            for i, e in enumerate(oracle_energies(p, count, M)):
                fh.write(f"{p.omega:.17g},{p.g:.17g},{p.delta:.17g},{p.epsilon:.17g},"
                         f"{M},{i},{e:.17g}\n")


def read_fixture(path) -> dict:
    """``{(ModelParams, M): array of energies}`` from a fixture CSV."""
    out = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            key = (ModelParams(float(row["omega"]), float(row["g"]), float(row["delta"]),
                               float(row["epsilon"])), int(row["M"]))
            out.setdefault(key, []).append((int(row["level_index"]), float(row["energy"])))
    return {k: np.array([e for _, e in sorted(v)]) for k, v in out.items()}
