"""Matrix-free application of G ⊗ G, its transpose, and the two-block
forward operator acting on split real/imaginary spectrum vectors.

The product (G ⊗ G)x is factored through the mixed-product identity

    G ⊗ G = (G ⊗ I_m)(I_n ⊗ G),

and G ⊗ I_m is obtained from I_m ⊗ G by a row and a column permutation, so
one application costs two batched G-by-vector passes plus two index
shuffles, O(max(m, n)·mn) arithmetic, and the m² × n² matrix is never
assembled. All vectorizations are column-major (vec stacks columns); this
convention is fixed repository-wide.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class PowerIterationError(RuntimeError):
    """Power iteration failed to converge; carries the last estimate."""

    def __init__(self, message: str, last_estimate: float):
        super().__init__(message)
        self.last_estimate = last_estimate


def vec(matrix: np.ndarray) -> np.ndarray:
    """Column-stacking vectorization."""
    return np.asarray(matrix).ravel(order="F")


def unvec(v: np.ndarray, rows: int, cols: int) -> np.ndarray:
    """Inverse of :func:`vec`."""
    return np.asarray(v).reshape((rows, cols), order="F")


@dataclass(frozen=True)
class LeadField:
    """Real m × n mixing matrix with optional 3-D source positions (meters).

    Rows index sensors, columns index sources. Positions, when present,
    must provide one 3-vector per source.
    """

    entries: np.ndarray
    source_positions: np.ndarray | None = None

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=float)
        if entries.ndim != 2 or entries.shape[0] < 1 or entries.shape[1] < 1:
            raise ValueError(f"lead field must be a 2-D matrix, got shape {entries.shape}")
        if not np.all(np.isfinite(entries)):
            raise ValueError("lead field entries must be finite")
        object.__setattr__(self, "entries", entries)
        if self.source_positions is not None:
            pos = np.asarray(self.source_positions, dtype=float)
            if pos.shape != (entries.shape[1], 3):
                raise ValueError(
                    f"source positions must have shape ({entries.shape[1]}, 3), got {pos.shape}"
                )
            object.__setattr__(self, "source_positions", pos)

    @property
    def m(self) -> int:
        return self.entries.shape[0]

    @property
    def n(self) -> int:
        return self.entries.shape[1]

    def column_norms(self) -> np.ndarray:
        return np.linalg.norm(self.entries, axis=0)


def build_permutations(m: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Row and column permutations relating I_m ⊗ G to G ⊗ I_m.

    Returns 0-based index arrays (xi_r of length m², xi_c of length n·m)
    implementing the closed forms

        xi_r(i) = mod(i-1, m)·m + floor((i-1)/m) + 1,   i = 1..m²,
        xi_c(j) = mod(j-1, n)·m + floor((j-1)/n) + 1,   j = 1..nm,

    shifted down by one. Both are bijections; xi_r is an involution.
    The permutations are applied as gathers: (P y)[i] = y[xi(i)].
    """
    if m < 1 or n < 1:
        raise ValueError("m and n must be positive")
    i = np.arange(m * m)
    xi_r = (i % m) * m + i // m
    j = np.arange(n * m)
    xi_c = (j % n) * m + j // n
    return xi_r, xi_c


class KronWorkspace:
    """Preallocated scratch buffers so repeated applies allocate nothing
    but their output. One workspace serves one operator; not thread-safe."""

    def __init__(self, m: int, n: int):
        self.fwd_stage = np.empty((n, m))
        self.fwd_shuffle = np.empty(n * m)
        self.fwd_tail = np.empty((m, m))
        self.adj_stage = np.empty((m, n))
        self.adj_shuffle = np.empty(m * n)
        self.adj_tail = np.empty((n, n))


class KronOperator:
    """Matrix-free G ⊗ G built from a lead field.

    Immutable after construction and safe to share across threads; per-call
    scratch state lives in an optional :class:`KronWorkspace`.
    """

    def __init__(self, lead_field: LeadField):
        self.lead_field = lead_field
        self.xi_r, self.xi_c = build_permutations(lead_field.m, lead_field.n)
        # transpose side swaps the roles of m and n, with fresh permutations
        self._xi_r_t, self._xi_c_t = build_permutations(lead_field.n, lead_field.m)
        self._g = np.ascontiguousarray(lead_field.entries)
        self._gt = np.ascontiguousarray(lead_field.entries.T)

    @property
    def m(self) -> int:
        return self.lead_field.m

    @property
    def n(self) -> int:
        return self.lead_field.n

    def workspace(self) -> KronWorkspace:
        return KronWorkspace(self.m, self.n)

    def apply(self, x: np.ndarray, workspace: KronWorkspace | None = None) -> np.ndarray:
        """(G ⊗ G) x for x of length n², returning a vector of length m².

        Steps: n products G·(n-vector), gather by xi_c, m products
        G·(n-vector), gather by xi_r. Note x.reshape(n, n) row-major is the
        transpose of unvec(x), which turns each batched pass into a single
        row-major matmul with no layout copies.
        """
        m, n = self.m, self.n
        x = np.asarray(x, dtype=float)
        if x.shape != (n * n,):
            raise ValueError(f"expected input of shape ({n * n},), got {x.shape}")
        if workspace is None:
            yhat = (x.reshape(n, n) @ self._gt).ravel()[self.xi_c]
            return (yhat.reshape(m, n) @ self._gt).ravel()[self.xi_r]
        ws = workspace
        np.matmul(x.reshape(n, n), self._gt, out=ws.fwd_stage)
        np.take(ws.fwd_stage.reshape(-1), self.xi_c, out=ws.fwd_shuffle)
        np.matmul(ws.fwd_shuffle.reshape(m, n), self._gt, out=ws.fwd_tail)
        return ws.fwd_tail.reshape(-1)[self.xi_r]

    def apply_transpose(self, y: np.ndarray, workspace: KronWorkspace | None = None) -> np.ndarray:
        """(Gᵀ ⊗ Gᵀ) y for y of length m², same factorization run on Gᵀ."""
        m, n = self.m, self.n
        y = np.asarray(y, dtype=float)
        if y.shape != (m * m,):
            raise ValueError(f"expected input of shape ({m * m},), got {y.shape}")
        if workspace is None:
            yhat = (y.reshape(m, m) @ self._g).ravel()[self._xi_c_t]
            return (yhat.reshape(n, m) @ self._g).ravel()[self._xi_r_t]
        ws = workspace
        np.matmul(y.reshape(m, m), self._g, out=ws.adj_stage)
        np.take(ws.adj_stage.reshape(-1), self._xi_c_t, out=ws.adj_shuffle)
        np.matmul(ws.adj_shuffle.reshape(n, m), self._g, out=ws.adj_tail)
        return ws.adj_tail.reshape(-1)[self._xi_r_t]

    def apply_block(
        self,
        s1: np.ndarray,
        s2: np.ndarray,
        workspace: KronWorkspace | None = None,
    ) -> tuple[np.ndarray, np.ndarray]:
        """Action of the block-diagonal two-copy operator on (s1, s2).

        The blocks do not couple: returns (apply(s1), apply(s2)).
        """
        return self.apply(s1, workspace), self.apply(s2, workspace)

    def apply_block_transpose(
        self,
        r1: np.ndarray,
        r2: np.ndarray,
        workspace: KronWorkspace | None = None,
    ) -> tuple[np.ndarray, np.ndarray]:
        return self.apply_transpose(r1, workspace), self.apply_transpose(r2, workspace)


def lipschitz_constant(
    lead_field: LeadField,
    tol: float = 1e-10,
    max_iterations: int = 10_000,
) -> float:
    """Smallest Lipschitz constant of the data-fit gradient, L = 2·λ_max(GᵀG)².

    λ_max(GᵀG) is estimated by power iteration applied matrix-free as
    Gᵀ(Gv), started from the normalized all-ones vector for reproducibility,
    stopping when successive eigenvalue estimates differ by less than
    ``tol`` relatively. If the start vector happens to lie in the null
    space, the iteration restarts from canonical basis vectors in order.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    g = lead_field.entries
    n = lead_field.n
    if not np.any(g):
        raise ValueError("lead field must be nonzero")

    restarts = [np.ones(n)]
    restarts.extend(np.eye(n)[k] for k in range(n))
    restart_idx = 0
    v = restarts[restart_idx] / np.linalg.norm(restarts[restart_idx])
    prev = np.inf
    lam = 0.0
    for _ in range(max_iterations):
        w = g.T @ (g @ v)
        lam = float(v @ w)
        norm_w = np.linalg.norm(w)
        if norm_w == 0.0:
            restart_idx += 1
            if restart_idx >= len(restarts):
                # G v = 0 for every start vector attempted: G is zero, ruled out above
                raise PowerIterationError("power iteration trapped in null space", lam)
            v = restarts[restart_idx]
            prev = np.inf
            continue
        v = w / norm_w
        if np.isfinite(prev) and abs(lam - prev) <= tol * abs(lam):
            return 2.0 * lam * lam
        prev = lam
    raise PowerIterationError(
        f"power iteration did not converge within {max_iterations} iterations "
        f"(last eigenvalue estimate {lam!r})",
        lam,
    )
