"""Accelerated proximal-gradient (FISTA) solver for the ℓ1-regularized
least-squares estimate of a hidden cross-power spectrum.

The unknown is the pair (s1, s2) of column-major vectorizations of the
real and imaginary parts of an Hermitian n × n matrix, so s1 always
encodes a symmetric matrix and s2 an antisymmetric one. Starting from an
Hermitian initialization, every iterate provably keeps that structure in
exact arithmetic; see fista_solve for how floating-point drift of that
structure is handled.

Implementation notes against the published pseudocode this follows:
  * t₀ = 1 rather than 0, so the first extrapolation coefficient is 0
    (a plain proximal-gradient step) instead of −1;
  * the loop runs until the relative ℓ1 change drops below the tolerance
    or the iteration cap is reached, with the change initialized to +∞.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .kron import KronOperator, unvec, vec
from .spectral import CrossSpectrum, split_data_vectors

#: Four regularization scaling factors evenly log-spaced in [1e-2, 1e-1].
DEFAULT_KAPPA_GRID: tuple[float, ...] = tuple(np.logspace(-2.0, -1.0, 4))

SPLIT_SYMMETRY_ATOL = 1e-10


@dataclass(frozen=True)
class SplitSpectrum:
    """Split vectorization (real part, imaginary part) of an Hermitian matrix.

    s1 must vectorize a symmetric matrix and s2 an antisymmetric one,
    within an absolute tolerance of 1e-10 scaled up for data of magnitude
    above one.
    """

    s1: np.ndarray
    s2: np.ndarray
    n: int

    def __post_init__(self):
        s1 = np.asarray(self.s1, dtype=float)
        s2 = np.asarray(self.s2, dtype=float)
        n = self.n
        if s1.shape != (n * n,) or s2.shape != (n * n,):
            raise ValueError(f"split vectors must have shape ({n * n},)")
        scale = max(1.0, np.max(np.abs(s1), initial=0.0), np.max(np.abs(s2), initial=0.0))
        atol = SPLIT_SYMMETRY_ATOL * scale
        m1 = s1.reshape(n, n)
        m2 = s2.reshape(n, n)
        if np.max(np.abs(m1 - m1.T), initial=0.0) > atol:
            raise ValueError("s1 does not vectorize a symmetric matrix")
        if np.max(np.abs(m2 + m2.T), initial=0.0) > atol:
            raise ValueError("s2 does not vectorize an antisymmetric matrix")
        object.__setattr__(self, "s1", s1)
        object.__setattr__(self, "s2", s2)

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> "SplitSpectrum":
        matrix = np.asarray(matrix, dtype=complex)
        n = matrix.shape[0]
        return cls(vec(matrix.real), vec(matrix.imag), n)

    def to_matrix(self) -> np.ndarray:
        return unvec(self.s1, self.n, self.n) + 1j * unvec(self.s2, self.n, self.n)


@dataclass(frozen=True)
class FistaConfig:
    """Solver parameters: ℓ1 weight, Lipschitz constant, iteration budget."""

    lam: float
    lipschitz: float
    max_iterations: int = 5000
    tolerance: float = 1e-5
    seed: int = 0

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("lam must be positive")
        if self.lipschitz <= 0:
            raise ValueError("lipschitz must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")


@dataclass(frozen=True)
class FistaResult:
    estimate: SplitSpectrum
    iterations_run: int
    final_change: float
    converged: bool
    objective_trace: tuple[float, ...]


def shrink(x: np.ndarray, alpha: float) -> np.ndarray:
    """Soft threshold (|x| − alpha)⁺ · sign(x), the prox of alpha·‖·‖₁."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.maximum(np.abs(x) - alpha, 0.0)


def objective(
    op: KronOperator,
    s: SplitSpectrum,
    data_re: np.ndarray,
    data_im: np.ndarray,
    lam: float,
) -> float:
    """‖(G⊗G)s1 − dre‖² + ‖(G⊗G)s2 − dim‖² + λ(‖s1‖₁ + ‖s2‖₁)."""
    r1, r2 = op.apply_block(s.s1, s.s2)
    fit = float(np.sum((r1 - data_re) ** 2) + np.sum((r2 - data_im) ** 2))
    return fit + lam * float(np.abs(s.s1).sum() + np.abs(s.s2).sum())


def random_hermitian_init(n: int, seed: int) -> SplitSpectrum:
    """Split vectorization of (A + Aᴴ)/2 for A with standard-normal parts."""
    if n < 1:
        raise ValueError("n must be positive")
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return SplitSpectrum.from_matrix((a + a.conj().T) / 2.0)


def lambda_star(op: KronOperator, observed: CrossSpectrum) -> float:
    """Smallest ℓ1 weight at which the all-zero estimate is optimal.

    2·‖𝒢ᵀd‖_∞ over the stacked split data d; any λ at or above it drives
    the solver to the zero solution (0 for zero data).
    """
    data_re, data_im = split_data_vectors(observed)
    g1 = op.apply_transpose(data_re)
    g2 = op.apply_transpose(data_im)
    return 2.0 * max(np.max(np.abs(g1), initial=0.0), np.max(np.abs(g2), initial=0.0))


def fista_solve(
    op: KronOperator,
    observed: CrossSpectrum,
    cfg: FistaConfig,
    init: SplitSpectrum | None = None,
    iteration_callback=None,
    structure_projection: bool = True,
) -> FistaResult:
    """Sparse estimate of the hidden spectrum behind ``observed``.

    Runs the accelerated iteration: gradient step w − (2/L)·𝒢ᵀ(𝒢w − d) on
    each block, soft threshold at λ/L, momentum t_k = (1 + √(1+4t²))/2 and
    extrapolation, stopping when the relative ℓ1 change e drops below the
    tolerance or the iteration cap is hit. All products are matrix-free.

    In exact arithmetic every iterate keeps s1 symmetric and s2
    antisymmetric; in floating point the momentum step amplifies roundoff
    asymmetry geometrically once active sets start flickering (observable
    at a few thousand iterations on 100-source problems). With
    ``structure_projection`` on (the default), each iterate is projected
    back onto its structure subspace, an exact no-op per the preservation
    theorem; turn it off to observe the raw iteration, which then only
    re-zeros the diagonal of s2.

    ``iteration_callback(k, s1, s2, w1, w2)``, when given, observes every
    iterate (read-only views); used by the structure-preservation checks.
    """
    if observed.channel_count != op.m:
        raise ValueError(
            f"observed spectrum has {observed.channel_count} channels, operator expects {op.m}"
        )
    n = op.n
    data_re, data_im = split_data_vectors(observed)
    if init is None:
        init = random_hermitian_init(n, cfg.seed)
    elif init.n != n:
        raise ValueError(f"init has n={init.n}, operator expects {n}")

    ws = op.workspace()
    step = 2.0 / cfg.lipschitz
    threshold = cfg.lam / cfg.lipschitz
    diag_idx = np.arange(n) * n + np.arange(n)

    s1 = init.s1.copy()
    s2 = init.s2.copy()
    w1 = s1.copy()
    w2 = s2.copy()
    t_prev = 1.0
    change = np.inf
    trace: list[float] = []
    k = 0

    def _objective(a1, a2):
        r1 = op.apply(a1, ws) - data_re
        r2 = op.apply(a2, ws) - data_im
        return float(r1 @ r1 + r2 @ r2 + cfg.lam * (np.abs(a1).sum() + np.abs(a2).sum()))

    while k < cfg.max_iterations:
        k += 1
        grad1 = op.apply_transpose(op.apply(w1, ws) - data_re, ws)
        grad2 = op.apply_transpose(op.apply(w2, ws) - data_im, ws)
        s1_next = shrink(w1 - step * grad1, threshold)
        s2_next = shrink(w2 - step * grad2, threshold)
        if structure_projection:
            v1 = s1_next.reshape(n, n)
            s1_next = ((v1 + v1.T) / 2.0).ravel()
            v2 = s2_next.reshape(n, n)
            s2_next = ((v2 - v2.T) / 2.0).ravel()  # also zeroes the diagonal exactly
        else:
            s2_next[diag_idx] = 0.0  # antisymmetric diagonal, guards roundoff drift

        t_k = (1.0 + np.sqrt(1.0 + 4.0 * t_prev * t_prev)) / 2.0
        beta = (t_prev - 1.0) / t_k
        w1 = s1_next + beta * (s1_next - s1)
        w2 = s2_next + beta * (s2_next - s2)

        numer = float(np.abs(s1_next - s1).sum() + np.abs(s2_next - s2).sum())
        denom = float(np.abs(s1_next).sum() + np.abs(s2_next).sum())
        if denom == 0.0:
            change = 0.0 if numer == 0.0 else np.inf
        else:
            change = numer / denom

        s1, s2 = s1_next, s2_next
        t_prev = t_k
        trace.append(_objective(s1, s2))
        if iteration_callback is not None:
            iteration_callback(k, s1, s2, w1, w2)
        if change < cfg.tolerance:
            break

    return FistaResult(
        estimate=SplitSpectrum(s1, s2, n),
        iterations_run=k,
        final_change=float(change),
        converged=bool(change < cfg.tolerance),
        objective_trace=tuple(trace),
    )


def lambda_grid(
    op: KronOperator,
    observed: CrossSpectrum,
    scaling_factors=None,
    *,
    cfg: FistaConfig | None = None,
    lipschitz: float | None = None,
    max_iterations: int = 5000,
    tolerance: float = 1e-5,
    seed: int = 0,
    init: SplitSpectrum | None = None,
) -> list[tuple[float, FistaResult]]:
    """Solve at λ = κ·λ* for each scaling factor κ (default four-point grid).

    Solver parameters come either from ``cfg`` (its lam is overwritten) or
    from the individual keywords, in which case ``lipschitz`` is required.
    """
    if scaling_factors is None:
        scaling_factors = DEFAULT_KAPPA_GRID
    factors = [float(f) for f in scaling_factors]
    if any(f <= 0 for f in factors):
        raise ValueError("scaling factors must be positive")
    lam_star = lambda_star(op, observed)
    results = []
    for factor in factors:
        lam = factor * lam_star
        if cfg is not None:
            run_cfg = replace(cfg, lam=lam)
        else:
            if lipschitz is None:
                raise ValueError("either cfg or lipschitz must be provided")
            run_cfg = FistaConfig(
                lam=lam,
                lipschitz=lipschitz,
                max_iterations=max_iterations,
                tolerance=tolerance,
                seed=seed,
            )
        results.append((lam, fista_solve(op, observed, run_cfg, init=init)))
    return results
