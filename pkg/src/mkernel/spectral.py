"""Spectral decomposition of kernel integral operators over quadrature
measures.

The integral operator (T f)(x) = integral K(x, y) f(y) dmu(y) is discretized
on the measure nodes. Symmetrizing by the square-root weights turns the
weighted eigenproblem into an ordinary symmetric one:

    A = W^{1/2} G W^{1/2},   A v_k = sigma_k v_k,   phi_k = v_k / sqrt(w),

where G is the block Gram matrix and W repeats each node weight once per
output component. The eigenfunctions phi_k are orthonormal in L^2(mu) by
construction, and sum_k sigma_k equals the weighted trace of K on the
diagonal. For a PD kernel the quadratic form of any f is the sum of the
nonnegative terms sigma_k <phi_k, f>_mu^2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domains import QuadratureMeasure
from .integral import MeasureGram, TestFunction, measure_gram
from .kernels import MatrixKernel

DROP_TOLERANCE = 1e-12


@dataclass(frozen=True)
class SpectralDecomposition:
    """Retained eigenpairs of the discretized kernel operator.

    sigmas are descending and strictly positive; phis[k] holds eigenfunction
    values at the measure nodes, shape (n, N). ``dropped`` counts discarded
    eigenvalues and ``dropped_mass`` is their sum; ``not_pd`` flags a
    negative eigenvalue beyond tolerance.
    """

    sigmas: np.ndarray
    phis: np.ndarray
    nodes: np.ndarray
    weights: np.ndarray
    block_dim: int
    dropped: int
    dropped_mass: float
    not_pd: bool
    drop_tolerance: float

    @property
    def rank(self) -> int:
        return self.sigmas.size

    def to_json(self, max_rank: int | None = None) -> dict:
        r = self.rank if max_rank is None else min(self.rank, int(max_rank))
        return {
            "sigmas": self.sigmas[:r].tolist(),
            "phis": self.phis[:r].tolist(),
            "dropped": self.dropped,
            "dropped_mass": self.dropped_mass,
            "not_pd_flag": self.not_pd,
            "rank": self.rank,
            "drop_tolerance": self.drop_tolerance,
        }


def nystrom_decompose(kernel: MatrixKernel, measure: QuadratureMeasure,
                      drop_tolerance: float = DROP_TOLERANCE,
                      gram: MeasureGram | None = None) -> SpectralDecomposition:
    """Eigendecompose the kernel operator discretized on a measure.

    Keeps eigenvalues above drop_tolerance times the largest one; requires
    strictly positive quadrature weights (the square-root rescaling divides
    by them).
    """
    if np.any(measure.weights <= 0):
        raise ValueError("spectral decomposition needs strictly positive weights")
    if gram is None:
        gram = measure_gram(kernel, measure)
    n, N = len(measure), kernel.output_dim
    sw = np.sqrt(np.repeat(measure.weights, N))
    A = gram.flat * np.multiply.outer(sw, sw)
    evals, evecs = np.linalg.eigh(A)
    evals, evecs = evals[::-1], evecs[:, ::-1]
    sig_max = float(evals[0]) if evals.size else 0.0
    threshold = drop_tolerance * max(1.0, abs(sig_max))
    keep = evals > threshold
    not_pd = bool(evals.size and float(evals[-1]) < -threshold)
    phis = (evecs[:, keep] / sw[:, None]).T.reshape(-1, n, N)
    return SpectralDecomposition(
        sigmas=evals[keep].copy(),
        phis=phis,
        nodes=measure.nodes,
        weights=measure.weights,
        block_dim=N,
        dropped=int((~keep).sum()),
        dropped_mass=float(evals[~keep].sum()),
        not_pd=not_pd,
        drop_tolerance=drop_tolerance,
    )


def eigenfunction_gram(decomp: SpectralDecomposition) -> np.ndarray:
    """L^2(mu) inner products <phi_k, phi_l>_mu; identity when orthonormal."""
    wphi = decomp.weights[None, :, None] * decomp.phis
    return np.einsum("knc,lnc->kl", wphi, decomp.phis)


def reconstruct(decomp: SpectralDecomposition, ix: int, iy: int,
                terms: int | None = None) -> np.ndarray:
    """Partial-sum reconstruction sum_k sigma_k phi_k(x_ix) phi_k(x_iy)^T."""
    m = decomp.rank if terms is None else int(terms)
    if m > decomp.rank:
        raise ValueError(f"decomposition retains only {decomp.rank} terms, asked for {m}")
    px = decomp.phis[:m, ix, :]
    py = decomp.phis[:m, iy, :]
    return np.einsum("k,ka,kb->ab", decomp.sigmas[:m], px, py)


def trace_functional(kernel: MatrixKernel, measure: QuadratureMeasure) -> float:
    """Weighted diagonal trace sum_a w_a Tr K(x_a, x_a).

    Equals the sum of all eigenvalues of the discretized operator.
    """
    diag = kernel.eval_pairs(measure.nodes, measure.nodes)
    return float(measure.weights @ np.trace(diag, axis1=1, axis2=2))


def spectral_coefficients(decomp: SpectralDecomposition, fn: TestFunction) -> np.ndarray:
    """Projections <phi_k, f>_mu of a function onto the eigenfunctions."""
    F = fn.values_on(decomp.nodes)
    if F.shape[1] != decomp.block_dim:
        raise ValueError(
            f"function has {F.shape[1]} components, decomposition block size is {decomp.block_dim}"
        )
    return np.einsum("knc,nc->k", decomp.phis, decomp.weights[:, None] * F)


def quadform_via_spectrum(decomp: SpectralDecomposition, fn: TestFunction,
                          return_terms: bool = False):
    """B(f, f) through the eigenexpansion: sum_k sigma_k <phi_k, f>_mu^2.

    Every summand is nonnegative (retained sigmas are positive), which is
    the spectral shape of positive definiteness.
    """
    coeffs = spectral_coefficients(decomp, fn)
    terms = decomp.sigmas * coeffs**2
    total = float(terms.sum())
    if return_terms:
        return total, terms
    return total


def nystrom_extension(decomp: SpectralDecomposition, kernel: MatrixKernel, x) -> np.ndarray:
    """Eigenfunction values at an off-node point x, shape (rank, N).

    phi_k(x) = (1 / sigma_k) sum_a w_a K(x, x_a) phi_k(x_a).
    """
    x = np.atleast_1d(np.asarray(x, dtype=float)).reshape(1, -1)
    Kx = kernel.eval_pairwise(x, decomp.nodes)[0]
    wphi = decomp.weights[None, :, None] * decomp.phis
    vals = np.einsum("nab,knb->ka", Kx, wphi)
    return vals / decomp.sigmas[:, None]
