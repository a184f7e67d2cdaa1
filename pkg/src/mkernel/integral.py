"""Integral positive definiteness: kernel quadratic forms against measures.

The integral quadratic form of a kernel K, a vector-valued function f and a
measure mu is

    B(f, f) = integral integral f(x)^T K(x, y) f(y) dmu(x) dmu(y),

here evaluated over quadrature measures as a doubly weighted sum. The module
provides random test functions, the Urysohn bump construction that converts
a discrete witness into an integral one, a quantified comparison between
the integral form of such a bump function and its discrete counterpart, a
randomized harness checking that the discrete and integral notions of
positive definiteness agree, and a truncation study over nested regions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .certify import DEFAULT_TOLERANCE, SearchReport, random_search_witness
from .domains import BOUNDARY_TOL, Ball, QuadratureMeasure, region_mask
from .kernels import MatrixKernel, gram_blocks


@dataclass(frozen=True)
class MeasureGram:
    """Kernel blocks over all pairs of measure nodes, flattened for reuse.

    Computing this once per (kernel, measure) makes every subsequent
    quadratic form a single matrix-vector product.
    """

    blocks: np.ndarray
    flat: np.ndarray = field(init=False)
    sup_norm: float = field(init=False)

    def __post_init__(self):
        n, N = self.blocks.shape[0], self.blocks.shape[2]
        flat = self.blocks.transpose(0, 2, 1, 3).reshape(n * N, n * N)
        object.__setattr__(self, "flat", flat)
        norms = np.linalg.norm(self.blocks, axis=(2, 3)) if n else np.zeros((0, 0))
        object.__setattr__(self, "sup_norm", float(norms.max()) if n else 0.0)


def measure_gram(kernel: MatrixKernel, measure: QuadratureMeasure) -> MeasureGram:
    if kernel.unbounded_diagonal:
        raise ValueError(
            f"kernel {kernel.name!r} is unbounded on the diagonal; "
            "integral quadratic forms against it diverge"
        )
    return MeasureGram(gram_blocks(kernel, measure.nodes))


@dataclass
class TestFunction:
    """Vector-valued function with a batch evaluator and a JSON-able label."""

    family: str
    params: dict
    output_dim: int
    batch: callable

    def values_on(self, nodes) -> np.ndarray:
        X = np.asarray(nodes, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        V = np.asarray(self.batch(X), dtype=float)
        return V.reshape(X.shape[0], self.output_dim)

    def __call__(self, x) -> np.ndarray:
        return self.values_on(np.atleast_1d(np.asarray(x, dtype=float)).reshape(1, -1))[0]

    def describe(self) -> dict:
        return {"family": self.family, "params": self.params}


def constant_function(vector) -> TestFunction:
    v = np.atleast_1d(np.asarray(vector, dtype=float))
    return TestFunction(
        "constant", {"vector": v.tolist()}, v.size,
        lambda X, v=v: np.broadcast_to(v, (X.shape[0], v.size)),
    )


def quadform(kernel: MatrixKernel, fn: TestFunction, measure: QuadratureMeasure,
             gram: MeasureGram | None = None) -> float:
    """Integral quadratic form B(f, f) of a kernel against a measure."""
    if fn.output_dim != kernel.output_dim:
        raise ValueError(
            f"function has {fn.output_dim} components, kernel size is {kernel.output_dim}"
        )
    if gram is None:
        gram = measure_gram(kernel, measure)
    F = fn.values_on(measure.nodes)
    u = (measure.weights[:, None] * F).ravel()
    val = float(u @ (gram.flat @ u))
    if not np.isfinite(val):
        raise ValueError("quadratic form is not finite on this measure")
    return val


@dataclass(frozen=True)
class UrysohnBump:
    """Continuous cutoff: 1 on the closed delta-ball around the center,
    0 outside the (delta + epsilon)-ball, linear in the distance between."""

    center: np.ndarray
    delta: float
    epsilon: float

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.center, dtype=float))
        object.__setattr__(self, "center", c)
        if not float(self.delta) >= 0:
            raise ValueError("bump inner radius delta must be nonnegative")
        if not float(self.epsilon) > 0:
            raise ValueError("bump ramp width epsilon must be positive")

    def values(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        d = np.linalg.norm(X - self.center, axis=1)
        return np.clip((self.delta + self.epsilon - d) / self.epsilon, 0.0, 1.0)

    def __call__(self, x) -> float:
        return float(self.values(np.atleast_1d(np.asarray(x, dtype=float)).reshape(1, -1))[0])


def urysohn_bump(center, delta: float, epsilon: float) -> UrysohnBump:
    return UrysohnBump(center, float(delta), float(epsilon))


def ball_mass(measure: QuadratureMeasure, center, radius: float) -> float:
    """Measure of the closed ball around a center."""
    keep = region_mask(measure.nodes, Ball(center, radius))
    return float(measure.weights[keep].sum())


def _prepare_bumps(measure: QuadratureMeasure, centers, coefficients,
                   delta: float, epsilon: float):
    C = np.atleast_2d(np.asarray(coefficients, dtype=float))
    X0 = np.asarray(centers, dtype=float)
    if X0.ndim == 1:
        X0 = X0.reshape(-1, 1)
    if X0.shape[0] != C.shape[0]:
        raise ValueError("need one coefficient vector per center")
    for p in X0:
        if not measure.domain.contains(p):
            raise ValueError(f"bump center {p.tolist()} lies outside the domain")
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if not delta >= 0:
        raise ValueError("delta must be nonnegative")
    k = X0.shape[0]
    if k > 1:
        diffs = np.linalg.norm(X0[:, None, :] - X0[None, :, :], axis=2)
        dmin = float(diffs[np.triu_indices(k, 1)].min())
        if dmin <= 2.0 * (delta + epsilon):
            raise ValueError(
                f"balls not disjoint: closest centers are {dmin:.6g} apart, "
                f"need more than {2 * (delta + epsilon):.6g}"
            )
    masses = np.array([ball_mass(measure, c, delta) for c in X0])
    if np.any(masses <= 0):
        raise ValueError(
            "measure resolution too coarse: some inner ball carries no mass"
        )
    return X0, C, masses


def mercer_test_function(measure: QuadratureMeasure, centers, coefficients,
                         delta: float, epsilon: float) -> TestFunction:
    """Bump-based test function carrying discrete coefficients into the
    integral form.

    f(x) = sum_i bump_i(x) c_i / mu(closed delta-ball around x_i), with the
    bumps required to have pairwise disjoint supports.
    """
    X0, C, masses = _prepare_bumps(measure, centers, coefficients, delta, epsilon)
    Cn = C / masses[:, None]

    def batch(X, X0=X0, Cn=Cn, delta=delta, epsilon=epsilon):
        d = np.linalg.norm(X[:, None, :] - X0[None, :, :], axis=2)
        rho = np.clip((delta + epsilon - d) / epsilon, 0.0, 1.0)
        return rho @ Cn

    return TestFunction(
        "mercer_bump",
        {
            "centers": X0.tolist(),
            "coefficients": C.tolist(),
            "delta": delta,
            "epsilon": epsilon,
            "masses": masses.tolist(),
        },
        C.shape[1],
        batch,
    )


@dataclass(frozen=True)
class GapReport:
    """Comparison of the bump quadratic form against its discrete target.

    ``gap`` is |quadform - discrete - correction|, the contribution of the
    ramp annuli; ``correction`` replaces each K(x_i, x_j) by its average
    over the product of inner balls; ``remainder_bound`` dominates the gap
    by annulus masses times the sup of |K|; ``continuity_term`` dominates
    the correction by the worst deviation of K over the inner balls.
    """

    quadform: float
    discrete: float
    correction: float
    gap: float
    remainder_bound: float
    continuity_term: float
    inner_masses: np.ndarray
    outer_masses: np.ndarray
    delta: float
    epsilon: float
    sup_norm: float

    def to_json(self) -> dict:
        return {
            "quadform": self.quadform,
            "discrete": self.discrete,
            "correction": self.correction,
            "gap": self.gap,
            "remainder_bound": self.remainder_bound,
            "continuity_term": self.continuity_term,
            "inner_masses": self.inner_masses.tolist(),
            "outer_masses": self.outer_masses.tolist(),
            "delta": self.delta,
            "epsilon": self.epsilon,
            "sup_norm": self.sup_norm,
        }


def discretization_gap(kernel: MatrixKernel, measure: QuadratureMeasure,
                       centers, coefficients, delta: float, epsilon: float,
                       gram: MeasureGram | None = None) -> GapReport:
    """Quantify how far the bump function's integral form sits from the
    discrete quadratic form it mimics."""
    X0, C, masses = _prepare_bumps(measure, centers, coefficients, delta, epsilon)
    if gram is None:
        gram = measure_gram(kernel, measure)
    fn = mercer_test_function(measure, X0, C, delta, epsilon)
    q = quadform(kernel, fn, measure, gram)

    Kc = gram_blocks(kernel, X0)
    discrete = float(np.einsum("ia,ijab,jb->", C, Kc, C))

    k = X0.shape[0]
    dists = np.linalg.norm(measure.nodes[:, None, :] - X0[None, :, :], axis=2)
    inner = dists <= delta + BOUNDARY_TOL * max(1.0, delta)
    outer = dists <= delta + epsilon + BOUNDARY_TOL * max(1.0, delta + epsilon)
    outer_masses = measure.weights @ outer

    # Average of K over products of inner balls, one block per center pair.
    wi = measure.weights[:, None] * inner
    half = np.einsum("ai,abMN->ibMN", wi, gram.blocks)
    avg = np.einsum("ibMN,bj->ijMN", half, wi) / np.multiply.outer(masses, masses)[:, :, None, None]
    correction = float(np.einsum("ia,ijab,jb->", C, avg - Kc, C))

    gap = abs(q - discrete - correction)

    cnorms = np.linalg.norm(C, axis=1)
    annulus = np.multiply.outer(outer_masses, outer_masses) - np.multiply.outer(masses, masses)
    rel = annulus / np.multiply.outer(masses, masses)
    remainder = float(np.einsum("ij,i,j->", rel, cnorms, cnorms) * gram.sup_norm)

    continuity = 0.0
    for i in range(k):
        idx_i = np.flatnonzero(inner[:, i])
        for j in range(k):
            idx_j = np.flatnonzero(inner[:, j])
            dev = gram.blocks[np.ix_(idx_i, idx_j)] - Kc[i, j]
            worst = float(np.linalg.norm(dev, axis=(2, 3)).max())
            continuity += cnorms[i] * cnorms[j] * worst

    return GapReport(
        quadform=q, discrete=discrete, correction=correction, gap=gap,
        remainder_bound=remainder, continuity_term=continuity,
        inner_masses=masses, outer_masses=np.asarray(outer_masses, dtype=float),
        delta=delta, epsilon=epsilon, sup_norm=gram.sup_norm,
    )


def random_test_functions(domain, output_dim: int, count: int, seed: int) -> list:
    """Deterministic list of random test functions, cycling through the
    constant, trigonometric, piecewise and bump families."""
    rng = np.random.default_rng([seed, 1])
    d = domain.dimension
    diam = domain.diameter
    fns = []
    for t in range(count):
        fam = ("constant", "trig", "piecewise", "bump")[t % 4]
        if fam == "constant":
            fns.append(constant_function(rng.normal(size=output_dim)))
        elif fam == "trig":
            om = rng.normal(size=d) * 3.0
            ph = rng.uniform(0.0, 2.0 * np.pi, size=output_dim)
            am = rng.normal(size=output_dim)

            def batch(X, om=om, ph=ph, am=am):
                return am * np.cos(X @ om[:, None] + ph)

            fns.append(TestFunction(
                "trig",
                {"frequency": om.tolist(), "phase": ph.tolist(), "amplitude": am.tolist()},
                output_dim, batch,
            ))
        elif fam == "piecewise":
            v = rng.normal(size=d)
            v /= max(np.linalg.norm(v), 1e-12)
            thr = float(domain.sample(rng, 1)[0] @ v)
            left, right = rng.normal(size=output_dim), rng.normal(size=output_dim)

            def batch(X, v=v, thr=thr, left=left, right=right):
                return np.where((X @ v <= thr)[:, None], left, right)

            fns.append(TestFunction(
                "piecewise",
                {"normal": v.tolist(), "threshold": thr,
                 "left": left.tolist(), "right": right.tolist()},
                output_dim, batch,
            ))
        else:
            center = domain.sample(rng, 1)[0]
            delta = float(rng.uniform(0.02, 0.15) * diam)
            eps = float(rng.uniform(0.02, 0.15) * diam)
            vec = rng.normal(size=output_dim)

            def batch(X, center=center, delta=delta, eps=eps, vec=vec):
                dist = np.linalg.norm(X - center, axis=1)
                rho = np.clip((delta + eps - dist) / eps, 0.0, 1.0)
                return rho[:, None] * vec

            fns.append(TestFunction(
                "bump",
                {"center": center.tolist(), "delta": delta, "epsilon": eps,
                 "vector": vec.tolist()},
                output_dim, batch,
            ))
    return fns


@dataclass(frozen=True)
class IntegralReport:
    """Outcome of the randomized integral PD test."""

    verdict: str
    trials: int
    violations: int
    min_quadform: float
    min_normalized: float
    worst_function: dict | None
    tolerance: float

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "trials": self.trials,
            "violations": self.violations,
            "min_quadform": self.min_quadform,
            "min_normalized": self.min_normalized,
            "worst_function": self.worst_function,
            "tolerance": self.tolerance,
        }


@dataclass(frozen=True)
class HarnessReport:
    """Joint discrete/integral PD report with an agreement flag."""

    discrete: SearchReport | None
    integral: IntegralReport | None
    agree: bool | None

    def to_json(self) -> dict:
        return {
            "discrete": {"verdict": "inconclusive"} if self.discrete is None
            else self.discrete.to_json(),
            "integral": {"verdict": "inconclusive"} if self.integral is None
            else self.integral.to_json(),
            "agree": self.agree,
        }


def _merge_close_points(points: np.ndarray, coeffs: np.ndarray, tol: float):
    """Merge near-duplicate witness points, summing their coefficients."""
    out_p, out_c = [], []
    for p, c in zip(points, coeffs):
        for i, q in enumerate(out_p):
            if np.linalg.norm(p - q) <= tol:
                out_c[i] = out_c[i] + c
                break
        else:
            out_p.append(p)
            out_c.append(c.copy())
    return np.asarray(out_p), np.asarray(out_c)


def equivalence_harness(kernel: MatrixKernel, measure: QuadratureMeasure,
                        trials: int = 200, seed: int = 0,
                        tolerance: float = DEFAULT_TOLERANCE,
                        n_range: tuple = (1, 8)) -> HarnessReport:
    """Check that discrete and integral positive definiteness agree.

    The discrete side hunts for a Gram eigen-witness over random point
    sets; the integral side evaluates the quadratic form on random test
    functions, plus a bump function built from the discrete witness when
    one exists. With trials = 0 both sides are inconclusive.
    """
    if trials == 0:
        return HarnessReport(None, None, None)

    discrete = random_search_witness(kernel, measure.domain, trials=trials,
                                     seed=seed, n_range=n_range, tolerance=tolerance)

    gram = measure_gram(kernel, measure)
    w = measure.weights
    fns = random_test_functions(measure.domain, kernel.output_dim, trials, seed)
    if discrete.found:
        merged_p, merged_c = _merge_close_points(
            discrete.witness.points, discrete.witness.coefficients,
            1e-9 * max(1.0, measure.domain.diameter),
        )
        if merged_p.shape[0] > 1:
            diffs = np.linalg.norm(merged_p[:, None, :] - merged_p[None, :, :], axis=2)
            dmin = float(diffs[np.triu_indices(merged_p.shape[0], 1)].min())
            radius = dmin / 5.0
        else:
            radius = measure.domain.diameter / 8.0
        try:
            fns.append(mercer_test_function(measure, merged_p, merged_c,
                                            delta=radius / 2.0, epsilon=radius / 2.0))
        except ValueError:
            pass

    min_q, min_norm, worst, violations = np.inf, np.inf, None, 0
    for fn in fns:
        F = fn.values_on(measure.nodes)
        u = (w[:, None] * F).ravel()
        q = float(u @ (gram.flat @ u))
        l1 = float(w @ np.linalg.norm(F, axis=1))
        scale = max(1.0, l1 * l1 * gram.sup_norm)
        if q < -tolerance * scale:
            violations += 1
        if q / scale < min_norm:
            min_norm = q / scale
            worst = fn.describe()
        min_q = min(min_q, q)

    integral = IntegralReport(
        verdict="witness_found" if violations else "no_witness_found",
        trials=len(fns), violations=violations,
        min_quadform=float(min_q), min_normalized=float(min_norm),
        worst_function=worst, tolerance=tolerance,
    )
    agree = discrete.found == (violations > 0)
    return HarnessReport(discrete, integral, agree)


@dataclass(frozen=True)
class TruncationReport:
    """Quadratic forms of one function over a nested family of truncations."""

    values: list
    masses: list
    full_value: float
    full_mass: float

    def to_json(self) -> dict:
        return {
            "values": self.values,
            "masses": self.masses,
            "full_value": self.full_value,
            "full_mass": self.full_mass,
        }


def truncation_study(kernel: MatrixKernel, fn: TestFunction,
                     measure: QuadratureMeasure, regions) -> TruncationReport:
    """Evaluate B(f, f) on measure restrictions to nested regions.

    Regions must be increasing (each retained node set contains the previous
    one); the report records the truncated values and masses alongside the
    untruncated ones.
    """
    masks = [region_mask(measure.nodes, r) for r in regions]
    for a, b in zip(masks, masks[1:]):
        if not np.all(b[a]):
            raise ValueError("truncation regions must be nested, smallest first")
    gram = measure_gram(kernel, measure)
    F = fn.values_on(measure.nodes)
    u_full = (measure.weights[:, None] * F).ravel()
    full = float(u_full @ (gram.flat @ u_full))
    values, masses = [], []
    N = kernel.output_dim
    for mask in masks:
        keep = np.repeat(mask, N)
        u = u_full[keep]
        values.append(float(u @ (gram.flat[np.ix_(keep, keep)] @ u)))
        masses.append(float(measure.weights[mask].sum()))
    return TruncationReport(values, masses, full, measure.total_mass)
