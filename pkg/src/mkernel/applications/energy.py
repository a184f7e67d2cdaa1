"""Discrete energy minimization and capacity estimation.

The discrete energy of an N-point configuration under a scalar kernel is
the mean of K over ordered distinct pairs, (1/N^2) sum_{i != j} K(x_i, x_j).
The diagonal is excluded: for Riesz kernels it is infinite, so the literal
all-pairs sum is never finite. Minimizing over configurations approximates
the continuous equilibrium energy, whose reciprocal is the capacity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..kernels import MatrixKernel


def _as_config_points(points) -> np.ndarray:
    P = np.asarray(points, dtype=float)
    if P.ndim == 1:
        P = P.reshape(-1, 1)
    return P


def discrete_energy(kernel: MatrixKernel, points) -> float:
    """(1/N^2) sum over i != j of K(x_i, x_j) for a scalar kernel."""
    if kernel.output_dim != 1:
        raise ValueError("discrete energy is defined for scalar kernels")
    P = _as_config_points(points)
    n = P.shape[0]
    if n < 2:
        raise ValueError("a configuration needs at least 2 points")
    mask = ~np.eye(n, dtype=bool)
    iu, ju = np.where(mask)
    vals = kernel.eval_pairs(P[iu], P[ju])[:, 0, 0]
    return float(vals.sum() / n**2)


@dataclass(frozen=True)
class Configuration:
    """Point configuration with its energy cached."""

    points: np.ndarray
    energy: float

    def to_json(self) -> dict:
        return {"points": self.points.tolist(), "energy": self.energy}


def make_configuration(kernel: MatrixKernel, points) -> Configuration:
    P = _as_config_points(points)
    return Configuration(P, discrete_energy(kernel, P))


@dataclass(frozen=True)
class EnergyResult:
    """Outcome of a projected-gradient energy minimization."""

    configuration: Configuration
    trace: np.ndarray
    iterations: int
    restarts: int
    converged: bool

    def to_json(self) -> dict:
        return {
            "points": self.configuration.points.tolist(),
            "energy": self.configuration.energy,
            "trace": self.trace.tolist(),
            "iterations": self.iterations,
            "restarts": self.restarts,
            "converged": self.converged,
        }


def minimize_energy(kernel: MatrixKernel, domain, n_points: int,
                    iterations: int = 500, seed: int = 0,
                    initial_step: float | None = None,
                    backtrack: float = 0.5) -> EnergyResult:
    """Projected gradient descent on the discrete energy.

    A step is accepted only if it strictly decreases the energy, with the
    step halved up to a cap otherwise, so the trace is non-increasing by
    construction. Collisions (non-finite energy or gradient) trigger a
    small jitter restart, counted in the result. Deterministic per seed.
    """
    if n_points < 2:
        raise ValueError("a configuration needs at least 2 points")
    if iterations < 1:
        raise ValueError("need at least one iteration")
    rng = np.random.default_rng(seed)
    diam = domain.diameter
    if initial_step is None:
        initial_step = 0.1 * diam / n_points
    h = 1e-6 * diam
    jitter = 1e-6 * diam

    def project(P):
        return np.asarray([domain.project(p) for p in P])

    def energy(P):
        return discrete_energy(kernel, P)

    def gradient(P):
        g = np.empty_like(P)
        for i in range(P.shape[0]):
            for k in range(P.shape[1]):
                Pp, Pm = P.copy(), P.copy()
                Pp[i, k] += h
                Pm[i, k] -= h
                g[i, k] = (energy(Pp) - energy(Pm)) / (2 * h)
        return g

    P = project(domain.sample(rng, n_points))
    restarts = 0
    E = energy(P)
    while not np.isfinite(E):
        P = project(P + jitter * rng.normal(size=P.shape))
        E = energy(P)
        restarts += 1
        if restarts > 50:
            raise ValueError("could not find a finite-energy starting configuration")

    trace = [E]
    step = initial_step
    converged = False
    it = 0
    while it < iterations:
        it += 1
        g = gradient(P)
        if not np.all(np.isfinite(g)):
            P = project(P + jitter * rng.normal(size=P.shape))
            E = energy(P)
            restarts += 1
            trace.append(min(E, trace[-1]) if np.isfinite(E) else trace[-1])
            continue
        gnorm = float(np.linalg.norm(g))
        if gnorm * diam < 1e-15 * max(1.0, abs(E)):
            converged = True
            break
        s = step
        accepted = False
        for _ in range(60):
            Pn = project(P - s * g)
            En = energy(Pn)
            if np.isfinite(En) and En < E:
                P, E = Pn, En
                accepted = True
                # grow the step back after an accept so progress never stalls
                step = min(s * 2.0, diam)
                break
            s *= backtrack
        trace.append(E)
        if not accepted:
            converged = True
            break
    return EnergyResult(Configuration(P, E), np.asarray(trace), it, restarts, converged)


@dataclass(frozen=True)
class CapacityReport:
    """Energies and reciprocal-energy capacities over a schedule of N."""

    records: list
    non_monotone: bool

    def to_json(self) -> dict:
        return {
            "records": [
                {"n": n, "energy": e, "capacity": c} for (n, e, c) in self.records
            ],
            "non_monotone": self.non_monotone,
        }


def capacity_estimate(kernel: MatrixKernel, domain, schedule,
                      iterations: int = 500, seed: int = 0) -> CapacityReport:
    """Minimize the energy for each N in an increasing schedule and report
    (N, energy, 1/energy).

    Capacity is None when the minimized energy is not positive (possible
    away from Riesz-type kernels). The energy sequence is expected to be
    non-decreasing in N; the report flags violations rather than failing.
    """
    ns = [int(n) for n in schedule]
    if any(b <= a for a, b in zip(ns, ns[1:])) or any(n < 2 for n in ns):
        raise ValueError("schedule must be strictly increasing with every N >= 2")
    records = []
    for n in ns:
        res = minimize_energy(kernel, domain, n, iterations=iterations, seed=seed)
        e = res.configuration.energy
        records.append((n, e, 1.0 / e if e > 0 else None))
    energies = [r[1] for r in records]
    non_monotone = any(b < a - 1e-12 for a, b in zip(energies, energies[1:]))
    return CapacityReport(records, non_monotone)
