"""Matrix-valued kernel expressions and their evaluators.

A kernel here is a map K(x, y) into real N x N matrices with the transpose
symmetry K(x, y) = K(y, x)^T. Kernels are described by small expression
trees (`KernelSpec` nodes), compiled into vectorized evaluators by
`build_kernel`. Evaluation canonicalizes the argument order (lexicographic)
so the transpose symmetry holds bitwise, not just up to rounding.

Scalar kernels are the N = 1 case; `Lift` tensors a scalar kernel with a
fixed PSD matrix, `Conjugate` maps K to B K B^T, and `Sum` / `Scale` /
`BlockDiag` combine kernels in the PD-preserving ways.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

PSD_LIFT_TOL = 1e-10


@dataclass(frozen=True)
class Gaussian:
    """exp(-gamma * |x - y|^2), scalar, positive definite for gamma > 0."""

    gamma: float = 1.0


@dataclass(frozen=True)
class Riesz:
    """1 / (|x - y| + eta)^s, scalar.

    Positive definite for every s > 0, eta > 0. With eta = 0 the kernel is
    unbounded on the diagonal and may only be used where the diagonal is
    excluded (pass allow_unbounded=True to build_kernel).
    """

    s: float = 1.0
    eta: float = 0.0


@dataclass(frozen=True)
class Brownian:
    """min(x, y) on the half-line, scalar, one-dimensional inputs only."""


@dataclass(frozen=True)
class NegDistance:
    """-|x - y|, scalar. The canonical non-PD example."""


@dataclass(frozen=True)
class Constant:
    """Constant scalar kernel K(x, y) = c."""

    c: float = 1.0


@dataclass(frozen=True)
class Lift:
    """scalar_kernel(x, y) * A for a fixed symmetric PSD matrix A."""

    scalar: "KernelSpec"
    matrix: tuple


@dataclass(frozen=True)
class Conjugate:
    """B K(x, y) B^T for a fixed matrix B with as many columns as K's size."""

    inner: "KernelSpec"
    matrix: tuple


@dataclass(frozen=True)
class Sum:
    """Pointwise sum of kernels of equal output size."""

    terms: tuple


@dataclass(frozen=True)
class Scale:
    """alpha * K for alpha >= 0 (negative scales break positive definiteness)."""

    factor: float
    inner: "KernelSpec"


@dataclass(frozen=True)
class BlockDiag:
    """Block-diagonal combination; output size is the sum of block sizes."""

    blocks: tuple


KernelSpec = (
    Gaussian | Riesz | Brownian | NegDistance | Constant | Lift | Conjugate | Sum | Scale | BlockDiag
)

_LEAF_NAMES = {
    Gaussian: "gaussian",
    Riesz: "riesz",
    Brownian: "brownian",
    NegDistance: "neg_distance",
    Constant: "constant",
}


def _as_matrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=float)
    if a.ndim != 2:
        raise ValueError(f"expected a matrix, got shape {a.shape}")
    return a


def _lex_swap_mask(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """True for pairs where y precedes x lexicographically."""
    diff = X != Y
    any_diff = diff.any(axis=1)
    first = np.argmax(diff, axis=1)
    rows = np.arange(X.shape[0])
    return np.where(any_diff, Y[rows, first] < X[rows, first], False)


@dataclass
class MatrixKernel:
    """Compiled kernel with vectorized pair evaluation.

    `_batch` maps paired arrays X, Y of shape (m, d) to values (m, N, N).
    Public evaluation goes through `eval_pairs`, which (for canonical
    kernels) reorders each pair lexicographically and transposes back, so
    K(x, y) and K(y, x)^T agree bit for bit.
    """

    output_dim: int
    _batch: callable
    name: str = "kernel"
    spec: KernelSpec | None = None
    input_dim: int | None = None
    unbounded_diagonal: bool = False
    canonical: bool = True

    def _check_points(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if self.input_dim is not None and X.shape[1] != self.input_dim:
            raise ValueError(
                f"kernel {self.name!r} expects {self.input_dim}-dimensional points,"
                f" got dimension {X.shape[1]}"
            )
        return X

    def eval_pairs(self, X, Y) -> np.ndarray:
        """Evaluate on paired points: (m, d), (m, d) -> (m, N, N)."""
        X, Y = self._check_points(X), self._check_points(Y)
        if X.shape != Y.shape:
            raise ValueError("paired evaluation needs equally many points on both sides")
        if not self.canonical:
            return self._batch(X, Y)
        swap = _lex_swap_mask(X, Y)
        Xc = np.where(swap[:, None], Y, X)
        Yc = np.where(swap[:, None], X, Y)
        out = self._batch(Xc, Yc)
        if swap.any():
            out[swap] = np.transpose(out[swap], (0, 2, 1))
        # K(x, x) is symmetric; make that exact so Gram matrices are too.
        eq = np.all(X == Y, axis=1)
        if eq.any():
            out[eq] = 0.5 * (out[eq] + np.transpose(out[eq], (0, 2, 1)))
        return out

    def eval_pairwise(self, X, Y, chunk: int = 1 << 18) -> np.ndarray:
        """Cross evaluation: (m, d), (k, d) -> (m, k, N, N), row-chunked."""
        X, Y = self._check_points(X), self._check_points(Y)
        m, k = X.shape[0], Y.shape[0]
        N = self.output_dim
        out = np.empty((m, k, N, N))
        rows_per_chunk = max(1, chunk // max(1, k))
        for start in range(0, m, rows_per_chunk):
            stop = min(m, start + rows_per_chunk)
            nb = stop - start
            XX = np.repeat(X[start:stop], k, axis=0)
            YY = np.tile(Y, (nb, 1))
            out[start:stop] = self.eval_pairs(XX, YY).reshape(nb, k, N, N)
        return out

    def __call__(self, x, y) -> np.ndarray:
        """Single evaluation K(x, y) as an (N, N) array."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        return self.eval_pairs(x.reshape(1, -1), y.reshape(1, -1))[0]


def _compile(spec: KernelSpec, allow_unbounded: bool):
    """Recursively compile a spec into (batch_fn, output_dim, input_dim, unbounded)."""
    if isinstance(spec, Gaussian):
        g = float(spec.gamma)
        if not g > 0:
            raise ValueError("gaussian rate gamma must be positive")

        def f(X, Y, g=g):
            d2 = ((X - Y) ** 2).sum(axis=1)
            return np.exp(-g * d2)[:, None, None]

        return f, 1, None, False

    if isinstance(spec, Riesz):
        s, eta = float(spec.s), float(spec.eta)
        if not s > 0:
            raise ValueError("riesz exponent s must be positive")
        if eta < 0:
            raise ValueError("riesz regularizer eta must be nonnegative")
        if eta == 0 and not allow_unbounded:
            raise ValueError(
                "riesz with eta = 0 is unbounded on the diagonal; "
                "build with allow_unbounded=True and exclude the diagonal"
            )

        def f(X, Y, s=s, eta=eta):
            r = np.linalg.norm(X - Y, axis=1)
            with np.errstate(divide="ignore"):
                v = (r + eta) ** (-s)
            return v[:, None, None]

        return f, 1, None, eta == 0

    if isinstance(spec, Brownian):

        def f(X, Y):
            return np.minimum(X[:, 0], Y[:, 0])[:, None, None]

        return f, 1, 1, False

    if isinstance(spec, NegDistance):

        def f(X, Y):
            return -np.linalg.norm(X - Y, axis=1)[:, None, None]

        return f, 1, None, False

    if isinstance(spec, Constant):
        c = float(spec.c)

        def f(X, Y, c=c):
            return np.full((X.shape[0], 1, 1), c)

        return f, 1, None, False

    if isinstance(spec, Lift):
        inner_f, inner_dim, in_dim, unb = _compile(spec.scalar, allow_unbounded)
        if inner_dim != 1:
            raise ValueError("lift expects a scalar kernel")
        A = _as_matrix(spec.matrix)
        if A.shape[0] != A.shape[1]:
            raise ValueError("lift matrix must be square")
        if np.max(np.abs(A - A.T)) > PSD_LIFT_TOL * max(1.0, np.max(np.abs(A))):
            raise ValueError("lift matrix must be symmetric")
        A = 0.5 * (A + A.T)
        evals = np.linalg.eigvalsh(A)
        if evals.min() < -PSD_LIFT_TOL * max(1.0, abs(evals.max())):
            raise ValueError(
                f"lift matrix must be positive semidefinite (min eigenvalue {evals.min():.3e})"
            )

        def f(X, Y, inner_f=inner_f, A=A):
            return inner_f(X, Y) * A

        return f, A.shape[0], in_dim, unb

    if isinstance(spec, Conjugate):
        inner_f, inner_dim, in_dim, unb = _compile(spec.inner, allow_unbounded)
        B = _as_matrix(spec.matrix)
        if B.shape[1] != inner_dim:
            raise ValueError(
                f"conjugation matrix has {B.shape[1]} columns, inner kernel size is {inner_dim}"
            )

        def f(X, Y, inner_f=inner_f, B=B):
            return np.einsum("pi,mij,qj->mpq", B, inner_f(X, Y), B, optimize=True)

        return f, B.shape[0], in_dim, unb

    if isinstance(spec, Sum):
        terms = [_compile(t, allow_unbounded) for t in spec.terms]
        if not terms:
            raise ValueError("sum needs at least one term")
        dims = {t[1] for t in terms}
        if len(dims) != 1:
            raise ValueError(f"sum terms must share one output size, got {sorted(dims)}")
        in_dims = {t[2] for t in terms if t[2] is not None}
        if len(in_dims) > 1:
            raise ValueError("sum terms disagree on input dimension")

        def f(X, Y, fns=[t[0] for t in terms]):
            out = fns[0](X, Y).copy()
            for fn in fns[1:]:
                out += fn(X, Y)
            return out

        return f, terms[0][1], (in_dims.pop() if in_dims else None), any(t[3] for t in terms)

    if isinstance(spec, Scale):
        a = float(spec.factor)
        if a < 0:
            raise ValueError("scale factor must be nonnegative")
        inner_f, inner_dim, in_dim, unb = _compile(spec.inner, allow_unbounded)

        def f(X, Y, inner_f=inner_f, a=a):
            return a * inner_f(X, Y)

        return f, inner_dim, in_dim, unb

    if isinstance(spec, BlockDiag):
        blocks = [_compile(b, allow_unbounded) for b in spec.blocks]
        if not blocks:
            raise ValueError("block_diag needs at least one block")
        in_dims = {b[2] for b in blocks if b[2] is not None}
        if len(in_dims) > 1:
            raise ValueError("block_diag blocks disagree on input dimension")
        sizes = [b[1] for b in blocks]
        total = sum(sizes)
        offsets = np.concatenate([[0], np.cumsum(sizes)])

        def f(X, Y, fns=[b[0] for b in blocks], offsets=offsets, total=total):
            out = np.zeros((X.shape[0], total, total))
            for fn, lo, hi in zip(fns, offsets[:-1], offsets[1:]):
                out[:, lo:hi, lo:hi] = fn(X, Y)
            return out

        return f, total, (in_dims.pop() if in_dims else None), any(b[3] for b in blocks)

    raise TypeError(f"unknown kernel spec node {type(spec).__name__}")


def _spec_name(spec: KernelSpec) -> str:
    if type(spec) in _LEAF_NAMES:
        return _LEAF_NAMES[type(spec)]
    if isinstance(spec, Lift):
        return f"lift({_spec_name(spec.scalar)})"
    if isinstance(spec, Conjugate):
        return f"conjugate({_spec_name(spec.inner)})"
    if isinstance(spec, Sum):
        return "sum(" + ",".join(_spec_name(t) for t in spec.terms) + ")"
    if isinstance(spec, Scale):
        return f"scale({_spec_name(spec.inner)})"
    if isinstance(spec, BlockDiag):
        return "block_diag(" + ",".join(_spec_name(b) for b in spec.blocks) + ")"
    return type(spec).__name__


def build_kernel(spec: KernelSpec, allow_unbounded: bool = False) -> MatrixKernel:
    """Validate a kernel expression and compile it to a MatrixKernel.

    Validation rejects non-PSD lift matrices, negative scale factors,
    mismatched sizes, and (unless allow_unbounded is set) kernels that are
    unbounded on the diagonal.
    """
    batch, out_dim, in_dim, unbounded = _compile(spec, allow_unbounded)
    return MatrixKernel(
        output_dim=out_dim,
        _batch=batch,
        name=_spec_name(spec),
        spec=spec,
        input_dim=in_dim,
        unbounded_diagonal=unbounded,
    )


def kernel_from_callable(
    func, output_dim: int, name: str = "custom", input_dim: int | None = None,
    canonical: bool = False,
) -> MatrixKernel:
    """Wrap a user callable K(x, y) -> (N, N) array as a MatrixKernel.

    The callable is trusted to be transpose symmetric; set canonical=True to
    enforce that bitwise via argument reordering, or leave it off and use
    `symmetry_check` to measure the residual.
    """

    def batch(X, Y):
        out = np.empty((X.shape[0], output_dim, output_dim))
        for i in range(X.shape[0]):
            out[i] = np.asarray(func(X[i], Y[i]), dtype=float).reshape(output_dim, output_dim)
        return out

    return MatrixKernel(
        output_dim=output_dim, _batch=batch, name=name, spec=None,
        input_dim=input_dim, canonical=canonical,
    )


def evaluate(kernel: MatrixKernel, x, y) -> np.ndarray:
    """Functional form of kernel(x, y)."""
    return kernel(x, y)


def gram_blocks(kernel: MatrixKernel, points) -> np.ndarray:
    """All kernel blocks over a point list: (n, d) -> (n, n, N, N).

    Only the upper triangle is evaluated; the lower triangle is the mirrored
    transpose, so the assembled Gram matrix is exactly symmetric.
    """
    P = kernel._check_points(points)
    n, N = P.shape[0], kernel.output_dim
    iu, ju = np.triu_indices(n)
    upper = kernel.eval_pairs(P[iu], P[ju])
    G = np.empty((n, n, N, N))
    G[iu, ju] = upper
    G[ju, iu] = np.transpose(upper, (0, 2, 1))
    return G


def symmetry_check(kernel: MatrixKernel, X, Y) -> float:
    """Max Frobenius norm of K(x, y) - K(y, x)^T over the given pairs."""
    KXY = kernel.eval_pairs(X, Y)
    KYX = kernel.eval_pairs(Y, X)
    return float(np.linalg.norm(KXY - np.transpose(KYX, (0, 2, 1)), axis=(1, 2)).max())


def bound_estimate(kernel: MatrixKernel, points, chunk: int = 1 << 18) -> float:
    """Largest Frobenius norm of K over all pairs from a point list.

    Used as a stand-in for the sup of |K| on the support of a measure; for
    diagonally unbounded kernels this is infinite.
    """
    P = kernel._check_points(points)
    n = P.shape[0]
    best = 0.0
    rows_per_chunk = max(1, chunk // max(1, n))
    for start in range(0, n, rows_per_chunk):
        stop = min(n, start + rows_per_chunk)
        vals = kernel.eval_pairwise(P[start:stop], P, chunk=chunk)
        best = max(best, float(np.linalg.norm(vals, axis=(2, 3)).max()))
    return best


def spec_to_json(spec: KernelSpec) -> dict:
    """Serialize a kernel expression to its JSON form."""
    if isinstance(spec, Gaussian):
        return {"gaussian": spec.gamma}
    if isinstance(spec, Riesz):
        return {"riesz": {"s": spec.s, "eta": spec.eta}}
    if isinstance(spec, Brownian):
        return {"brownian": {}}
    if isinstance(spec, NegDistance):
        return {"neg_distance": {}}
    if isinstance(spec, Constant):
        return {"constant": spec.c}
    if isinstance(spec, Lift):
        return {"lift": {"scalar": spec_to_json(spec.scalar),
                         "matrix": _as_matrix(spec.matrix).tolist()}}
    if isinstance(spec, Conjugate):
        return {"conjugate": {"inner": spec_to_json(spec.inner),
                              "matrix": _as_matrix(spec.matrix).tolist()}}
    if isinstance(spec, Sum):
        return {"sum": [spec_to_json(t) for t in spec.terms]}
    if isinstance(spec, Scale):
        return {"scale": {"factor": spec.factor, "inner": spec_to_json(spec.inner)}}
    if isinstance(spec, BlockDiag):
        return {"block_diag": [spec_to_json(b) for b in spec.blocks]}
    raise TypeError(f"unknown kernel spec node {type(spec).__name__}")


def _matrix_tuple(m) -> tuple:
    return tuple(tuple(float(v) for v in row) for row in _as_matrix(m))


def spec_from_json(doc: dict) -> KernelSpec:
    """Parse the JSON form of a kernel expression."""
    if not isinstance(doc, dict) or len(doc) != 1:
        raise ValueError("a kernel expression must be an object with exactly one key")
    (key, val), = doc.items()
    if key == "gaussian":
        return Gaussian(float(val))
    if key == "riesz":
        return Riesz(float(val["s"]), float(val.get("eta", 0.0)))
    if key == "brownian":
        return Brownian()
    if key == "neg_distance":
        return NegDistance()
    if key == "constant":
        return Constant(float(val))
    if key == "lift":
        return Lift(spec_from_json(val["scalar"]), _matrix_tuple(val["matrix"]))
    if key == "conjugate":
        return Conjugate(spec_from_json(val["inner"]), _matrix_tuple(val["matrix"]))
    if key == "sum":
        return Sum(tuple(spec_from_json(t) for t in val))
    if key == "scale":
        return Scale(float(val["factor"]), spec_from_json(val["inner"]))
    if key == "block_diag":
        return BlockDiag(tuple(spec_from_json(b) for b in val))
    raise ValueError(f"unknown kernel family {key!r}")


@dataclass(frozen=True)
class ZooEntry:
    name: str
    spec: KernelSpec
    is_pd: bool
    needs_1d: bool = False


def kernel_zoo() -> list[ZooEntry]:
    """Reference kernels with known positive-definiteness status.

    All are defined on one-dimensional inputs so a single interval domain
    exercises every entry (Brownian motion's covariance needs that anyway).
    """
    return [
        ZooEntry("gaussian", Gaussian(1.0), True),
        ZooEntry(
            "gaussian_lift",
            Lift(Gaussian(0.5), ((2.0, 1.0), (1.0, 2.0))),
            True,
        ),
        ZooEntry(
            "gaussian_conjugated",
            Conjugate(
                Lift(Gaussian(1.5), ((1.0, 0.0), (0.0, 1.0))),
                ((1.0, 2.0), (0.0, 1.0), (1.0, -1.0)),
            ),
            True,
        ),
        ZooEntry("brownian", Brownian(), True, needs_1d=True),
        ZooEntry("constant", Constant(1.0), True),
        ZooEntry(
            "block_diag_mix",
            BlockDiag((Gaussian(1.0), Brownian(), Constant(0.5))),
            True,
            needs_1d=True,
        ),
        ZooEntry("riesz_regularized", Riesz(1.0, 0.1), True),
        ZooEntry("sum_gaussian_constant", Sum((Gaussian(1.0), Constant(1.0))), True),
        ZooEntry("neg_distance", NegDistance(), False),
    ]
