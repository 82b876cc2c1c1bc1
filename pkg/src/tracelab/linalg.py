"""Dense linear algebra over the two scalar backends.

Everything downstream (spectra, filtrations, induced operators, mode
models) reduces to the handful of primitives in this module: echelon
spans, nullspaces, generalized eigenspaces, resolvents and intertwiner
spaces.  Exact matrices run fraction-free-style Gaussian elimination over
the Gaussian rationals; approx matrices delegate rank decisions to
singular values measured against the ambient tolerance context.

Conventions: vectors are columns (tuples of scalars), matrices act on the
left, and a subspace is handed around as a list of basis vectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import sympy

from .errors import (
    BackendMismatch,
    ExactEigenvalueNotInField,
    NonConvergence,
    SizeLimit,
    SpectralPole,
)
from .scalars import (
    APPROX,
    DEFAULT_CONTEXT,
    EXACT,
    GR_ONE,
    GR_ZERO,
    GaussianRational,
    ToleranceContext,
    backend_of,
    same_backend,
)

MAX_EIGEN_DIM = 2000


class Matrix:
    """Immutable dense matrix over one scalar backend."""

    __slots__ = ("rows", "cols", "backend", "entries")

    def __init__(self, entries, backend=None):
        rows = len(entries)
        cols = len(entries[0]) if rows else 0
        data = []
        for row in entries:
            if len(row) != cols:
                raise ValueError("ragged matrix")
            data.append(tuple(row))
        if backend is None:
            backend = backend_of(data[0][0]) if rows and cols else EXACT
        if backend == APPROX:
            data = [tuple(complex(x) for x in row) for row in data]
        else:
            for row in data:
                for x in row:
                    if not isinstance(x, GaussianRational):
                        raise BackendMismatch(
                            f"exact matrix entry is not a Gaussian rational: {x!r}"
                        )
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)
        object.__setattr__(self, "backend", backend)
        object.__setattr__(self, "entries", tuple(data))

    def __setattr__(self, name, value):
        raise AttributeError("Matrix is immutable")

    # -- constructors ------------------------------------------------------

    @staticmethod
    def identity(n: int, backend: str) -> "Matrix":
        one = GR_ONE if backend == EXACT else 1.0 + 0.0j
        zero = GR_ZERO if backend == EXACT else 0.0 + 0.0j
        return Matrix(
            [[one if i == j else zero for j in range(n)] for i in range(n)], backend
        )

    @staticmethod
    def zeros(rows: int, cols: int, backend: str) -> "Matrix":
        zero = GR_ZERO if backend == EXACT else 0.0 + 0.0j
        return Matrix([[zero] * cols for _ in range(rows)], backend)

    @staticmethod
    def from_columns(columns, backend=None) -> "Matrix":
        cols = len(columns)
        rows = len(columns[0])
        return Matrix(
            [[columns[j][i] for j in range(cols)] for i in range(rows)], backend
        )

    @staticmethod
    def block_diag(blocks) -> "Matrix":
        backend = same_backend(*[b.backend for b in blocks])
        n = sum(b.rows for b in blocks)
        zero = GR_ZERO if backend == EXACT else 0.0 + 0.0j
        grid = [[zero] * n for _ in range(n)]
        at = 0
        for b in blocks:
            for i in range(b.rows):
                for j in range(b.cols):
                    grid[at + i][at + j] = b.entries[i][j]
            at += b.rows
        return Matrix(grid, backend)

    @staticmethod
    def from_numpy(array) -> "Matrix":
        return Matrix([[complex(x) for x in row] for row in array], APPROX)

    # -- basic algebra -----------------------------------------------------

    def _zero(self):
        return GR_ZERO if self.backend == EXACT else 0.0 + 0.0j

    def __add__(self, other: "Matrix") -> "Matrix":
        self._check_shape(other)
        return Matrix(
            [
                [a + b for a, b in zip(ra, rb)]
                for ra, rb in zip(self.entries, other.entries)
            ],
            self.backend,
        )

    def __sub__(self, other: "Matrix") -> "Matrix":
        self._check_shape(other)
        return Matrix(
            [
                [a - b for a, b in zip(ra, rb)]
                for ra, rb in zip(self.entries, other.entries)
            ],
            self.backend,
        )

    def __neg__(self) -> "Matrix":
        return Matrix([[-a for a in row] for row in self.entries], self.backend)

    def scale(self, scalar) -> "Matrix":
        if self.backend == APPROX:
            scalar = complex(scalar)
        elif not isinstance(scalar, GaussianRational):
            scalar = GaussianRational(scalar)
        return Matrix([[scalar * a for a in row] for row in self.entries], self.backend)

    def __matmul__(self, other: "Matrix") -> "Matrix":
        same_backend(self.backend, other.backend)
        if self.cols != other.rows:
            raise ValueError(f"shape mismatch {self.shape} @ {other.shape}")
        if self.backend == APPROX:
            return Matrix.from_numpy(self.to_numpy() @ other.to_numpy())
        other_t = list(zip(*other.entries))
        out = []
        for row in self.entries:
            out.append(
                [
                    sum((a * b for a, b in zip(row, col)), GR_ZERO)
                    for col in other_t
                ]
            )
        return Matrix(out, self.backend)

    def apply(self, vector):
        """Matrix-vector product (vector as a tuple of scalars)."""
        if len(vector) != self.cols:
            raise ValueError("vector length mismatch")
        zero = self._zero()
        return tuple(
            sum((a * v for a, v in zip(row, vector)), zero) for row in self.entries
        )

    def power(self, k: int) -> "Matrix":
        if self.rows != self.cols:
            raise ValueError("power of a non-square matrix")
        if k < 0:
            return self.inverse().power(-k)
        result = Matrix.identity(self.rows, self.backend)
        base = self
        while k:
            if k & 1:
                result = result @ base
            base = base @ base if k > 1 else base
            k >>= 1
        return result

    def transpose(self) -> "Matrix":
        return Matrix(list(zip(*self.entries)), self.backend)

    def trace(self):
        zero = self._zero()
        return sum((self.entries[i][i] for i in range(self.rows)), zero)

    @property
    def shape(self):
        return (self.rows, self.cols)

    def _check_shape(self, other: "Matrix"):
        same_backend(self.backend, other.backend)
        if self.shape != other.shape:
            raise ValueError(f"shape mismatch {self.shape} vs {other.shape}")

    def __eq__(self, other):
        if not isinstance(other, Matrix):
            return NotImplemented
        return (
            self.backend == other.backend
            and self.shape == other.shape
            and self.entries == other.entries
        )

    def __hash__(self):
        return hash((self.backend, self.entries))

    def __repr__(self):
        return f"Matrix({self.rows}x{self.cols}, {self.backend})"

    # -- analysis helpers --------------------------------------------------

    def to_numpy(self):
        if self.backend == APPROX:
            return np.array(self.entries, dtype=complex).reshape(self.rows, self.cols)
        return np.array(
            [[x.to_complex() for x in row] for row in self.entries], dtype=complex
        ).reshape(self.rows, self.cols)

    def to_approx(self) -> "Matrix":
        if self.backend == APPROX:
            return self
        return Matrix([[x.to_complex() for x in row] for row in self.entries], APPROX)

    def scale_bound(self) -> float:
        """Max-entry magnitude, used to make approx thresholds scale-aware."""
        best = 0.0
        for row in self.entries:
            for x in row:
                mag = abs(x) if self.backend == APPROX else math.sqrt(float(x.norm()))
                if mag > best:
                    best = mag
        return best

    def is_zero(self, ctx: ToleranceContext = DEFAULT_CONTEXT) -> bool:
        if self.backend == EXACT:
            return all(not x for row in self.entries for x in row)
        thr = ctx.zero_threshold()
        return all(abs(x) <= thr for row in self.entries for x in row)

    def columns(self):
        return [tuple(row[j] for row in self.entries) for j in range(self.cols)]

    def det(self, ctx: ToleranceContext = DEFAULT_CONTEXT):
        if self.rows != self.cols:
            raise ValueError("determinant of a non-square matrix")
        if self.backend == APPROX:
            return complex(np.linalg.det(self.to_numpy()))
        rows = [list(r) for r in self.entries]
        det = GR_ONE
        n = self.rows
        for col in range(n):
            pivot = next((r for r in range(col, n) if rows[r][col]), None)
            if pivot is None:
                return GR_ZERO
            if pivot != col:
                rows[col], rows[pivot] = rows[pivot], rows[col]
                det = -det
            det = det * rows[col][col]
            inv = GR_ONE / rows[col][col]
            rows[col] = [x * inv for x in rows[col]]
            for r in range(col + 1, n):
                factor = rows[r][col]
                if factor:
                    rows[r] = [a - factor * b for a, b in zip(rows[r], rows[col])]
        return det

    def inverse(self, ctx: ToleranceContext = DEFAULT_CONTEXT) -> "Matrix":
        if self.rows != self.cols:
            raise ValueError("inverse of a non-square matrix")
        if self.backend == APPROX:
            a = self.to_numpy()
            sv = np.linalg.svd(a, compute_uv=False)
            if sv[-1] <= ctx.zero_threshold(sv[0] if len(sv) else 1.0):
                raise SpectralPole("matrix is singular within tolerance")
            return Matrix.from_numpy(np.linalg.inv(a))
        sol = solve_exact(self, Matrix.identity(self.rows, EXACT))
        if sol is None:
            raise SpectralPole("matrix is exactly singular")
        return sol


def vector_backend(vector) -> str:
    return backend_of(vector[0])


def vec_add(u, v):
    return tuple(a + b for a, b in zip(u, v))


def vec_sub(u, v):
    return tuple(a - b for a, b in zip(u, v))


def vec_scale(c, v):
    return tuple(c * a for a in v)


def vec_is_zero(v, ctx: ToleranceContext = DEFAULT_CONTEXT) -> bool:
    if not v:
        return True
    if vector_backend(v) == EXACT:
        return all(not x for x in v)
    thr = ctx.zero_threshold()
    return all(abs(x) <= thr for x in v)


class Span:
    """Growable subspace with membership tests.

    Exact backend: rows kept in reduced echelon form, so membership is an
    exact reduction.  Approx backend: an orthonormal family built by
    twice-iterated Gram-Schmidt; a candidate is dependent when its
    residual drops below ``eps`` relative to its own norm.
    """

    def __init__(self, dim: int, backend: str, ctx: ToleranceContext = DEFAULT_CONTEXT):
        self.ambient_dim = dim
        self.backend = backend
        self.ctx = ctx
        self._rows = []  # exact: (pivot_index, vector); approx: unit vectors
        self._np_rows = []

    @property
    def dim(self) -> int:
        return len(self._rows) if self.backend == EXACT else len(self._np_rows)

    def basis(self):
        if self.backend == EXACT:
            return [vec for _, vec in self._rows]
        return [tuple(complex(x) for x in row) for row in self._np_rows]

    def _reduce_exact(self, vector):
        v = list(vector)
        for pivot, row in self._rows:
            if v[pivot]:
                factor = v[pivot]
                v = [a - factor * b for a, b in zip(v, row)]
        return v

    def add(self, vector) -> bool:
        """Insert a vector; returns True when it enlarged the span."""
        if self.backend == EXACT:
            v = self._reduce_exact(vector)
            pivot = next((i for i, x in enumerate(v) if x), None)
            if pivot is None:
                return False
            inv = GR_ONE / v[pivot]
            v = [x * inv for x in v]
            # keep earlier rows reduced against the new pivot
            updated = []
            for p, row in self._rows:
                if row[pivot]:
                    factor = row[pivot]
                    row = tuple(a - factor * b for a, b in zip(row, v))
                updated.append((p, row))
            updated.append((pivot, tuple(v)))
            updated.sort(key=lambda item: item[0])
            self._rows = updated
            return True
        v = np.array(vector, dtype=complex)
        norm0 = np.linalg.norm(v)
        if norm0 <= self.ctx.zero_threshold():
            return False
        for _ in range(2):
            for row in self._np_rows:
                v = v - np.vdot(row, v) * row
        res = np.linalg.norm(v)
        if res <= self.ctx.eps * max(1.0, norm0):
            return False
        self._np_rows.append(v / res)
        return True

    def contains(self, vector) -> bool:
        if self.backend == EXACT:
            return all(not x for x in self._reduce_exact(vector))
        v = np.array(vector, dtype=complex)
        norm0 = np.linalg.norm(v)
        if norm0 <= self.ctx.zero_threshold():
            return True
        for _ in range(2):
            for row in self._np_rows:
                v = v - np.vdot(row, v) * row
        return np.linalg.norm(v) <= self.ctx.eps * max(1.0, norm0)

    def contains_all(self, vectors) -> bool:
        return all(self.contains(v) for v in vectors)

    def is_full(self) -> bool:
        return self.dim == self.ambient_dim


def span_of(vectors, dim: int, backend: str, ctx: ToleranceContext = DEFAULT_CONTEXT) -> Span:
    span = Span(dim, backend, ctx)
    for v in vectors:
        span.add(v)
    return span


# -- exact elimination ------------------------------------------------------


def _rref(rows):
    """Reduced row echelon form over the exact backend.

    Returns (rref rows, pivot column indices); input rows untouched.
    """
    mat = [list(r) for r in rows]
    n_rows = len(mat)
    n_cols = len(mat[0]) if mat else 0
    pivots = []
    r = 0
    for c in range(n_cols):
        pivot_row = next((i for i in range(r, n_rows) if mat[i][c]), None)
        if pivot_row is None:
            continue
        mat[r], mat[pivot_row] = mat[pivot_row], mat[r]
        inv = GR_ONE / mat[r][c]
        mat[r] = [x * inv for x in mat[r]]
        for i in range(n_rows):
            if i != r and mat[i][c]:
                factor = mat[i][c]
                mat[i] = [a - factor * b for a, b in zip(mat[i], mat[r])]
        pivots.append(c)
        r += 1
        if r == n_rows:
            break
    return mat[:r], pivots


def solve_exact(m: Matrix, rhs: Matrix):
    """Solve ``m @ X = rhs`` exactly; None when ``m`` is singular."""
    n = m.rows
    aug = [list(m.entries[i]) + list(rhs.entries[i]) for i in range(n)]
    red, pivots = _rref(aug)
    if pivots != list(range(n)):
        return None
    sol = [row[n:] for row in red]
    return Matrix(sol, EXACT)


def nullspace(m: Matrix, ctx: ToleranceContext = DEFAULT_CONTEXT):
    """Basis of the kernel of ``m``.

    Exact: canonical free-column basis from the reduced echelon form.
    Approx: right singular vectors whose singular values fall below the
    tolerance relative to the largest one.
    """
    if m.backend == EXACT:
        red, pivots = _rref(m.entries)
        pivot_set = set(pivots)
        free = [c for c in range(m.cols) if c not in pivot_set]
        basis = []
        for f in free:
            v = [GR_ZERO] * m.cols
            v[f] = GR_ONE
            for row_idx, p in enumerate(pivots):
                v[p] = -red[row_idx][f]
            basis.append(tuple(v))
        return basis
    if m.cols == 0:
        return []
    if m.rows == 0:
        return [
            tuple(1.0 + 0j if i == j else 0j for i in range(m.cols))
            for j in range(m.cols)
        ]
    a = m.to_numpy()
    _, sv, vh = np.linalg.svd(a)
    scale = sv[0] if len(sv) else 1.0
    thr = ctx.zero_threshold(scale)
    rank = int(np.sum(sv > thr))
    return [tuple(complex(x) for x in np.conj(vh[i])) for i in range(rank, m.cols)]


def rank(m: Matrix, ctx: ToleranceContext = DEFAULT_CONTEXT) -> int:
    if m.backend == EXACT:
        _, pivots = _rref(m.entries)
        return len(pivots)
    sv = np.linalg.svd(m.to_numpy(), compute_uv=False)
    if len(sv) == 0:
        return 0
    return int(np.sum(sv > ctx.zero_threshold(sv[0])))


def resolvent(m: Matrix, lam, ctx: ToleranceContext = DEFAULT_CONTEXT) -> Matrix:
    """Inverse of ``m - lam*I``; raises SpectralPole at (near-)eigenvalues."""
    if m.rows != m.cols:
        raise ValueError("resolvent of a non-square matrix")
    shifted = m - Matrix.identity(m.rows, m.backend).scale(lam)
    try:
        return shifted.inverse(ctx)
    except SpectralPole as exc:
        raise SpectralPole(f"{lam!r} is a spectral value within tolerance") from exc


# -- characteristic polynomial and eigenvalues ------------------------------


def charpoly(m: Matrix):
    """Monic characteristic polynomial coefficients, highest power first.

    Exact backend only; Faddeev-LeVerrier recursion (the integer divisions
    are exact over a field of characteristic zero).
    """
    if m.backend != EXACT:
        raise BackendMismatch("charpoly is an exact-backend primitive")
    n = m.rows
    coeffs = [GR_ONE]
    b = Matrix.identity(n, EXACT)
    for k in range(1, n + 1):
        b = m @ b
        ck = -(b.trace() / GaussianRational(k))
        coeffs.append(ck)
        if k < n:
            b = b + Matrix.identity(n, EXACT).scale(ck)
    return coeffs


_X = sympy.symbols("x")


def _to_sympy(value: GaussianRational):
    return sympy.Rational(value.re) + sympy.Rational(value.im) * sympy.I


def _from_sympy(value) -> GaussianRational:
    import fractions

    re, im = value.as_real_imag()
    re = sympy.Rational(re)
    im = sympy.Rational(im)
    return GaussianRational(
        fractions.Fraction(int(re.p), int(re.q)),
        fractions.Fraction(int(im.p), int(im.q)),
    )


def _poly_eval_scalar(coeffs, x: GaussianRational) -> GaussianRational:
    acc = GR_ZERO
    for c in coeffs:
        acc = acc * x + c
    return acc


def _poly_deflate(coeffs, root):
    """Synthetic division by (x - root); exact, remainder asserted zero."""
    out = []
    acc = GR_ZERO
    for c in coeffs[:-1]:
        acc = acc * root + c
        out.append(acc)
    return out


# candidate roots worth a cheap exact evaluation before full factoring
_FAST_ROOT_CANDIDATES = [
    GaussianRational(v_re, v_im)
    for v_re, v_im in [
        (0, 0), (1, 0), (-1, 0), (2, 0), (-2, 0), (0, 1), (0, -1),
        (1, 1), (1, -1), (-1, 1), (-1, -1), (3, 0), (-3, 0), (4, 0), (-4, 0),
        (0, 2), (0, -2), (2, 2), (-2, -2),
    ]
]


def gaussian_rational_roots(coeffs, extra_candidates=()):
    """Roots of a monic polynomial that lie in the Gaussian rationals.

    Returns (list of (root, multiplicity), leftover_degree) where the
    leftover degree counts roots outside the field.  A cheap scan of
    common candidates (plus ``extra_candidates``, e.g. matrix diagonal
    entries) deflates obvious roots first; whatever remains is factored
    over the Gaussian-rational domain, which is exactly the rational-root
    search the exact backend is restricted to.
    """
    work = list(coeffs)
    found = {}
    candidates = []
    for cand in list(extra_candidates) + _FAST_ROOT_CANDIDATES:
        if cand not in candidates:
            candidates.append(cand)
    progress = True
    while progress and len(work) > 1:
        progress = False
        for cand in candidates:
            while len(work) > 1 and not _poly_eval_scalar(work, cand):
                work = _poly_deflate(work, cand)
                found[cand] = found.get(cand, 0) + 1
                progress = True
    leftover = 0
    if len(work) > 1:
        n = len(work) - 1
        expr = sum(
            (_to_sympy(c) * _X ** (n - k) for k, c in enumerate(work)),
            sympy.Integer(0),
        )
        poly = sympy.Poly(expr, _X, domain="QQ_I")
        for factor, mult in poly.factor_list()[1]:
            if factor.degree() == 1:
                a, b = factor.all_coeffs()
                root = _from_sympy(sympy.expand(sympy.together(-b / a)))
                found[root] = found.get(root, 0) + int(mult)
            else:
                leftover += factor.degree() * mult
    roots = sorted(found.items(), key=lambda item: (item[0].re, item[0].im))
    return roots, leftover


def cluster_eigenvalues(values, ctx: ToleranceContext = DEFAULT_CONTEXT):
    """Merge numeric eigenvalues within 10*eps (scale-aware) clusters."""
    vals = sorted(values, key=lambda z: (z.real, z.imag))
    scale = max([abs(z) for z in vals], default=1.0)
    radius = ctx.cluster_radius(scale)
    clusters = []
    for z in vals:
        placed = False
        for cluster in clusters:
            if abs(z - cluster[0] / len(cluster[1])) <= radius:
                cluster[1].append(z)
                cluster[0] += z
                placed = True
                break
        if not placed:
            clusters.append([z, [z]])
    out = []
    for total, members in clusters:
        center = total / len(members)
        out.append((complex(center), len(members)))
    out.sort(key=lambda item: (item[0].real, item[0].imag))
    return out


def eigenvalues(m: Matrix, ctx: ToleranceContext = DEFAULT_CONTEXT, spectrum_hint=None):
    """Eigenvalues with algebraic multiplicities.

    Exact: complete list demanded; a leftover outside the field raises
    ExactEigenvalueNotInField.  Approx: numeric spectrum, clustered.
    """
    if m.rows != m.cols:
        raise ValueError("eigenvalues of a non-square matrix")
    if m.rows > MAX_EIGEN_DIM:
        raise SizeLimit(f"eigen decomposition capped at dim {MAX_EIGEN_DIM}")
    if m.backend == EXACT:
        diag = [m.entries[i][i] for i in range(m.rows)]
        roots, leftover = gaussian_rational_roots(charpoly(m), extra_candidates=diag)
        if spectrum_hint:
            found = {r for r, _ in roots}
            for hint in spectrum_hint:
                if hint not in found:
                    raise ExactEigenvalueNotInField(
                        f"hint {hint} is not an eigenvalue over the exact field"
                    )
        if leftover:
            raise ExactEigenvalueNotInField(
                f"{leftover} eigenvalue(s) lie outside the Gaussian rationals"
            )
        return roots
    try:
        vals = np.linalg.eigvals(m.to_numpy())
    except np.linalg.LinAlgError as exc:
        raise NonConvergence(str(exc)) from exc
    clustered = cluster_eigenvalues(list(vals), ctx)
    if spectrum_hint:
        scale = max([abs(z) for z, _ in clustered], default=1.0)
        radius = ctx.cluster_radius(scale)
        anchored = []
        used = [False] * len(clustered)
        for hint in spectrum_hint:
            h = complex(hint)
            match = None
            for idx, (center, mult) in enumerate(clustered):
                if not used[idx] and abs(center - h) <= radius:
                    match = (h, mult)
                    used[idx] = True
                    break
            if match is None:
                raise NonConvergence(f"hinted eigenvalue {hint!r} not found")
            anchored.append(match)
        for idx, pair in enumerate(clustered):
            if not used[idx]:
                anchored.append(pair)
        anchored.sort(key=lambda item: (item[0].real, item[0].imag))
        return anchored
    return clustered


def in_field_eigenvalues(m: Matrix, ctx: ToleranceContext = DEFAULT_CONTEXT):
    """Eigenvalues found in the working field, tolerating leftovers.

    Same as :func:`eigenvalues` except exact-backend leftovers are
    reported instead of raised.  Returns (pairs, leftover_degree).
    """
    if m.backend == EXACT:
        diag = [m.entries[i][i] for i in range(m.rows)]
        return gaussian_rational_roots(charpoly(m), extra_candidates=diag)
    return eigenvalues(m, ctx), 0


@dataclass(frozen=True)
class GenEigenData:
    """One generalized eigenspace: basis, Jordan block sizes, nilpotency index."""

    eigenvalue: object
    space_basis: tuple
    block_sizes: tuple
    index: int

    @property
    def dim(self) -> int:
        return len(self.space_basis)


def _shift(m: Matrix, lam) -> Matrix:
    return m - Matrix.identity(m.rows, m.backend).scale(lam)


def generalized_eigenspace(m: Matrix, lam, alg_mult=None, ctx: ToleranceContext = DEFAULT_CONTEXT) -> GenEigenData:
    """Generalized eigenspace data for one eigenvalue.

    Follows the kernel chain of (m - lam)^p until it stabilises; block
    sizes come from the nullity increments (conjugate partition).
    """
    shifted = _shift(m, lam)
    power = shifted
    dims = []
    prev = 0
    last_kernel = []
    while True:
        kernel = nullspace(power, ctx)
        d = len(kernel)
        if d == prev:
            break
        dims.append(d)
        prev = d
        last_kernel = kernel
        if alg_mult is not None and d >= alg_mult:
            break
        if len(dims) > m.rows:
            break
        power = power @ shifted
    if not dims:
        return GenEigenData(lam, (), (), 0)
    index = len(dims)
    increments = [dims[0]] + [dims[i] - dims[i - 1] for i in range(1, len(dims))]
    blocks = []
    for size in range(len(increments), 0, -1):
        nxt = increments[size] if size < len(increments) else 0
        count = increments[size - 1] - nxt
        blocks.extend([size] * count)
    return GenEigenData(
        lam, tuple(last_kernel), tuple(sorted(blocks, reverse=True)), index
    )


def generalized_eigenspaces(m: Matrix, spectrum_hint=None, ctx: ToleranceContext = DEFAULT_CONTEXT):
    """Complete generalized eigenspace decomposition of a square matrix.

    Post: the spaces are independent and their dimensions sum to the
    ambient dimension (the finite-dimensional spectral decomposition).
    """
    pairs = eigenvalues(m, ctx, spectrum_hint)
    out = []
    total = 0
    for lam, mult in pairs:
        data = generalized_eigenspace(m, lam, alg_mult=mult, ctx=ctx)
        if data.dim != mult:
            raise NonConvergence(
                f"generalized eigenspace at {lam!r} has dim {data.dim}, expected {mult}"
            )
        out.append(data)
        total += data.dim
    if total != m.rows:
        raise NonConvergence(
            f"generalized eigenspaces sum to {total}, ambient dim {m.rows}"
        )
    return out


# -- intertwiners ------------------------------------------------------------


def intertwiner_space(a_gens, b_gens, ctx: ToleranceContext = DEFAULT_CONTEXT):
    """Basis of {T : T A_i = B_i T for all i}, as matrices.

    The generators must come in matched lists (images of the same abstract
    generators).  An invertible member, when one exists, witnesses
    isomorphism of the two representations.
    """
    if len(a_gens) != len(b_gens):
        raise ValueError("generator lists have different lengths")
    if not a_gens:
        raise ValueError("empty generator lists")
    backend = same_backend(
        *[g.backend for g in a_gens], *[g.backend for g in b_gens]
    )
    a_dim = a_gens[0].rows
    b_dim = b_gens[0].rows
    for g in a_gens:
        if g.shape != (a_dim, a_dim):
            raise ValueError("A-generators must be square of equal size")
    for g in b_gens:
        if g.shape != (b_dim, b_dim):
            raise ValueError("B-generators must be square of equal size")
    zero = GR_ZERO if backend == EXACT else 0.0 + 0.0j
    unknowns = b_dim * a_dim  # T[r][c] -> index r*a_dim + c
    rows = []
    for a, b in zip(a_gens, b_gens):
        for r in range(b_dim):
            for c in range(a_dim):
                row = [zero] * unknowns
                for v in range(a_dim):
                    row[r * a_dim + v] = row[r * a_dim + v] + a.entries[v][c]
                for u in range(b_dim):
                    row[u * a_dim + c] = row[u * a_dim + c] - b.entries[r][u]
                rows.append(row)
    system = Matrix(rows, backend)
    basis = nullspace(system, ctx)
    out = []
    for vec in basis:
        grid = [
            [vec[r * a_dim + c] for c in range(a_dim)] for r in range(b_dim)
        ]
        out.append(Matrix(grid, backend))
    return out


def minimal_polynomial(m: Matrix, ctx: ToleranceContext = DEFAULT_CONTEXT):
    """Monic minimal polynomial coefficients (highest power first).

    Exact backend: detects the first linear dependency among the powers
    of ``m`` and solves for it.
    """
    if m.backend != EXACT:
        raise BackendMismatch("minimal_polynomial is exact-only")
    n = m.rows
    vecs = []
    power = Matrix.identity(n, EXACT)
    span = Span(n * n, EXACT, ctx)
    while True:
        flat = tuple(x for row in power.entries for x in row)
        if not span.add(flat):
            break
        vecs.append(flat)
        power = power @ m
    k = len(vecs)  # degree of the minimal polynomial
    target = tuple(x for row in power.entries for x in row)
    cols = [list(v) for v in vecs]
    system = Matrix(
        [[cols[j][i] for j in range(k)] for i in range(n * n)], EXACT
    )
    aug = Matrix([[target[i]] for i in range(n * n)], EXACT)
    red, pivots = _rref(
        [list(system.entries[i]) + list(aug.entries[i]) for i in range(n * n)]
    )
    sol = [GR_ZERO] * k
    for row_idx, p in enumerate(pivots):
        if p < k:
            sol[p] = red[row_idx][k]
    # m^k = sum sol[j] m^j  =>  x^k - sum sol[j] x^j
    return [GR_ONE] + [-sol[k - 1 - j] for j in range(k)]
