"""Shared builders for the test suite.

Random models are assembled from a pool of pairwise non-isomorphic
irreducible building blocks: block upper-triangular stacking with random
coupling leaves the composition content equal to the diagonal blocks (the
classical uniqueness of composition factors), so every generated model
comes with a known multiplicity oracle.  A random unimodular change of
basis then hides the construction from the algorithms under test.
"""

from __future__ import annotations

import random

import numpy as np

from tracelab.linalg import Matrix
from tracelab.scalars import APPROX, EXACT, GR_ONE, GR_ZERO, GaussianRational
from tracelab.spectral import AdmissibleModel, default_resolvent_sample

G = GaussianRational


def gr(a, b=0):
    return GaussianRational(a, b)


def exact_matrix(rows):
    return Matrix([[gr(x) if not isinstance(x, GaussianRational) else x for x in row] for row in rows])


# pool entries: tuples of three generator images (models with fewer
# generators take a prefix); pairwise non-isomorphic by characteristic
# polynomial profile
def factor_pool():
    pool = []
    # characters
    for values in [(1, 1, 1), (-1, 1, -1), (2, 1, 1), (1, -1, 2)]:
        pool.append(
            tuple(exact_matrix([[v]]) for v in values)
        )
    pool.append(tuple(exact_matrix([[x]]) for x in (gr(0, 1), gr(1), gr(0, -1))))
    # 2-dim absolutely irreducible (standard-type pair, padded with a swap)
    rot3 = exact_matrix([[0, -1], [1, -1]])
    swap = exact_matrix([[0, 1], [1, 0]])
    stretch = exact_matrix([[2, 0], [0, 1]])
    pool.append((rot3, swap, stretch))
    # 2-dim pair with a different charpoly profile
    pool.append((swap, exact_matrix([[1, 1], [0, -1]]), rot3))
    return pool


def _dim2_prefix_irreducible(mats) -> bool:
    """Independent irreducibility test for 2x2 exact generator tuples.

    A 2-dim module over the Gaussian rationals is reducible iff the
    generators share an eigenvector whose eigenvalue lies in the field;
    candidate lines come from the in-field eigenvalues of the first
    generator, so scanning them is complete.
    """
    from tracelab.linalg import charpoly, gaussian_rational_roots, nullspace
    from tracelab.linalg import Matrix as M

    first = mats[0]
    roots, _ = gaussian_rational_roots(charpoly(first))
    if not roots:
        return True  # no in-field eigenvalue at all: no stable line
    for lam, _mult in roots:
        shift = first - M.identity(2, EXACT).scale(lam)
        for v in nullspace(shift):
            stable = True
            for g in mats[1:]:
                w = g.apply(v)
                # w parallel to v: cross determinant vanishes
                if w[0] * v[1] != w[1] * v[0]:
                    stable = False
                    break
            if stable:
                return False
    return True


def usable_pool(n_gens: int):
    """Pool entries valid for a model with the given generator count:
    prefix-irreducible and pairwise distinct as prefixes."""
    entries = []
    seen_prefixes = []
    for mats in factor_pool():
        prefix = mats[:n_gens]
        if prefix in seen_prefixes:
            continue
        if prefix[0].rows == 2 and not _dim2_prefix_irreducible(prefix):
            continue
        seen_prefixes.append(prefix)
        entries.append(mats)
    return entries


def random_unimodular_exact(dim: int, rng: random.Random) -> Matrix:
    rows = [[GR_ONE if i == j else GR_ZERO for j in range(dim)] for i in range(dim)]
    for _ in range(2 * dim):
        i = rng.randrange(dim)
        j = rng.randrange(dim)
        if i == j:
            continue
        c = gr(rng.choice([-1, 1]), rng.choice([-1, 0, 1]))
        rows[i] = [a + c * b for a, b in zip(rows[i], rows[j])]
    return Matrix(rows, EXACT)


def random_exact_model(rng: random.Random, max_dim: int = 12, n_gens: int | None = None):
    """(model, content) with content = {pool index: count} oracle."""
    if n_gens is None:
        n_gens = rng.randint(1, 3)
    pool = usable_pool(n_gens)
    picks = []
    total = 0
    while True:
        idx = rng.randrange(len(pool))
        d = pool[idx][0].rows
        if total + d > max_dim:
            break
        picks.append(idx)
        total += d
        if total >= max_dim or (len(picks) >= 2 and rng.random() < 0.45):
            break
    rng.shuffle(picks)
    dim = total
    gens = []
    for g_idx in range(n_gens):
        grid = [[GR_ZERO] * dim for _ in range(dim)]
        at = 0
        offsets = []
        for idx in picks:
            block = pool[idx][g_idx]
            offsets.append(at)
            for i in range(block.rows):
                for j in range(block.cols):
                    grid[at + i][at + j] = block.entries[i][j]
            at += block.rows
        # random coupling strictly above the block diagonal
        for bi in range(len(picks)):
            for bj in range(bi + 1, len(picks)):
                oi, oj = offsets[bi], offsets[bj]
                di = pool[picks[bi]][0].rows
                dj = pool[picks[bj]][0].rows
                for i in range(di):
                    for j in range(dj):
                        if rng.random() < 0.5:
                            grid[oi + i][oj + j] = gr(
                                rng.choice([-1, 0, 1, 2]), rng.choice([-1, 0, 1])
                            )
        gens.append(Matrix(grid, EXACT))
    s = random_unimodular_exact(dim, rng)
    s_inv = s.inverse()
    gens = [s_inv @ g @ s for g in gens]
    if rng.random() < 0.5:
        delta = Matrix.identity(dim, EXACT).scale(gr(rng.randint(-3, 3), rng.randint(-2, 2)))
    else:
        delta = Matrix.zeros(dim, dim, EXACT)
        for g in gens:
            delta = delta + g + g.inverse()
    content = {}
    for idx in picks:
        content[idx] = content.get(idx, 0) + 1
    model_obj = AdmissibleModel(
        tuple(gens),
        delta,
        default_resolvent_sample(delta),
        f"random[{dim}d]",
    )
    return model_obj, content, pool, n_gens


def random_defective_approx_delta(rng: random.Random, max_dim: int = 12, force_blocks: bool = False):
    """Approx delta with well-separated eigenvalue groups and known gaps.

    Defective eigenvalues scatter numerically at the square root of
    machine precision, so the model carries a wider tolerance context
    (clustering and rank thresholds at 1e-7); the projector agreement
    target stays far below either scale.

    Returns (model, cluster list [(eigenvalue, total multiplicity)], gap).
    """
    from tracelab.scalars import ToleranceContext

    n_groups = rng.randint(2, 3)
    eigenvalues = []
    base = rng.uniform(-2.0, 2.0)
    for i in range(n_groups):
        eigenvalues.append(base + 3.0 * i + rng.uniform(-0.3, 0.3) + 1j * rng.uniform(-0.5, 0.5))
    blocks = []
    clusters = []
    total = 0
    for i, lam in enumerate(eigenvalues):
        sizes = []
        want_block = force_blocks and i == 0
        while True:
            size = 2 if (want_block and not sizes) else rng.choice([1, 1, 2])
            if total + size > max_dim:
                break
            sizes.append(size)
            total += size
            want_block = False
            if rng.random() < 0.6:
                break
        if not sizes:
            sizes = [1]
            total += 1
        for size in sizes:
            grid = np.eye(size, dtype=complex) * lam
            for t in range(size - 1):
                grid[t, t + 1] = rng.uniform(0.1, 0.4)
            blocks.append(grid)
        clusters.append((lam, sum(sizes)))
    full = np.zeros((total, total), dtype=complex)
    at = 0
    for b in blocks:
        k = b.shape[0]
        full[at : at + k, at : at + k] = b
        at += k
    q, _ = np.linalg.qr(
        np.array([[rng.gauss(0, 1) + 1j * rng.gauss(0, 1) for _ in range(total)] for _ in range(total)])
    )
    delta = Matrix.from_numpy(q.conj().T @ full @ q)
    ctx = ToleranceContext(eps=1e-7)
    model_obj = AdmissibleModel(
        (Matrix.identity(total, APPROX),),
        delta,
        default_resolvent_sample(delta, ctx),
        f"defective[{total}d]",
        ctx,
    )
    gap = min(
        abs(a - b)
        for i, (a, _) in enumerate(clusters)
        for j, (b, _) in enumerate(clusters)
        if i < j
    )
    return model_obj, clusters, gap


def random_triangular_model(rng: random.Random, max_dim: int = 8):
    """Single-generator exact model whose delta spectrum stays in the field.

    The generator is triangular with in-field diagonal before hiding the
    structure by a unimodular conjugation, so g + g^{-1} has in-field
    eigenvalues and every invariant subspace supports the full
    generalized-eigenspace bookkeeping.
    """
    n = rng.randint(3, max_dim)
    choices = [(1, 0), (-1, 0), (0, 1), (2, 0), (1, 1), (3, 0)]
    values = [gr(*rng.choice(choices)) for _ in range(n)]
    for i in range(1, n):
        if rng.random() < 0.5:
            values[i] = values[rng.randrange(i)]
    rows = [
        [
            values[i]
            if i == j
            else (
                gr(rng.choice([-1, 0, 0, 1]), rng.choice([0, 0, 1]))
                if j > i
                else GR_ZERO
            )
            for j in range(n)
        ]
        for i in range(n)
    ]
    s = random_unimodular_exact(n, rng)
    g = s.inverse() @ Matrix(rows, EXACT) @ s
    delta = g + g.inverse()
    return AdmissibleModel(
        (g,), delta, default_resolvent_sample(delta), f"triangular[{n}d]"
    )
