import random
from fractions import Fraction

import numpy as np
import pytest

from conftest import exact_matrix, gr, random_unimodular_exact
from tracelab.errors import (
    BackendMismatch,
    ExactEigenvalueNotInField,
    SpectralPole,
)
from tracelab.linalg import (
    Matrix,
    charpoly,
    eigenvalues,
    gaussian_rational_roots,
    generalized_eigenspaces,
    intertwiner_space,
    minimal_polynomial,
    nullspace,
    rank,
    resolvent,
    span_of,
)
from tracelab.scalars import APPROX, EXACT, GR_ONE, GR_ZERO


def brute_row_reduce(rows):
    """Independent row-reduction oracle over plain Fractions (real case)."""
    mat = [list(map(Fraction, r)) for r in rows]
    pivots = 0
    for col in range(len(mat[0])):
        piv = next((r for r in range(pivots, len(mat)) if mat[r][col]), None)
        if piv is None:
            continue
        mat[pivots], mat[piv] = mat[piv], mat[pivots]
        inv = 1 / mat[pivots][col]
        mat[pivots] = [x * inv for x in mat[pivots]]
        for r in range(len(mat)):
            if r != pivots and mat[r][col]:
                f = mat[r][col]
                mat[r] = [a - f * b for a, b in zip(mat[r], mat[pivots])]
        pivots += 1
    return pivots


class TestNullspace:
    def test_zero_matrix_kernel_is_everything(self):
        basis = nullspace(Matrix.zeros(2, 2, EXACT))
        assert len(basis) == 2

    def test_identity_kernel_empty(self):
        assert nullspace(Matrix.identity(3, EXACT)) == []

    def test_rank_one_matrix(self):
        # oracle: independent row reduction says rank 1, so kernel dim 1
        m = exact_matrix([[1, 1], [1, 1]])
        assert brute_row_reduce([[1, 1], [1, 1]]) == 1
        basis = nullspace(m)
        assert len(basis) == 1
        v = basis[0]
        assert all(not x for x in m.apply(v))
        # the kernel vector is proportional to (1, -1)
        assert v[0] == -v[1]

    def test_approx_kernel_via_singular_values(self):
        m = Matrix([[1 + 0j, 1 + 0j], [1 + 0j, 1 + 0j]], APPROX)
        basis = nullspace(m)
        assert len(basis) == 1
        img = m.apply(basis[0])
        assert max(abs(x) for x in img) < 1e-12


class TestGeneralizedEigenspaces:
    def test_diagonal(self):
        m = exact_matrix([[1, 0], [0, 2]])
        decomp = generalized_eigenspaces(m)
        assert [(str(d.eigenvalue), d.dim, d.block_sizes) for d in decomp] == [
            ("1", 1, (1,)),
            ("2", 1, (1,)),
        ]

    def test_jordan_block_two(self):
        # oracle: (M - 3I)^2 = 0 while (M - 3I) != 0
        m = exact_matrix([[3, 1], [0, 3]])
        shift = m - Matrix.identity(2, EXACT).scale(gr(3))
        assert not shift.is_zero()
        assert (shift @ shift).is_zero()
        (data,) = generalized_eigenspaces(m)
        assert str(data.eigenvalue) == "3"
        assert data.dim == 2
        assert data.block_sizes == (2,)
        assert data.index == 2

    def test_nilpotent_three(self):
        m = exact_matrix([[0, 1, 0], [0, 0, 1], [0, 0, 0]])
        (data,) = generalized_eigenspaces(m)
        assert str(data.eigenvalue) == "0"
        assert data.block_sizes == (3,)
        assert data.index == 3

    def test_spaces_sum_to_ambient_and_are_stable(self):
        rng = random.Random(7)
        for _ in range(20):
            dim = rng.randint(2, 5)
            diag = [gr(rng.randint(-2, 2), rng.randint(-1, 1)) for _ in range(dim)]
            rows = [
                [
                    diag[i]
                    if i == j
                    else (gr(rng.randint(-1, 1)) if j > i else GR_ZERO)
                    for j in range(dim)
                ]
                for i in range(dim)
            ]
            s = random_unimodular_exact(dim, rng)
            m = s.inverse() @ Matrix(rows, EXACT) @ s
            decomp = generalized_eigenspaces(m)
            assert sum(d.dim for d in decomp) == dim
            for d in decomp:
                space = span_of(list(d.space_basis), dim, EXACT)
                for v in d.space_basis:
                    assert space.contains(m.apply(v))

    def test_out_of_field_raises(self):
        m = exact_matrix([[0, -1], [1, -1]])  # order three, cube-root eigenvalues
        with pytest.raises(ExactEigenvalueNotInField):
            generalized_eigenspaces(m)

    def test_gaussian_rational_roots_found(self):
        m = exact_matrix([[0, -1], [1, 0]])  # eigenvalues +-i
        decomp = generalized_eigenspaces(m)
        assert sorted(str(d.eigenvalue) for d in decomp) == ["-i", "i"]

    def test_approx_cluster_merging(self):
        m = Matrix(
            [[1 + 0j, 0j, 0j], [0j, 1 + 1e-12j, 0j], [0j, 0j, 2 + 0j]], APPROX
        )
        pairs = eigenvalues(m)
        assert sorted(mult for _, mult in pairs) == [1, 2]


class TestResolvent:
    def test_scalar(self):
        m = Matrix([[GR_ZERO]], EXACT)
        assert resolvent(m, gr(-1)) == Matrix([[GR_ONE]], EXACT)

    def test_diagonal(self):
        m = exact_matrix([[0, 0], [0, 5]])
        r = resolvent(m, gr(-1))
        assert str(r.entries[0][0]) == "1"
        assert str(r.entries[1][1]) == "1/6"
        assert not r.entries[0][1] and not r.entries[1][0]

    def test_jordan_block(self):
        m = exact_matrix([[0, 1], [0, 0]])
        r = resolvent(m, gr(1))
        assert r == exact_matrix([[-1, -1], [0, -1]])
        prod = r @ (m - Matrix.identity(2, EXACT))
        assert prod == Matrix.identity(2, EXACT)

    def test_pole_detection(self):
        m = exact_matrix([[0, 0], [0, 5]])
        with pytest.raises(SpectralPole):
            resolvent(m, gr(5))
        approx = m.to_approx()
        with pytest.raises(SpectralPole):
            resolvent(approx, 5.0 + 1e-14j)

    def test_resolvent_inversion_randomized(self):
        # multiply back to the identity for 100 random matrices
        rng = random.Random(11)
        count = 0
        while count < 100:
            dim = rng.randint(1, 4)
            m = Matrix(
                [
                    [gr(rng.randint(-3, 3), rng.randint(-2, 2)) for _ in range(dim)]
                    for _ in range(dim)
                ],
                EXACT,
            )
            lam = gr(rng.randint(-4, 4), rng.randint(1, 5))  # off the real axis
            shifted = m - Matrix.identity(dim, EXACT).scale(lam)
            if not shifted.det():
                continue
            r = resolvent(m, lam)
            assert r @ shifted == Matrix.identity(dim, EXACT)
            count += 1


class TestIntertwiners:
    def test_scalar_commutant(self):
        a = exact_matrix([[2]])
        basis = intertwiner_space([a], [a])
        assert len(basis) == 1

    def test_distinct_characters_have_no_intertwiner(self):
        assert intertwiner_space([exact_matrix([[1]])], [exact_matrix([[-1]])]) == []

    def test_jordan_self_intertwiners(self):
        # oracle: solve T J = J T by hand; solutions are a I + b N
        j = exact_matrix([[1, 1], [0, 1]])
        basis = intertwiner_space([j], [j])
        assert len(basis) == 2
        expected = span_of(
            [
                (gr(1), gr(0), gr(0), gr(1)),  # identity flattened
                (gr(0), gr(1), gr(0), gr(0)),  # nilpotent flattened
            ],
            4,
            EXACT,
        )
        for t in basis:
            flat = tuple(x for row in t.entries for x in row)
            assert expected.contains(flat)
            assert (t @ j) == (j @ t)

    def test_contains_identity_always(self):
        rng = random.Random(3)
        for _ in range(10):
            dim = rng.randint(1, 3)
            mats = []
            while len(mats) < 2:
                m = Matrix(
                    [
                        [gr(rng.randint(-2, 2), rng.randint(-1, 1)) for _ in range(dim)]
                        for _ in range(dim)
                    ],
                    EXACT,
                )
                if m.det():
                    mats.append(m)
            basis = intertwiner_space(mats, mats)
            ident = Matrix.identity(dim, EXACT)
            flat_ident = tuple(x for row in ident.entries for x in row)
            space = span_of(
                [tuple(x for row in t.entries for x in row) for t in basis],
                dim * dim,
                EXACT,
            )
            assert space.contains(flat_ident)

    def test_generator_list_length_mismatch(self):
        with pytest.raises(ValueError):
            intertwiner_space([exact_matrix([[1]])], [])


class TestPolynomials:
    def test_charpoly_companion(self):
        m = exact_matrix([[0, 0, 2], [1, 0, 0], [0, 1, 0]])  # companion of x^3 - 2
        coeffs = charpoly(m)
        assert [str(c) for c in coeffs] == ["1", "0", "0", "-2"]
        roots, leftover = gaussian_rational_roots(coeffs)
        assert roots == [] and leftover == 3

    def test_minimal_polynomial_of_jordan(self):
        j3 = exact_matrix([[3, 1], [0, 3]])
        assert [str(c) for c in minimal_polynomial(j3)] == ["1", "-6", "9"]
        assert [str(c) for c in minimal_polynomial(Matrix.identity(3, EXACT))] == [
            "1",
            "-1",
        ]

    def test_charpoly_requires_exact(self):
        with pytest.raises(BackendMismatch):
            charpoly(Matrix.identity(2, APPROX))


class TestProjectorReconstruction:
    def test_projectors_sum_to_identity(self):
        rng = random.Random(23)
        for _ in range(10):
            dim = rng.randint(2, 5)
            diag = [gr(rng.randint(-2, 2)) for _ in range(dim)]
            rows = [
                [diag[i] if i == j else (gr(rng.randint(0, 1)) if j == i + 1 else GR_ZERO) for j in range(dim)]
                for i in range(dim)
            ]
            s = random_unimodular_exact(dim, rng)
            m = s.inverse() @ Matrix(rows, EXACT) @ s
            decomp = generalized_eigenspaces(m)
            columns = []
            blocks = []
            for d in decomp:
                blocks.append((len(columns), d.dim))
                columns.extend(d.space_basis)
            e = Matrix.from_columns(columns, EXACT)
            e_inv = e.inverse()
            total = Matrix.zeros(dim, dim, EXACT)
            for start, width in blocks:
                diag_m = Matrix(
                    [
                        [
                            GR_ONE if (i == j and start <= i < start + width) else GR_ZERO
                            for j in range(dim)
                        ]
                        for i in range(dim)
                    ],
                    EXACT,
                )
                total = total + e @ diag_m @ e_inv
            assert total == Matrix.identity(dim, EXACT)


def test_rank_matches_oracle():
    m = exact_matrix([[1, 2, 3], [2, 4, 6], [1, 0, 1]])
    assert rank(m) == brute_row_reduce([[1, 2, 3], [2, 4, 6], [1, 0, 1]])


def test_mixed_backend_rejected():
    a = Matrix.identity(2, EXACT)
    b = Matrix.identity(2, APPROX)
    with pytest.raises(BackendMismatch):
        _ = a @ b
