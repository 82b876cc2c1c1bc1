import cmath
import itertools
import math

import numpy as np
import pytest

from tracelab.errors import SchemaError, SizeLimit, TailBoundExceedsTolerance
from tracelab.linalg import Matrix
from tracelab.spectral import spectrum
from tracelab.torus import (
    BumpTestFunction,
    GaussianTestFunction,
    TorusTwist,
    TruncationParams,
    geometric_side_torus,
    laplacian_expected_spectrum,
    log_branch,
    spectral_characters,
    spectral_side_torus,
    trivial_torus_twist,
    twisted_laplacian_model,
    verify_torus,
)

# frozen with the independent high-precision oracle below (mpmath, 50 digits):
#   sum over n of exp(-pi n^2)             -> CLASSICAL
#   sum over n of exp(-pi n^2) 2^n         -> SCALAR_TWO
CLASSICAL = 1.0864348112133080145753161215103
SCALAR_TWO = 1.1080496168687146178616656601862


def mpmath_oracle_classical(terms=40):
    import mpmath

    mpmath.mp.dps = 50
    return mpmath.nsum(lambda n: mpmath.exp(-mpmath.pi * n * n), [-terms, terms])


def mpmath_oracle_scalar_two(terms=40):
    import mpmath

    mpmath.mp.dps = 50
    return mpmath.nsum(
        lambda n: mpmath.exp(-mpmath.pi * n * n) * mpmath.mpf(2) ** n,
        [-terms, terms],
    )


def test_frozen_oracle_values_are_reproducible():
    assert abs(float(mpmath_oracle_classical()) - CLASSICAL) < 1e-15
    assert abs(float(mpmath_oracle_scalar_two()) - SCALAR_TWO) < 1e-15
    closed_form = math.pi ** 0.25 / math.gamma(0.75)
    assert abs(closed_form - CLASSICAL) < 1e-15


class TestBranch:
    def test_scalar_two(self):
        theta = log_branch(2.0)
        assert theta.real == 0.0
        assert abs(theta.imag + math.log(2) / (2 * math.pi)) < 1e-15
        assert abs(cmath.exp(2j * math.pi * theta) - 2.0) < 1e-14

    def test_branch_normalized(self):
        for a in (1j, -1.0, -2.0 + 1.0j, 0.5 - 0.25j):
            theta = log_branch(a)
            assert 0.0 <= theta.real < 1.0
            assert abs(cmath.exp(2j * math.pi * theta) - a) < 1e-12 * max(1, abs(a))

    def test_zero_rejected(self):
        with pytest.raises(ValueError):
            log_branch(0.0)


class TestSpectralCharacters:
    def test_trivial_twist_fourier_basis(self):
        tw = trivial_torus_twist()
        family = list(itertools.islice(spectral_characters(tw), 5))
        assert [(round(f.real), m) for f, m in family] == [
            (0, 1),
            (1, 1),
            (-1, 1),
            (2, 1),
            (-2, 1),
        ]

    def test_scalar_two_offsets(self):
        tw = TorusTwist(((2.0, 1),))
        (first, m), *_ = list(itertools.islice(spectral_characters(tw), 1))
        assert m == 1
        assert abs(first - log_branch(2.0)) < 1e-15

    def test_jordan_multiplicity(self):
        tw = TorusTwist(((1.0, 2),))
        family = list(itertools.islice(spectral_characters(tw), 3))
        assert all(m == 2 for _, m in family)


class TestSides:
    def test_classical_value_on_both_sides(self):
        tw = trivial_torus_twist()
        f = GaussianTestFunction()
        params = TruncationParams(K=8, N=8)
        spectral, tail_s = spectral_side_torus(tw, f, params)
        geometric, tail_g = geometric_side_torus(tw, f, params)
        assert abs(spectral.real - CLASSICAL) < 1e-10
        assert abs(geometric.real - CLASSICAL) < 1e-10
        assert tail_s < 1e-20 and tail_g < 1e-20

    def test_jordan_doubles_classical(self):
        tw = TorusTwist(((1.0, 2),))
        f = GaussianTestFunction()
        params = TruncationParams(K=8, N=8)
        spectral, _ = spectral_side_torus(tw, f, params)
        geometric, _ = geometric_side_torus(tw, f, params)
        assert abs(spectral - 2 * CLASSICAL) < 1e-10
        assert abs(geometric - 2 * CLASSICAL) < 1e-10

    def test_scalar_two_cross_check(self):
        tw = TorusTwist(((2.0, 1),))
        f = GaussianTestFunction()
        params = TruncationParams(K=8, N=8)
        spectral, _ = spectral_side_torus(tw, f, params)
        geometric, _ = geometric_side_torus(tw, f, params)
        assert abs(spectral - geometric) < 1e-10
        assert abs(geometric.real - SCALAR_TWO) < 1e-10

    def test_geometric_series_terms(self):
        # n = 0, +-1, +-2 terms of the a=2 series, summed by hand
        tw = TorusTwist(((2.0, 1),))
        f = GaussianTestFunction()
        value, _ = geometric_side_torus(tw, f, TruncationParams(K=2, N=2))
        expected = 1.0 + 2.5 * math.exp(-math.pi) + 4.25 * math.exp(-4 * math.pi)
        assert abs(value.real - expected) < 1e-15

    def test_bump_only_origin_survives(self):
        tw = TorusTwist(((2.0, 1), (1.0, 2)))
        f = BumpTestFunction(radius=0.9)
        value, tail = geometric_side_torus(tw, f, TruncationParams(K=8, N=4))
        assert abs(value - f.value(0) * tw.dim) < 1e-15
        assert tail == 0.0

    def test_spectral_tail_cap(self):
        tw = trivial_torus_twist()
        f = GaussianTestFunction()
        params = TruncationParams(K=1, N=8, spectral_tail_cap=1e-30)
        with pytest.raises(TailBoundExceedsTolerance):
            spectral_side_torus(tw, f, params)


class TestVerify:
    def test_classical(self):
        v = verify_torus(
            trivial_torus_twist(), GaussianTestFunction(), TruncationParams(8, 8), 1e-12
        )
        assert v.passed and v.residual <= 1e-12

    def test_scalar_two(self):
        v = verify_torus(
            TorusTwist(((2.0, 1),)), GaussianTestFunction(), TruncationParams(8, 8), 1e-10
        )
        assert v.passed and v.residual <= 1e-10

    def test_jordan_unipotent(self):
        v = verify_torus(
            TorusTwist(((1.0, 2),)), GaussianTestFunction(), TruncationParams(8, 8), 1e-12
        )
        assert v.passed and v.residual <= 1e-12
        assert abs(v.spectral_value - 2 * CLASSICAL) < 1e-10

    def test_residual_within_tails_for_small_cutoffs(self):
        # truncation error is real but certified: the tails cover it
        v = verify_torus(
            TorusTwist(((2.0, 1),)),
            GaussianTestFunction(),
            TruncationParams(K=1, N=4),
            1e-12,
        )
        assert v.residual > 1e-12  # genuinely truncated
        assert v.passed  # but the certificate covers it

    def test_bump_anchor_run(self):
        v = verify_torus(
            TorusTwist(((1.0, 2),)),
            BumpTestFunction(radius=1.75),
            TruncationParams(K=32, N=8),
            1e-10,
        )
        assert v.passed
        assert v.residual <= 1e-10 + v.tail_spectral + v.tail_geometric


class TestInvariants:
    def test_multiplicity_linearity(self):
        f = GaussianTestFunction()
        params = TruncationParams(8, 8)
        a = TorusTwist(((2.0, 1),))
        b = TorusTwist(((1.0, 2),))
        both = a.direct_sum(b)
        for side in (spectral_side_torus, geometric_side_torus):
            va, _ = side(a, f, params)
            vb, _ = side(b, f, params)
            vab, _ = side(both, f, params)
            assert abs(vab - va - vb) < 1e-12

    def test_branch_shift_invariance(self):
        # shifting theta by an integer re-indexes the character family;
        # compare at a window enlarged by the shift margin
        tw = TorusTwist(((2.0, 1),))
        f = GaussianTestFunction()
        theta = log_branch(2.0)
        for shift in (1, 2):
            inner, _ = spectral_side_torus(tw, f, TruncationParams(K=8, N=8))
            shifted = sum(
                f.transform(theta + shift + k)[0] for k in range(-8 - shift, 8 - shift + 1)
            )
            assert abs(shifted - inner) < 1e-12

    def test_truncation_monotonicity_grid(self):
        tw = TorusTwist(((2.0, 1),))
        f = GaussianTestFunction()
        residuals = []
        for cut in range(0, 4):
            v = verify_torus(tw, f, TruncationParams(cut, cut), 1e-12)
            residuals.append(v.residual)
        for a, b in zip(residuals, residuals[1:]):
            assert b <= a * (1 + 1e-6) + 1e-15  # up to round-off floor

    def test_growth_dominance_certified(self):
        # steep growth still certified: the bound extends past the cutoff
        tw = TorusTwist(((40.0, 1),))
        f = GaussianTestFunction()
        value, tail = geometric_side_torus(tw, f, TruncationParams(K=2, N=2))
        direct = sum(f.value(n) * 40.0**n for n in range(-30, 31))
        assert abs(value - direct) <= tail + 1e-9


class TestLaplacianModel:
    def test_trivial_twist_k2_closed_form(self):
        tw = trivial_torus_twist()
        m = twisted_laplacian_model(tw, 2)
        values = sorted(
            (lam.real for lam, d in spectrum(m) for _ in range(d.dim))
        )
        pi2 = (2 * math.pi) ** 2
        expected = sorted([0.0, pi2, pi2, 4 * pi2, 4 * pi2])
        assert np.allclose(values, expected, atol=1e-9)

    def test_scalar_two_k1_complex_eigenvalues(self):
        tw = TorusTwist(((2.0, 1),))
        m = twisted_laplacian_model(tw, 1)
        got = {(round(l.real, 6), round(l.imag, 6)) for l, _ in spectrum(m)}
        theta = log_branch(2.0)
        expected = {
            (
                round(((2 * math.pi * (theta + k)) ** 2).real, 6),
                round(((2 * math.pi * (theta + k)) ** 2).imag, 6),
            )
            for k in (-1, 0, 1)
        }
        assert got == expected

    def test_jordan_unipotent_k0_multiplicity_two(self):
        # the operator block at frequency zero is -(M^2) = 0 for a size-2
        # unipotent block, so the generalized eigenvalue 0 has multiplicity
        # 2 with nilpotency index 1 (the constructed-matrix oracle)
        tw = TorusTwist(((1.0, 2),))
        m = twisted_laplacian_model(tw, 0)
        ((lam, data),) = spectrum(m)
        assert abs(lam) < 1e-12
        assert data.dim == 2
        assert data.index == 1
        assert data.block_sizes == (1, 1)

    def test_jordan_blocks_at_nonzero_frequency(self):
        tw = TorusTwist(((1.0, 2),))
        m = twisted_laplacian_model(tw, 1)
        by_value = {round(l.real, 6): d for l, d in spectrum(m)}
        pi2 = (2 * math.pi) ** 2
        assert by_value[round(pi2, 6)].block_sizes == (2, 2)  # k = +-1 collide
        assert by_value[0.0].dim == 2

    def test_translation_generators_commute_with_construction(self):
        tw = TorusTwist(((2.0, 1), (1.0, 2)))
        m = twisted_laplacian_model(tw, 2)
        g1, g_half = m.generators
        prod = g_half @ g_half
        assert np.allclose(prod.to_numpy(), g1.to_numpy(), atol=1e-12)

    def test_size_limit(self):
        tw = trivial_torus_twist(dim=3)
        with pytest.raises(SizeLimit):
            twisted_laplacian_model(tw, 400)

    def test_expected_spectrum_merges_collisions(self):
        tw = trivial_torus_twist()
        expected = laplacian_expected_spectrum(tw, 2)
        mult = {round(l.real, 6): m for l, m in expected}
        assert mult[round((2 * math.pi) ** 2, 6)] == 2
