import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chflow.grid import make_field, make_grid, norm_l2
from chflow.thermo import (
    DomainError,
    MobilitySpec,
    PotentialParams,
    energy,
    energy_convex,
    f_convex,
    f_convex_prime,
    f_convex_second,
    mobility_eval,
    psi,
    psi_prime,
)

P24 = PotentialParams(theta=2.0, theta0=4.0)
P12 = PotentialParams(theta=1.0, theta0=2.0)


def mp_psi(s, theta, theta0):
    # high-precision scalar oracle
    import mpmath as mp
    mp.mp.dps = 40
    s = mp.mpf(s)
    F = mp.mpf(theta) / 2 * ((1 + s) * mp.log(1 + s) + (1 - s) * mp.log(1 - s))
    return float(F - mp.mpf(theta0) / 2 * s ** 2)


class TestPotential:
    def test_zero_at_origin(self):
        assert psi(0.0, P24) == 0.0
        assert f_convex(0.0, P24) == 0.0

    def test_value_against_high_precision_oracle(self):
        # frozen from the mpmath oracle below
        assert psi(0.5, P24) == pytest.approx(-0.2383759281177261, abs=1e-15)
        assert psi(0.5, P24) == pytest.approx(mp_psi(0.5, 2.0, 4.0), abs=1e-15)

    def test_convex_part_value(self):
        assert f_convex(0.5, P24) == pytest.approx(0.2616240718822739, abs=1e-15)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(min_value=-0.999, max_value=0.999))
    def test_even_and_odd_symmetry(self, s):
        assert psi(-s, P24) == pytest.approx(psi(s, P24), abs=1e-14)
        assert psi_prime(-s, P24) == pytest.approx(-psi_prime(s, P24), abs=1e-14)

    def test_derivative_zero_at_origin(self):
        assert psi_prime(0.0, P12) == 0.0

    def test_nontrivial_root_by_bisection(self):
        # psi'(s) = 0 has a root near 0.9575 for theta=1, theta0=2
        lo, hi = 0.5, 0.999
        assert psi_prime(lo, P12) < 0 < psi_prime(hi, P12)
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if psi_prime(mid, P12) < 0:
                lo = mid
            else:
                hi = mid
        assert 0.5 * (lo + hi) == pytest.approx(0.95750, abs=1e-4)

    def test_curvature_floor(self):
        assert f_convex_second(0.0, P24) == pytest.approx(P24.theta)
        s = np.linspace(-0.9999, 0.9999, 1001)
        assert np.all(f_convex_second(s, P24) >= P24.theta - 1e-12)

    def test_convex_derivative_blows_up_monotonically(self):
        # F' ~ (theta/2) ln(2 * 10^k) near the endpoint: strict growth in k
        vals = [f_convex_prime(1.0 - 10.0 ** (-k), P12) for k in range(2, 13)]
        assert all(b > a for a, b in zip(vals, vals[1:]))
        assert vals[-1] > 2.0 * vals[0]

    @pytest.mark.parametrize("s", [1.0, -1.0, 1.5, np.nan])
    def test_domain_errors(self, s):
        with pytest.raises(DomainError):
            psi(s, P24)
        with pytest.raises(DomainError):
            psi_prime(s, P24)

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            PotentialParams(theta=1.0, theta0=1.0)
        with pytest.raises(ValueError):
            PotentialParams(theta=-1.0, theta0=2.0)


class TestEnergy:
    def test_zero_field(self):
        g = make_grid(8, 8, 1.0, 1.0)
        z = make_field(g, np.zeros(g.shape))
        assert energy(z, P24) == 0.0
        assert energy_convex(z, P24) == 0.0

    def test_constant_field_is_pure_potential(self):
        g = make_grid(8, 8, 2.0, 1.5)
        m = 0.3
        f = make_field(g, np.full(g.shape, m))
        assert energy(f, P24) == pytest.approx(g.area * psi(m, P24), rel=1e-13)

    def test_split_identity(self):
        g = make_grid(16, 16, 1.0, 1.0)
        rng = np.random.default_rng(0)
        phi = make_field(g, 0.8 * np.tanh(rng.standard_normal(g.shape)))
        lhs = energy(phi, P24)
        rhs = energy_convex(phi, P24) - 0.5 * P24.theta0 * norm_l2(phi) ** 2
        assert abs(lhs - rhs) <= 1e-12 * max(abs(lhs), 1.0)

    def test_quadrature_second_order(self):
        # smooth test field against a fine-grid reference value
        def sample(n):
            g = make_grid(n, n, 1.0, 1.0)
            X, Y = g.cell_centers()
            f = make_field(g, 0.5 * np.cos(np.pi * X) * np.cos(2 * np.pi * Y))
            return energy(f, P24)

        ref = sample(512)
        errs = [abs(sample(n) - ref) for n in (16, 32, 64)]
        orders = [np.log2(errs[i] / errs[i + 1]) for i in range(2)]
        assert min(orders) > 1.8


class TestMobility:
    def test_degenerate_triplet(self):
        assert mobility_eval(0.5, MobilitySpec.degenerate(1.0)) == (0.75, -1.0, -2.0)

    def test_constant_triplet(self):
        b, bp, bpp = mobility_eval(-0.3, MobilitySpec.constant(2.0))
        assert (b, bp, bpp) == (2.0, 0.0, 0.0)

    def test_linear_nondegenerate_bounds(self):
        spec = MobilitySpec.nondegenerate([1.0, 0.5], 0.5, 1.5)
        s = np.linspace(-1.0, 1.0, 10001)
        b, _, _ = mobility_eval(s, spec)
        assert b.min() >= spec.b_min - 1e-12
        assert b.max() <= spec.b_max + 1e-12

    def test_declared_bounds_are_verified(self):
        with pytest.raises(ValueError, match="bounds"):
            MobilitySpec.nondegenerate([1.0, 0.9], 0.5, 1.5)  # min is 0.1 < 0.5

    def test_degenerate_vanishes_at_endpoints(self):
        b, _, _ = mobility_eval(np.array([-1.0, 1.0]), MobilitySpec.degenerate(2.0))
        assert np.all(b == 0.0)

    def test_domain_check(self):
        with pytest.raises(DomainError):
            mobility_eval(1.0001, MobilitySpec.constant(1.0))

    def test_quadratic_derivatives(self):
        spec = MobilitySpec.nondegenerate([1.0, 0.0, -0.5], 0.5, 1.0)
        b, bp, bpp = mobility_eval(0.5, spec)
        assert b == pytest.approx(1.0 - 0.5 * 0.25)
        assert bp == pytest.approx(-0.5)
        assert bpp == pytest.approx(-1.0)
