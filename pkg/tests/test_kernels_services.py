"""Tests for the closed-form Gaussian kernels."""

import numpy as np
import pytest
from scipy.integrate import quad

from linkcurv.core.exceptions import AppValidationError, UnknownKernelError
from linkcurv.kernels.services import (
    antideriv_constant,
    erf_pair,
    factorized_kernel,
    gauss_1d,
    gauss_overlap,
    inv_antideriv_gauss,
    kernel_a,
    kernel_b,
    kernel_c,
    kernel_w,
)

KAPPAS = [0.7, 3.0, 12.0]


class TestOneDimensional:
    @pytest.mark.parametrize("kappa", KAPPAS)
    def test_gauss_normalized(self, kappa):
        """q_kappa squared should integrate to one."""
        reach = 20.0 / kappa
        value, _ = quad(lambda t: gauss_1d(kappa, 0.2, t) ** 2, 0.2 - reach, 0.2 + reach)
        assert value == pytest.approx(1.0, rel=1e-8)

    @pytest.mark.parametrize("kappa", KAPPAS)
    def test_antiderivative_limits(self, kappa):
        """d^{-1} q should tend to +-C(kappa) and have q as derivative."""
        c = antideriv_constant(kappa)
        assert inv_antideriv_gauss(kappa, 0.0, 50.0 / kappa) == pytest.approx(c)
        assert inv_antideriv_gauss(kappa, 0.0, -50.0 / kappa) == pytest.approx(-c)
        h = 1e-6
        ahead = inv_antideriv_gauss(kappa, 0.1, 0.3 + h)
        behind = inv_antideriv_gauss(kappa, 0.1, 0.3 - h)
        assert (ahead - behind) / (2 * h) == pytest.approx(gauss_1d(kappa, 0.1, 0.3), rel=1e-5)

    @pytest.mark.parametrize("kappa", KAPPAS)
    @pytest.mark.parametrize(("z", "x"), [(0.3, -0.1), (-0.25, 0.4), (0.0, 0.0)])
    def test_erf_pair_brute_force(self, kappa, z, x):
        """erf_pair should equal the inner product it stands for."""
        weight = kappa / np.sqrt(2.0 * np.pi)

        def integrand(t):
            return gauss_1d(kappa, z, t) * weight * inv_antideriv_gauss(kappa, x, t)

        reach = 20.0 / kappa
        value, _ = quad(integrand, z - reach, z + reach, points=[x], limit=200)
        assert erf_pair(kappa, z, x) == pytest.approx(value, abs=1e-9)

    @pytest.mark.parametrize("kappa", KAPPAS)
    def test_overlap_brute_force(self, kappa):
        """gauss_overlap in one dimension should match the integral of q^x q^y."""
        value, _ = quad(
            lambda t: gauss_1d(kappa, 0.3, t) * gauss_1d(kappa, -0.1, t), -10, 10, points=[0.1]
        )
        assert gauss_overlap(kappa, [0.4]) == pytest.approx(value, rel=1e-8)

    def test_overlap_multiplies(self):
        """gauss_overlap should factorize across dimensions."""
        kappa = 2.5
        both = gauss_overlap(kappa, [0.3, -0.2])
        assert both == pytest.approx(gauss_overlap(kappa, [0.3]) * gauss_overlap(kappa, [-0.2]))

    @pytest.mark.parametrize("kappa", [0.0, -1.0, np.inf])
    def test_invalid_kappa(self, kappa):
        """Kernels should reject non-positive or infinite kappa."""
        with pytest.raises(AppValidationError):
            gauss_1d(kappa, 0.0, 0.0)


class TestKernels:
    sigma = np.array([0.1, 0.2, -0.3, 0.15])
    rho = np.array([-0.05, 0.1, -0.2, 0.3])

    def test_kernel_a_factorization(self):
        """A_j should be sqrt(2 pi) erf(axis j) times the overlap of the other three axes."""
        kappa = 4.0
        expected = (
            np.sqrt(2 * np.pi)
            * erf_pair(kappa, self.sigma[2], self.rho[2])
            * gauss_overlap(kappa, (self.sigma - self.rho)[[0, 1, 3]])
        )
        assert kernel_a(kappa, self.sigma, self.rho, 2) == pytest.approx(expected)

    def test_kernel_b_time_direction(self):
        """B should be odd in the time difference."""
        kappa = 3.0
        sigma, rho = self.sigma.copy(), self.rho.copy()
        sigma[0], rho[0] = self.rho[0], self.sigma[0]
        assert kernel_b(kappa, sigma, rho) == pytest.approx(-kernel_b(kappa, self.sigma, self.rho))

    def test_kernel_c_symmetric(self):
        """C_c should be even under exchange of its two points."""
        kappa = 5.0
        forward = kernel_c(kappa, self.sigma, self.rho, 3)
        assert kernel_c(kappa, self.rho, self.sigma, 3) == pytest.approx(forward)

    def test_kernel_w_prefactor(self):
        """W_k should carry the -(2 pi / kappa) prefactor."""
        kappa = 2.0
        expected = (
            -(2 * np.pi / kappa)
            * erf_pair(kappa, self.sigma[1], self.rho[1])
            * erf_pair(kappa, self.sigma[0], self.rho[0])
            * gauss_overlap(kappa, (self.sigma - self.rho)[[2, 3]])
        )
        assert kernel_w(kappa, self.sigma, self.rho, 1) == pytest.approx(expected)

    def test_vectorized(self):
        """Kernels should broadcast over leading axes."""
        sigma = np.tile(self.sigma, (5, 1))
        rho = np.tile(self.rho, (5, 1))
        values = kernel_a(3.0, sigma, rho, 1)
        assert values.shape == (5,)
        assert np.allclose(values, values[0])

    def test_dispatch(self):
        """factorized_kernel should route to the named kernel."""
        kappa = 3.0
        assert factorized_kernel("B", kappa, self.sigma, self.rho) == pytest.approx(
            kernel_b(kappa, self.sigma, self.rho)
        )
        assert factorized_kernel("C", kappa, self.sigma, self.rho, 1) == pytest.approx(
            kernel_c(kappa, self.sigma, self.rho, 1)
        )

    def test_dispatch_unknown(self):
        """factorized_kernel should reject unknown kinds."""
        with pytest.raises(UnknownKernelError):
            factorized_kernel("D", 1.0, self.sigma, self.rho, 1)

    def test_dispatch_needs_axis(self):
        """Axis kernels should require an axis."""
        with pytest.raises(AppValidationError):
            factorized_kernel("A", 1.0, self.sigma, self.rho)


def _axis_product(kappa: float, left: str, right: str, a: float, b: float) -> float:
    """int f^a(t) g^b(t) dt with f, g either q ("q") or its antiderivative ("d")."""
    funcs = {"q": gauss_1d, "d": inv_antideriv_gauss}
    f, g = funcs[left], funcs[right]
    reach = 30.0 / kappa
    value, _ = quad(
        lambda t: f(kappa, a, t) * g(kappa, b, t),
        min(a, b) - reach,
        max(a, b) + reach,
        points=sorted({a, b}),
        limit=400,
        epsabs=1e-14,
        epsrel=1e-12,
    )
    return value


def _inner_product(kappa, sigma, rho, factors: dict[int, tuple[str, str]]) -> float:
    """<F sigma, G rho> on R^4 as a product of per-coordinate integrals."""
    total = 1.0
    for axis in range(4):
        left, right = factors.get(axis, ("q", "q"))
        total *= _axis_product(kappa, left, right, sigma[axis], rho[axis])
    return total


def _random_instances(count: int = 50):
    rng = np.random.default_rng(20240611)
    for _ in range(count):
        kappa = float(rng.uniform(1.0, 10.0))
        sigma = rng.uniform(-0.4, 0.4, 4)
        rho = rng.uniform(-0.4, 0.4, 4)
        axis = int(rng.integers(1, 4))
        yield kappa, sigma, rho, axis


class TestKernelGroundTruth:
    def test_against_inner_products(self):
        """Every kernel kind should match quadrature of its defining inner product."""
        for kappa, sigma, rho, axis in _random_instances():
            truths = {
                # <p^sigma, kappa d_j^{-1} p^rho>
                "A": kappa * _inner_product(kappa, sigma, rho, {axis: ("q", "d")}),
                # kappa <d_0^{-1} p^sigma, p^rho>
                "B": kappa * _inner_product(kappa, sigma, rho, {0: ("d", "q")}),
                # kappa^2 <d_0^{-1} p^sigma, kappa d_j^{-1} p^rho>
                "C": kappa**3
                * _inner_product(kappa, sigma, rho, {0: ("d", "q"), axis: ("q", "d")}),
                # kappa <d_0^{-1} p^y, d_k^{-1} p^rho>
                "W": kappa * _inner_product(kappa, sigma, rho, {0: ("d", "q"), axis: ("q", "d")}),
            }
            for kind, truth in truths.items():
                value = factorized_kernel(kind, kappa, sigma, rho, axis)
                assert value == pytest.approx(truth, rel=1e-6, abs=1e-9), (kind, kappa, axis)
