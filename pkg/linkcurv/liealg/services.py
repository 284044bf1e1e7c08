"""su(2) x su(2) arithmetic, spin-j representations and characters."""

from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.linalg import expm

from linkcurv.core.exceptions import DegenerateIndexError
from linkcurv.core.log_config import logger
from linkcurv.liealg.models import AlgebraElement, IrrepSpec, RepMatrix, parse_spin

SQRT3 = np.sqrt(3.0)

# E^{ab} -> (factor, slot) for a < b; E^{31} occupies the second minus slot, so E^{13} is -1.
_BASIS_SLOTS: dict[tuple[int, int], tuple[str, int, float]] = {
    (0, 1): ("plus", 0, 1.0),
    (0, 2): ("plus", 1, 1.0),
    (0, 3): ("plus", 2, 1.0),
    (2, 3): ("minus", 0, 1.0),
    (1, 3): ("minus", 1, -1.0),
    (1, 2): ("minus", 2, 1.0),
}


def levi_civita(i: int, j: int, k: int) -> int:
    """epsilon^{ijk} on any three labels; 0 unless they are distinct."""
    return levi_civita_n((i, j, k))


def levi_civita4(mu: int, gamma: int, alpha: int, beta: int) -> int:
    return levi_civita_n((mu, gamma, alpha, beta))


def levi_civita_n(indices: tuple[int, ...]) -> int:
    if len(set(indices)) != len(indices):
        return 0
    sign = 1
    items = list(indices)
    for a in range(len(items)):
        for b in range(a + 1, len(items)):
            if items[a] > items[b]:
                sign = -sign
    return sign


def bracket(u: AlgebraElement, v: AlgebraElement) -> AlgebraElement:
    """Factor-wise Lie bracket; [e_i, e_j] = eps_ijk e_k makes each factor a cross product."""
    return AlgebraElement(np.cross(u.plus, v.plus), np.cross(u.minus, v.minus))


def basis_element(alpha: int, beta: int) -> AlgebraElement:
    """xi(E^{alpha beta}), antisymmetric in the two indices."""
    if alpha == beta:
        raise DegenerateIndexError(f"E^{{{alpha}{beta}}} is zero: indices must differ")
    if not (0 <= alpha <= 3 and 0 <= beta <= 3):
        raise DegenerateIndexError(f"Indices must lie in 0..3, got ({alpha}, {beta})")
    sign = 1.0
    if alpha > beta:
        alpha, beta, sign = beta, alpha, -1.0
    factor, slot, orient = _BASIS_SLOTS[(alpha, beta)]
    vec = np.zeros(3)
    vec[slot] = sign * orient
    if factor == "plus":
        return AlgebraElement(vec, np.zeros(3))
    return AlgebraElement(np.zeros(3), vec)


@lru_cache(maxsize=32)
def _angular_momentum(two_j: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    j = two_j / 2.0
    m = j - np.arange(two_j + 1)
    raise_ = np.zeros((two_j + 1, two_j + 1), dtype=complex)
    for row in range(two_j):
        # J+ |m> = sqrt(j(j+1) - m(m+1)) |m+1>, basis ordered m = j, ..., -j
        mm = m[row + 1]
        raise_[row, row + 1] = np.sqrt(j * (j + 1) - mm * (mm + 1))
    lower = raise_.conj().T
    jx = (raise_ + lower) / 2
    jy = (raise_ - lower) / 2j
    jz = np.diag(m).astype(complex)
    for mat in (jx, jy, jz):
        mat.setflags(write=False)
    return jx, jy, jz


def spin_matrices(j) -> tuple[RepMatrix, RepMatrix, RepMatrix]:
    """rho_j(e1), rho_j(e2), rho_j(e3) = i Jy, i Jx, i Jz."""
    spin = parse_spin(j)
    jx, jy, jz = _angular_momentum(int(2 * spin))
    return RepMatrix(1j * jy), RepMatrix(1j * jx), RepMatrix(1j * jz)


def _combine(j: Fraction, coeffs: np.ndarray) -> np.ndarray:
    mats = spin_matrices(j)
    return sum((c * m.entries for c, m in zip(coeffs, mats)), np.zeros_like(mats[0].entries))


def apply_rep(spec: IrrepSpec, u: AlgebraElement) -> tuple[RepMatrix, RepMatrix]:
    return RepMatrix(_combine(spec.j_plus, u.plus)), RepMatrix(_combine(spec.j_minus, u.minus))


def trace_exp_character(j, c: complex, which: str = "plus") -> complex:
    """Tr exp(c * rho_j(e1 + e2 + e3)) = sum_m exp(c i sqrt3 m)."""
    spin = parse_spin(j)
    two_j = int(2 * spin)
    m = two_j / 2.0 - np.arange(two_j + 1)
    value = complex(np.sum(np.exp(complex(c) * 1j * SQRT3 * m)))
    logger.debug("Character j={} ({}) at c={}: {}", spin, which, c, value)
    return value


def trace_exp_dense(j, c: complex) -> complex:
    """Same trace from the dense matrix exponential."""
    spin = parse_spin(j)
    generator = _combine(spin, np.ones(3))
    return complex(np.trace(expm(complex(c) * generator)))


def wilson_factor(spec: IrrepSpec, q: float, sk: float) -> complex:
    """Per-loop factor of the Wilson loop observable."""
    return trace_exp_character(spec.j_plus, -np.pi * 1j * q * sk, "plus") + trace_exp_character(
        spec.j_minus, np.pi * 1j * q * sk, "minus"
    )
