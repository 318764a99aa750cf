"""
Exponential-of-semicircle spreading kernel and its Fourier transform.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

EPS_MIN = 1e-9
EPS_MAX = 1e-1
DEFAULT_UPSAMP = 1.25
MAX_UPSAMP = 2.0
MAX_SUPPORT = 64
# Fraction of the alias-free band used by the kernel shape parameter
BETA_SAFETY = 0.97
# Relative error double-precision rounding reaches before any taper gain
ROUNDING_FLOOR = 1e-15
UPSAMP_STEP = 0.05
GAUSS_LEGENDRE_ORDER = 200
# Frequencies transformed at once by es_kernel_ft
FT_BLOCK = 2**14

_nodes, _weights = np.polynomial.legendre.leggauss(GAUSS_LEGENDRE_ORDER)
_POSITIVE = _nodes > 0
QUADRATURE_NODES = _nodes[_POSITIVE]
QUADRATURE_WEIGHTS = _weights[_POSITIVE]


def es_kernel_eval(z, beta: float):
    """
    exp(beta (sqrt(1 - z^2) - 1)) on [-1, 1], zero outside.
    """
    z = np.asarray(z, dtype=np.float64)
    values = np.zeros_like(z)
    inside = np.abs(z) <= 1
    values[inside] = np.exp(beta * (np.sqrt(1 - z[inside] ** 2) - 1))
    if values.ndim == 0:
        return float(values)
    return values


def es_kernel_ft(xi, beta: float, halfwidth: float):
    """
    Fourier transform of the kernel stretched to [-halfwidth, halfwidth]:

        int phi(x / halfwidth) cos(xi x) dx

    by Gauss-Legendre quadrature on the (even) positive half.
    """
    xi = np.asarray(xi, dtype=np.float64)
    flat = xi.reshape(-1)
    shape_values = es_kernel_eval(QUADRATURE_NODES, beta) * QUADRATURE_WEIGHTS
    out = np.empty_like(flat)
    for start in range(0, len(flat), FT_BLOCK):
        block = flat[start : start + FT_BLOCK]
        out[start : start + FT_BLOCK] = np.cos(np.multiply.outer(block * halfwidth, QUADRATURE_NODES)) @ shape_values
    out *= 2 * halfwidth
    if xi.ndim == 0:
        return float(out[0])
    return out.reshape(xi.shape)


def passband_fraction(upsamp: float) -> float:
    """
    Largest fraction of a lattice's Nyquist band occupied by either domain
    when the upsampling is split evenly between source and target lattices.
    """
    return 0.5 / math.sqrt(upsamp)


def check_eps(eps: float):
    if not EPS_MIN <= eps <= EPS_MAX:
        raise DomainError(f"eps must be in [{EPS_MIN:g}, {EPS_MAX:g}], got {eps:g}")


@dataclass(frozen=True)
class KernelSpec:
    eps: float
    support: int
    beta: float
    upsamp: float

    @classmethod
    def from_eps(cls, eps: float, upsamp: float = DEFAULT_UPSAMP) -> "KernelSpec":
        """
        Kernel width and shape reaching relative accuracy eps on a lattice
        upsampled by upsamp.

        The aliasing error of one stage decays like exp(-sqrt(beta^2 - k^2)) with
        k = pi * support * nu the passband edge, which costs support samples per
        log10(1/eps) + 1 digits at the rate below.
        """
        check_eps(eps)
        if not 1 < upsamp <= MAX_UPSAMP:
            raise DomainError(f"upsamp must be in (1, {MAX_UPSAMP}], got {upsamp}")
        nu = passband_fraction(upsamp)
        decay = BETA_SAFETY * (1 - nu)
        if decay <= nu:
            raise DomainError(f"upsamp={upsamp} leaves no alias-free band for the kernel")
        digits_per_sample = math.log10(math.e) * math.pi * math.sqrt(decay**2 - nu**2)
        support = max(2, math.ceil((math.log10(1 / eps) + 1) / digits_per_sample))
        if support > MAX_SUPPORT:
            raise DomainError(
                f"eps={eps:g} with upsamp={upsamp} needs a {support}-sample kernel (max {MAX_SUPPORT})"
            )
        beta = BETA_SAFETY * math.pi * support * (1 - nu)
        logging.debug(f"Kernel for eps={eps:g}, upsamp={upsamp}: support={support}, beta={beta:.3f}")
        return cls(eps=eps, support=support, beta=beta, upsamp=upsamp)

    @classmethod
    def resolve(cls, eps: float, upsamp: float = DEFAULT_UPSAMP) -> "KernelSpec":
        """
        Kernel reaching eps on a lattice upsampled by at least upsamp.

        The two deconvolutions of a type-3 transform each scale rounding errors by up
        to taper_range, so upsamp is raised by UPSAMP_STEP until
        taper_range^2 * ROUNDING_FLOOR <= eps (or MAX_UPSAMP is reached).
        """
        kernel = cls.from_eps(eps, upsamp)
        step = 0
        while kernel.taper_range**2 * ROUNDING_FLOOR > eps and kernel.upsamp < MAX_UPSAMP:
            step += 1
            kernel = cls.from_eps(eps, min(MAX_UPSAMP, round(upsamp + step * UPSAMP_STEP, 10)))
        if kernel.upsamp != upsamp:
            logging.debug(f"Raised upsampling from {upsamp} to {kernel.upsamp} for eps={eps:g}")
        return kernel

    @property
    def halfwidth_samples(self) -> float:
        return self.support / 2

    @property
    def passband(self) -> float:
        """
        Kernel frequency pi * support * nu at the edge of a stage's passband.
        """
        return math.pi * self.support * passband_fraction(self.upsamp)

    @property
    def taper_range(self) -> float:
        """
        Estimate exp(beta - sqrt(beta^2 - k^2)) of phi_hat(0) / phi_hat(k) at the
        passband edge k: the largest gain of one deconvolution along one axis.
        """
        return math.exp(self.beta - math.sqrt(self.beta**2 - self.passband**2))
