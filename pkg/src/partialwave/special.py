"""Special functions for the partial-wave propagator machinery.

Jacobi polynomials by three-term recurrence, the normalized derivative
kernel Q_k, the Sonine function controlling its sup bound, Bessel functions
by two independent routes (series/asymptotics and the Lommel integral), and
the channel constants c_k, omega_k, d_k.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np
from scipy.special import gammaln, jv, roots_jacobi

from .errors import DomainError

__all__ = [
    "JacobiParams",
    "PaperConstants",
    "kbracket",
    "jacobi_eval",
    "jacobi_deriv",
    "jacobi_at_zero_paper",
    "q_poly_eval",
    "sonine_eval",
    "bessel_j",
    "bessel_j_lommel",
    "harmonic_dim",
    "ck_constant",
    "angular_weight",
]


def kbracket(k):
    """Japanese bracket <k> = (1 + k^2)^(1/2)."""
    return np.sqrt(1.0 + np.asarray(k, dtype=float) ** 2)


@dataclass(frozen=True)
class JacobiParams:
    """Degree and (equal-by-use) parameters of a Jacobi polynomial P_k^(a,b)."""

    k: int
    a: float
    b: float

    def __post_init__(self):
        if self.k < 0:
            raise DomainError(f"Jacobi degree must be >= 0, got {self.k}")
        if self.a <= -1.0 or self.b <= -1.0:
            raise DomainError(f"Jacobi parameters must exceed -1, got a={self.a}, b={self.b}")


def jacobi_eval(params: JacobiParams, x):
    """P_k^(a,b)(x) by the standard three-term recurrence in the degree.

    Vectorized in x; stable for the degrees used here (k <= a few hundred).
    """
    k, a, b = params.k, params.a, params.b
    x = np.asarray(x, dtype=float)
    p_prev = np.ones_like(x)
    if k == 0:
        return p_prev
    p_cur = 0.5 * (a - b) + 0.5 * (a + b + 2.0) * x
    for n in range(2, k + 1):
        c1 = 2.0 * n * (n + a + b) * (2.0 * n + a + b - 2.0)
        c2 = 2.0 * n + a + b - 1.0
        c3 = (2.0 * n + a + b) * (2.0 * n + a + b - 2.0)
        c4 = a * a - b * b
        c5 = 2.0 * (n + a - 1.0) * (n + b - 1.0) * (2.0 * n + a + b)
        p_new = (c2 * (c3 * x + c4) * p_cur - c5 * p_prev) / c1
        p_prev, p_cur = p_cur, p_new
    return p_cur


def jacobi_deriv(params: JacobiParams, x):
    """d/dx P_k^(a,b)(x) = (k+a+b+1)/2 * P_{k-1}^(a+1,b+1)(x)."""
    k, a, b = params.k, params.a, params.b
    x = np.asarray(x, dtype=float)
    if k == 0:
        return np.zeros_like(x)
    lower = JacobiParams(k - 1, a + 1.0, b + 1.0)
    return 0.5 * (k + a + b + 1.0) * jacobi_eval(lower, x)


def jacobi_at_zero_paper(k: int, a: float) -> float:
    """Closed-form Gamma-quotient value of P_k^(a,a) at x = 0.

    Even k: the value itself; odd k: the first derivative at 0.  The sign
    convention of the source formula disagrees with the recurrence for
    k = 2 (mod 4); only the modulus is contractual, and this function
    returns the (positive) formula value as written.
    """
    if k < 0:
        raise DomainError(f"degree must be >= 0, got {k}")
    if a <= -1.0:
        raise DomainError(f"parameter must exceed -1, got {a}")
    if k % 2 == 0:
        # (-2)^k = +2^k for even k
        logval = gammaln(k + a + 1.0) - k * np.log(2.0) - gammaln(k / 2.0 + 1.0) - gammaln(k / 2.0 + a + 1.0)
    else:
        logval = (
            gammaln(k + a + 1.0)
            - (k - 1) * np.log(2.0)
            - gammaln(k / 2.0 + 0.5)
            - gammaln(k / 2.0 + a + 0.5)
        )
    return float(np.exp(logval))


def q_poly_eval(k: int, n: int, x):
    """Q_k(x) = d^k/dx^k (1-x^2)^(k+(n-3)/2) / (2^k Gamma(k+(n-1)/2)).

    Computed through the Jacobi relation with the Rodrigues sign, i.e.
    Q_k = (-1)^k * k!/Gamma(k+(n-1)/2) * (1-x^2)^((n-3)/2) * P_k^(a,a)(x)
    with a = (n-3)/2.  Gamma quotients go through log space so degrees up
    to several hundred stay finite.
    """
    if n < 3:
        raise DomainError(f"dimension must be >= 3, got {n}")
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1.0 + 1e-14):
        raise DomainError("Q_k is defined on [-1, 1]")
    a = 0.5 * (n - 3)
    params = JacobiParams(k, a, a)
    sign = -1.0 if k % 2 else 1.0
    scale = np.exp(gammaln(k + 1.0) - gammaln(k + 0.5 * (n - 1.0)))
    base = np.clip(1.0 - x * x, 0.0, None)
    return sign * scale * base**a * jacobi_eval(params, x)


def sonine_eval(k: int, a: float, x):
    """Sonine function S_a(x) of T_a(x) = (1-x^2)^a P_k^(a,a)(x).

    S_a = T_a^2 + (1-x^2) T_a'^2 / ((k+1)(2a+k)); nonincreasing away from 0
    when a >= 1/2, which is how the sup of T_a (hence of Q_k) is pinned.
    """
    if k < 1:
        raise DomainError(f"Sonine function needs degree >= 1, got {k}")
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) >= 1.0):
        if a < 1.0:
            raise DomainError("Sonine evaluation at |x| = 1 needs a >= 1")
    params = JacobiParams(k, a, a)
    base = 1.0 - x * x
    p = jacobi_eval(params, x)
    dp = jacobi_deriv(params, x)
    t = base**a * p
    # T' = -2 a x (1-x^2)^(a-1) P + (1-x^2)^a P'
    if a == 0.0:
        dt = dp
    else:
        dt = -2.0 * a * x * base ** (a - 1.0) * p + base**a * dp
    return t * t + base * dt * dt / ((k + 1.0) * (2.0 * a + k))


def bessel_j(nu: float, y):
    """Bessel function J_nu(y) for nu >= 0, y >= 0.

    Backed by the library implementation (power series + asymptotic
    continuation); the Lommel quadrature below is the independent route.
    """
    if nu < 0:
        raise DomainError(f"order must be >= 0, got {nu}")
    y = np.asarray(y, dtype=float)
    if np.any(y < 0):
        raise DomainError("argument must be >= 0")
    return jv(nu, y)


def bessel_j_lommel(nu: float, y, m: int = 128):
    """J_nu(y) through the Lommel integral form.

    (y/2)^nu / (sqrt(pi) Gamma(nu+1/2)) * int_{-1}^{1} e^{iy l} (1-l^2)^(nu-1/2) dl,
    evaluated with Gauss-Jacobi quadrature of size m carrying the weight
    exponent nu - 1/2.  Converges to bessel_j as m grows.

    When the (y/2)^nu / Gamma prefactor is large the real-axis integral is
    cancellation-dominated and double precision cannot represent it; those
    points escalate automatically to extended-precision quadrature.
    """
    if nu <= -0.5:
        raise DomainError(f"Lommel form needs nu > -1/2, got {nu}")
    y = np.asarray(y, dtype=float)
    scalar = np.ndim(y) == 0
    ya = np.atleast_1d(y).astype(float)
    out = np.zeros_like(ya)
    zero = ya == 0.0
    out[zero] = 1.0 if nu == 0 else 0.0
    pos = ~zero
    if np.any(pos):
        logpre10 = (nu * np.log(0.5 * ya[pos]) - 0.5 * np.log(np.pi) - gammaln(nu + 0.5)) / np.log(10.0)
        easy = logpre10 < 6.0
        yy = ya[pos]
        vals = np.empty_like(yy)
        if np.any(easy):
            nodes, weights = roots_jacobi(m, nu - 0.5, nu - 0.5)
            osc = np.cos(np.multiply.outer(yy[easy], nodes)) @ weights
            logpre = nu * np.log(0.5 * yy[easy]) - 0.5 * np.log(np.pi) - gammaln(nu + 0.5)
            vals[easy] = np.exp(logpre) * osc
        if np.any(~easy):
            vals[~easy] = [
                _lommel_extended(nu, float(yv), int(np.ceil(lp)))
                for yv, lp in zip(yy[~easy], logpre10[~easy])
            ]
        out[pos] = vals
    return float(out[0]) if scalar else out


def _lommel_extended(nu: float, y: float, extra_digits: int) -> float:
    import mpmath as mp

    with mp.workdps(22 + max(0, extra_digits)):
        nu_m, y_m = mp.mpf(nu), mp.mpf(y)
        integral = mp.quad(
            lambda t: (1 - t * t) ** (nu_m - mp.mpf(1) / 2) * mp.cos(y_m * t), [-1, 0, 1]
        )
        pref = (y_m / 2) ** nu_m / (mp.sqrt(mp.pi) * mp.gamma(nu_m + mp.mpf(1) / 2))
        return float(pref * integral)


def harmonic_dim(k: int, n: int) -> int:
    """Dimension d_k of the degree-k spherical harmonics on S^{n-1}."""
    if k < 0 or n < 2:
        raise DomainError(f"need k >= 0 and n >= 2, got k={k}, n={n}")
    if k == 0:
        return 1
    if k == 1:
        return n
    return comb(n + k - 1, k) - comb(n + k - 3, k - 2)


def ck_constant(k: int, n: int) -> complex:
    """c_k = i^k 2^(1-n/2-k) / (sqrt(pi) Gamma((n-1)/2 + k)), in log space."""
    if k < 0 or n < 3:
        raise DomainError(f"need k >= 0 and n >= 3, got k={k}, n={n}")
    logmod = (1.0 - 0.5 * n - k) * np.log(2.0) - 0.5 * np.log(np.pi) - gammaln(0.5 * (n - 1.0) + k)
    return complex(1j ** (k % 4)) * float(np.exp(logmod))


def angular_weight(k: int, n: int) -> float:
    """omega_k: 1 in dimension 3, <k>^(1-n/2) in dimension >= 4."""
    if k < 0 or n < 3:
        raise DomainError(f"need k >= 0 and n >= 3, got k={k}, n={n}")
    if n == 3:
        return 1.0
    return float(kbracket(k) ** (1.0 - 0.5 * n))


@dataclass(frozen=True)
class PaperConstants:
    """The channel constants attached to degree k in dimension n."""

    n: int
    k: int
    c_k: complex
    omega_k: float
    d_k: int

    @classmethod
    def for_channel(cls, k: int, n: int) -> "PaperConstants":
        return cls(n=n, k=k, c_k=ck_constant(k, n), omega_k=angular_weight(k, n), d_k=harmonic_dim(k, n))
