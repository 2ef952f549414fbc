"""Run-length approximations: ARL formulas for both rules, EDD expressions,
and threshold calibration by inverting the ARL formulas.

All thresholds and overshoots live on the standardized statistic scale.
The ARL formulas are first-order asymptotics; finite-window Monte Carlo ARLs
are typically within about 30% of them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize
from scipy.special import erf, log_ndtr

from .errors import CalibrationError, ConfigError, NumericError
from .window import check_window_length

_SQRT2 = math.sqrt(2.0)
_SQRT2PI = math.sqrt(2.0 * math.pi)
_LOG_4_OVER_SQRT_PI = math.log(4.0 / math.sqrt(math.pi))

QUAD_RTOL = 1e-10
SERIES_TOL = 1e-12
SERIES_MAX_TERMS = 1_000_000
SUM_TAIL_TOL = 1e-12
BISECT_MAXITER = 200


# -- boundary-crossing correction ------------------------------------------

def nu_closed(y):
    """Closed-form approximation ``(2/y)(Phi(y/2) - 1/2) / ((y/2)Phi(y/2) + phi(y/2))``.

    Extended by continuity to ``nu(0) = 1``. Vectorized.
    """
    y = np.asarray(y, dtype=float)
    if np.any(y < 0) or np.any(np.isnan(y)):
        raise ConfigError("nu is defined for y >= 0 only")
    h = y / 2.0
    with np.errstate(divide="ignore", invalid="ignore"):
        cdf = 0.5 * (1.0 + erf(h / _SQRT2))
        pdf = np.exp(-0.5 * h * h) / _SQRT2PI
        # Phi(h) - 1/2 via erf avoids cancellation near zero
        out = (2.0 / y) * (0.5 * erf(h / _SQRT2)) / (h * cdf + pdf)
    out = np.where(y == 0.0, 1.0, out)
    out = np.where(np.isinf(y), 0.0, out)
    return float(out) if out.ndim == 0 else out


def _nu_scalar(y: float) -> float:
    # scalar fast path for the quadrature integrand; y > 0
    h = 0.5 * y
    e = math.erf(h / _SQRT2)
    return (2.0 / y) * (0.5 * e) / (h * 0.5 * (1.0 + e) + math.exp(-0.5 * h * h) / _SQRT2PI)


def nu_series(y: float) -> float:
    """``2 y^-2 exp(-2 sum_n Phi(-y sqrt(n)/2) / n)``.

    The series is summed in blocks until a term drops below ``1e-12`` or
    ``10^6`` terms have been used.
    """
    y = float(y)
    if not y > 0.0:
        if y == 0.0:
            return 1.0
        raise ConfigError("nu is defined for y >= 0 only")
    total = 0.0
    start = 1
    block = 1024
    while start <= SERIES_MAX_TERMS:
        n = np.arange(start, min(start + block, SERIES_MAX_TERMS + 1), dtype=float)
        terms = np.exp(log_ndtr(-0.5 * y * np.sqrt(n))) / n
        small = np.nonzero(terms < SERIES_TOL)[0]
        if small.size:
            total += math.fsum(terms[: small[0]])
            break
        total += math.fsum(terms)
        start += block
        block = min(block * 2, 1 << 18)
    return 2.0 / (y * y) * math.exp(-2.0 * total)


# -- derivatives of the standardized covariance field ----------------------

def s_derivatives(y: float) -> tuple[float, float]:
    """``(1/(y(1-y)), 1/(y(1-y)) - 2)`` for ``0 < y < 1``."""
    if not 0.0 < y < 1.0:
        raise ConfigError(f"y must lie strictly inside (0, 1), got {y}")
    s1 = 1.0 / (y * (1.0 - y))
    return s1, s1 - 2.0


def rho_field(y: float, eps1: float, eps2: float) -> float:
    """Covariance between the standardized statistic at relative split ``y``
    and the one displaced by ``eps1`` in split position and ``eps2`` in time
    (both as fractions of the window length)."""
    d_in = eps2 - eps1 + y
    d_out = 1.0 - eps2 + eps1 - y
    if y == 0.0 or y == 1.0 or d_in == 0.0 or d_out == 0.0:
        raise ConfigError("rho_field evaluated at a singular point")
    rest = 1.0 - y - eps2
    return (
        y * rest**2 * d_in / ((1.0 - y) * d_out)
        + eps1**2 * (1.0 - y) * d_in / (y * d_out)
        - 2.0 * eps1 * (1.0 - y) * (y - eps1) / y
        + (y - eps1) ** 2 * (1.0 - y) * d_out / (y * d_in)
        - 2.0 * eps1 * d_in * rest / d_out
        + 2.0 * rest * (y - eps1)
    )


# -- ARL of the max-type rule ----------------------------------------------

def _max_integrand(y: float, H: int, a: float) -> float:
    if y <= 0.0 or y >= 1.0:
        # s * nu(a sqrt(s/H)) -> 2H/a^2 as s -> inf, for both derivatives
        return (2.0 * H / (a * a)) ** 2
    s1 = 1.0 / (y * (1.0 - y))
    if not math.isfinite(s1):
        return (2.0 * H / (a * a)) ** 2
    s2 = s1 - 2.0
    c = a / math.sqrt(H)
    return s1 * s2 * _nu_scalar(c * math.sqrt(s1)) * _nu_scalar(c * math.sqrt(s2))


def arl_max_integral(H: int, a: float) -> float:
    H = check_window_length(H)
    # integrand is symmetric about y = 1/2
    val, err, info = _quad(_max_integrand, 0.0, 0.5, args=(H, a))
    return 2.0 * val


def arl_max(H: int, a: float) -> float:
    """Approximate ARL of the max-type rule with threshold ``a``."""
    H = check_window_length(H)
    if not a > 0:
        raise ConfigError(f"threshold a must be positive, got {a}")
    integral = arl_max_integral(H, a)
    log_arl = 0.5 * math.log(2 * math.pi) + math.log(H) + 0.5 * a * a - 3 * math.log(a) - math.log(integral)
    return math.exp(log_arl)


# -- ARL of the sum-type rule ----------------------------------------------

def g_func(y: float, b: float) -> float:
    """``2 log y + 1/2 log log y + log(4/sqrt(pi)) - b sqrt(2 log y)`` for ``y > 1``."""
    ly = math.log(y)
    return 2.0 * ly + 0.5 * math.log(ly) + _LOG_4_OVER_SQRT_PI - b * math.sqrt(2.0 * ly)


def _log_sum_integrand_u(u: float, b: float) -> float:
    # log of exp[-sqrt2 exp{g(y, b)}] at y = e^u
    if u <= 0.0:
        return 0.0
    g = 2.0 * u + 0.5 * math.log(u) + _LOG_4_OVER_SQRT_PI - b * math.sqrt(2.0 * u)
    if g > 700.0:
        return -math.inf
    return -_SQRT2 * math.exp(g)


def sum_integrand(y: float, b: float) -> float:
    """``exp[-sqrt2 exp{g(y, b)}]``; equals 1 at ``y = 1``."""
    if y <= 1.0:
        return 1.0
    return math.exp(_log_sum_integrand_u(math.log(y), b))


def _sum_truncation(b: float) -> float:
    # doubling search (in y) for the first point where the integrand < 1e-12
    log_tol = math.log(SUM_TAIL_TOL)
    u = math.log(2.0)
    for _ in range(2000):
        if _log_sum_integrand_u(u, b) < log_tol:
            return u
        u += math.log(2.0)
    raise NumericError(f"sum-rule ARL integrand does not decay for b={b}")


def arl_sum(H: int, b: float) -> float:
    """Approximate ARL of the sum-type rule with threshold ``b``.

    ``H + H * int_1^inf exp[-sqrt2 exp{g(y, b)}] dy``, integrated in
    ``u = log y`` up to the truncation point.
    """
    H = check_window_length(H)
    if not b > 0:
        raise ConfigError(f"threshold b must be positive, got {b}")
    u_max = _sum_truncation(b)

    def f(u):
        return math.exp(u + _log_sum_integrand_u(u, b))

    # break the range so the quadrature sees the sharp decay region
    pts = np.linspace(0.0, u_max, 9)
    total = 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        val, _, _ = _quad(f, lo, hi)
        total += val
    return H + H * total


def _quad(f, lo, hi, args=()):
    val, err, info = integrate.quad(
        f, lo, hi, args=args, epsabs=0.0, epsrel=QUAD_RTOL, limit=500, full_output=1
    )[:3]
    if not math.isfinite(val) or err > max(1e-8 * abs(val), 1e-300):
        raise NumericError(
            f"quadrature failed on [{lo}, {hi}]: value={val}, error estimate={err}, "
            f"evaluations={info.get('neval')}"
        )
    return val, err, info


# -- threshold calibration -------------------------------------------------

def _solve(arl_fn, H: int, target_arl: float, name: str) -> float:
    H = check_window_length(H)
    if not target_arl > H:
        raise ConfigError(f"target_arl must exceed H={H}, got {target_arl}")
    lo, hi = 1.0, 10.0
    try:
        # arl_max has a shallow minimum near 1, so widen only upward
        while arl_fn(H, hi) < target_arl:
            hi *= 1.5
            if hi > 100:
                raise CalibrationError(f"cannot bracket {name} threshold for ARL {target_arl}")
        if arl_fn(H, lo) > target_arl:
            raise CalibrationError(f"{name} ARL at threshold {lo} already exceeds {target_arl}")

        def objective(x):
            return math.log(arl_fn(H, x)) - math.log(target_arl)

        root = optimize.bisect(objective, lo, hi, xtol=1e-13, rtol=4 * np.finfo(float).eps,
                               maxiter=BISECT_MAXITER)
    except NumericError as exc:
        raise CalibrationError(str(exc)) from exc
    except RuntimeError as exc:
        raise CalibrationError(f"{name} bisection failed: {exc}") from exc
    return float(root)


def solve_threshold_max(H: int, target_arl: float) -> float:
    """Threshold ``a`` with ``arl_max(H, a) == target_arl``."""
    return _solve(arl_max, H, target_arl, "max-rule")


def solve_threshold_sum(H: int, target_arl: float) -> float:
    """Threshold ``b`` with ``arl_sum(H, b) == target_arl``."""
    return _solve(arl_sum, H, target_arl, "sum-rule")


def solve_threshold(rule: str, H: int, target_arl: float) -> float:
    if rule == "max":
        return solve_threshold_max(H, target_arl)
    if rule == "sum":
        return solve_threshold_sum(H, target_arl)
    raise ConfigError(f"unknown rule {rule!r}; expected 'max' or 'sum'")


# -- detection delay -------------------------------------------------------

def edd_sum_formula(b, sigma_sum, rho2_hat, delta2, H) -> float:
    """``(b sigma + rho2) / (H Delta^2)``."""
    if not delta2 > 0:
        raise ConfigError("EDD is undefined (infinite) when delta2 = 0")
    return (b * sigma_sum + rho2_hat) / (H * delta2)


def edd_max_bounds(a, sigma_min, sigma_max, rho_min_hat, rho_max_hat, delta2) -> tuple[float, float]:
    """``((a sigma_min + rho_min) / Delta^2, (a sigma_max + rho_max) / Delta^2)``."""
    if not delta2 > 0:
        raise ConfigError("EDD is undefined (infinite) when delta2 = 0")
    if sigma_min > sigma_max:
        raise ConfigError("sigma_min must not exceed sigma_max")
    return (a * sigma_min + rho_min_hat) / delta2, (a * sigma_max + rho_max_hat) / delta2


@dataclass(frozen=True)
class TheoryParams:
    H: int
    target_arl: float
    a: float
    b: float

    @classmethod
    def calibrate(cls, H: int, target_arl: float) -> "TheoryParams":
        return cls(H, target_arl, solve_threshold_max(H, target_arl), solve_threshold_sum(H, target_arl))
