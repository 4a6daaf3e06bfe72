"""Orlicz-type bulk energy densities.

The volumetric part of the stored energy is an even, convex function
``phi`` with ``phi(0) = 0``, a non-decreasing derivative ``phi'`` that
vanishes only at zero, and superlinear growth.  The solver additionally
needs ``phi''`` (for the Newton linearization), so every built-in family
carries analytic first and second derivatives; numerical differentiation
is used in the test suite only, as a cross-check.

Built-in families (``t >= 0``; all are extended evenly to ``t < 0``):

* ``power_kappa``     phi(t) = kappa t^2/2 + t^p/p
* ``power_shifted``   phi(t) = ((kappa + t^2)^(p/2) - kappa^(p/2)) / p
* ``log_corrected``   phi'(t) = (kappa + t^2)^((p-2)/2) t ln^beta(e + t)
* ``quadratic``       phi(t) = lambda_tilde t^2   (generalized Hooke bulk)
* ``custom``          user-supplied value/deriv/deriv2 on t >= 0

``log_corrected`` has no elementary antiderivative; its value is computed
by composite Gauss-Legendre quadrature on geometrically graded panels,
which is accurate to ~1e-13 relative over the full range used here.
"""

import math

import numpy as np

__all__ = [
    "NFunction",
    "make_family",
    "conjugate",
    "check_delta2",
    "check_good_phi_prime",
    "check_convexity",
    "Delta2Report",
    "GoodPhiPrimeReport",
]

FAMILIES = ("power_kappa", "power_shifted", "log_corrected", "quadratic", "custom")

# Geometrically graded Gauss-Legendre rule for integrating phi' from 0 to t.
# 26 dyadic panels cover a ~1e8 dynamic range in s; 16 points per panel are
# enough for the analytic integrands used here (panel ratio is fixed at 2).
_GAUSS_NODES, _GAUSS_WEIGHTS = np.polynomial.legendre.leggauss(16)
_N_PANELS = 26
_PANEL_EDGES = np.concatenate(([0.0], 2.0 ** np.arange(-_N_PANELS, 1.0)))


class NFunction:
    """Even convex energy density of the volumetric strain.

    ``value``, ``deriv`` and ``deriv2`` accept scalars or arrays.  The
    constructor takes functions defined for ``t >= 0`` and extends them:
    ``value`` evenly, ``deriv`` oddly (so that ``deriv(s) * s >= 0``) and
    ``deriv2`` evenly.  Instances are immutable and safe to share.
    """

    def __init__(self, value, deriv, deriv2, family_tag="custom", params=None):
        if family_tag not in FAMILIES:
            raise ValueError(f"unknown family tag {family_tag!r}")
        self._value = value
        self._deriv = deriv
        self._deriv2 = deriv2
        self.family_tag = family_tag
        self.params = dict(params or {})

    def value(self, t):
        t = np.asarray(t, dtype=float)
        out = self._value(np.abs(t))
        return float(out) if out.ndim == 0 else out

    __call__ = value

    def deriv(self, t):
        t = np.asarray(t, dtype=float)
        out = np.sign(t) * self._deriv(np.abs(t))
        return float(out) if out.ndim == 0 else out

    def deriv2(self, t):
        t = np.asarray(t, dtype=float)
        out = self._deriv2(np.abs(t))
        return float(out) if out.ndim == 0 else out

    def __repr__(self):
        ps = ", ".join(f"{k}={v:g}" for k, v in self.params.items())
        return f"NFunction({self.family_tag}, {ps})"


def _quad_of_deriv(deriv, t):
    """Integrate ``deriv`` from 0 to t (t >= 0, any shape), panel-by-panel."""
    t = np.asarray(t, dtype=float)
    tt = np.atleast_1d(t).ravel()
    total = np.zeros_like(tt)
    # edges scale with each t, so every entry gets the same relative grading
    for lo_f, hi_f in zip(_PANEL_EDGES[:-1], _PANEL_EDGES[1:]):
        lo, hi = lo_f * tt, hi_f * tt
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        s = mid[None, :] + half[None, :] * _GAUSS_NODES[:, None]
        total += half * (_GAUSS_WEIGHTS[:, None] * deriv(s)).sum(axis=0)
    return total.reshape(t.shape)


def make_family(tag, kappa=0.0, p=2.0, beta=0.0, lambda_tilde=1.0):
    """Construct a built-in energy density.

    Parameters
    ----------
    tag : str
        One of ``power_kappa``, ``power_shifted``, ``log_corrected``,
        ``quadratic``.
    kappa : float
        Shift parameter, >= 0.  Ignored by ``quadratic``.
    p : float
        Growth exponent, > 1.  Ignored by ``quadratic``.
    beta : float
        Logarithmic correction exponent (``log_corrected`` only), >= 0.
    lambda_tilde : float
        Quadratic bulk coefficient (``quadratic`` only), > 0.

    For ``p < 2`` the second derivative of the power families blows up at
    the origin; it is evaluated at ``max(t, 1e-12)`` to keep Newton
    assembly finite.
    """
    if tag == "quadratic":
        if lambda_tilde <= 0:
            raise ValueError(f"quadratic family needs lambda_tilde > 0, got {lambda_tilde}")
        lam = float(lambda_tilde)
        return NFunction(
            lambda t: lam * t * t,
            lambda t: 2.0 * lam * t,
            lambda t: np.full_like(t, 2.0 * lam),
            family_tag="quadratic",
            params={"lambda_tilde": lam},
        )

    if tag not in ("power_kappa", "power_shifted", "log_corrected"):
        raise ValueError(f"unknown family tag {tag!r}")
    if kappa < 0:
        raise ValueError(f"kappa must be >= 0, got {kappa}")
    if p <= 1:
        raise ValueError(f"p must be > 1, got {p}")
    if beta < 0:
        raise ValueError(f"beta must be >= 0, got {beta}")
    kappa, p, beta = float(kappa), float(p), float(beta)
    tfloor = 1e-12  # only relevant for the p < 2 singular terms

    if tag == "power_kappa":
        # phi'(t) = (kappa + t^(p-2)) t = kappa t + t^(p-1)
        def value(t):
            return 0.5 * kappa * t * t + t**p / p

        def deriv(t):
            return kappa * t + t ** (p - 1.0)

        def deriv2(t):
            if p < 2.0:
                t = np.maximum(t, tfloor)
            return kappa + (p - 1.0) * t ** (p - 2.0)

        params = {"kappa": kappa, "p": p}

    elif tag == "power_shifted":
        # phi'(t) = (kappa + t^2)^((p-2)/2) t, integrable in closed form
        def value(t):
            return ((kappa + t * t) ** (0.5 * p) - kappa ** (0.5 * p)) / p

        if kappa == 0.0:

            def deriv(t):
                return t ** (p - 1.0)

            def deriv2(t):
                if p < 2.0:
                    t = np.maximum(t, tfloor)
                return (p - 1.0) * t ** (p - 2.0)

        else:

            def deriv(t):
                return (kappa + t * t) ** (0.5 * (p - 2.0)) * t

            def deriv2(t):
                return (kappa + t * t) ** (0.5 * (p - 4.0)) * (kappa + (p - 1.0) * t * t)

        params = {"kappa": kappa, "p": p}

    else:  # log_corrected
        # phi'(t) = (kappa + t^2)^((p-2)/2) t ln^beta(e + t); no closed value
        if kappa == 0.0:

            def _core(t):
                return t ** (p - 1.0)

            def _dcore(t):
                if p < 2.0:
                    t = np.maximum(t, tfloor)
                return (p - 1.0) * t ** (p - 2.0)

        else:

            def _core(t):
                return (kappa + t * t) ** (0.5 * (p - 2.0)) * t

            def _dcore(t):
                return (kappa + t * t) ** (0.5 * (p - 4.0)) * (kappa + (p - 1.0) * t * t)

        def _lb(t):
            return np.log(np.e + t) ** beta

        def deriv(t):
            return _core(t) * _lb(t)

        def deriv2(t):
            lnet = np.log(np.e + t)
            return _dcore(t) * lnet**beta + _core(t) * beta * lnet ** (beta - 1.0) / (np.e + t)

        def value(t):
            return _quad_of_deriv(deriv, t)

        params = {"kappa": kappa, "p": p, "beta": beta}

    return NFunction(value, deriv, deriv2, family_tag=tag, params=params)


def conjugate(phi, t, s_tol=1e-10):
    """Convex conjugate ``sup_s (s t - phi(s))`` at ``t`` (scalar or array).

    The objective is concave in ``s`` with its maximizer at ``phi'(s) = |t|``,
    so the maximizer is bracketed by doubling ``s`` until ``phi'`` exceeds
    ``|t|`` and then located by golden-section search to ``s_tol``.  By
    evenness only ``|t|`` matters.

    Raises
    ------
    ArithmeticError
        If no bracket is found below ``s = 1e30`` (the supplied ``phi`` then
        has bounded slope and the conjugate is infinite beyond it).
    """
    t_in = np.asarray(t, dtype=float)
    tv = np.abs(np.atleast_1d(t_in))
    out = np.zeros_like(tv)
    active = tv > 0.0
    if active.any():
        ta = tv[active]
        hi = np.ones_like(ta)
        for _ in range(120):
            need = phi.deriv(hi) < ta
            if not need.any():
                break
            hi[need] *= 2.0
        else:
            raise ArithmeticError(
                "conjugate bracketing failed: phi' stayed below "
                f"{ta[phi.deriv(hi) < ta].max():g} up to s = {hi.max():.3g}"
            )
        # tighten the bracket by bisecting the monotone phi' (cheap: the
        # derivative is analytic even when the value needs quadrature)
        a = np.zeros_like(ta)
        b = hi
        for _ in range(200):
            if float((b - a).max()) <= 0.25 * s_tol:
                break
            mid = 0.5 * (a + b)
            low = phi.deriv(mid) < ta
            a = np.where(low, mid, a)
            b = np.where(low, b, mid)

        def f(s):
            return s * ta - phi.value(s)

        invphi = (math.sqrt(5.0) - 1.0) / 2.0
        c = b - invphi * (b - a)
        d = a + invphi * (b - a)
        fc, fd = f(c), f(d)
        width = max(float((b - a).max()), 1e-300)
        n_iter = int(math.ceil(math.log(max(width / s_tol, 2.0)) / -math.log(invphi)))
        for _ in range(min(n_iter, 400)):
            left = fc >= fd  # maximum lies in [a, d]
            a = np.where(left, a, c)
            b = np.where(left, d, b)
            c_new = np.where(left, b - invphi * (b - a), d)
            d_new = np.where(left, c, a + invphi * (b - a))
            fx = f(np.where(left, c_new, d_new))
            fc, fd = np.where(left, fx, fd), np.where(left, fc, fx)
            c, d = c_new, d_new
        s_best = 0.5 * (a + b)
        out[active] = np.maximum(f(s_best), 0.0)
    return float(out[0]) if t_in.ndim == 0 else out.reshape(t_in.shape)


def _log_sample_grid(t_max, samples):
    if samples < 2:
        raise ValueError("need at least 2 samples")
    if t_max <= 0:
        raise ValueError("t_max must be positive")
    return np.logspace(-6.0, math.log10(t_max), samples)


def _top_decade_slope(grid, values):
    """Least-squares slope of log(values) vs log(t) over the top decade."""
    mask = grid >= grid[-1] / 10.0
    if mask.sum() < 3:
        mask[-3:] = True
    tt, vv = grid[mask], values[mask]
    good = np.isfinite(vv) & (vv > 0)
    if good.sum() < 2:
        return np.inf
    return np.polyfit(np.log(tt[good]), np.log(vv[good]), 1)[0]


class Delta2Report:
    """Outcome of the doubling-condition probe (a diagnostic, not a proof)."""

    def __init__(self, satisfied, C_observed):
        self.satisfied = bool(satisfied)
        self.C_observed = float(C_observed)

    def __repr__(self):
        return f"Delta2Report(satisfied={self.satisfied}, C_observed={self.C_observed:.6g})"


def check_delta2(phi, t_max=1e6, samples=200):
    """Probe ``phi(2t) <= C (phi(t) + 1)`` on a log grid ``[1e-6, t_max]``.

    ``satisfied`` requires every sampled ratio to be finite and the ratio to
    show no growth trend across the top decade of the grid (slope of
    log-ratio vs log-t below 0.05).  ``C_observed`` is the largest sampled
    ratio, ``inf`` on overflow.
    """
    grid = _log_sample_grid(t_max, samples)
    with np.errstate(over="ignore", invalid="ignore"):
        ratio = phi.value(2.0 * grid) / (phi.value(grid) + 1.0)
    if not np.all(np.isfinite(ratio)):
        return Delta2Report(False, np.inf)
    slope = _top_decade_slope(grid, ratio)
    return Delta2Report(slope < 0.05, ratio.max())


class GoodPhiPrimeReport:
    """Outcome of the ``phi(t) <= t phi'(t) <= C (phi(t) + 1)`` probe."""

    def __init__(self, lower_ok, C_observed, upper_bounded):
        self.lower_ok = bool(lower_ok)
        self.C_observed = float(C_observed)
        self.upper_bounded = bool(upper_bounded)

    def __repr__(self):
        return (
            f"GoodPhiPrimeReport(lower_ok={self.lower_ok}, "
            f"C_observed={self.C_observed:.6g}, upper_bounded={self.upper_bounded})"
        )


def check_good_phi_prime(phi, t_max=1e6, samples=200):
    """Sample the two-sided derivative bound on a log grid.

    ``lower_ok`` reports ``phi(t) <= t phi'(t)`` on all samples (a
    consequence of ``phi'`` non-decreasing).  ``C_observed`` is the largest
    sampled ``t phi'(t) / (phi(t) + 1)``; ``upper_bounded`` flags whether
    that ratio shows a growth trend across the top decade, which separates
    doubling from exponential-type growth.
    """
    grid = _log_sample_grid(t_max, samples)
    with np.errstate(over="ignore", invalid="ignore"):
        val = phi.value(grid)
        tphi = grid * phi.deriv(grid)
        ratio = tphi / (val + 1.0)
    finite = np.all(np.isfinite(tphi)) and np.all(np.isfinite(val))
    lower_ok = bool(np.all(val <= tphi * (1.0 + 1e-10) + 1e-14))
    if not finite:
        return GoodPhiPrimeReport(lower_ok, np.inf, False)
    slope = _top_decade_slope(grid, ratio)
    return GoodPhiPrimeReport(lower_ok, ratio.max(), slope < 0.05)


def check_convexity(phi, samples=200, t_max=10.0, seed=0):
    """Midpoint-convexity test on random triples plus a monotone-slope test.

    Sampling-based: returns True iff ``phi((a+b)/2) <= (phi(a)+phi(b))/2``
    on ``samples`` random pairs in ``[-t_max, t_max]`` (to 1e-12 relative
    slack) and ``phi'`` is non-decreasing on a sorted grid.
    """
    if samples < 3:
        raise ValueError("need at least 3 samples")
    rng = np.random.default_rng(seed)
    a = rng.uniform(-t_max, t_max, size=samples)
    b = rng.uniform(-t_max, t_max, size=samples)
    fa, fb, fm = phi.value(a), phi.value(b), phi.value(0.5 * (a + b))
    slack = 1e-12 * (1.0 + np.abs(fa) + np.abs(fb))
    if not np.all(fm <= 0.5 * (fa + fb) + slack):
        return False
    grid = np.sort(np.concatenate([a, b, np.linspace(-t_max, t_max, samples)]))
    d = phi.deriv(grid)
    return bool(np.all(np.diff(d) >= -1e-12 * (1.0 + np.abs(d[:-1]))))
