"""Conical functions on the tangent plane and the corner value solver.

A conical function takes the value ``a_i`` on the open sector between the
rays at angles ``theta_i < theta_{i+1}`` (all in ``(0, pi)``), i.e. on
``alpha_i y > x > alpha_{i+1} y`` with ``alpha = cot(theta)`` strictly
decreasing. Its integrals along the lines ``y = 1/cos(theta) + tan(theta) x``
determine the values through the first ``N`` Taylor coefficients of::

    F(t) = cos^2(arctan t) If(arctan t) = sum_i a_i (z_i - z_{i+1}),
    z_i = alpha_i / (1 - alpha_i t),

whose ``k``-th Taylor coefficient is ``sum_i a_i (alpha_i^{k+1} - alpha_{i+1}^{k+1})``.
Derivatives therefore carry a factor ``k!`` that the value solver divides out.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import mpmath as mp
import numpy as np

from .errors import DegenerateTileError, DerivativeUnstableError, IllConditionedWarning, PoleError

COND_CAP = 1e8
GAP_TOL = 1e-8


def _is_mp(x) -> bool:
    x = x[0] if isinstance(x, (list, tuple, np.ndarray)) and len(x) else x
    return isinstance(x, (mp.mpf, mp.mpc))


def explicit_inverse(alphas) -> np.ndarray:
    """Inverse of ``A[m-1, i] = alpha_i^m - alpha_{i+1}^m`` (``m, i = 1..N``).

    ``A`` is a Vandermonde matrix in the nodes ``alpha_1..alpha_{N+1}`` with
    the constant row removed, composed with first differences. The rows of the
    Vandermonde inverse are the coefficients of the Lagrange basis
    polynomials; cumulative sums undo the differences.
    """
    al = np.asarray(alphas, float)
    n = len(al)
    L = np.empty((n, n))
    for j in range(n):
        others = np.delete(al, j)
        L[j] = np.poly(others)[::-1] / np.prod(al[j] - others)
    return np.cumsum(L, axis=0)[:-1, 1:]


@dataclass(frozen=True)
class CornerSystem:
    """Cone edge angles at a vertex and the associated linear system.

    Build with :meth:`from_angles`; the angles are stored increasing, so the
    slopes ``alpha = cot(theta)`` are strictly decreasing.
    """

    thetas: np.ndarray
    alphas: np.ndarray
    A: np.ndarray
    A_inv: np.ndarray

    @classmethod
    def from_angles(cls, thetas) -> "CornerSystem":
        th = np.sort(np.asarray(thetas, float))
        if th.size < 2:
            raise ValueError("a corner system needs at least two edge angles")
        if th[0] <= 0 or th[-1] >= np.pi:
            raise ValueError("cone edge angles must lie strictly between 0 and pi")
        if np.min(np.diff(th)) < GAP_TOL:
            raise DegenerateTileError("two cone edges coincide")
        al = 1.0 / np.tan(th)
        N = len(al) - 1
        A = np.array([[al[i] ** m - al[i + 1] ** m for i in range(N)] for m in range(1, N + 1)])
        return cls(th, al, A, explicit_inverse(al))

    @property
    def N(self) -> int:
        return len(self.alphas) - 1

    @property
    def factorials(self) -> np.ndarray:
        return np.array([math.factorial(k) for k in range(self.N)], float)

    @property
    def condition(self) -> float:
        """``||A^{-1}||_inf`` from the explicit inverse."""
        return float(np.max(np.sum(np.abs(self.A_inv), axis=1)))

    def to_dict(self) -> dict:
        return {"thetas": self.thetas.tolist(), "alphas": self.alphas.tolist(),
                "A": self.A.tolist(), "A_inv_norm": self.condition}


# --------------------------------------------------------------- transform
def conical_transform(cs: CornerSystem, values, theta, dps: Optional[int] = None):
    """Closed-form integral of the conical function along ``l_theta``.

    With ``dps`` the evaluation runs in mpmath at that many digits and returns
    mpf values (``theta`` may then be mpf too).
    """
    a = list(values)
    if len(a) != cs.N:
        raise ValueError(f"expected {cs.N} values")
    if dps is not None or _is_mp(theta):
        with mp.workdps(dps or mp.mp.dps):
            al = [mp.cot(mp.mpf(float(x))) for x in cs.thetas]
            ths = theta if isinstance(theta, (list, tuple, np.ndarray)) else [theta]
            out = []
            for th in ths:
                th = mp.mpf(th)
                t = mp.tan(th)
                den = [1 - x * t for x in al]
                if min(abs(d) for d in den) < mp.mpf(10) ** (-(mp.mp.dps // 2)):
                    raise PoleError("line is parallel to a cone edge")
                z = [x / d for x, d in zip(al, den)]
                out.append(sum(mp.mpf(a[i]) * (z[i] - z[i + 1]) for i in range(cs.N)) / mp.cos(th) ** 2)
            return out if isinstance(theta, (list, tuple, np.ndarray)) else out[0]
    th = np.asarray(theta, float)
    t = np.tan(th)[..., None]
    den = 1.0 - cs.alphas * t
    if np.any(np.abs(den) < 1e-12):
        raise PoleError("line is parallel to a cone edge")
    z = cs.alphas / den
    I = np.sum(np.asarray(a, float) * (z[..., :-1] - z[..., 1:]), -1) / np.cos(th) ** 2
    return float(I) if I.ndim == 0 else I


def conical_transform_geometric(cs: CornerSystem, values, theta) -> float:
    """Same integral from segment lengths: ray ``phi`` meets ``l_theta`` at ``x = cos(phi)/sin(phi - theta)``."""
    th = float(theta)
    total = 0.0
    for i, a in enumerate(values):
        x = [math.cos(p) / math.sin(p - th) for p in (cs.thetas[i], cs.thetas[i + 1])]
        if any(math.sin(p - th) <= 0 for p in (cs.thetas[i], cs.thetas[i + 1])):
            raise PoleError("line does not cross the cone")
        total += a * abs(x[0] - x[1]) / math.cos(th)
    return total


def F_normalize(thetas, I):
    """Map samples ``I(theta)`` to ``(t, F)`` with ``t = tan(theta)``, ``F = cos^2(theta) I``."""
    if _is_mp(thetas) or _is_mp(I):
        t = [mp.tan(mp.mpf(x)) for x in thetas]
        F = [mp.cos(mp.mpf(x)) ** 2 * mp.mpf(y) for x, y in zip(thetas, I)]
        return t, F
    th = np.asarray(thetas, float)
    return np.tan(th), np.cos(th) ** 2 * np.asarray(I, float)


# ------------------------------------------------------------- derivatives
@dataclass(frozen=True)
class Derivatives:
    """Derivatives at 0 with the cross-check data of the windowed fit."""

    values: np.ndarray  # (F(0), F'(0), ...)
    window: float
    degree: int
    disagreement: float
    residual: float
    coefficients: np.ndarray  # scaled Taylor coefficients c_k w^k of the full fit


def _lsq(u, y, deg, dps=None):
    if dps is not None:
        with mp.workdps(dps):
            V = mp.matrix([[ui ** k for k in range(deg + 1)] for ui in u])
            c, res = mp.qr_solve(V, mp.matrix(list(y)))
            return [c[k] for k in range(deg + 1)], float(res)
    V = np.vander(np.asarray(u, float), deg + 1, increasing=True)
    c, *_ = np.linalg.lstsq(V, np.asarray(y, float), rcond=None)
    return c, float(np.linalg.norm(V @ c - y))


def derivatives_at_zero(t, F, order: int, degree: Optional[int] = None, tol: float = 1e-4,
                        dps: Optional[int] = None, check: bool = True) -> Derivatives:
    """``F(0), ..., F^{(order)}(0)`` from a least-squares polynomial fit.

    The window is the full sample range (half-width ``w = max|t|``). The fit
    has degree ``order + 2`` unless ``degree`` is given; the ``k``-th
    derivative is ``k!`` times the ``k``-th coefficient. The estimate is
    cross-checked on the inner half window (or, with too few inner nodes, by
    one extra degree); a relative disagreement above ``tol`` raises
    :class:`DerivativeUnstableError`. With ``dps`` the fit runs in mpmath.
    """
    mpmode = dps is not None or _is_mp(t) or _is_mp(F)
    deg = order + 2 if degree is None else int(degree)
    n = len(t)
    if n < order + 1:
        raise ValueError("not enough samples for the requested order")
    deg = min(deg, n - 1)
    if mpmode:
        dps = dps or mp.mp.dps
        with mp.workdps(dps):
            tm = [mp.mpf(x) for x in t]
            w = max(abs(x) for x in tm) or mp.mpf(1)
            u = [x / w for x in tm]
            ym = [mp.mpf(y) for y in F]
            c, res = _lsq(u, ym, deg, dps)
            scale = float(max(abs(y) for y in ym)) or 1.0
            vals = np.array([float(c[k] * math.factorial(k) / w ** k) for k in range(order + 1)])
            coef = np.array([float(x) for x in c])
            w = float(w)
    else:
        tf = np.asarray(t, float)
        yf = np.asarray(F, float)
        w = float(np.max(np.abs(tf))) or 1.0
        u = tf / w
        c, res = _lsq(u, yf, deg)
        scale = float(np.max(np.abs(yf))) or 1.0
        vals = np.array([c[k] * math.factorial(k) / w ** k for k in range(order + 1)])
        coef = np.asarray(c, float)
    dis = 0.0
    if check and n > deg + 1:
        inner = [i for i in range(n) if abs(float(t[i])) <= 0.5 * w + 1e-15 * w]
        if len(inner) >= deg + 1:
            tt = [t[i] for i in inner]
            yy = [F[i] for i in inner]
            alt = derivatives_at_zero(tt, yy, order, deg, tol, dps if mpmode else None, check=False)
        elif n >= deg + 2:
            alt = derivatives_at_zero(t, F, order, deg + 1, tol, dps if mpmode else None, check=False)
        else:
            alt = None
        if alt is not None:
            sc = np.array([w ** k / math.factorial(k) for k in range(order + 1)])
            dis = float(np.max(np.abs(vals - alt.values) * sc)) / scale
            if dis > tol:
                raise DerivativeUnstableError(
                    f"derivative estimates on nested windows disagree ({dis:.2e} > {tol:.1e})", dis)
    return Derivatives(vals, w, deg, dis, res / scale, coef)


def recover_values(cs: CornerSystem, b_raw, cap: float = COND_CAP) -> np.ndarray:
    """Values ``a = A^{-1} D^{-1} b`` with ``D = diag(0!, 1!, ..., (N-1)!)``."""
    b = np.asarray(b_raw, float)
    if b.shape != (cs.N,):
        raise ValueError(f"expected {cs.N} derivatives")
    if cs.condition > cap:
        warnings.warn(f"corner system is ill conditioned (||A^-1|| = {cs.condition:.2e})",
                      IllConditionedWarning, stacklevel=2)
    return cs.A_inv @ (b / cs.factorials)


# ---------------------------------------------------------------- corners
@dataclass(frozen=True)
class CornerReduction:
    """``d/deps I_C(theta, 0)`` per theta and the derivative vector of ``F``."""

    thetas: np.ndarray
    slopes: np.ndarray
    t: np.ndarray
    F: np.ndarray
    b_raw: np.ndarray
    eps_disagreement: float
    derivatives: Derivatives


def eps_slopes(eps, I, degree: int = 3, intercept: bool = False):
    """One-sided LS fits in ``eps`` per row of ``I`` (shape ``(n_theta, n_eps)``).

    Returns the fitted linear coefficients and, as a cross-check, their
    relative change when the degree is lowered by one.
    """
    eps = np.asarray(eps, float)
    I = np.atleast_2d(np.asarray(I, float))
    e = eps / eps.max()

    def fit(deg):
        k0 = 0 if intercept else 1
        V = np.stack([e ** k for k in range(k0, deg + 1)], -1)
        c, *_ = np.linalg.lstsq(V, I.T, rcond=None)
        return c[1 - k0] / eps.max(), c

    s, _ = fit(degree)
    s2, _ = fit(max(1, degree - 1))
    scale = max(float(np.max(np.abs(s))), 1e-300)
    return s, float(np.max(np.abs(s - s2))) / scale


def corner_reduce(thetas, eps, I_C, order: int, eps_degree: int = 3, theta_degree=None,
                  tol: float = 1e-4, eps_tol: Optional[float] = None) -> CornerReduction:
    """Derivative vector ``b_raw`` of ``F`` from a ``(theta, eps)`` grid of corner integrals.

    ``d/deps I_C(theta, 0)`` comes from a one-sided polynomial fit through the
    origin; ``F(t) = cos^2(theta) d/deps I_C`` is then differentiated at 0.
    """
    th = np.asarray(thetas, float)
    slopes, dis = eps_slopes(eps, I_C, eps_degree)
    if eps_tol is not None and dis > eps_tol:
        raise DerivativeUnstableError(f"eps fit unstable ({dis:.2e})", dis)
    t, F = F_normalize(th, slopes)
    der = derivatives_at_zero(t, F, order, theta_degree, tol)
    return CornerReduction(th, slopes, t, F, der.values, dis, der)
