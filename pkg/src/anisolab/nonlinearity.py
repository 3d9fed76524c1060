"""Absorption nonlinearities g, their C^1 truncations g_n, and hypothesis checks."""
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, optimize

from .errors import InvalidLevelError

# sampled falsifier box for the structure condition
STRUCTURE_BOX = (1e-3, 1e3)


def critical_exponent(N):
    """(N+1)/(N-1): above it no x_N-odd dipole solution exists for powers."""
    return (N + 1.0) / (N - 1.0)


@dataclass
class Nonlinearity:
    """Odd nondecreasing absorption term g with derivative g'."""

    kind: str
    evaluate: Callable
    derivative: Callable
    p: float = None
    odd: bool = True
    nondecreasing: bool = True
    label: str = ""

    def __call__(self, s):
        return self.evaluate(np.asarray(s, dtype=float))

    def prime(self, s):
        return self.derivative(np.asarray(s, dtype=float))

    @property
    def is_zero(self):
        return self.kind == "zero"


def power(p):
    """g(s) = |s|^{p-1} s."""
    p = float(p)
    if p <= 0:
        raise ValueError(f"power exponent must be positive, got {p}")

    def g(s):
        return np.abs(s) ** (p - 1.0) * s

    def dg(s):
        a = np.abs(s)
        if p >= 1.0:
            return p * a ** (p - 1.0)
        with np.errstate(divide="ignore"):
            return np.where(a > 0, p * a ** (p - 1.0), np.inf)

    return Nonlinearity("power", g, dg, p=p, label=f"power:{p:g}")


def zero():
    """g = 0, the linear problem."""
    return Nonlinearity(
        "zero", lambda s: np.zeros_like(s), lambda s: np.zeros_like(s), label="zero"
    )


def custom(evaluate, derivative, label="custom"):
    return Nonlinearity("custom", evaluate, derivative, label=label)


def parse_nonlinearity(text):
    """Parse a config string such as ``power:2.0``, ``zero`` or ``linear``."""
    text = text.strip().lower()
    if text in ("zero", "none", "linear", "0"):
        return zero()
    kind, _, arg = text.partition(":")
    if kind == "power" and arg:
        return power(float(arg))
    raise ValueError(f"unknown nonlinearity spec {text!r}; expected 'power:<p>' or 'zero'")


@dataclass
class TruncatedNonlinearity:
    """g_n(s) = sign(s) q_n(g(|s|)) with the C^1 soft cap

    q_n(v) = v                       for v <= n - 1
    q_n(v) = n - exp(-(v - n + 1))   for v >  n - 1
    """

    base: Nonlinearity
    level: float

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        v = self.base(np.abs(s))
        return np.sign(s) * self._cap(v)

    def prime(self, s):
        s = np.asarray(s, dtype=float)
        a = np.abs(s)
        if np.isinf(self.level):
            return self.base.prime(a)
        v = self.base(a)
        knee = self.level - 1.0
        with np.errstate(over="ignore"):
            slope = np.where(v <= knee, 1.0, np.exp(-(v - knee)))
        return slope * self.base.prime(a)

    def _cap(self, v):
        if np.isinf(self.level):
            return v
        knee = self.level - 1.0
        with np.errstate(over="ignore"):
            return np.where(v <= knee, v, self.level - np.exp(-(v - knee)))

    @property
    def is_zero(self):
        return self.base.is_zero

    @property
    def label(self):
        if np.isinf(self.level):
            return self.base.label
        return f"{self.base.label}|n={self.level:g}"

    def inactive_on(self, amplitude):
        """True when g_n = g on [-amplitude, amplitude]."""
        return bool(self.base(np.array(abs(amplitude))) <= self.level - 1.0)


def truncate(g, n):
    """C^1 odd nondecreasing cap of ``g`` at level ``n`` (``n = inf`` disables it)."""
    if not n >= 1:
        raise InvalidLevelError(f"truncation level must be >= 1, got {n}")
    return TruncatedNonlinearity(g, float(n))


def untruncated(g):
    return TruncatedNonlinearity(g, np.inf)


def check_subcritical(g, N):
    """Estimate the integral of g(s) s^{-1-q} over [1, inf), q = (N+1)/(N-1).

    Power kinds use quadrature on [1, S] plus the analytic tail; other kinds
    use adaptive quadrature on [1, inf) and report divergence when it fails.
    """
    q = critical_exponent(N)
    if g.is_zero:
        return {"integral_estimate": 0.0, "converges": True, "critical_exponent": q}
    if g.kind == "power":
        if g.p >= q:
            return {"integral_estimate": np.inf, "converges": False, "critical_exponent": q}
        S = 1e3
        head, _ = integrate.quad(lambda s: g(s) * s ** (-1.0 - q), 1.0, S, limit=200)
        tail = S ** (g.p - q) / (q - g.p)
        return {"integral_estimate": head + tail, "converges": True, "critical_exponent": q}
    with np.errstate(all="ignore"):
        val, err = integrate.quad(lambda s: float(g(s)) * s ** (-1.0 - q), 1.0, np.inf, limit=500)
    converges = bool(np.isfinite(val) and err <= 1e-6 * max(1.0, abs(val)))
    return {
        "integral_estimate": float(val) if converges else np.inf,
        "converges": converges,
        "critical_exponent": q,
    }


def _structure_ratio(g, s, t):
    num = g(s + t) - g(s)
    den = g(s) * t / (1.0 + np.abs(s)) + g(t)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(den > 0, num / den, np.where(num <= 0, 0.0, np.inf))


def check_structure(g, samples=256, box=STRUCTURE_BOX):
    """Sampled estimate of the smallest c1 with

        g(s + t) - g(s) <= c1 [g(s) t / (1 + |s|) + g(t)]

    over (s, t) in ``box`` x ``box`` (log grid) plus the line s = 0.
    A falsifier, not a proof: ``holds`` only means the sampled sup is finite.
    """
    lo, hi = box
    axis = np.geomspace(lo, hi, samples)
    S, T = np.meshgrid(np.concatenate([[0.0], axis]), axis, indexing="ij")
    R = _structure_ratio(g, S, T)
    i, jdx = np.unravel_index(np.argmax(R), R.shape)
    best = float(R[i, jdx])
    if np.isfinite(best) and i > 0:
        # polish the maximizer in log coordinates, staying inside the box
        def neg(z):
            s, t = np.exp(z)
            return -float(_structure_ratio(g, np.array(s), np.array(t)))

        z0 = np.log([S[i, jdx], T[i, jdx]])
        bounds = [(np.log(lo), np.log(hi))] * 2
        res = optimize.minimize(neg, z0, bounds=bounds, method="L-BFGS-B")
        if res.success and -res.fun > best:
            best = -float(res.fun)
            S_best, T_best = np.exp(res.x)
        else:
            S_best, T_best = S[i, jdx], T[i, jdx]
    else:
        S_best, T_best = S[i, jdx], T[i, jdx]
    at_edge = bool(np.isclose(T_best, lo) or np.isclose(T_best, hi)
                   or np.isclose(S_best, hi) or (S_best > 0 and np.isclose(S_best, lo)))
    return {
        "c1_estimate": best,
        "holds": bool(np.isfinite(best)),
        "argmax": (float(S_best), float(T_best)),
        "max_at_box_edge": at_edge,
        "box": [lo, hi],
    }


def growth_decay(g, N, s_max=1e6, samples=60):
    """Samples (s, g(s) s^{-q}) on a log grid of [1, s_max]."""
    q = critical_exponent(N)
    s = np.geomspace(1.0, s_max, samples)
    return list(zip(s.tolist(), (g(s) * s ** (-q)).tolist()))
