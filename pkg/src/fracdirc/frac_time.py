"""Fractional-in-time building blocks.

Uniform temporal grids, the L1 weights used by the time-stepping scheme,
the logarithmic/algebraic error factor that multiplies ``tau**(theta*alpha)``
in the error bounds, and exact Riemann-Liouville fractional integrals of
piecewise-constant functions (used as test oracles).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class TemporalGrid:
    """Uniform partition of ``[0, T]`` into ``J`` intervals."""

    J: int
    T: float = 1.0

    def __post_init__(self):
        if int(self.J) != self.J or self.J < 1:
            raise ValueError(f"J must be a positive integer, got {self.J!r}")
        if not self.T > 0:
            raise ValueError(f"T must be positive, got {self.T!r}")
        object.__setattr__(self, "J", int(self.J))
        object.__setattr__(self, "T", float(self.T))

    @property
    def tau(self) -> float:
        return self.T / self.J

    @property
    def times(self) -> np.ndarray:
        """Grid points ``t_0, ..., t_J``; the last one is exactly ``T``."""
        t = np.arange(self.J + 1) * self.tau
        t[-1] = self.T
        return t

    def refine(self, factor: int) -> "TemporalGrid":
        return TemporalGrid(self.J * factor, self.T)


@dataclass(frozen=True)
class FracWeights:
    """L1 coefficients ``b_j = j**(1-alpha)/Gamma(2-alpha)`` and their second
    differences ``d_m = b_{m+1} - 2 b_m + b_{m-1}``.

    ``b`` has length ``J + 1`` with ``b[0] = 0``.  ``d`` has length ``J`` and is
    indexed by ``m`` directly; ``d[0]`` is unused and set to zero.
    """

    alpha: float
    J: int
    b: np.ndarray = field(repr=False)
    d: np.ndarray = field(repr=False)

    @property
    def b1(self) -> float:
        return float(self.b[1])


def build_l1_weights(alpha: float, J: int) -> FracWeights:
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha!r}")
    if int(J) != J or J < 1:
        raise ValueError(f"J must be a positive integer, got {J!r}")
    J = int(J)
    j = np.arange(J + 2, dtype=float)
    b_ext = j ** (1.0 - alpha) / math.gamma(2.0 - alpha)
    b_ext[0] = 0.0
    d = np.zeros(J)
    # b_{J+1} is needed only for d_J, which is never used; keep d up to J-1.
    m = np.arange(1, J)
    d[1:] = b_ext[m + 1] - 2.0 * b_ext[m] + b_ext[m - 1]
    b = b_ext[: J + 1].copy()
    b.setflags(write=False)
    d.setflags(write=False)
    return FracWeights(alpha=float(alpha), J=J, b=b, d=d)


def epsilon_factor(alpha: float, theta: float, J: int) -> float:
    """Error factor ``eps(alpha, theta, J)``.

    Equals ``1/(theta*alpha) + (1 - J**(theta*alpha - 1))/(1 - theta*alpha)``
    when ``theta*alpha != 1`` and ``ln J`` otherwise.  The definition jumps at
    ``theta*alpha = 1``: the one-sided limit from below is ``1 + ln J``.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha!r}")
    if not 0.0 < theta <= 1.0:
        raise ValueError(f"theta must lie in (0, 1], got {theta!r}")
    if int(J) != J or J < 2:
        raise ValueError(f"J must be an integer >= 2, got {J!r}")
    ta = theta * alpha
    if ta == 1.0:
        return math.log(J)
    return 1.0 / ta + (1.0 - J ** (ta - 1.0)) / (1.0 - ta)


def _check_gamma(gamma: float) -> None:
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma!r}")


def _as_slices(samples, grid: TemporalGrid) -> np.ndarray:
    v = np.asarray(samples, dtype=float)
    if v.shape[0] != grid.J:
        raise ValueError(f"expected {grid.J} slice values, got {v.shape[0]}")
    return v


def rl_integral_left(gamma: float, samples, grid: TemporalGrid) -> np.ndarray:
    """Left fractional integral of order ``gamma`` of a piecewise-constant
    function, evaluated exactly at ``t_1, ..., t_J``.

    ``samples`` holds one value per slice (extra trailing axes are allowed).
    """
    _check_gamma(gamma)
    v = _as_slices(samples, grid)
    t = grid.times
    # kernel[k, j] = ((t_k - t_{j-1})^g - (t_k - t_j)_+^g) / Gamma(g+1), k, j = 1..J
    tk = t[1:, None]
    lo = np.clip(tk - t[None, :-1], 0.0, None)
    hi = np.clip(tk - t[None, 1:], 0.0, None)
    kernel = (lo**gamma - hi**gamma) / math.gamma(gamma + 1.0)
    return np.tensordot(kernel, v, axes=(1, 0))


def rl_integral_right(gamma: float, samples, grid: TemporalGrid) -> np.ndarray:
    """Right fractional integral (integration over ``[t, T]``) of a
    piecewise-constant function, evaluated exactly at ``t_0, ..., t_{J-1}``."""
    _check_gamma(gamma)
    v = _as_slices(samples, grid)
    t = grid.times
    tk = t[:-1, None]
    hi = np.clip(t[None, 1:] - tk, 0.0, None)
    lo = np.clip(t[None, :-1] - tk, 0.0, None)
    kernel = (hi**gamma - lo**gamma) / math.gamma(gamma + 1.0)
    return np.tensordot(kernel, v, axes=(1, 0))


def rl_pairing_matrix(gamma: float, grid: TemporalGrid) -> np.ndarray:
    """Matrix ``B`` with ``B[i, j] = int_{slice i} (I_left^gamma chi_j)(t) dt``.

    ``chi_j`` is the indicator of slice ``j``.  Then for piecewise-constant
    ``v``, ``w``: ``int_0^T (I_left v) w = w @ B @ v`` and
    ``int_0^T v (I_right w) = v @ B' @ w`` with ``B'`` built from the right
    integral.  Both are closed form, so the duality of the two integrals is an
    exact identity ``B' = B.T``.
    """
    _check_gamma(gamma)
    t = grid.times
    c = 1.0 / math.gamma(gamma + 2.0)

    def prim(s):
        return np.clip(s, 0.0, None) ** (gamma + 1.0)

    ti, ti1 = t[1:, None], t[:-1, None]
    tj, tj1 = t[None, 1:], t[None, :-1]
    return c * (prim(ti - tj1) - prim(ti - tj) - prim(ti1 - tj1) + prim(ti1 - tj))


def rl_pairing_matrix_right(gamma: float, grid: TemporalGrid) -> np.ndarray:
    """``B'[i, j] = int_{slice i} (I_right^gamma chi_j)(t) dt``, computed
    independently of :func:`rl_pairing_matrix`."""
    _check_gamma(gamma)
    t = grid.times
    c = 1.0 / math.gamma(gamma + 2.0)

    def prim(s):
        return np.clip(s, 0.0, None) ** (gamma + 1.0)

    # (I_right chi_j)(t) = ((t_j - t)_+^g - (t_{j-1} - t)_+^g) / Gamma(g+1);
    # its antiderivative in t is -((t_j - t)_+^{g+1} - (t_{j-1} - t)_+^{g+1}) c.
    ti, ti1 = t[1:, None], t[:-1, None]
    tj, tj1 = t[None, 1:], t[None, :-1]
    return c * (prim(tj - ti1) - prim(tj1 - ti1) - prim(tj - ti) + prim(tj1 - ti))
