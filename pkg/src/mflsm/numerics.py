"""SVD, Tikhonov filter-factor solutions and L-curve parameter choice.

All routines accept stacked inputs: a matrix argument of shape (..., m, n)
is treated as a batch of independent problems.
"""

from __future__ import annotations

import io
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError


@dataclass(frozen=True)
class SvdResult:
    """Thin SVD ``A = U diag(s) V^H``; ``v`` holds right vectors as columns."""

    u: np.ndarray
    s: np.ndarray
    v: np.ndarray

    @property
    def shape(self):
        return self.u.shape[:-1] + (self.v.shape[-2],)


def svd(a) -> SvdResult:
    """Thin SVD with each left vector's largest-magnitude entry made real-positive."""
    a = np.asarray(a, dtype=complex)
    if a.ndim < 2:
        raise ValueError("svd needs a matrix")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    try:
        u, s, vh = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        fro = np.linalg.norm(a, axis=(-2, -1))
        raise ConvergenceError(f"SVD did not converge (Frobenius norm {fro}): {exc}") from exc
    idx = np.argmax(np.abs(u), axis=-2)[..., None, :]
    lead = np.take_along_axis(u, idx, axis=-2)
    mag = np.abs(lead)
    phase = np.where(mag > 0, lead / np.where(mag > 0, mag, 1.0), 1.0)
    u = u * phase.conj()
    v = np.swapaxes(vh.conj(), -1, -2) * phase.conj()
    return SvdResult(u, s, v)


def _filter(s, alpha):
    return s / (s**2 + alpha**2)


def _coefficients(dec: SvdResult, b):
    b = np.asarray(b, dtype=complex)
    if b.shape[-1] != dec.u.shape[-2]:
        raise ValueError(f"right-hand side length {b.shape[-1]} != {dec.u.shape[-2]} rows")
    # <b, u_n> = u_n^H b
    return np.einsum("...mr,...m->...r", dec.u.conj(), b)


def tikhonov_solve(dec: SvdResult, b, alpha: float) -> np.ndarray:
    """g = sum_n lambda_n / (lambda_n^2 + alpha^2) <b, u_n> v_n."""
    if not alpha > 0:
        raise ValueError("alpha must be > 0")
    coef = _coefficients(dec, b) * _filter(dec.s, alpha)
    return np.einsum("...nr,...r->...n", dec.v, coef)


def tikhonov_norm(dec: SvdResult, b, alpha: float) -> np.ndarray:
    """||g|| of :func:`tikhonov_solve` without forming g (V has orthonormal columns)."""
    if not alpha > 0:
        raise ValueError("alpha must be > 0")
    coef = _coefficients(dec, b) * _filter(dec.s, alpha)
    return np.sqrt(np.sum(np.abs(coef) ** 2, axis=-1))


def tikhonov_norms(dec: SvdResult, b, alphas):
    """Residual and solution norms of the regularised solution for each alpha."""
    alphas = np.asarray(alphas, dtype=float)
    b = np.asarray(b, dtype=complex)
    coef = _coefficients(dec, b)
    s = dec.s
    f = s[None, :] / (s[None, :] ** 2 + alphas[:, None] ** 2)
    sol = np.sqrt(np.sum(np.abs(f * coef) ** 2, axis=-1))
    # part of b outside range(U); formed directly, ||b||^2 - ||coef||^2 cancels badly
    outside = np.linalg.norm(b - dec.u @ coef) ** 2
    res = np.sqrt(np.sum(np.abs((1.0 - s * f) * coef) ** 2, axis=-1) + outside)
    return res, sol


@dataclass(frozen=True)
class LCurve:
    alpha: float
    alphas: np.ndarray
    residual_norms: np.ndarray
    solution_norms: np.ndarray
    curvature: np.ndarray
    degenerate: bool

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("alpha,residual_norm,solution_norm,curvature\n")
        for row in zip(self.alphas, self.residual_norms, self.solution_norms, self.curvature):
            buf.write(",".join(f"{v:.12e}" for v in row) + "\n")
        return buf.getvalue()


def default_alpha_grid(dec: SvdResult) -> np.ndarray:
    smax = float(np.max(dec.s)) if dec.s.size else 1.0
    return smax * np.logspace(-10, 1, 45)


def l_curve_alpha(dec: SvdResult, b, alphas=None) -> LCurve:
    """Pick alpha at the maximum curvature of (log residual, log solution norm).

    Derivatives are finite differences in log(alpha). Stretches where the curve
    barely moves (speed below 1e-3 of its maximum) are excluded, since there the
    curvature is round-off divided by round-off. If the maximum sits on the
    grid boundary or is not positive beyond round-off (no interior corner),
    the curve is flagged degenerate and alpha falls back to the candidate
    nearest ``1e-4 * lambda_max``.
    """
    if alphas is None:
        alphas = default_alpha_grid(dec)
    alphas = np.sort(np.asarray(alphas, dtype=float))
    if alphas.size < 8 or np.log10(alphas[-1] / alphas[0]) < 6:
        raise ValueError("L-curve needs >= 8 candidates spanning >= 6 decades")
    res, sol = tikhonov_norms(dec, b, alphas)
    tiny = np.finfo(float).tiny
    x, y, t = np.log(res + tiny), np.log(sol + tiny), np.log(alphas)
    dx, dy = np.gradient(x, t), np.gradient(y, t)
    ddx, ddy = np.gradient(dx, t), np.gradient(dy, t)
    denom = (dx**2 + dy**2) ** 1.5
    with np.errstate(divide="ignore", invalid="ignore"):
        kappa = np.where(denom > 0, (dx * ddy - ddx * dy) / denom, 0.0)
    kappa = np.nan_to_num(kappa)
    speed = np.sqrt(dx**2 + dy**2)
    kappa[speed <= 1e-3 * speed.max()] = 0.0
    best = int(np.argmax(kappa))
    # log-log curvature is dimensionless; genuine corners are O(0.1), round-off kinks ~1e-12
    degenerate = best in (0, alphas.size - 1) or kappa[best] <= 1e-6
    if degenerate:
        warnings.warn("L-curve has no interior corner; using 1e-4 * lambda_max")
        target = 1e-4 * float(np.max(dec.s))
        best = int(np.argmin(np.abs(np.log(alphas) - np.log(max(target, tiny)))))
    return LCurve(float(alphas[best]), alphas, res, sol, kappa, bool(degenerate))
