"""Picard expansion of the truncated flow and the normal form inversion.

For initial data u0 the flow map is expanded as

    u(t) = a(t) + eps b(t) + eps^2 c(t) + eps^3 d(t),

where a is the free evolution and b, c have closed forms as oscillatory
sums over the interaction tables.  The remainder d is defined by exact
subtraction.  The gauged variable v = u + eps s_map(u, u) satisfies a
flow equation whose eps^3 coefficient w admits an algebraic decomposition
in terms of a, b, c, d; lambda_eps is the resulting polynomial map d -> w
and invert_lambda_eps recovers d from w by fixed-point iteration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import LatticeBox, SpectralField, apply_free_flow, hs_norm
from .operators import (pair_table, triple_table, segment_sum,
                        _s_apply, s_map)

__all__ = [
    "THETA_TOL",
    "phi1",
    "picard_b",
    "picard_c",
    "f_integral",
    "extract_d",
    "extract_w",
    "PicardBundle",
    "lambda_eps",
    "invert_lambda_eps",
    "NonContractionError",
    "MaxIterExceededError",
]

# Below this phase magnitude phi1 switches to its theta -> 0 limit t;
# the only phases that can vanish are four-wave ones, and they do so
# exactly (integer cancellation), so the crossover is not delicate.
THETA_TOL = 1e-9


class NonContractionError(RuntimeError):
    """Fixed-point residual stopped contracting; eps is too large."""


class MaxIterExceededError(RuntimeError):
    """Fixed-point iteration hit its iteration cap before converging."""


def phi1(theta, t):
    """Oscillatory integral (e^{i theta t} - 1) / (i theta), elementwise.

    Continuous at theta = 0 with value t; inputs within THETA_TOL of zero
    take the limiting value.
    """
    th = np.asarray(theta, dtype=float)
    small = np.abs(th) <= THETA_TOL
    safe = np.where(small, 1.0, th)
    out = (np.exp(1j * safe * t) - 1.0) / (1j * safe)
    return np.where(small, complex(t), out)


def _picard_b_coeffs(box: LatticeBox, U0: np.ndarray, t: float) -> np.ndarray:
    pt = pair_table(box)
    om = box.dispersion().values
    prods = U0[..., pt.k_idx] * U0[..., pt.l_idx] * (1j * phi1(pt.delta, t))
    conv = segment_sum(prods, pt.seg_starts)
    return (-0.5 * box.n1 * np.exp(1j * om * t)) * conv


def _picard_c_coeffs(box: LatticeBox, U0: np.ndarray, t: float) -> np.ndarray:
    tt = triple_table(box)
    om = box.dispersion().values
    kernel = (tt.l1 / (2.0 * tt.inner_delta)) \
        * (phi1(tt.four_wave, t) - phi1(tt.outer_delta, t))
    prods = U0[..., tt.j_idx] * U0[..., tt.q_idx] * U0[..., tt.k_idx] * kernel
    acc = segment_sum(prods, tt.seg_starts)
    return (1j * box.n1 * np.exp(1j * om * t)) * acc


def _f_integral_coeffs(box: LatticeBox, U0: np.ndarray, t: float) -> np.ndarray:
    tt = triple_table(box)
    om = box.dispersion().values
    kernel = (tt.l1 / (2.0 * tt.outer_delta)) * phi1(tt.four_wave, t)
    prods = U0[..., tt.j_idx] * U0[..., tt.q_idx] * U0[..., tt.k_idx] * kernel
    acc = segment_sum(prods, tt.seg_starts)
    return (-1j * box.n1 * np.exp(1j * om * t)) * acc


def picard_b(u0: SpectralField, t: float) -> SpectralField:
    """First Picard correction.

    b_n(t) = -(n1/2) e^{i omega_n t} sum_{k+l=n} i phi1(delta, t) u0_k u0_l,
    the Duhamel integral of the quadratic interaction along the free flow.
    """
    return SpectralField(u0.box, _picard_b_coeffs(u0.box, u0.coeffs, t),
                         copy=False)


def picard_c(u0: SpectralField, t: float) -> SpectralField:
    """Second Picard correction, a nested oscillatory sum over triple splits."""
    return SpectralField(u0.box, _picard_c_coeffs(u0.box, u0.coeffs, t),
                         copy=False)


def f_integral(u0: SpectralField, t: float) -> SpectralField:
    """Duhamel integral of the resonant trilinear term along the free flow.

    Solves the inhomogeneous linear equation df/dt - L f = f_map(a, a, a)
    with f(0) = 0, where a is the free evolution of u0; used to split
    picard_c as c = -2 s_map(a, b) + f.
    """
    return SpectralField(u0.box, _f_integral_coeffs(u0.box, u0.coeffs, t),
                         copy=False)


def extract_d(u_t: SpectralField, u0: SpectralField, t: float, eps: float
              ) -> SpectralField:
    """Order-three Picard remainder (u(t) - a - eps b - eps^2 c) / eps^3."""
    if eps == 0:
        raise ValueError("remainder extraction requires eps != 0")
    box = u_t.box
    a = apply_free_flow(u0, t).coeffs
    b = _picard_b_coeffs(box, u0.coeffs, t)
    c = _picard_c_coeffs(box, u0.coeffs, t)
    d = (u_t.coeffs - a - eps * b - eps ** 2 * c) / eps ** 3
    return SpectralField(box, d, copy=False)


def extract_w(u_t: SpectralField, u0: SpectralField, t: float, eps: float
              ) -> SpectralField:
    """Order-three coefficient of the gauged variable v = u + eps s_map(u, u).

    w = (v(t) - a - eps U(t) s_map(u0, u0) - eps^2 f) / eps^3 with f the
    Duhamel integral of f_map(a, a, a); the subtraction is exact because
    the lower orders of v have those closed forms.
    """
    if eps == 0:
        raise ValueError("remainder extraction requires eps != 0")
    box = u_t.box
    U = u_t.coeffs
    v = U + eps * _s_apply(box, U, U)
    a = apply_free_flow(u0, t).coeffs
    s00 = apply_free_flow(s_map(u0, u0), t).coeffs
    f = _f_integral_coeffs(box, u0.coeffs, t)
    w = (v - a - eps * s00 - eps ** 2 * f) / eps ** 3
    return SpectralField(box, w, copy=False)


@dataclass(frozen=True)
class PicardBundle:
    """Picard data (a, b, c) of one initial condition at one time."""

    u0: SpectralField
    t: float
    eps: float
    a: SpectralField
    b: SpectralField
    c: SpectralField

    @classmethod
    def build(cls, u0: SpectralField, t: float, eps: float) -> "PicardBundle":
        return cls(u0=u0, t=t, eps=eps,
                   a=apply_free_flow(u0, t),
                   b=picard_b(u0, t),
                   c=picard_c(u0, t))


def lambda_eps(d: SpectralField, bundle: PicardBundle) -> SpectralField:
    """Polynomial map sending the remainder d to the gauged coefficient w.

    lambda_eps(d) = d + 2 eps (s_map(a, d) + eps s_map(b, d)
                    + eps^2 s_map(c, d)) + eps^4 s_map(d, d).
    """
    box = d.box
    eps = bundle.eps
    D = d.coeffs
    out = D + 2.0 * eps * (
        _s_apply(box, bundle.a.coeffs, D)
        + eps * _s_apply(box, bundle.b.coeffs, D)
        + eps ** 2 * _s_apply(box, bundle.c.coeffs, D)
    ) + eps ** 4 * _s_apply(box, D, D)
    return SpectralField(box, out, copy=False)


def invert_lambda_eps(g: SpectralField, bundle: PicardBundle,
                      tol: float = 1e-12, max_iter: int = 200,
                      s: float = 0.0) -> SpectralField:
    """Solve lambda_eps(d) = g by fixed-point iteration, starting from d = g.

    Each step replaces d by g minus the perturbative part of lambda_eps;
    for small eps the map is a contraction and the residual decays
    geometrically.  Raises NonContractionError if the residual fails to
    shrink by a factor of 0.9 across five consecutive iterations and
    MaxIterExceededError if the tolerance is not met within max_iter.

    The residual is measured as hs_norm(lambda_eps(d) - g, s).
    """
    d = g.copy()
    history: list[float] = []
    for _ in range(max_iter):
        image = lambda_eps(d, bundle)
        res = hs_norm(image - g, s)
        if res <= tol:
            return d
        history.append(res)
        if len(history) > 5 and history[-1] > 0.9 * history[-6]:
            raise NonContractionError(
                f"residual {res:.3e} is not contracting; "
                f"eps={bundle.eps} is likely outside the contraction regime")
        d = g - (image - d)
    raise MaxIterExceededError(
        f"no convergence to {tol:.1e} within {max_iter} iterations "
        f"(last residual {history[-1]:.3e})")
