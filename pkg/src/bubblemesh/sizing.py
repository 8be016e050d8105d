"""Curvature-driven edge length and bubble radius bounds on parametric surfaces.

The chord-error tolerance maps to a maximum 3D edge length through the
normal curvature; the Jacobian's largest singular value converts that
length into the parametric domain, where it caps the bubble radius.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

EPS_MAX = 1.0 / 1.2  # argument of the inner square root must stay positive
_REGULARITY_TOL = 1e-24


class SizingError(Exception):
    pass


@dataclass(frozen=True)
class SizingParams:
    epsilon: float
    r_min: float
    r_max: float

    def __post_init__(self):
        if not (0.0 < self.epsilon < EPS_MAX):
            raise SizingError(f"epsilon must lie in (0, {EPS_MAX:.6f})")
        # r_min == r_max is the uniform meshing mode
        if not (0.0 < self.r_min <= self.r_max):
            raise SizingError("need 0 < r_min <= r_max")


def g_of_eps(epsilon: float) -> float:
    """Dimensionless chord-error factor (1-eps)*sqrt(40*(1-(1-1.2*eps)^0.5))."""
    if not (0.0 < epsilon < EPS_MAX):
        raise SizingError(f"epsilon must lie in (0, {EPS_MAX:.6f})")
    return (1.0 - epsilon) * math.sqrt(40.0 * (1.0 - math.sqrt(1.0 - 1.2 * epsilon)))


def fundamental_forms(surface, u, v):
    """First (E,F,G) and second (L,M,N) fundamental form coefficients."""
    fu = surface.du(u, v)
    fv = surface.dv(u, v)
    E = float(np.dot(fu, fu))
    F = float(np.dot(fu, fv))
    G = float(np.dot(fv, fv))
    n = np.cross(fu, fv)
    nn = np.linalg.norm(n)
    if nn * nn <= _REGULARITY_TOL * max(E * G, 1e-300):
        raise SizingError(f"irregular surface point at (u,v)=({u},{v})")
    n = n / nn
    L = float(np.dot(surface.duu(u, v), n))
    M = float(np.dot(surface.duv(u, v), n))
    N = float(np.dot(surface.dvv(u, v), n))
    return E, F, G, L, M, N


def principal_curvatures(surface, u, v) -> tuple[float, float]:
    """Principal curvatures from the fundamental-form eigenproblem."""
    E, F, G, L, M, N = fundamental_forms(surface, u, v)
    a = E * G - F * F
    b = E * N + G * L - 2.0 * F * M
    c = L * N - M * M
    disc = max(b * b - 4.0 * a * c, 0.0)
    root = math.sqrt(disc)
    return (b + root) / (2.0 * a), (b - root) / (2.0 * a)


def max_normal_curvature(surface, u, v) -> float:
    """Largest principal curvature magnitude (sizing treats curvature as a magnitude)."""
    k1, k2 = principal_curvatures(surface, u, v)
    return max(abs(k1), abs(k2))


def allowable_edge_3d(surface, u, v, params: SizingParams) -> float:
    """Maximum allowable 3D edge length g(eps)/kappa_max; +inf on flat points."""
    kappa = max_normal_curvature(surface, u, v)
    if kappa == 0.0:
        return math.inf
    return g_of_eps(params.epsilon) / kappa


def jacobian(surface, u, v) -> np.ndarray:
    return np.column_stack([surface.du(u, v), surface.dv(u, v)])


def sigma1(surface, u, v) -> float:
    """Largest singular value of the 3x2 Jacobian of the surface map."""
    s = np.linalg.svd(jacobian(surface, u, v), compute_uv=False)
    if s[0] <= 0.0 or s[0] * s[0] <= _REGULARITY_TOL:
        raise SizingError(f"irregular surface point at (u,v)=({u},{v})")
    return float(s[0])


def radius_bound(surface, u, v, params: SizingParams) -> float:
    """Maximum bubble radius in parameter units: clamp(l_p/sigma1, 2 r_min, 2 r_max)/2."""
    lp = allowable_edge_3d(surface, u, v, params)
    s1 = sigma1(surface, u, v)
    lp_param = lp / s1 if math.isfinite(lp) else math.inf
    return min(max(lp_param, 2.0 * params.r_min), 2.0 * params.r_max) / 2.0


def radius_bound_evaluator(surface, params: SizingParams):
    """Pointwise radius-bound callable over the surface's parametric rectangle.

    Points outside the rectangle are clipped onto it, so packing structures
    that probe slightly beyond the domain stay well-defined.
    """
    def bound(x: float, y: float) -> float:
        u, v = surface.clip(x, y)
        return radius_bound(surface, float(u), float(v), params)

    return bound
