"""Analytic parametric surfaces with closed-form first and second partials.

All evaluators are numpy-vectorized: scalar or array (u, v) inputs produce
(..., 3) position/partial arrays.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


def _stack(x, y, z):
    return np.stack(np.broadcast_arrays(x, y, z), axis=-1).astype(float)


@dataclass(frozen=True)
class ParametricSurface:
    """Regular surface patch over a rectangle [u0,u1] x [v0,v1]."""

    name: str
    domain: tuple[float, float, float, float]
    position: Callable
    du: Callable
    dv: Callable
    duu: Callable
    duv: Callable
    dvv: Callable

    def clip(self, u, v):
        u0, u1, v0, v1 = self.domain
        return np.clip(u, u0, u1), np.clip(v, v0, v1)


def plane(u0=0.0, u1=1.0, v0=0.0, v1=1.0) -> ParametricSurface:
    zero = lambda u, v: _stack(np.zeros_like(np.asarray(u, dtype=float)), 0.0, 0.0)
    return ParametricSurface(
        name="plane",
        domain=(u0, u1, v0, v1),
        position=lambda u, v: _stack(u, v, np.zeros_like(np.asarray(u, dtype=float))),
        du=lambda u, v: _stack(np.ones_like(np.asarray(u, dtype=float)), 0.0, 0.0),
        dv=lambda u, v: _stack(np.zeros_like(np.asarray(u, dtype=float)), 1.0, 0.0),
        duu=zero, duv=zero, dvv=zero,
    )


def sphere_patch(radius=1.0, u0=0.0, u1=1.2, v0=0.5, v1=1.5) -> ParametricSurface:
    """Sphere of the given radius; u is azimuth, v is colatitude in (0, pi)."""
    R = float(radius)
    if not (0.0 < v0 < v1 < np.pi):
        raise ValueError("sphere patch must avoid the poles: 0 < v0 < v1 < pi")

    def pos(u, v):
        return _stack(R * np.sin(v) * np.cos(u), R * np.sin(v) * np.sin(u), R * np.cos(v))

    def du(u, v):
        return _stack(-R * np.sin(v) * np.sin(u), R * np.sin(v) * np.cos(u), np.zeros_like(np.asarray(v, dtype=float)))

    def dv(u, v):
        return _stack(R * np.cos(v) * np.cos(u), R * np.cos(v) * np.sin(u), -R * np.sin(v))

    def duu(u, v):
        return _stack(-R * np.sin(v) * np.cos(u), -R * np.sin(v) * np.sin(u), np.zeros_like(np.asarray(v, dtype=float)))

    def duv(u, v):
        return _stack(-R * np.cos(v) * np.sin(u), R * np.cos(v) * np.cos(u), np.zeros_like(np.asarray(v, dtype=float)))

    def dvv(u, v):
        return _stack(-R * np.sin(v) * np.cos(u), -R * np.sin(v) * np.sin(u), -R * np.cos(v))

    return ParametricSurface("sphere", (u0, u1, v0, v1), pos, du, dv, duu, duv, dvv)


def cylinder_patch(radius=1.0, u0=0.0, u1=np.pi, v0=0.0, v1=1.0) -> ParametricSurface:
    """Right circular cylinder; u is the angular, v the axial coordinate."""
    R = float(radius)

    def pos(u, v):
        return _stack(R * np.cos(u), R * np.sin(u), v)

    def du(u, v):
        return _stack(-R * np.sin(u), R * np.cos(u), np.zeros_like(np.asarray(u, dtype=float)))

    def dv(u, v):
        z = np.zeros_like(np.asarray(u, dtype=float))
        return _stack(z, z, np.ones_like(np.asarray(u, dtype=float)))

    def duu(u, v):
        return _stack(-R * np.cos(u), -R * np.sin(u), np.zeros_like(np.asarray(u, dtype=float)))

    def zero(u, v):
        z = np.zeros_like(np.asarray(u, dtype=float))
        return _stack(z, z, z)

    return ParametricSurface("cylinder", (u0, u1, v0, v1), pos, du, dv, duu, zero, zero)


def torus_patch(major=2.0, minor=0.5, u0=0.0, u1=np.pi, v0=0.0, v1=np.pi) -> ParametricSurface:
    """Torus; u runs around the axis, v around the tube."""
    R = float(major)
    r = float(minor)

    def pos(u, v):
        w = R + r * np.cos(v)
        return _stack(w * np.cos(u), w * np.sin(u), r * np.sin(v))

    def du(u, v):
        w = R + r * np.cos(v)
        return _stack(-w * np.sin(u), w * np.cos(u), np.zeros_like(np.asarray(v, dtype=float)))

    def dv(u, v):
        return _stack(-r * np.sin(v) * np.cos(u), -r * np.sin(v) * np.sin(u), r * np.cos(v))

    def duu(u, v):
        w = R + r * np.cos(v)
        return _stack(-w * np.cos(u), -w * np.sin(u), np.zeros_like(np.asarray(v, dtype=float)))

    def duv(u, v):
        return _stack(r * np.sin(v) * np.sin(u), -r * np.sin(v) * np.cos(u), np.zeros_like(np.asarray(v, dtype=float)))

    def dvv(u, v):
        return _stack(-r * np.cos(v) * np.cos(u), -r * np.cos(v) * np.sin(u), -r * np.sin(v))

    return ParametricSurface("torus", (u0, u1, v0, v1), pos, du, dv, duu, duv, dvv)


def wavy_patch(amplitude=0.5, freq_u=1.0, freq_v=1.0,
               u0=0.0, u1=2.0 * np.pi, v0=0.0, v1=2.0 * np.pi) -> ParametricSurface:
    """Graph surface z = A sin(a u) cos(b v), spatially varying curvature."""
    A = float(amplitude)
    a = float(freq_u)
    b = float(freq_v)

    def pos(u, v):
        return _stack(u, v, A * np.sin(a * u) * np.cos(b * v))

    def du(u, v):
        one = np.ones_like(np.asarray(u, dtype=float))
        return _stack(one, 0.0 * one, A * a * np.cos(a * u) * np.cos(b * v))

    def dv(u, v):
        one = np.ones_like(np.asarray(u, dtype=float))
        return _stack(0.0 * one, one, -A * b * np.sin(a * u) * np.sin(b * v))

    def duu(u, v):
        z = np.zeros_like(np.asarray(u, dtype=float))
        return _stack(z, z, -A * a * a * np.sin(a * u) * np.cos(b * v))

    def duv(u, v):
        z = np.zeros_like(np.asarray(u, dtype=float))
        return _stack(z, z, -A * a * b * np.cos(a * u) * np.sin(b * v))

    def dvv(u, v):
        z = np.zeros_like(np.asarray(u, dtype=float))
        return _stack(z, z, -A * b * b * np.sin(a * u) * np.cos(b * v))

    return ParametricSurface("wavy", (u0, u1, v0, v1), pos, du, dv, duu, duv, dvv)


_FACTORIES = {
    "plane": plane,
    "sphere": sphere_patch,
    "cylinder": cylinder_patch,
    "torus": torus_patch,
    "wavy": wavy_patch,
}


def make_surface(name: str, **params) -> ParametricSurface:
    """Instantiate a catalog surface by name; unknown names raise KeyError."""
    try:
        factory = _FACTORIES[name]
    except KeyError:
        raise KeyError(f"unknown surface '{name}' (have: {sorted(_FACTORIES)})") from None
    return factory(**params)
