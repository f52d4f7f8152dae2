"""Closed surfaces in R^3 star-shaped about a center, with product quadrature.

A surface is x(theta, phi) = c + r(theta, phi) s(theta, phi) with s the unit
direction.  Spheres have constant r; star surfaces take r from an expression
in ``theta`` and ``phi`` whose partials are evaluated exactly with jets.
"""

import numpy as np

from . import sph
from .errors import AdmissibilityError, ConfigError
from .expr import parse_expr

N_DIM = 3
DEFAULT_QUAD_FACTOR = 3
RADIAL_MARGIN = 1e-9


def _geometry_at(center, radius, profile, theta, phi):
    """Points, unit outward normals, area density relative to the unit sphere,
    and the two tangent vectors at parameters (theta, phi)."""
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    st, ct = np.sin(theta), np.cos(theta)
    sp, cp = np.sin(phi), np.cos(phi)
    s_hat = np.stack([st * cp, st * sp, ct], axis=-1)
    t_hat = np.stack([ct * cp, ct * sp, -st], axis=-1)
    p_hat = np.stack([-sp, cp, np.zeros_like(phi)], axis=-1)
    if profile is None:
        r = np.full_like(theta, radius)
        r_t = np.zeros_like(theta)
        r_p = np.zeros_like(theta)
    else:
        j = profile.jet(("theta", "phi"), theta=theta, phi=phi)
        r, r_t, r_p = j.v, j.a, j.b
        if np.any(r <= 0):
            raise AdmissibilityError(f"profile {profile.text!r} is not positive everywhere")
    x_t = r_t[..., None] * s_hat + r[..., None] * t_hat
    x_p = r_p[..., None] * s_hat + (r * st)[..., None] * p_hat
    # x_t cross x_p / sin(theta), pole-safe form
    n = (r * r)[..., None] * s_hat - (r * r_t)[..., None] * t_hat - (r * r_p / np.where(st == 0, 1.0, st))[..., None] * p_hat
    jac = np.linalg.norm(n, axis=-1)
    normals = n / jac[..., None]
    points = np.asarray(center) + r[..., None] * s_hat
    return points, normals, jac, x_t, x_p


class Surface:
    """Immutable quadrature surface; see ``make_sphere`` and ``make_star``."""

    def __init__(self, kind, center, L, radius=None, profile=None, quad_order=None):
        if L < 2:
            raise ConfigError(f"quadrature order L = {L} must be at least 2")
        self.kind = kind
        self.center = np.broadcast_to(np.asarray(center, dtype=float), (3,)).copy()
        self.L = int(L)
        self.radius = None if radius is None else float(radius)
        self.profile = profile
        self.quad_order = int(quad_order) if quad_order else DEFAULT_QUAD_FACTOR * self.L
        self.theta, self.phi, self.unit_weights = sph.gauss_grid(self.L)
        pts, nrm, jac, x_t, x_p = _geometry_at(self.center, self.radius, profile, self.theta, self.phi)
        self.nodes = pts
        self.normals = nrm
        self.jacobian = jac
        self.weights = self.unit_weights * jac
        self._tangents = (x_t, x_p)
        for a in (self.nodes, self.normals, self.weights, self.jacobian):
            a.setflags(write=False)
        self._cache = {}

    def __repr__(self):
        shape = f"radius={self.radius}" if self.kind == "sphere" else f"profile={self.profile.text!r}"
        return f"Surface({self.kind}, center={self.center.tolist()}, {shape}, L={self.L})"

    @property
    def size(self):
        return len(self.weights)

    @property
    def area(self):
        return float(np.sum(self.weights))

    @property
    def mean_spacing(self):
        return float(np.sqrt(self.area / self.size))

    @property
    def basis(self):
        return sph.grid_basis(self.L)

    def describe(self):
        d = {"kind": self.kind, "center": self.center.tolist(), "order": self.L}
        if self.kind == "sphere":
            d["radius"] = self.radius
        else:
            d["profile"] = self.profile.text
        return d

    def evaluate(self, theta, phi):
        """(points, normals, area density) at arbitrary parameters."""
        return _geometry_at(self.center, self.radius, self.profile, theta, phi)[:3]

    def radial(self, theta, phi):
        if self.profile is None:
            return np.full(np.shape(theta), self.radius)
        return self.profile(theta=theta, phi=phi)

    def cached(self, key, build):
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]

    def with_order(self, L):
        """Same geometry sampled on the order-L grid."""
        if L == self.L:
            return self
        return self.cached(("order", L), lambda: Surface(self.kind, self.center, L, self.radius,
                                                         self.profile, self.quad_order))

    def quadrature(self, order=None):
        """Refined surface of order ``order`` and the matrix interpolating
        nodal data of ``self`` onto its nodes."""
        order = order or self.quad_order
        if order == self.L:
            return self, None

        def build():
            fine = self.with_order(order)
            return fine, self.basis.interpolation(fine.theta, fine.phi)
        return self.cached(("quad", order), build)

    def interpolation(self, theta, phi):
        return self.basis.interpolation(theta, phi)

    def surface_gradient(self):
        """Three N x N matrices G_k with (grad_Gamma mu)_k = G_k @ mu."""
        def build():
            x_t, x_p = self._tangents
            g11 = np.einsum("ij,ij->i", x_t, x_t)
            g12 = np.einsum("ij,ij->i", x_t, x_p)
            g22 = np.einsum("ij,ij->i", x_p, x_p)
            det = g11 * g22 - g12 * g12
            Dt, Dp = self.basis.angular_derivatives()
            # contravariant coefficients of x_t and x_p
            ct = (g22[:, None] * Dt - g12[:, None] * Dp) / det[:, None]
            cp = (g11[:, None] * Dp - g12[:, None] * Dt) / det[:, None]
            return [x_t[:, k, None] * ct + x_p[:, k, None] * cp for k in range(3)]
        return self.cached("grad", build)

    def distance(self, points):
        """Distance from each point to the surface (exact for spheres, from a
        dense sample otherwise)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if self.kind == "sphere":
            return np.abs(np.linalg.norm(points - self.center, axis=1) - self.radius)
        fine = self.with_order(2 * self.quad_order)
        out = np.empty(len(points))
        for a in range(0, len(points), 64):
            d = points[a:a + 64, None, :] - fine.nodes[None, :, :]
            out[a:a + 64] = np.sqrt(np.min(np.einsum("ijk,ijk->ij", d, d), axis=1))
        return out

    def radial_margin(self, points):
        """r(direction) - |p - c|: positive strictly inside."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        rel = points - self.center
        th, ph = sph.to_angles(rel)
        return self.radial(th, ph) - np.linalg.norm(rel, axis=1)

    def contains(self, points):
        return self.radial_margin(points) > 0


class ScaledSurface:
    """The surface eps * base (scaled about the origin)."""

    def __init__(self, base, epsilon):
        if not epsilon > 0:
            raise ValueError(f"scale factor must be positive, got {epsilon}")
        self.base = base
        self.epsilon = float(epsilon)
        self.nodes = self.epsilon * base.nodes
        self.normals = base.normals
        self.weights = self.epsilon ** (N_DIM - 1) * base.weights

    @property
    def size(self):
        return self.base.size

    @property
    def area(self):
        return float(np.sum(self.weights))

    @property
    def center(self):
        return self.epsilon * self.base.center


def make_sphere(center, radius, L, quad_order=None):
    if not radius > 0:
        raise ConfigError(f"sphere radius must be positive, got {radius}")
    return Surface("sphere", center, L, radius=radius, quad_order=quad_order)


def make_star(profile, L, center=(0.0, 0.0, 0.0), quad_order=None):
    if isinstance(profile, str):
        profile = parse_expr(profile, ("theta", "phi"))
    return Surface("star", center, L, profile=profile, quad_order=quad_order)


def surface_from_config(d):
    try:
        kind = d["kind"]
        L = int(d["order"])
        center = d.get("center", [0.0, 0.0, 0.0])
        quad = d.get("quad_order")
        if kind == "sphere":
            return make_sphere(center, float(d["radius"]), L, quad)
        if kind == "star":
            return make_star(d["profile"], L, center, quad)
    except KeyError as e:
        raise ConfigError(f"surface description lacks {e}") from None
    raise ConfigError(f"unknown surface kind {kind!r}")


def scale_surface(s, epsilon):
    return ScaledSurface(s, epsilon)


def integrate(s, f):
    """Quadrature of f over s; f is an array of nodal values or a callable
    applied to the (N, 3) node array."""
    vals = f(s.nodes) if callable(f) else f
    vals = np.broadcast_to(np.asarray(vals, dtype=float), np.shape(vals))
    if vals.ndim == 0:
        vals = np.full(s.size, float(vals))
    if vals.shape[0] != s.size:
        raise ValueError(f"field has {vals.shape[0]} values, surface has {s.size} nodes")
    return float(s.weights @ vals)


def check_admissible(outer, inner, epsilon):
    """Whether eps * closure(inner) lies strictly inside outer (and 0 < eps < 1)."""
    if not 0 < epsilon < 1:
        return False
    if outer.kind == "sphere" and inner.kind == "sphere":
        gap = np.linalg.norm(outer.center - epsilon * inner.center)
        return bool(gap + epsilon * inner.radius < outer.radius)
    pts = epsilon * inner.with_order(max(2 * inner.L, 16)).nodes
    return bool(np.all(outer.radial_margin(pts) >= RADIAL_MARGIN))
