"""Concrete model builders.

Each builder discretizes one of the study systems into a dense generator
on a Gram-normed state space:

* damped wave on an interval (Dirichlet ends) and on a circle (periodic,
  with a one-dimensional kernel),
* Schrodinger on the sphere restricted to a single azimuthal block, with
  axisymmetric damping assembled by Gauss-Legendre quadrature,
* a 1D heat-wave transmission system (heat on (-1,0), wave on (0,1)),
* a boundary-forced damped wave whose Dirichlet input enters through a
  ghost-node elimination,
* small synthetic models used by the scan modules.

Wave-type Grams are discrete energy forms, so the free semigroups are
contractive for the exact reason the continuous ones are: the discrete
energy identity holds without remainder terms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict
from functools import lru_cache

import numpy as np

from .errors import (
    InvalidGrid,
    NonAxisymmetricDamping,
    QuadratureUnderResolved,
    ZeroDamping,
)
from .operator_core import Model, StateSpace, build_model, make_state_space


# ---------------------------------------------------------------------------
# damping profiles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DampingProfile:
    """Pointwise damping coefficient a(x) >= 0.

    Kinds
    -----
    constant : a = amplitude everywhere
    bump : smooth compactly supported bump of the given width around
        ``center`` (amplitude at the center, vanishing to all orders at
        the support edge)
    power : amplitude * |x - center|^exponent
    cap : axisymmetric polar-cap profile as a function of s = x3,
        amplitude * exp(-width / (|s| - cutoff)) for |s| > cutoff and
        zero on the equatorial band |s| <= cutoff
    """

    kind: str
    amplitude: float = 1.0
    center: float = 0.0
    width: float = 1.0
    cutoff: float = 0.0
    exponent: float = 2.0

    def __post_init__(self):
        if self.kind not in ("constant", "bump", "power", "cap"):
            raise ValueError(f"unknown damping kind {self.kind!r}")
        if self.amplitude < 0:
            raise ValueError("damping amplitude must be nonnegative")
        if self.kind == "cap" and not (0 <= self.cutoff < 1):
            raise ValueError("cap cutoff must lie in [0, 1)")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return np.full_like(x, self.amplitude)
        if self.kind == "bump":
            xi = 2.0 * (x - self.center) / self.width
            out = np.zeros_like(x)
            inside = np.abs(xi) < 1
            z = xi[inside]
            out[inside] = self.amplitude * np.exp(1.0 - 1.0 / (1.0 - z * z))
            return out
        if self.kind == "power":
            return self.amplitude * np.abs(x - self.center) ** self.exponent
        # cap
        s = np.abs(x)
        out = np.zeros_like(x)
        inside = s > self.cutoff
        gap = s[inside] - self.cutoff
        out[inside] = self.amplitude * np.exp(-self.width / gap)
        return out

    @property
    def is_axisymmetric(self) -> bool:
        return self.kind in ("constant", "cap")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "DampingProfile":
        return cls(**d)


# ---------------------------------------------------------------------------
# damped wave on an interval
# ---------------------------------------------------------------------------

def _check_grid(n: int, minimum: int = 2):
    if not isinstance(n, int) or n < minimum:
        raise InvalidGrid(f"need at least {minimum} grid nodes, got {n}")


def build_damped_wave_interval(n: int, length: float, damping: DampingProfile,
                               label: str | None = None) -> Model:
    """Damped wave on (0, length) with Dirichlet ends.

    State (u, v) on the n interior nodes; A = [[0, I], [L_h, -diag(a)]]
    with L_h the standard 3-point Laplacian. The Gram is the discrete
    energy form |grad_h u|^2 + |v|^2 with trapezoid weights, under which
    the free semigroup dissipates exactly 2 * sum h a_i v_i^2.
    """
    _check_grid(n)
    if length <= 0:
        raise InvalidGrid("length must be positive")
    h = length / (n + 1)
    x = h * np.arange(1, n + 1)
    a = damping(x)
    if np.any(a < 0):
        raise ValueError("damping must be nonnegative")

    lap = (np.diag(-2.0 * np.ones(n)) + np.diag(np.ones(n - 1), 1)
           + np.diag(np.ones(n - 1), -1)) / h**2
    A = np.zeros((2 * n, 2 * n))
    A[:n, n:] = np.eye(n)
    A[n:, :n] = lap
    A[n:, n:] = -np.diag(a)

    stiff = -h * lap            # grad-form matrix, u* S u = |grad_h u|^2
    gram = np.zeros((2 * n, 2 * n))
    gram[:n, :n] = stiff
    gram[n:, n:] = h * np.eye(n)
    space = make_state_space(2 * n, gram, "real")
    return build_model(space, A, label=label or f"damped_wave_interval(n={n})")


def build_damped_wave_circle(n: int, damping: DampingProfile,
                             length: float = 2 * math.pi,
                             label: str | None = None) -> Model:
    """Damped wave on a circle of the given circumference.

    Periodic finite differences on n nodes. The generator kernel is the
    constant-displacement state; ``pi0`` is the closed-form spectral
    projector (u, v) -> (mean of a*u + v with respect to the damping
    weight) * (1, 0), and the Gram augments the energy seminorm with the
    squared mean of u so that it is positive definite on the whole space.
    """
    _check_grid(n, 3)
    h = length / n
    x = h * np.arange(n)
    a = damping(x)
    if np.any(a < 0):
        raise ValueError("damping must be nonnegative")
    integral_a = h * float(np.sum(a))
    if integral_a <= 0:
        raise ZeroDamping("circle model needs damping with positive integral")

    lap = np.diag(-2.0 * np.ones(n))
    for i in range(n):
        lap[i, (i + 1) % n] += 1.0
        lap[i, (i - 1) % n] += 1.0
    lap /= h**2

    A = np.zeros((2 * n, 2 * n))
    A[:n, n:] = np.eye(n)
    A[n:, :n] = lap
    A[n:, n:] = -np.diag(a)

    # projector onto the kernel span{(1, 0)}
    e_k = np.zeros(2 * n)
    e_k[:n] = 1.0
    row = np.concatenate([a, np.ones(n)]) * h / integral_a
    pi0 = np.outer(e_k, row)

    stiff = -h * lap
    gram = np.zeros((2 * n, 2 * n))
    gram[:n, :n] = stiff + (h**2 / length) * np.ones((n, n))
    gram[n:, n:] = h * np.eye(n)
    space = make_state_space(2 * n, gram, "real")
    return build_model(space, A, kernel_basis=(e_k,), pi0=pi0,
                       label=label or f"damped_wave_circle(n={n})")


# ---------------------------------------------------------------------------
# Schrodinger on the sphere, one azimuthal block
# ---------------------------------------------------------------------------

def normalized_legendre_block(m: int, lmax: int, s) -> np.ndarray:
    """Orthonormalized associated Legendre values X_l^m(s), rows l=m..lmax.

    Normalization: integral of X_l^m(s)^2 over s in (-1, 1) equals 1, so
    that X_l^m(cos theta) e^{i m phi} / sqrt(2 pi) is an orthonormal
    spherical harmonic. Uses the standard stable three-term recurrence.
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    rows = lmax - m + 1
    out = np.zeros((rows, s.size))
    x = np.full(s.size, 1.0 / math.sqrt(2.0))
    sq = np.sqrt(np.maximum(1.0 - s * s, 0.0))
    for mm in range(1, m + 1):
        x = -math.sqrt((2 * mm + 1) / (2.0 * mm)) * sq * x
    out[0] = x
    if lmax > m:
        out[1] = math.sqrt(2 * m + 3) * s * x
    for l in range(m + 2, lmax + 1):
        c1 = math.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
        c2 = math.sqrt(((l - 1.0) ** 2 - m * m) / (4.0 * (l - 1.0) ** 2 - 1.0))
        out[l - m] = c1 * (s * out[l - m - 1] - c2 * out[l - m - 2])
    return out


@dataclass
class SphereBlockModel:
    """One azimuthal block of the damped Schrodinger equation on S^2.

    The block of azimuthal order m keeps the spherical-harmonic degrees
    l = m..Jmax; in that orthonormal basis the generator is
    A = -i diag(l(l+1)) - M_a with M_a the (Hermitian PSD) matrix of
    multiplication by the axisymmetric damping a(x3).
    """

    model: Model
    m: int
    Jmax: int
    degrees: np.ndarray
    eigenvalues: np.ndarray        # l(l+1) for each retained degree
    multiplier: np.ndarray         # M_a
    damping: DampingProfile
    quad_nodes: int

    @property
    def dim(self) -> int:
        return self.model.dim

    def hk_weights(self, k: int) -> np.ndarray:
        return (1.0 + self.eigenvalues) ** (k / 2.0)

    def hk_norm(self, x, k: int) -> float:
        return float(np.linalg.norm(self.hk_weights(k) * np.asarray(x, dtype=complex)))


@lru_cache(maxsize=8)
def _gauss_legendre_rule(nodes: int):
    # leggauss costs O(nodes^2); block scans reuse the same counts
    s, w = np.polynomial.legendre.leggauss(nodes)
    s.setflags(write=False)
    w.setflags(write=False)
    return s, w


def _sphere_multiplier(m: int, Jmax: int, damping: DampingProfile, nodes: int) -> np.ndarray:
    s, w = _gauss_legendre_rule(nodes)
    X = normalized_legendre_block(m, Jmax, s)
    return (X * (w * damping(s))) @ X.T


def build_sphere_schrodinger(Jmax: int, m: int, damping: DampingProfile,
                             quad_nodes: int | None = None,
                             label: str | None = None) -> SphereBlockModel:
    """Assemble the azimuthal block m with degrees up to Jmax.

    The damping must be axisymmetric (constant or cap profile). M_a is
    assembled by Gauss-Legendre quadrature in s = cos theta; the builder
    re-assembles with 1.5x the nodes and raises QuadratureUnderResolved
    if any entry moves by more than 1e-10.
    """
    if m < 0 or Jmax < m:
        raise InvalidGrid(f"need 0 <= m <= Jmax, got m={m}, Jmax={Jmax}")
    if not damping.is_axisymmetric:
        raise NonAxisymmetricDamping(
            f"sphere blocks need an axisymmetric profile, got kind {damping.kind!r}")
    if quad_nodes is None:
        quad_nodes = max(2 * Jmax + 16, 360)
    if quad_nodes < 2 * Jmax + 16:
        raise InvalidGrid(f"need at least {2 * Jmax + 16} quadrature nodes")

    M_a = _sphere_multiplier(m, Jmax, damping, quad_nodes)
    M_fine = _sphere_multiplier(m, Jmax, damping, int(math.ceil(1.5 * quad_nodes)))
    drift = float(np.max(np.abs(M_a - M_fine)))
    if drift > 1e-10:
        raise QuadratureUnderResolved(
            f"multiplier entries moved by {drift:.3e} under node refinement")
    M_a = 0.5 * (M_fine + M_fine.T)

    degrees = np.arange(m, Jmax + 1)
    lam = degrees * (degrees + 1.0)
    A = -1j * np.diag(lam) - M_a
    dim = degrees.size
    space = make_state_space(dim, np.eye(dim), "complex")
    model = build_model(space, A,
                        label=label or f"sphere_schrodinger(m={m}, Jmax={Jmax})")
    return SphereBlockModel(model=model, m=m, Jmax=Jmax, degrees=degrees,
                            eigenvalues=lam, multiplier=M_a, damping=damping,
                            quad_nodes=quad_nodes)


def equatorial_harmonic(block: SphereBlockModel) -> np.ndarray:
    """Unit coefficient vector of the degree l = m harmonic of the block.

    For m = j this is the normalized equatorial Gaussian beam
    (x1 + i x2)^j restricted to the sphere.
    """
    phi = np.zeros(block.dim, dtype=complex)
    phi[0] = 1.0
    return phi


def equatorial_cap_mass(j: int, r: float, nodes: int = 600) -> float:
    """L^2 mass of the normalized equatorial harmonic on a polar cap.

    Integrates |Phi_j|^2 over the geodesic ball of radius r around the
    north pole by Gauss-Legendre quadrature in s = cos theta.
    """
    s0 = math.cos(r)
    s, w = np.polynomial.legendre.leggauss(nodes)
    s = 0.5 * (s + 1.0) * (1.0 - s0) + s0
    w = 0.5 * (1.0 - s0) * w
    X = normalized_legendre_block(j, j, s)[0]
    return float(np.sum(w * X * X))


# ---------------------------------------------------------------------------
# 1D heat-wave transmission system
# ---------------------------------------------------------------------------

def build_heat_wave_1d(n_heat: int, n_wave: int, label: str | None = None) -> Model:
    """Heat on (-1, 0) coupled to a wave on (0, 1) through x = 0.

    Boundary conditions u(-1) = 0 and w(1) = 0; at the interface the
    heat trace equals the wave velocity (enforced strongly: they share
    one state coordinate) and the heat flux matches the elastic flux
    through one-sided difference quotients, which are second-order
    accurate at the half-node. State layout: interior heat values u,
    wave displacements w (including the interface), wave velocities v
    (v[0] is the shared interface coordinate). The Gram is
    (1/2)(|u|^2 + |grad_h w|^2 + |v|^2); with the flux closure used here
    the discrete energy identity is exact, so the free semigroup is
    contractive.
    """
    _check_grid(n_heat)
    _check_grid(n_wave)
    hH = 1.0 / n_heat
    hW = 1.0 / n_wave
    nu = n_heat - 1
    dim = nu + 2 * n_wave
    iu = lambda i: i - 1                    # heat node i = 1..n_heat-1
    iw = lambda i: nu + i                   # wave node i = 0..n_wave-1
    iv = lambda i: nu + n_wave + i

    A = np.zeros((dim, dim))
    # heat interior, ghost values u_0 = 0 and u_{n_heat} = v_0
    for i in range(1, n_heat):
        A[iu(i), iu(i)] = -2.0 / hH**2
        if i > 1:
            A[iu(i), iu(i - 1)] = 1.0 / hH**2
        if i < n_heat - 1:
            A[iu(i), iu(i + 1)] = 1.0 / hH**2
        else:
            A[iu(i), iv(0)] = 1.0 / hH**2
    # wave displacements
    for i in range(n_wave):
        A[iw(i), iv(i)] = 1.0
    # wave interior velocities, w_{n_wave} = 0
    for i in range(1, n_wave):
        A[iv(i), iw(i)] = -2.0 / hW**2
        A[iv(i), iw(i - 1)] = 1.0 / hW**2
        if i < n_wave - 1:
            A[iv(i), iw(i + 1)] = 1.0 / hW**2
    # interface momentum balance: flux mismatch drives the shared value
    c = 2.0 / (hH + hW)
    A[iv(0), iw(1)] = c / hW
    A[iv(0), iw(0)] = -c / hW
    A[iv(0), iv(0)] = -c / hH
    A[iv(0), iu(n_heat - 1)] = c / hH

    gram = np.zeros((dim, dim))
    for i in range(1, n_heat):
        gram[iu(i), iu(i)] = 0.5 * hH
    # gradient form over w with w_{n_wave} = 0
    SW = np.zeros((n_wave, n_wave))
    for i in range(n_wave):
        SW[i, i] = 2.0 / hW
        if i > 0:
            SW[i, i - 1] = -1.0 / hW
            SW[i - 1, i] = -1.0 / hW
    SW[0, 0] = 1.0 / hW
    gram[nu:nu + n_wave, nu:nu + n_wave] = 0.5 * SW
    gram[iv(0), iv(0)] = 0.25 * (hH + hW)
    for i in range(1, n_wave):
        gram[iv(i), iv(i)] = 0.5 * hW

    space = make_state_space(dim, gram, "real")
    return build_model(space, A,
                       label=label or f"heat_wave_1d(nH={n_heat}, nW={n_wave})")


def heat_wave_layout(n_heat: int, n_wave: int) -> dict:
    """Index ranges of the (u, w, v) blocks inside the flat state."""
    nu = n_heat - 1
    return {
        "heat": (0, nu),
        "displacement": (nu, nu + n_wave),
        "velocity": (nu + n_wave, nu + 2 * n_wave),
        "interface": nu + n_wave,
    }


# ---------------------------------------------------------------------------
# boundary-forced damped wave
# ---------------------------------------------------------------------------

def build_boundary_forced_wave(n: int, length: float, damping: DampingProfile,
                               label: str | None = None) -> Model:
    """Interval damped wave driven through its left Dirichlet value.

    Ghost-node elimination of the inhomogeneous boundary condition
    u(t, 0) = g(t) yields an input matrix B injecting g(t)/h^2 into the
    velocity equation of the first interior node. The free part must be
    exponentially stable, so identically vanishing damping is rejected.
    """
    if damping(np.linspace(0, length, 257)).max() <= 0:
        raise ZeroDamping("boundary-forced model needs nontrivial damping")
    base = build_damped_wave_interval(n, length, damping)
    h = length / (n + 1)
    B = np.zeros(2 * n)
    B[n] = 1.0 / h**2
    return build_model(base.space, base.A, B=B,
                       label=label or f"boundary_forced_wave(n={n})")


# ---------------------------------------------------------------------------
# small synthetic models
# ---------------------------------------------------------------------------

def build_scalar_model(lam: complex = -1.0, label: str | None = None) -> Model:
    """One-dimensional model u' = lam u with the trivial Gram."""
    space = make_state_space(1, np.eye(1),
                             "real" if np.isreal(lam) else "complex")
    return build_model(space, np.array([[lam]], dtype=complex),
                       label=label or f"scalar(lam={lam})")


def build_synthetic_resolvent_model(n_modes: int, alpha: float,
                                    label: str | None = None) -> Model:
    """Normal diagonal model with resolvent growth |R(i eta)| ~ eta^alpha.

    Eigenvalues -k^{-alpha} + i k for k = 1..n_modes: the resolvent peak
    at height k^alpha sits at eta = k, and |e^{tA} A^{-1}| decays like
    t^{-1/alpha}, the rate matched by the resolvent-to-decay equivalence
    on Hilbert spaces.
    """
    k = np.arange(1, n_modes + 1, dtype=float)
    eigs = -(k ** (-alpha)) + 1j * k
    space = make_state_space(n_modes, np.eye(n_modes), "complex")
    return build_model(space, np.diag(eigs),
                       label=label or f"synthetic_resolvent(alpha={alpha})")


def build_diagonal_model(eigenvalues, gram=None, label: str = "diagonal") -> Model:
    """Diagonal model from an explicit eigenvalue list (test fixture)."""
    eigs = np.asarray(eigenvalues, dtype=complex)
    n = eigs.size
    space = make_state_space(n, np.eye(n) if gram is None else gram, "complex")
    return build_model(space, np.diag(eigs), label=label)
