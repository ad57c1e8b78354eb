"""Time-periodic forcings and one-period Duhamel responses.

A forcing is a T-periodic map t -> f(t) into a model's state space with
one of three representations:

* Fourier: finitely many harmonics exp(i 2 pi k t / T), with exact
  derivatives of every order,
* sampled: values on a uniform grid carrying explicit derivative stacks
  (no numerical differentiation is ever performed on samples),
* semigroup pullback: f(s) = scale * e^{(s-T)A} phi / T, the profile
  used to drive a mode resonantly; derivatives are again exact since
  d/ds maps the profile to the pullback of A phi.

The central quantity is the one-period response
F_T(f) = integral_0^T e^{A(T-s)} f(s) ds, computed either by panelwise
Gauss-Legendre quadrature with a refinement guard, or in closed form
per harmonic for Fourier data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ClassViolation,
    DerivativesUnavailable,
    NonFiniteInput,
    QuadratureUnderResolved,
    ResonantHarmonic,
)
from .operator_core import Model, StateSpace, deflated_block, propagate, propagator_matrix

_PER0_DETECT_MAX = 12


def gauss_panels(T: float, panels: int, order: int):
    """Composite Gauss-Legendre nodes and weights on [0, T]."""
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(0.0, T, panels + 1)
    mid = 0.5 * (edges[:-1, None] + edges[1:, None])
    half = 0.5 * (edges[1:, None] - edges[:-1, None])
    nodes = (mid + half * x).ravel()
    weights = (half * np.broadcast_to(w, (panels, order))).ravel()
    return nodes, weights


# ---------------------------------------------------------------------------
# forcing representations
# ---------------------------------------------------------------------------

class PeriodicForcing:
    """Base class; subclasses provide ``eval_many``."""

    period: float
    space: StateSpace | None
    dim: int

    def eval(self, t: float, deriv: int = 0) -> np.ndarray:
        return self.eval_many(np.array([t]), deriv)[0]

    def eval_many(self, ts, deriv: int = 0) -> np.ndarray:
        raise NotImplementedError

    def derivative_forcing(self, order: int) -> "PeriodicForcing":
        raise NotImplementedError

    @property
    def max_derivative_order(self) -> int | None:
        """Highest available derivative order (None means unlimited)."""
        return None

    @property
    def per0_order(self) -> int:
        return 0

    @property
    def tag(self) -> str:
        k = self.per0_order
        return f"Wk1_per0({k})" if k >= 1 else "Wk1_per"

    def _norm(self, vec: np.ndarray) -> float:
        if self.space is not None:
            return self.space.norm(vec)
        return float(np.linalg.norm(vec))


class FourierForcing(PeriodicForcing):
    """f(t) = sum_k c_k exp(i 2 pi k t / T) with finitely many harmonics."""

    def __init__(self, period: float, harmonics, coefficients, space=None):
        if period <= 0:
            raise ValueError("period must be positive")
        self.period = float(period)
        self.harmonics = np.asarray(harmonics, dtype=int)
        C = np.asarray(coefficients, dtype=complex)
        if C.ndim == 1:
            C = C[:, None]
        if C.shape[0] != self.harmonics.size:
            raise ValueError("one coefficient row per harmonic required")
        if not np.all(np.isfinite(C)):
            raise NonFiniteInput("fourier coefficients must be finite")
        self.coefficients = C
        self.space = space
        self.dim = C.shape[1]
        self._per0 = None

    @property
    def omega(self) -> np.ndarray:
        return 2.0 * np.pi * self.harmonics / self.period

    def eval_many(self, ts, deriv: int = 0) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        factors = (1j * self.omega) ** deriv
        phases = np.exp(1j * np.outer(ts, self.omega))
        return (phases * factors) @ self.coefficients

    def derivative_forcing(self, order: int) -> "FourierForcing":
        factors = (1j * self.omega) ** order
        return FourierForcing(self.period, self.harmonics,
                              self.coefficients * factors[:, None], self.space)

    @property
    def per0_order(self) -> int:
        if self._per0 is None:
            amp = np.max(np.abs(self.coefficients), initial=0.0)
            order = 0
            for j in range(_PER0_DETECT_MAX):
                endpoint = ((1j * self.omega) ** j) @ self.coefficients
                scale = max(amp * np.max(np.abs(self.omega), initial=1.0) ** j, 1e-300)
                if np.max(np.abs(endpoint)) > 1e-10 * scale:
                    break
                order = j + 1
            self._per0 = order
        return self._per0


def make_fourier_forcing(period: float, coefficients: dict, space=None) -> FourierForcing:
    """Build a Fourier forcing from a mapping {harmonic k: vector}."""
    ks = sorted(coefficients)
    C = np.array([np.atleast_1d(np.asarray(coefficients[k], dtype=complex)) for k in ks])
    return FourierForcing(period, np.array(ks, dtype=int), C, space)


def per0_bump_forcing(period: float, order: int, vector, space=None) -> FourierForcing:
    """sin(pi t / T)^{2 order} times a fixed vector, as exact Fourier data.

    The profile vanishes together with its first 2*order - 1 derivatives
    at the period endpoints, so the result lies in the vanishing-trace
    class of every index up to 2*order.
    """
    if order < 1:
        raise ValueError("order must be at least 1")
    v = np.atleast_1d(np.asarray(vector, dtype=complex))
    scale = 4.0 ** (-order)
    coeffs = {0: scale * math.comb(2 * order, order) * v}
    for m in range(1, order + 1):
        c = scale * ((-1) ** m) * math.comb(2 * order, order - m)
        coeffs[m] = c * v
        coeffs[-m] = c * v
    return make_fourier_forcing(period, coeffs, space)


class SampledForcing(PeriodicForcing):
    """Values on a uniform time grid with explicit derivative stacks.

    ``stacks[j]`` holds the j-th derivative sampled on the same grid;
    evaluation between nodes uses trigonometric interpolation of the
    requested stack. Requesting a derivative beyond the stack raises
    DerivativesUnavailable.
    """

    def __init__(self, period: float, values, stacks=None, space=None,
                 per0_order: int = 0):
        self.period = float(period)
        V = np.asarray(values, dtype=complex)
        if V.ndim == 1:
            V = V[:, None]
        self.values = V
        self.n_nodes = V.shape[0]
        self.dim = V.shape[1]
        self.space = space
        self._declared_per0 = int(per0_order)
        stacks = [] if stacks is None else [np.asarray(s, dtype=complex) for s in stacks]
        for s in stacks:
            if s.shape != V.shape:
                raise ValueError("derivative stack shape mismatch")
        self.stacks = [V] + stacks
        self._fourier: dict[int, FourierForcing] = {}

    @property
    def times(self) -> np.ndarray:
        return self.period * np.arange(self.n_nodes) / self.n_nodes

    @property
    def max_derivative_order(self) -> int:
        return len(self.stacks) - 1

    @property
    def per0_order(self) -> int:
        return self._declared_per0

    @property
    def tag(self) -> str:
        k = self.per0_order
        return f"Wk1_per0({k})" if k >= 1 else "L1_per"

    def _stack_fourier(self, j: int) -> FourierForcing:
        if j > self.max_derivative_order:
            raise DerivativesUnavailable(
                f"derivative order {j} exceeds the stack depth {self.max_derivative_order}")
        if j not in self._fourier:
            self._fourier[j] = _fourier_from_samples(self.period, self.stacks[j], self.space)
        return self._fourier[j]

    def eval_many(self, ts, deriv: int = 0) -> np.ndarray:
        return self._stack_fourier(deriv).eval_many(ts, 0)

    def derivative_forcing(self, order: int) -> "SampledForcing":
        if order > self.max_derivative_order:
            raise DerivativesUnavailable(
                f"derivative order {order} exceeds the stack depth {self.max_derivative_order}")
        return SampledForcing(self.period, self.stacks[order],
                              self.stacks[order + 1:], self.space,
                              per0_order=max(self._declared_per0 - order, 0))

    def to_fourier(self) -> FourierForcing:
        return self._stack_fourier(0)


def _fourier_from_samples(period: float, samples: np.ndarray, space) -> FourierForcing:
    n = samples.shape[0]
    coeff = np.fft.fft(samples, axis=0) / n
    ks = np.fft.fftfreq(n, d=1.0 / n).astype(int)
    if n % 2 == 0:
        # split the Nyquist bin symmetrically so real samples stay real
        ny = np.where(ks == -n // 2)[0][0]
        ks = np.concatenate([ks, [n // 2]])
        coeff = np.vstack([coeff, 0.5 * coeff[ny][None, :]])
        coeff[ny] *= 0.5
    order = np.argsort(ks)
    return FourierForcing(period, ks[order], coeff[order], space)


def make_sampled_forcing(period, values, stacks=None, space=None, per0_order=0):
    return SampledForcing(period, values, stacks, space, per0_order)


class SemigroupPullbackForcing(PeriodicForcing):
    """f(s) = scale * e^{(s - T) A} phi / T on [0, T), extended periodically.

    Driving a model with the pullback of one of its own states makes the
    Duhamel integrand constant, so the one-period response is exactly
    scale * phi. Generally discontinuous at period multiples (class
    L1_per).
    """

    def __init__(self, model: Model, phi, scale: float, period: float):
        self.model = model
        self.phi = np.asarray(phi, dtype=complex)
        self.scale = complex(scale)
        self.period = float(period)
        self.space = model.space
        self.dim = model.dim

    def eval_many(self, ts, deriv: int = 0) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        base = self.phi
        for _ in range(deriv):
            base = self.model.A @ base
        out = np.empty((ts.size, self.dim), dtype=complex)
        for i, t in enumerate(ts):
            s = float(np.mod(t, self.period))
            out[i] = (self.scale / self.period) * propagate(self.model, s - self.period, base)
        return out

    def derivative_forcing(self, order: int) -> "SemigroupPullbackForcing":
        base = self.phi
        for _ in range(order):
            base = self.model.A @ base
        return SemigroupPullbackForcing(self.model, base, self.scale, self.period)

    @property
    def tag(self) -> str:
        return "L1_per"


# ---------------------------------------------------------------------------
# class membership and norms
# ---------------------------------------------------------------------------

@dataclass
class ForcingNormReport:
    tag: str
    order: int
    l1_norm: float
    wk1_norm: float
    class_verified: bool
    endpoint_residuals: list = field(default_factory=list)


def check_class(f: PeriodicForcing, k: int, tol: float = 1e-10,
                panels: int = 48, order: int = 8) -> ForcingNormReport:
    """Verify membership in the vanishing-trace class of index k.

    Computes the L^1 and W^{k,1} norms in time (state-space norm in
    space) by composite quadrature, and checks that derivatives of order
    0..k-1 vanish at the period endpoints relative to the size of the
    corresponding derivative. ``class_verified`` reflects the endpoint
    checks only; the norms are always reported.
    """
    if f.max_derivative_order is not None and k > f.max_derivative_order:
        raise DerivativesUnavailable(
            f"class check at order {k} needs {k} derivatives, "
            f"stack depth is {f.max_derivative_order}")
    nodes, weights = gauss_panels(f.period, panels, order)
    l1 = 0.0
    wk1 = 0.0
    sup_by_order = []
    for j in range(k + 1):
        vals = f.eval_many(nodes, j)
        norms = np.array([f._norm(v) for v in vals])
        contrib = float(np.dot(weights, norms))
        if j == 0:
            l1 = contrib
        wk1 += contrib
        sup_by_order.append(float(norms.max(initial=0.0)))
    residuals = []
    verified = True
    for j in range(k):
        r = f._norm(f.eval(0.0, j))
        residuals.append(r)
        if r > tol * max(sup_by_order[j], 1e-300):
            verified = False
    return ForcingNormReport(tag=f.tag, order=k, l1_norm=l1, wk1_norm=wk1,
                             class_verified=verified,
                             endpoint_residuals=residuals)


# ---------------------------------------------------------------------------
# Duhamel responses
# ---------------------------------------------------------------------------

def _weighted_propagated_sum(model: Model, offsets, states, weights) -> np.ndarray:
    """sum_i weights[i] * e^{offsets[i] A} states[i], batched on the eig path."""
    from .operator_core import _eig_data
    w, V, Vinv, cond = _eig_data(model)
    states = np.asarray(states, dtype=complex)
    if cond <= 1e8 and Vinv is not None:
        Y = Vinv @ states.T
        Z = np.exp(np.outer(w, offsets)) * Y
        return V @ (Z @ np.asarray(weights, dtype=complex))
    acc = np.zeros(model.dim, dtype=complex)
    for off, st, wt in zip(offsets, states, weights):
        acc += wt * (propagator_matrix(model, off) @ st)
    return acc


def _default_panels(f: PeriodicForcing) -> int:
    if isinstance(f, FourierForcing):
        kmax = int(np.max(np.abs(f.harmonics), initial=0))
        return max(8, kmax)
    if isinstance(f, SampledForcing):
        return max(8, f.n_nodes // 4)
    return 8


def duhamel_FT(model: Model, f: PeriodicForcing, panels: int | None = None,
               order: int = 8, tol: float = 1e-9, method: str = "auto") -> np.ndarray:
    """One-period response F_T(f) = integral_0^T e^{A(T-s)} f(s) ds.

    method "quadrature" uses composite Gauss-Legendre panels and raises
    QuadratureUnderResolved unless doubling the panel count moves the
    result by less than tol (relative to its size). method
    "closed_form" (Fourier data only) solves one shifted linear system
    per harmonic; "auto" picks the closed form for Fourier data.
    """
    vec, _ = duhamel_FT_diagnostics(model, f, panels, order, tol, method)
    return vec


def duhamel_FT_diagnostics(model: Model, f: PeriodicForcing,
                           panels: int | None = None, order: int = 8,
                           tol: float = 1e-9, method: str = "auto"):
    """Like :func:`duhamel_FT` but also returns the refinement gap."""
    if method == "auto":
        method = "closed_form" if isinstance(f, FourierForcing) else "quadrature"
    if method == "closed_form":
        if not isinstance(f, FourierForcing):
            raise ValueError("closed form needs Fourier data")
        return _duhamel_closed_form(model, f), 0.0
    if method != "quadrature":
        raise ValueError(f"unknown method {method!r}")
    if panels is None:
        panels = _default_panels(f)
    coarse = _duhamel_quadrature(model, f, panels, order)
    fine = _duhamel_quadrature(model, f, 2 * panels, order)
    gap = model.space.norm(fine - coarse)
    if gap > tol * (1.0 + model.space.norm(fine)):
        raise QuadratureUnderResolved(
            f"Duhamel quadrature moved by {gap:.3e} when doubling "
            f"{panels} panels (tol {tol:.1e})")
    return fine, gap


def _duhamel_quadrature(model: Model, f: PeriodicForcing, panels: int, order: int) -> np.ndarray:
    T = f.period
    nodes, weights = gauss_panels(T, panels, order)
    vals = f.eval_many(nodes)
    if not np.all(np.isfinite(vals)):
        raise NonFiniteInput("forcing evaluated to non-finite values")
    return _weighted_propagated_sum(model, T - nodes, vals, weights)


def _duhamel_closed_form(model: Model, f: FourierForcing) -> np.ndarray:
    T = f.period
    A_r, _, Q = deflated_block(model)
    n = A_r.shape[0]
    eigs = model._cache.get("deflated_eigs")
    if eigs is None:
        eigs = np.linalg.eigvals(A_r)
        model._cache["deflated_eigs"] = eigs
    scale = max(1.0, float(np.max(np.abs(eigs), initial=1.0)))
    monodromy = propagator_matrix(model, T)
    if Q is not None:
        P = np.eye(model.dim) - model.pi0
        mono_r = Q.conj().T @ monodromy @ Q
    else:
        mono_r = monodromy
    acc = np.zeros(model.dim, dtype=complex)
    for kk, c in zip(f.harmonics, f.coefficients):
        om = 2.0 * np.pi * kk / T
        if np.min(np.abs(1j * om - eigs), initial=np.inf) < 1e-10 * scale:
            raise ResonantHarmonic(
                f"harmonic k={kk} hits the spectrum of the deflated block")
        if Q is not None:
            c_r = Q.conj().T @ (P @ c)
        else:
            c_r = c
        contrib_r = np.linalg.solve(1j * om * np.eye(n) - A_r,
                                    c_r - mono_r @ c_r)
        if Q is not None:
            acc += Q @ contrib_r
            if kk == 0:
                acc += T * (model.pi0 @ c)
        else:
            acc += contrib_r
    return acc


def shift_derivative_FT(model: Model, f: PeriodicForcing, k: int,
                        enforce_class: bool = True, panels: int | None = None,
                        order: int = 8, tol: float = 1e-9,
                        method: str = "auto") -> np.ndarray:
    """F_T applied to the k-th derivative of the forcing.

    For forcings in the vanishing-trace class of index k this equals
    A^k F_T(f) (the gain-of-derivatives identity). With
    ``enforce_class`` the endpoint conditions are checked first and a
    violation raises ClassViolation; pass False to evaluate the
    right-hand side for a negative control.
    """
    if enforce_class:
        report = check_class(f, k)
        if not report.class_verified:
            raise ClassViolation(
                f"forcing is not in the vanishing-trace class of index {k}; "
                f"endpoint residuals {report.endpoint_residuals}")
    return duhamel_FT(model, f.derivative_forcing(k), panels, order, tol, method)


def endpoint_defect(model: Model, f: PeriodicForcing, k: int) -> np.ndarray:
    """The boundary sum A^k F_T(f) - F_T(f^{(k)}) from integration by parts.

    Equals sum_j A^{k-1-j} (e^{TA} f^(j)(0) - f^(j)(T)), so it vanishes
    exactly on the vanishing-trace class and otherwise restores the
    gain-of-derivatives identity for merely periodic forcings.
    """
    monodromy = propagator_matrix(model, f.period)
    acc = np.zeros(model.dim, dtype=complex)
    for j in range(k):
        v0 = f.eval(0.0, j)
        vT = v0          # periodic representative: same endpoint value
        term = monodromy @ v0 - vT
        acc += np.linalg.matrix_power(model.A, k - 1 - j) @ term
    return acc


def control_duhamel(model: Model, g: PeriodicForcing, tau: float | None = None,
                    panels: int | None = None, order: int = 8,
                    tol: float = 1e-9) -> np.ndarray:
    """Boundary response Phi_tau(g) = integral_0^tau e^{A(tau-s)} B g(s) ds.

    ``g`` is a scalar forcing (dimension-1 values); the model must carry
    an input matrix B. Composite quadrature with the same refinement
    guard as :func:`duhamel_FT`.
    """
    if model.B is None:
        raise ValueError("model has no input matrix")
    if g.dim != model.B.shape[1]:
        raise ValueError("boundary signal dimension does not match B")
    if tau is None:
        tau = g.period
    if panels is None:
        panels = _default_panels(g)

    def assemble(p):
        nodes, weights = gauss_panels(tau, p, order)
        vals = g.eval_many(nodes)
        if not np.all(np.isfinite(vals)):
            raise NonFiniteInput("boundary signal evaluated to non-finite values")
        states = vals @ model.B.T
        return _weighted_propagated_sum(model, tau - nodes, states, weights)

    coarse = assemble(panels)
    fine = assemble(2 * panels)
    gap = model.space.norm(fine - coarse)
    if gap > tol * (1.0 + model.space.norm(fine)):
        raise QuadratureUnderResolved(
            f"boundary quadrature moved by {gap:.3e} when doubling panels")
    return fine


def admissibility_constant(model: Model, T: float, panels: int = 24,
                           order: int = 8) -> float:
    """Operator norm of g -> Phi_T(g) from L^2(0, T) to the state space.

    Realized on the quadrature grid: the columns sqrt(w_i) e^{A(T-s_i)} B
    assemble the map from weighted samples, whose largest singular value
    in the Gram geometry is returned.
    """
    if model.B is None:
        raise ValueError("model has no input matrix")
    nodes, weights = gauss_panels(T, panels, order)
    cols = np.empty((model.dim, nodes.size), dtype=complex)
    for i, (s, w) in enumerate(zip(nodes, weights)):
        cols[:, i] = math.sqrt(w) * (propagator_matrix(model, T - s) @ model.B[:, 0])
    return float(np.linalg.norm(model.space.sqrt_gram @ cols, 2))
