"""Finite-dimensional state spaces, generators and spectral calculus.

All states live in C^dim equipped with a Hermitian positive definite Gram
matrix G; every norm and operator norm in the package is the one induced
by G (operator norms are computed as the largest singular value of
G^{1/2} M G^{-1/2}). Generators are dense matrices. Propagation uses a
cached eigendecomposition of the generator and falls back to
scaling-and-squaring when the eigenvector basis is ill conditioned.

Models with a nontrivial kernel carry a spectral projector ``pi0`` onto
the kernel; resolvents, fractional powers and domain norms are taken on
the complementary invariant block (the "deflated block").
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import (
    BackwardTimeDisallowed,
    KernelComponentPresent,
    NonFiniteInput,
    NonHermitian,
    NotPositiveDefinite,
    OnSpectrum,
    SpectrumOnCut,
)

# Eigenvector condition number above which propagation switches from the
# cached eigendecomposition to scaling-and-squaring.
EIG_COND_LIMIT = 1e8

# Backward propagation is allowed (matrix exponentials form a group) but a
# growth monitor warns when the realized amplification exceeds this.
BACKWARD_WARN_RATIO = 1e6

_HERMITIAN_RTOL = 1e-12


def _as_matrix(a) -> np.ndarray:
    m = np.asarray(a)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    return m


@dataclass
class StateSpace:
    """A Gram-normed coordinate space.

    Attributes
    ----------
    dim : int
        Coordinate dimension.
    gram : ndarray
        Hermitian positive definite Gram matrix; the squared norm of a
        state x is the real quadratic form x* gram x.
    field_tag : str
        "real" or "complex"; a bookkeeping tag only, all arithmetic is
        done in complex128.
    """

    dim: int
    gram: np.ndarray
    field_tag: str = "real"
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def norm(self, x) -> float:
        x = np.asarray(x, dtype=complex)
        q = np.real(np.vdot(x, self.gram @ x))
        return float(np.sqrt(max(q, 0.0)))

    def inner(self, x, y) -> complex:
        return complex(np.vdot(np.asarray(x, dtype=complex), self.gram @ np.asarray(y, dtype=complex)))

    @property
    def sqrt_gram(self) -> np.ndarray:
        if "sqrt" not in self._cache:
            vals, vecs = np.linalg.eigh(self.gram)
            vals = np.maximum(vals, 0.0)
            self._cache["sqrt"] = (vecs * np.sqrt(vals)) @ vecs.conj().T
            with np.errstate(divide="ignore"):
                inv = np.where(vals > 0, 1.0 / np.sqrt(vals), 0.0)
            self._cache["isqrt"] = (vecs * inv) @ vecs.conj().T
        return self._cache["sqrt"]

    @property
    def inv_sqrt_gram(self) -> np.ndarray:
        self.sqrt_gram
        return self._cache["isqrt"]

    def op_norm(self, M) -> float:
        """Operator norm of M as a map (X, gram) -> (X, gram)."""
        W = self.sqrt_gram @ np.asarray(M, dtype=complex) @ self.inv_sqrt_gram
        return float(np.linalg.norm(W, 2))


def make_state_space(dim: int, gram, field_tag: str = "real") -> StateSpace:
    """Validate a Gram matrix and wrap it in a :class:`StateSpace`.

    Raises
    ------
    NonFiniteInput
        If the Gram matrix contains NaN or infinity.
    NonHermitian
        If it deviates from its adjoint by more than 1e-12 in relative
        Frobenius norm.
    NotPositiveDefinite
        If the smallest eigenvalue is not strictly positive.
    """
    G = _as_matrix(gram).astype(complex)
    if G.shape != (dim, dim):
        raise ValueError(f"gram has shape {G.shape}, expected ({dim}, {dim})")
    if not np.all(np.isfinite(G)):
        raise NonFiniteInput("gram matrix has non-finite entries")
    scale = np.linalg.norm(G)
    if scale == 0 or np.linalg.norm(G - G.conj().T) > _HERMITIAN_RTOL * scale:
        raise NonHermitian("gram matrix is not Hermitian to 1e-12 relative")
    G = 0.5 * (G + G.conj().T)
    if np.linalg.eigvalsh(G)[0] <= 0:
        raise NotPositiveDefinite("gram matrix must be positive definite")
    if field_tag not in ("real", "complex"):
        raise ValueError(f"unknown field_tag {field_tag!r}")
    return StateSpace(dim=dim, gram=G, field_tag=field_tag)


@dataclass
class Model:
    """A generator A on a state space, with optional kernel data.

    ``pi0`` is the spectral projector onto ker A (zero when the kernel is
    trivial); ``kernel_basis`` spans the same kernel. ``B`` is an optional
    input matrix for boundary-forced models. The instance is treated as
    immutable after construction; ``_cache`` only memoizes derived
    factorizations.
    """

    space: StateSpace
    A: np.ndarray
    kernel_basis: tuple = ()
    pi0: np.ndarray | None = None
    B: np.ndarray | None = None
    label: str = ""
    group_allowed: bool = True
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def dim(self) -> int:
        return self.space.dim

    @property
    def has_kernel(self) -> bool:
        return len(self.kernel_basis) > 0


def build_model(space: StateSpace, A, kernel_basis=(), pi0=None, B=None,
                label: str = "", group_allowed: bool = True) -> Model:
    """Assemble a :class:`Model`, validating shapes and finiteness.

    When ``kernel_basis`` is nonempty and no projector is supplied, the
    spectral projector onto the kernel is computed from left and right
    eigenvectors of the eigenvalues nearest zero.
    """
    A = _as_matrix(A).astype(complex)
    if A.shape[0] != space.dim:
        raise ValueError("generator dimension does not match the state space")
    if not np.all(np.isfinite(A)):
        raise NonFiniteInput("generator has non-finite entries")
    kb = tuple(np.asarray(v, dtype=complex) for v in kernel_basis)
    for v in kb:
        if v.shape != (space.dim,):
            raise ValueError("kernel basis vector has wrong shape")
    if pi0 is None:
        if kb:
            pi0 = _spectral_kernel_projector(A, len(kb))
        else:
            pi0 = np.zeros((space.dim, space.dim), dtype=complex)
    else:
        pi0 = _as_matrix(pi0).astype(complex)
    if B is not None:
        B = np.asarray(B, dtype=complex)
        if B.ndim == 1:
            B = B[:, None]
        if B.shape[0] != space.dim:
            raise ValueError("input matrix B has wrong leading dimension")
    return Model(space=space, A=A, kernel_basis=kb, pi0=pi0, B=B,
                 label=label, group_allowed=group_allowed)


def _spectral_kernel_projector(A: np.ndarray, kdim: int) -> np.ndarray:
    w, V = np.linalg.eig(A)
    wl, W = np.linalg.eig(A.conj().T)
    idx = np.argsort(np.abs(w))[:kdim]
    idxl = np.argsort(np.abs(wl))[:kdim]
    Vk = V[:, idx]
    Wk = W[:, idxl]
    # oblique projector with range span(Vk) and kernel orthogonal to span(Wk)
    return Vk @ np.linalg.solve(Wk.conj().T @ Vk, Wk.conj().T)


# ---------------------------------------------------------------------------
# propagation
# ---------------------------------------------------------------------------

def _eig_data(model: Model):
    if "eig" not in model._cache:
        w, V = np.linalg.eig(model.A)
        try:
            Vinv = np.linalg.inv(V)
            cond = np.linalg.cond(V)
        except np.linalg.LinAlgError:
            Vinv, cond = None, np.inf
        model._cache["eig"] = (w, V, Vinv, cond)
    return model._cache["eig"]


def propagator_matrix(model: Model, t: float) -> np.ndarray:
    """Dense matrix of e^{tA}; eigendecomposition path with expm fallback."""
    key = ("prop", float(t))
    cached = model._cache.get(key)
    if cached is not None:
        return cached
    w, V, Vinv, cond = _eig_data(model)
    if cond <= EIG_COND_LIMIT:
        P = (V * np.exp(w * t)) @ Vinv
    else:
        P = sla.expm(model.A * t)
    lru = model._cache.setdefault("prop_keys", [])
    lru.append(key)
    if len(lru) > 12:
        model._cache.pop(lru.pop(0), None)
    model._cache[key] = P
    return P


def propagate(model: Model, t: float, x) -> np.ndarray:
    """Apply e^{tA} to the state x.

    Negative t is allowed when the model's ``group_allowed`` flag is set;
    a warning is emitted when the realized backward amplification
    exceeds ``BACKWARD_WARN_RATIO``.
    """
    x = np.asarray(x, dtype=complex)
    if not np.all(np.isfinite(x)):
        raise NonFiniteInput("state has non-finite entries")
    if t < 0 and not model.group_allowed:
        raise BackwardTimeDisallowed(f"t = {t} on a forward-only model")
    w, V, Vinv, cond = _eig_data(model)
    if cond <= EIG_COND_LIMIT:
        out = V @ (np.exp(w * t) * (Vinv @ x))
    else:
        out = propagator_matrix(model, t) @ x
    if t < 0:
        nx = model.space.norm(x)
        if nx > 0 and model.space.norm(out) > BACKWARD_WARN_RATIO * nx:
            warnings.warn(f"backward propagation amplified the state by more "
                          f"than {BACKWARD_WARN_RATIO:.0e} at t = {t}",
                          stacklevel=2)
    return out


# ---------------------------------------------------------------------------
# deflation helpers
# ---------------------------------------------------------------------------

def deflated_block(model: Model):
    """Reduced coordinates of the invariant complement of the kernel.

    Returns (A_r, G_r, Q) with Q a Euclidean-orthonormal basis of
    range(I - pi0), A_r = Q* A Q the reduced generator and G_r = Q* G Q
    the reduced Gram. For kernel-free models Q is the identity and the
    originals are returned.
    """
    if "deflated" not in model._cache:
        if not model.has_kernel:
            model._cache["deflated"] = (model.A, model.space.gram, None)
        else:
            P = np.eye(model.dim) - model.pi0
            Q = sla.orth(P, rcond=1e-10)
            A_r = Q.conj().T @ model.A @ Q
            G_r = Q.conj().T @ model.space.gram @ Q
            G_r = 0.5 * (G_r + G_r.conj().T)
            model._cache["deflated"] = (A_r, G_r, Q)
    return model._cache["deflated"]


def _gram_sqrts(model: Model):
    if "gram_r" not in model._cache:
        _, G_r, Q = deflated_block(model)
        if Q is None:
            model._cache["gram_r"] = (model.space.sqrt_gram, model.space.inv_sqrt_gram)
        else:
            vals, vecs = np.linalg.eigh(G_r)
            vals = np.maximum(vals, 1e-300)
            S = (vecs * np.sqrt(vals)) @ vecs.conj().T
            Si = (vecs / np.sqrt(vals)) @ vecs.conj().T
            model._cache["gram_r"] = (S, Si)
    return model._cache["gram_r"]


# ---------------------------------------------------------------------------
# resolvent and fractional calculus
# ---------------------------------------------------------------------------

def resolvent_norm(model: Model, eta: float) -> float:
    """Gram-weighted norm of (i eta I - A)^{-1} on the deflated block.

    Raises OnSpectrum when i*eta is numerically an eigenvalue (smallest
    singular value below 1e-13).
    """
    A_r, _, _ = deflated_block(model)
    n = A_r.shape[0]
    M = 1j * float(eta) * np.eye(n) - A_r
    smin = np.linalg.svd(M, compute_uv=False)[-1]
    if smin < 1e-13:
        raise OnSpectrum(f"i*{eta} lies on the spectrum (sigma_min = {smin:.3e})")
    S, Si = _gram_sqrts(model)
    X = np.linalg.solve(M, Si)
    return float(np.linalg.norm(S @ X, 2))


def fractional_power(model: Model, alpha: float, reduced: bool = False) -> np.ndarray:
    """Principal matrix power (-A)^alpha on the deflated block.

    The full-space result acts as (-A restricted)^alpha composed with
    (I - pi0), i.e. it annihilates the kernel. With ``reduced=True`` the
    matrix in reduced coordinates is returned instead.

    Integer alpha is evaluated by exact matrix powers. Non-integer alpha
    uses the eigendecomposition of -A (principal branch powers of the
    eigenvalues) and falls back to a Schur-based computation when the
    eigenvector basis is ill conditioned.

    Raises
    ------
    SpectrumOnCut
        If -A has an eigenvalue on (-inf, 0], where the principal branch
        is not defined.
    """
    alpha = float(alpha)
    key = ("fpow", alpha, reduced)
    cached = model._cache.get(key)
    if cached is not None:
        return cached
    A_r, _, Q = deflated_block(model)
    negA = -A_r
    mu = np.linalg.eigvals(negA)
    scale = max(1.0, float(np.max(np.abs(mu))) if mu.size else 1.0)
    on_cut = (np.abs(mu.imag) <= 1e-12 * scale) & (mu.real <= 1e-12 * scale)
    if alpha != int(alpha) and np.any(on_cut):
        raise SpectrumOnCut("an eigenvalue of -A lies on (-inf, 0]")
    if alpha == int(alpha) and alpha >= 0:
        F = np.linalg.matrix_power(negA, int(alpha))
    else:
        w, V = np.linalg.eig(negA)
        cond = np.linalg.cond(V)
        if cond <= EIG_COND_LIMIT:
            F = (V * np.power(w.astype(complex), alpha)) @ np.linalg.inv(V)
        else:
            F = sla.fractional_matrix_power(negA, alpha)
    if not reduced and Q is not None:
        P = np.eye(model.dim) - model.pi0
        F = Q @ F @ (Q.conj().T @ P)
    model._cache[key] = F
    return F


def norm_domain(model: Model, alpha: float, x) -> float:
    """Domain norm |x|_X + |(-A)^alpha x|_X.

    On kernel models the state must lie in range(I - pi0); a relative
    kernel component above 1e-10 raises KernelComponentPresent.
    """
    x = np.asarray(x, dtype=complex)
    if not np.all(np.isfinite(x)):
        raise NonFiniteInput("state has non-finite entries")
    nx = model.space.norm(x)
    if model.has_kernel:
        nk = model.space.norm(model.pi0 @ x)
        if nk > 1e-10 * max(nx, 1e-300):
            raise KernelComponentPresent(
                f"state has a kernel component of relative size {nk / max(nx, 1e-300):.3e}")
    F = fractional_power(model, alpha)
    return nx + model.space.norm(F @ x)


def domain_gram(model: Model, alpha: float) -> np.ndarray:
    """Hilbertian domain Gram G + ((-A)^alpha)* G ((-A)^alpha), reduced.

    The returned matrix lives in the reduced coordinates of the deflated
    block and induces a norm equivalent to the sum norm of
    :func:`norm_domain` (with constants between 1/sqrt(2) and 1).
    """
    _, G_r, _ = deflated_block(model)
    F = fractional_power(model, alpha, reduced=True)
    Gd = G_r + F.conj().T @ G_r @ F
    return 0.5 * (Gd + Gd.conj().T)


# ---------------------------------------------------------------------------
# kernel projector and spectrum report
# ---------------------------------------------------------------------------

def kernel_projector(model: Model) -> np.ndarray:
    """The spectral projector onto ker A (zero matrix when trivial)."""
    return model.pi0.copy()


def contour_spectral_projector(model: Model, center: complex = 0.0,
                               radius: float | None = None,
                               n_nodes: int = 64) -> np.ndarray:
    """Spectral projector by a trapezoid contour integral of the resolvent.

    Used as an independent cross-check of closed-form projectors. The
    default radius is half the distance from ``center`` to the nearest
    eigenvalue outside a 1e-8 neighborhood of it.
    """
    w, _, _, _ = _eig_data(model)
    if radius is None:
        d = np.abs(w - center)
        outside = d[d > 1e-8]
        if outside.size == 0:
            raise ValueError("no eigenvalue away from the center to set a radius")
        radius = 0.5 * float(outside.min())
    theta = 2 * np.pi * np.arange(n_nodes) / n_nodes
    eye = np.eye(model.dim)
    acc = np.zeros((model.dim, model.dim), dtype=complex)
    for th in theta:
        z = center + radius * np.exp(1j * th)
        acc += np.exp(1j * th) * np.linalg.solve(z * eye - model.A, eye)
    return radius * acc / n_nodes


@dataclass
class SpectrumReport:
    label: str
    eigenvalues: np.ndarray
    abscissa: float
    deflated_abscissa: float
    distance_to_imaginary_axis: float
    kernel_dim: int
    assumptions_ok: bool


def spectrum_report(model: Model) -> SpectrumReport:
    """Eigenvalue summary and the bounded-plus-injective assumptions flag.

    ``assumptions_ok`` is true when no eigenvalue has real part above
    1e-10 and every eigenvalue of the deflated block lies strictly in
    the open left half plane.
    """
    w, _, _, _ = _eig_data(model)
    A_r, _, Q = deflated_block(model)
    wr = np.linalg.eigvals(A_r) if Q is not None else w
    abscissa = float(np.max(w.real)) if w.size else -np.inf
    defl_abs = float(np.max(wr.real)) if wr.size else -np.inf
    dist = float(np.min(np.abs(wr.real))) if wr.size else np.inf
    ok = abscissa <= 1e-10 and defl_abs < 0
    return SpectrumReport(
        label=model.label,
        eigenvalues=np.sort_complex(w),
        abscissa=abscissa,
        deflated_abscissa=defl_abs,
        distance_to_imaginary_axis=dist,
        kernel_dim=len(model.kernel_basis),
        assumptions_ok=bool(ok),
    )


# ---------------------------------------------------------------------------
# decay data carrier
# ---------------------------------------------------------------------------

@dataclass
class DecayFunction:
    """A measured decay envelope t -> h_alpha(t) on a grid."""

    alpha: float
    t_grid: np.ndarray
    values: np.ndarray

    def __call__(self, t):
        return np.interp(t, self.t_grid, self.values)
