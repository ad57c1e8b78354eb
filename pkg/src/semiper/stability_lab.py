"""Decay envelopes, resolvent scans and the bounds connecting them.

The envelope h_alpha(t) is the best constant in
|e^{tA} x|_X <= h_alpha(t) |x|_{alpha} over the deflated block, where
|.|_alpha is the Hilbertian domain norm induced by
G + ((-A)^alpha)* G (-A)^alpha. Scans are plain grids of such values;
fits extract power laws from running extrema on log-log axes.

Two quantitative cross-checks are provided: the product of the fitted
resolvent growth exponent and the fitted decay exponent of the smoothed
envelope (equal to 1 for polynomial resolvent families on Hilbert
spaces), and an inverted log-corrected resolvent bound overlaid on the
measured decay.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import NonMonotone, PoorFit
from .operator_core import (
    Model,
    deflated_block,
    domain_gram,
    propagator_matrix,
    resolvent_norm,
)


@dataclass
class FitResult:
    exponent: float
    constant: float
    window: tuple
    r2: float


@dataclass
class ScanResult:
    kind: str
    abscissae: np.ndarray
    values: np.ndarray
    fit: FitResult | None = None
    extras: dict = field(default_factory=dict)

    def to_decay_function(self, alpha: float):
        from .operator_core import DecayFunction
        return DecayFunction(alpha=alpha, t_grid=self.abscissae,
                             values=self.values)


def _pmap(fn, xs, threads: int):
    if threads <= 1:
        return [fn(x) for x in xs]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, xs))


def _is_normal(model: Model) -> bool:
    A_r, _, _ = deflated_block(model)
    S, Si = _weighted(model)
    W = S @ A_r @ Si
    comm = W @ W.conj().T - W.conj().T @ W
    scale = max(np.linalg.norm(W) ** 2, 1e-300)
    return bool(np.linalg.norm(comm) <= 1e-10 * scale)


def _weighted(model: Model):
    from .operator_core import _gram_sqrts
    return _gram_sqrts(model)


def _domain_inv_sqrt(model: Model, alpha: float) -> np.ndarray:
    key = ("dom_isqrt", float(alpha))
    cached = model._cache.get(key)
    if cached is None:
        Gd = domain_gram(model, alpha)
        vals, vecs = np.linalg.eigh(Gd)
        vals = np.maximum(vals, 1e-300)
        cached = (vecs / np.sqrt(vals)) @ vecs.conj().T
        model._cache[key] = cached
    return cached


def _reduced_propagator(model: Model, t: float) -> np.ndarray:
    P = propagator_matrix(model, t)
    _, _, Q = deflated_block(model)
    if Q is None:
        return P
    return Q.conj().T @ P @ Q


def decay_envelope(model: Model, alpha: float, t_grid, threads: int = 1) -> ScanResult:
    """Measured envelope h_alpha on a time grid.

    Each value is the largest generalized singular value of e^{tA} from
    the domain norm of order alpha to the state norm, on the deflated
    block. The extras record the running minimum (used by fits on
    non-normal models, where raw values may wiggle) and whether the raw
    curve was nonincreasing to within 1e-10.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    S, _ = _weighted(model)
    Di = _domain_inv_sqrt(model, alpha)

    def value(t):
        E = _reduced_propagator(model, t)
        return float(np.linalg.norm(S @ E @ Di, 2))

    values = np.array(_pmap(value, t_grid, threads))
    running = np.minimum.accumulate(values)
    rises = np.diff(values)
    monotone = bool(np.all(rises <= 1e-10 * np.maximum(values[:-1], 1e-300)))
    return ScanResult(kind=f"decay_envelope(alpha={alpha})",
                      abscissae=t_grid, values=values,
                      extras={"running_min": running, "monotone": monotone,
                              "normal": _is_normal(model), "alpha": alpha})


def resolvent_scan(model: Model, eta_grid, threads: int = 1,
                   include_spectrum: bool = True) -> ScanResult:
    """Pointwise |R(i eta)| on the deflated block, with its running max.

    The running maximum realizes eta -> max over |s| <= eta of the
    resolvent norm when the grid starts near zero (the models here have
    resolvents symmetric in eta up to conjugation). Resolvent peaks sit
    at the spectral frequencies, which an evenly spaced grid straddles;
    by default the grid is therefore augmented with the imaginary parts
    of the eigenvalues falling inside its range.
    """
    eta_grid = np.asarray(eta_grid, dtype=float)
    if include_spectrum:
        A_r, _, Q = deflated_block(model)
        eigs = model._cache.get("deflated_eigs")
        if eigs is None:
            eigs = np.linalg.eigvals(A_r)
            model._cache["deflated_eigs"] = eigs
        freqs = np.abs(eigs.imag)
        freqs = freqs[(freqs >= eta_grid.min()) & (freqs <= eta_grid.max())]
        eta_grid = np.unique(np.concatenate([eta_grid, freqs]))
    values = np.array(_pmap(lambda e: resolvent_norm(model, e), eta_grid, threads))
    return ScanResult(kind="resolvent_scan", abscissae=eta_grid, values=values,
                      extras={"running_max": np.maximum.accumulate(values)})


def _window_mask(x: np.ndarray, window) -> np.ndarray:
    if window is None:
        hi = x.max()
        lo = hi / 10.0 ** 0.5
        window = (lo, hi)
    return (x >= window[0]) & (x <= window[1]), window


def fit_power_law(scan: ScanResult, window=None, use: str = "values",
                  min_r2: float = 0.9) -> FitResult:
    """Least-squares line through log values against log abscissae.

    ``use`` selects the raw values or a running extremum from the scan
    extras. The default window is the last half decade of abscissae.
    Raises PoorFit when r^2 falls below ``min_r2``.
    """
    x = scan.abscissae
    y = scan.extras.get(use, scan.values) if use != "values" else scan.values
    mask, window = _window_mask(x, window)
    mask &= (x > 0) & (y > 0)
    if mask.sum() < 3:
        raise PoorFit(f"window {window} leaves {int(mask.sum())} usable points")
    lx, ly = np.log(x[mask]), np.log(y[mask])
    slope, intercept = np.polyfit(lx, ly, 1)
    pred = slope * lx + intercept
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    if r2 < min_r2:
        raise PoorFit(f"power-law fit r^2 = {r2:.3f} below {min_r2}")
    fit = FitResult(exponent=float(slope), constant=float(np.exp(intercept)),
                    window=tuple(window), r2=r2)
    scan.fit = fit
    return fit


def fit_decay_exponent(scan: ScanResult, window=None, min_r2: float = 0.9) -> FitResult:
    """Power-law fit of a decay scan.

    Normal models use the raw envelope; non-normal ones fit the running
    minimum, which removes transient overshoots without changing the
    asymptotic slope.
    """
    use = "values" if scan.extras.get("normal", False) else "running_min"
    return fit_power_law(scan, window=window, use=use, min_r2=min_r2)


@dataclass
class BTReport:
    alpha_hat: float
    beta_hat: float
    product: float
    decay: ScanResult
    resolvent: ScanResult


def bt_crosscheck(model: Model, t_grid, eta_grid, t_window=None,
                  eta_window=None, threads: int = 1) -> BTReport:
    """Fitted resolvent growth against fitted smoothed decay.

    alpha_hat is the log-log slope of the running max of |R(i eta)|;
    beta_hat is minus the slope of the alpha = 1 envelope (the decay of
    the semigroup through the graph norm of A). For polynomially growing
    resolvent families on Hilbert spaces the two are reciprocal, so the
    reported product is the quantity to compare with 1.
    """
    dscan = decay_envelope(model, 1.0, t_grid, threads)
    dfit = fit_decay_exponent(dscan, window=t_window)
    rscan = resolvent_scan(model, eta_grid, threads)
    rfit = fit_power_law(rscan, window=eta_window, use="running_max")
    alpha_hat = rfit.exponent
    beta_hat = -dfit.exponent
    return BTReport(alpha_hat=alpha_hat, beta_hat=beta_hat,
                    product=alpha_hat * beta_hat, decay=dscan, resolvent=rscan)


def interpolation_check(model: Model, alpha: float, t_grid,
                        threads: int = 1) -> ScanResult:
    """Ratio of h_alpha(t) to h_1(t / ceil(alpha))^alpha.

    Boundedness of this ratio is the quantitative form of the
    interpolated decay estimate; the extras carry the sup of the ratio
    and where it is attained.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    ceil_a = int(np.ceil(alpha))
    num = decay_envelope(model, alpha, t_grid, threads)
    den = decay_envelope(model, 1.0, t_grid / ceil_a, threads)
    ratio = num.values / np.maximum(den.values ** alpha, 1e-300)
    sup_idx = int(np.argmax(ratio))
    return ScanResult(kind=f"interpolation_ratio(alpha={alpha})",
                      abscissae=t_grid, values=ratio,
                      extras={"sup": float(ratio[sup_idx]),
                              "arg_sup": float(t_grid[sup_idx]),
                              "h_alpha": num.values, "h_one": den.values})


@dataclass
class MlogReport:
    eta_grid: np.ndarray
    resolvent_max: np.ndarray
    m_log: np.ndarray
    t_grid: np.ndarray
    decay: np.ndarray
    bound: np.ndarray
    constant: float
    fraction_satisfied: float


def mlog_bound_curve(model: Model, eta_grid, t_grid, threads: int = 1) -> MlogReport:
    """Inverted log-corrected resolvent bound against the measured decay.

    Builds M(eta) as the running max of the resolvent scan and
    M_log(eta) = M(eta) (log(1 + M(eta)) + log(1 + eta)), checks
    monotonicity, numerically inverts M_log, and overlays
    t -> C / M_log^{-1}(t / C) on the measured alpha = 1 envelope with
    the scalar C fitted by least squares on log axes. Also reports at
    which fraction of the time grid the bound lies above the
    measurement.
    """
    rscan = resolvent_scan(model, eta_grid, threads)
    M = rscan.extras["running_max"]
    eta = rscan.abscissae
    m_log = M * (np.log1p(M) + np.log1p(eta))
    drops = np.diff(m_log)
    if np.any(drops < -1e-9 * np.maximum(m_log[:-1], 1e-300)):
        raise NonMonotone("log-corrected resolvent majorant is not monotone; "
                          "refine the frequency grid")
    m_log = np.maximum.accumulate(m_log)

    dscan = decay_envelope(model, 1.0, t_grid, threads)
    d = dscan.extras["running_min"]
    t = dscan.abscissae

    def bound_for(c: float):
        x = t / c
        valid = (x >= m_log[0]) & (x <= m_log[-1])
        inv = np.interp(x, m_log, eta)
        with np.errstate(divide="ignore"):
            b = np.where(valid & (inv > 0), c / np.maximum(inv, 1e-300), np.nan)
        return b, valid

    def objective(log_c: float):
        b, valid = bound_for(float(np.exp(log_c)))
        ok = valid & (d > 0) & np.isfinite(b)
        if ok.sum() < 3:
            return 1e6
        return float(np.sum((np.log(b[ok]) - np.log(d[ok])) ** 2))

    res = minimize_scalar(objective, bounds=(-10.0, 10.0), method="bounded")
    c_fit = float(np.exp(res.x))
    bound, valid = bound_for(c_fit)
    ok = valid & np.isfinite(bound)
    frac = float(np.mean(bound[ok] >= d[ok])) if ok.any() else 0.0
    return MlogReport(eta_grid=eta, resolvent_max=M, m_log=m_log,
                      t_grid=t, decay=d, bound=bound, constant=c_fit,
                      fraction_satisfied=frac)
