"""Command-line front end: JSON experiment configs in, CSV/JSON artifacts out.

``semiper run --config cfg.json [--out DIR] [--seed N] [--threads K]``
validates the config against the shipped JSON schema, builds the model,
runs the requested task and writes its results as CSV tables (17
significant digits, header row with units), JSON reports (stable key
order) and gnuplot scripts, plus a manifest listing every emitted file
with size and content hash. Identical config + seed gives byte-identical
result files.

Exit codes: 0 success, 2 config validation failure, 3 a named solver
error (the module-qualified error name is echoed on stderr).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np
import scipy

from .errors import InvalidGrid, IoError, SemiperError
from .forcing import (
    FourierForcing,
    duhamel_FT,
    endpoint_defect,
    make_fourier_forcing,
    per0_bump_forcing,
)
from .models import (
    DampingProfile,
    build_boundary_forced_wave,
    build_damped_wave_circle,
    build_damped_wave_interval,
    build_diagonal_model,
    build_heat_wave_1d,
    build_scalar_model,
    build_sphere_schrodinger,
    build_synthetic_resolvent_model,
    equatorial_harmonic,
    heat_wave_layout,
)
from .operator_core import (
    contour_spectral_projector,
    fractional_power,
    propagator_matrix,
    spectrum_report,
)
from .periodic_solver import (
    boundary_periodic_solve,
    convergence_gap,
    periodic_w0_direct,
    periodic_w0_harmonic_balance,
    periodic_w0_series,
    picard_divergence_threshold,
    picard_nonlinear,
)
from .resonance_lab import (
    concentration_scan,
    growth_experiment,
    resonant_forcing,
    resonant_horizon,
    truncation_tail,
)
from .stability_lab import (
    bt_crosscheck,
    decay_envelope,
    fit_decay_exponent,
    fit_power_law,
    interpolation_check,
    mlog_bound_curve,
    resolvent_scan,
)

__version__ = "0.1.0"

_NO_MODEL_TASKS = {"concentration", "invariants"}


# ---------------------------------------------------------------------------
# config loading and validation
# ---------------------------------------------------------------------------

def load_schema() -> dict:
    with resources.files("semiper").joinpath("config_schema.json").open() as fh:
        return json.load(fh)


def _require(cond: bool, msg: str):
    if not cond:
        raise ValueError(msg)


def validate_config(cfg: dict) -> None:
    """Schema validation plus the cross-field checks the schema cannot say."""
    jsonschema.validate(cfg, load_schema())
    task = cfg["task"]
    if task not in _NO_MODEL_TASKS:
        _require("model" in cfg, f"task {task!r} needs a 'model' section")
    if task in ("periodic_solve", "convergence", "gain_identity", "picard",
                "boundary_solve"):
        _require("forcing" in cfg, f"task {task!r} needs a 'forcing' section")
    if task == "boundary_solve":
        _require(cfg["forcing"]["kind"] == "boundary_signal",
                 "boundary_solve needs a boundary_signal forcing")
    scan = cfg.get("scan", {})
    if task in ("decay_scan", "interpolation_check"):
        _require("t_grid" in scan, f"task {task!r} needs scan.t_grid")
    if task == "resolvent_scan":
        _require("eta_grid" in scan, "resolvent_scan needs scan.eta_grid")
    if task in ("bt_crosscheck", "mlog_bound"):
        _require("t_grid" in scan and "eta_grid" in scan,
                 f"task {task!r} needs scan.t_grid and scan.eta_grid")
    if task == "growth":
        _require("growth" in cfg, "growth task needs a 'growth' section")
        _require(cfg["model"]["builder"] == "sphere_block",
                 "growth task needs a sphere_block model")
    if task == "concentration":
        _require("concentration" in cfg,
                 "concentration task needs a 'concentration' section")
        _require("damping" in cfg.get("model", {}),
                 "concentration task needs model.damping")
    if task == "picard":
        p = cfg["picard"]
        _require(len(p["powers"]) == len(p["coefficients"]),
                 "picard powers and coefficients must have equal length")
    for key in ("t_grid", "eta_grid"):
        g = scan.get(key)
        if g is None:
            continue
        _require(g["num"] >= 2, f"scan.{key} needs at least 2 points")
        if g.get("spacing", "linear") == "log":
            _require(g["start"] > 0, f"log-spaced scan.{key} needs start > 0")
        _require(g["stop"] > g["start"], f"scan.{key} needs stop > start")


def _grid(spec: dict) -> np.ndarray:
    if spec.get("spacing", "linear") == "log":
        return np.geomspace(spec["start"], spec["stop"], spec["num"])
    return np.linspace(spec["start"], spec["stop"], spec["num"])


# ---------------------------------------------------------------------------
# model bundles: builder dispatch plus block/coordinate metadata
# ---------------------------------------------------------------------------

@dataclass
class ModelBundle:
    name: str
    model: object
    blocks: dict                 # name -> {"slice": slice, "xi": array|None, "topology": str}
    sphere: object = None        # SphereBlockModel when applicable
    damping: DampingProfile | None = None


def build_bundle(cfg: dict) -> ModelBundle:
    spec = cfg["model"]
    name = spec["builder"]
    params = dict(spec.get("params", {}))
    damping = None
    if "damping" in spec:
        damping = DampingProfile.from_dict(spec["damping"])

    if name == "scalar":
        lam = params.get("lam", -1.0)
        if isinstance(lam, list):
            lam = complex(lam[0], lam[1])
        model = build_scalar_model(lam)
        return ModelBundle(name, model, {"all": {
            "slice": slice(0, 1), "xi": None, "topology": "modal"}})

    if name == "damped_wave_interval" or name == "boundary_wave":
        n = int(params["n"])
        length = float(params.get("length", math.pi))
        damping = damping or DampingProfile("constant", amplitude=1.0)
        if name == "damped_wave_interval":
            model = build_damped_wave_interval(n, length, damping)
        else:
            model = build_boundary_forced_wave(n, length, damping)
        xi = np.arange(1, n + 1) / (n + 1)
        blocks = {
            "position": {"slice": slice(0, n), "xi": xi, "topology": "interval"},
            "velocity": {"slice": slice(n, 2 * n), "xi": xi, "topology": "interval"},
        }
        return ModelBundle(name, model, blocks, damping=damping)

    if name == "damped_wave_circle":
        n = int(params["n"])
        length = float(params.get("length", 2 * math.pi))
        damping = damping or DampingProfile("constant", amplitude=1.0)
        model = build_damped_wave_circle(n, damping, length=length)
        xi = np.arange(n) / n
        blocks = {
            "position": {"slice": slice(0, n), "xi": xi, "topology": "circle"},
            "velocity": {"slice": slice(n, 2 * n), "xi": xi, "topology": "circle"},
        }
        return ModelBundle(name, model, blocks, damping=damping)

    if name == "heat_wave_1d":
        nh = int(params["n_heat"])
        nw = int(params["n_wave"])
        model = build_heat_wave_1d(nh, nw)
        lay = heat_wave_layout(nh, nw)
        blocks = {}
        for key in ("heat", "displacement", "velocity"):
            lo, hi = lay[key]
            m = hi - lo
            xi = np.arange(1, m + 1) / (m + 1)
            blocks[key] = {"slice": slice(lo, hi), "xi": xi,
                           "topology": "interval"}
        return ModelBundle(name, model, blocks)

    if name == "sphere_block":
        m = int(params["m"])
        Jmax = int(params.get("Jmax", m + 60))
        quad = params.get("quad_nodes")
        _require(damping is not None, "sphere_block needs model.damping")
        block = build_sphere_schrodinger(Jmax, m, damping, quad_nodes=quad)
        blocks = {"all": {"slice": slice(0, block.dim), "xi": None,
                          "topology": "modal"}}
        return ModelBundle(name, block.model, blocks, sphere=block,
                           damping=damping)

    if name == "synthetic_resolvent":
        model = build_synthetic_resolvent_model(int(params["n_modes"]),
                                                float(params["alpha"]))
        return ModelBundle(name, model, {"all": {
            "slice": slice(0, model.dim), "xi": None, "topology": "modal"}})

    if name == "diagonal":
        eigs = [complex(e[0], e[1]) if isinstance(e, list) else complex(e)
                for e in params["eigenvalues"]]
        gram = params.get("gram")
        model = build_diagonal_model(eigs, gram=np.diag(gram) if gram else None)
        return ModelBundle(name, model, {"all": {
            "slice": slice(0, model.dim), "xi": None, "topology": "modal"}})

    raise ValueError(f"unknown model builder {name!r}")


def vector_from_profile(bundle: ModelBundle, spec: dict,
                        rng: np.random.Generator) -> np.ndarray:
    """Build a state-space vector from a profile record in the config."""
    model = bundle.model
    dtype = complex if model.space.field_tag == "complex" else float
    out = np.zeros(model.dim, dtype=dtype)
    kind = spec["kind"]
    amp = spec.get("amplitude", 1.0)

    if kind == "sum":
        for term in spec.get("terms", []):
            out = out + vector_from_profile(bundle, term, rng)
        return amp * out

    if kind == "equatorial":
        _require(bundle.sphere is not None,
                 "equatorial profile needs a sphere_block model")
        return amp * equatorial_harmonic(bundle.sphere).astype(complex)

    block_name = spec.get("block", next(iter(bundle.blocks)))
    _require(block_name in bundle.blocks,
             f"model {bundle.name!r} has no block {block_name!r}")
    blk = bundle.blocks[block_name]
    sl = blk["slice"]
    width = sl.stop - sl.start
    xi = blk["xi"]

    if kind == "zeros":
        pass
    elif kind == "ones":
        out[sl] = 1.0
    elif kind == "basis":
        idx = spec.get("index", 0)
        _require(0 <= idx < width, f"basis index {idx} out of range")
        out[sl.start + idx] = 1.0
    elif kind == "values":
        vals = np.asarray(spec["values"], dtype=float)
        _require(vals.size == width,
                 f"profile values length {vals.size} != block size {width}")
        out[sl] = vals
    elif kind in ("sine_mode", "cosine_mode"):
        _require(xi is not None, f"{kind} needs a spatial block")
        mode = spec.get("mode", 1)
        factor = 2.0 * np.pi if blk["topology"] == "circle" else np.pi
        phase = factor * mode * xi
        out[sl] = np.sin(phase) if kind == "sine_mode" else np.cos(phase)
    elif kind == "gaussian":
        _require(xi is not None, "gaussian needs a spatial block")
        c = spec.get("center", 0.5)
        w = spec.get("width", 0.1)
        out[sl] = np.exp(-(((xi - c) / w) ** 2))
    elif kind == "random":
        vals = rng.standard_normal(width)
        if dtype is complex:
            vals = vals + 1j * rng.standard_normal(width)
        out[sl] = vals
    else:
        raise ValueError(f"unknown profile kind {kind!r}")
    return amp * out


def build_forcing(bundle: ModelBundle, fspec: dict,
                  rng: np.random.Generator):
    kind = fspec["kind"]
    model = bundle.model
    if kind == "bump":
        T = fspec["period"]
        order = fspec.get("order", 1)
        vec = vector_from_profile(bundle, fspec["profile"], rng)
        return per0_bump_forcing(T, order, fspec.get("amplitude", 1.0) * vec,
                                 space=model.space)
    if kind == "fourier":
        T = fspec["period"]
        coeffs: dict = {}

        def add(k, v):
            coeffs[k] = coeffs.get(k, 0) + v

        for comp in fspec.get("components", []):
            k = comp["harmonic"]
            a = comp.get("amplitude", 1.0)
            phi = comp.get("phase", 0.0)
            form = comp.get("form", "cosine")
            vec = vector_from_profile(bundle, comp["profile"], rng)
            if form == "complex":
                add(k, a * np.exp(1j * phi) * vec)
            elif k == 0:
                add(0, a * math.cos(phi) * vec)
            elif form == "cosine":
                c = 0.5 * a * np.exp(-1j * phi)
                add(k, c * vec)
                add(-k, np.conj(c) * vec)
            else:
                c = a / 2j * np.exp(-1j * phi)
                add(k, c * vec)
                add(-k, -np.conj(c) * vec)
        return make_fourier_forcing(T, coeffs, space=model.space)
    if kind == "boundary_signal":
        T = fspec.get("period", 1.0)
        return boundary_signal_forcing(model, fspec, T)
    raise ValueError(f"unknown forcing kind {kind!r}")


def boundary_signal_forcing(model, fspec: dict, period: float) -> FourierForcing:
    """Scalar boundary signal as a Fourier forcing on the input space."""
    _require(model.B is not None, "boundary_signal needs a model with B")
    m = model.B.shape[1]
    ones = np.ones(m)
    a = fspec.get("amplitude", 1.0)
    signal = fspec.get("signal", "sin_squared")
    h = fspec.get("harmonic", 1)
    if signal == "sin_squared":
        # sin^2(pi t / T) = 1/2 - cos(2 pi t / T)/2
        coeffs = {0: 0.5 * a * ones, 1: -0.25 * a * ones, -1: -0.25 * a * ones}
    elif signal == "cosine":
        coeffs = {h: 0.5 * a * ones, -h: 0.5 * a * ones} if h else {0: a * ones}
    else:
        coeffs = {h: a / 2j * ones, -h: -a / 2j * ones}
    return make_fourier_forcing(period, coeffs)


# ---------------------------------------------------------------------------
# emission: CSV / JSON / plot scripts, with hashing for the manifest
# ---------------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, np.ndarray):
        return _jsonable(o.tolist())
    if isinstance(o, (bool, np.bool_)):
        return bool(o)
    if isinstance(o, (int, np.integer)):
        return int(o)
    if isinstance(o, (float, np.floating)):
        return float(o)
    if isinstance(o, (complex, np.complexfloating)):
        return [float(o.real), float(o.imag)]
    return o


class RunContext:
    """Holds the output directory and the list of files written so far."""

    def __init__(self, out_dir: Path, prefix: str, seed: int, threads: int):
        self.out_dir = out_dir
        self.prefix = prefix
        self.seed = seed
        self.threads = threads
        self.rng = np.random.default_rng(seed)
        self.files: list[str] = []

    def _write(self, name: str, text: str) -> Path:
        path = self.out_dir / (self.prefix + name)
        try:
            path.write_text(text)
        except OSError as e:
            raise IoError(f"cannot write {path}: {e}") from e
        self.files.append(path.name)
        return path

    def emit_csv(self, name: str, columns, rows):
        header = ",".join(f"{cname} [{unit}]" for cname, unit in columns)
        body = "\n".join(",".join(_fmt(v) for v in row) for row in rows)
        text = header + "\n" + (body + "\n" if body else "")
        return self._write(name, text)

    def emit_json(self, name: str, payload: dict):
        text = json.dumps(_jsonable(payload), sort_keys=True, indent=2) + "\n"
        return self._write(name, text)

    def emit_plot(self, name: str, lines):
        return self._write(name, "\n".join(lines) + "\n")


def read_csv(path):
    """Parse a CSV emitted by emit_csv back into (column names, array)."""
    text = Path(path).read_text().strip().splitlines()
    names = [h.split(" [")[0] for h in text[0].split(",")]
    if len(text) == 1:
        return names, np.empty((0, len(names)))
    data = np.array([[float(v) for v in line.split(",")]
                     for line in text[1:]])
    return names, data


def _gp_header(title: str) -> list:
    return [
        "# gnuplot script generated by semiper run",
        "set datafile separator ','",
        f"set title '{title}'",
        "set key left bottom",
    ]


# ---------------------------------------------------------------------------
# tasks
# ---------------------------------------------------------------------------

def _solver_spec(cfg):
    return cfg.get("solver", {})


def _quad_kwargs(sspec):
    out = {}
    if "panels" in sspec:
        out["panels"] = sspec["panels"]
    if "order" in sspec:
        out["order"] = sspec["order"]
    return out


def _task_spectrum(cfg, bundle, ctx):
    model = bundle.model
    rep = spectrum_report(model)
    payload = {
        "label": rep.label,
        "dim": model.dim,
        "abscissa": rep.abscissa,
        "deflated_abscissa": rep.deflated_abscissa,
        "distance_to_imaginary_axis": rep.distance_to_imaginary_axis,
        "kernel_dim": rep.kernel_dim,
        "assumptions_ok": rep.assumptions_ok,
    }
    if model.has_kernel:
        proj = contour_spectral_projector(model)
        payload["projector_gap"] = float(
            np.linalg.norm(proj - model.pi0, 2))
    ctx.emit_json("spectrum.json", payload)
    ctx.emit_csv("eigenvalues.csv",
                 [("index", "1"), ("real", "1/t"), ("imag", "1/t")],
                 [(i, ev.real, ev.imag) for i, ev in enumerate(rep.eigenvalues)])


_METHODS = {
    "series": periodic_w0_series,
    "direct": periodic_w0_direct,
    "harmonic_balance": periodic_w0_harmonic_balance,
}


def _task_periodic_solve(cfg, bundle, ctx):
    model = bundle.model
    sspec = _solver_spec(cfg)
    f = build_forcing(bundle, cfg["forcing"], ctx.rng)
    method = sspec.get("method", "direct")
    n_periods = sspec.get("n_periods", 1)
    quad = _quad_kwargs(sspec)

    series_kw = {}
    if "tol" in sspec:
        series_kw["tol"] = sspec["tol"]
    if "max_terms" in sspec:
        series_kw["max_terms"] = sspec["max_terms"]

    if method == "all":
        reports = {name: fn(model, f, n_periods=n_periods,
                            **(series_kw if name == "series" else {}), **quad)
                   for name, fn in _METHODS.items()}
        rep = reports["direct"]
        names = sorted(reports)
        pairwise = {}
        for i, a in enumerate(names):
            for b in names[i + 1:]:
                gap = model.space.norm(reports[a].w0 - reports[b].w0)
                pairwise[f"{a}_vs_{b}"] = gap
    else:
        rep = _METHODS[method](model, f, n_periods=n_periods,
                               **(series_kw if method == "series" else {}),
                               **quad)
        pairwise = None

    payload = {
        "method": rep.method,
        "w0_real": rep.w0.real,
        "w0_imag": rep.w0.imag,
        "w0_norm": model.space.norm(rep.w0),
        "norm_ratio": rep.norm_ratio,
        "residual_per_period": rep.residual_per_period,
        "tail_estimate": rep.tail_estimate,
        "condition": rep.condition,
        "crosscheck_gap": rep.crosscheck_gap,
        "forcing_tag": f.tag,
    }
    if pairwise is not None:
        payload["pairwise_gaps"] = pairwise
    ctx.emit_json("periodic_report.json", payload)
    ctx.emit_csv("residuals.csv", [("period", "1"), ("residual", "X")],
                 list(enumerate(rep.residual_per_period, start=1)))
    ctx.emit_csv("w0.csv", [("index", "1"), ("real", "X"), ("imag", "X")],
                 [(i, rep.w0[i].real, rep.w0[i].imag)
                  for i in range(model.dim)])


def _task_convergence(cfg, bundle, ctx):
    model = bundle.model
    sspec = _solver_spec(cfg)
    f = build_forcing(bundle, cfg["forcing"], ctx.rng)
    n_periods = sspec.get("n_periods", 60)
    n_vectors = sspec.get("n_vectors", 5)
    w0 = periodic_w0_direct(model, f).w0
    reports = []
    for _ in range(n_vectors):
        v0 = ctx.rng.standard_normal(model.dim)
        if model.space.field_tag == "complex":
            v0 = v0 + 1j * ctx.rng.standard_normal(model.dim)
        reports.append(convergence_gap(model, f, v0, n_periods, w0=w0))
    rho = reports[0].spectral_radius
    tail = min(5, n_periods)
    final = [float(np.mean(r.ratios[-tail:])) for r in reports]
    payload = {
        "spectral_radius": rho,
        "n_periods": n_periods,
        "final_ratios": final,
        "final_ratio_rel_errors": [abs(x - rho) / rho for x in final],
    }
    ctx.emit_json("convergence.json", payload)
    gcols = [("n", "1")] + [(f"gap_{i}", "X") for i in range(n_vectors)]
    grows = [(n, *[r.gaps[n] for r in reports])
             for n in range(n_periods + 1)]
    ctx.emit_csv("convergence.csv", gcols, grows)
    rcols = [("n", "1")] + [(f"ratio_{i}", "1") for i in range(n_vectors)]
    rrows = [(n + 1, *[r.ratios[n] for r in reports])
             for n in range(n_periods)]
    ctx.emit_csv("ratios.csv", rcols, rrows)


def _task_decay_scan(cfg, bundle, ctx):
    scan_spec = cfg["scan"]
    alpha = scan_spec.get("alpha", 1.0)
    t = _grid(scan_spec["t_grid"])
    scan = decay_envelope(bundle.model, alpha, t, threads=ctx.threads)
    fit = fit_decay_exponent(scan, window=scan_spec.get("t_window"))
    ctx.emit_csv("decay.csv",
                 [("t", "t"), ("h_alpha", "1"), ("running_min", "1")],
                 zip(t, scan.values, scan.extras["running_min"]))
    ctx.emit_json("decay.json", {
        "alpha": alpha,
        "slope": fit.exponent,
        "beta_hat": -fit.exponent,
        "constant": fit.constant,
        "r2": fit.r2,
        "window": list(fit.window),
        "normal": scan.extras["normal"],
        "monotone": scan.extras["monotone"],
    })
    ctx.emit_plot("decay_plot.gp", _gp_header("decay envelope") + [
        "set logscale xy",
        "set xlabel 't'",
        f"set ylabel 'h_{alpha}(t)'",
        f"C = {fit.constant!r}",
        f"p = {-fit.exponent!r}",
        f"plot '{ctx.prefix}decay.csv' skip 1 using 1:2 with lines"
        " title 'envelope', \\",
        "     C * x**(-p) title sprintf('fit t^{-%.3f}', p)",
    ])


def _task_resolvent_scan(cfg, bundle, ctx):
    scan_spec = cfg["scan"]
    eta = _grid(scan_spec["eta_grid"])
    scan = resolvent_scan(bundle.model, eta, threads=ctx.threads)
    fit = fit_power_law(scan, window=scan_spec.get("eta_window"),
                        use="running_max")
    ctx.emit_csv("resolvent.csv",
                 [("eta", "1/t"), ("norm", "1"), ("running_max", "1")],
                 zip(eta, scan.values, scan.extras["running_max"]))
    ctx.emit_json("resolvent.json", {
        "alpha_hat": fit.exponent,
        "constant": fit.constant,
        "r2": fit.r2,
        "window": list(fit.window),
    })
    ctx.emit_plot("resolvent_plot.gp", _gp_header("resolvent growth") + [
        "set logscale xy",
        "set xlabel 'eta'",
        "set ylabel '|R(i eta)|'",
        f"C = {fit.constant!r}",
        f"p = {fit.exponent!r}",
        f"plot '{ctx.prefix}resolvent.csv' skip 1 using 1:3 with lines"
        " title 'running max', \\",
        "     C * x**p title sprintf('fit eta^{%.3f}', p)",
    ])


def _task_bt_crosscheck(cfg, bundle, ctx):
    scan_spec = cfg["scan"]
    rep = bt_crosscheck(bundle.model,
                        _grid(scan_spec["t_grid"]),
                        _grid(scan_spec["eta_grid"]),
                        t_window=scan_spec.get("t_window"),
                        eta_window=scan_spec.get("eta_window"),
                        threads=ctx.threads)
    ctx.emit_csv("decay.csv",
                 [("t", "t"), ("h_1", "1"), ("running_min", "1")],
                 zip(rep.decay.abscissae, rep.decay.values,
                     rep.decay.extras["running_min"]))
    ctx.emit_csv("resolvent.csv",
                 [("eta", "1/t"), ("norm", "1"), ("running_max", "1")],
                 zip(rep.resolvent.abscissae, rep.resolvent.values,
                     rep.resolvent.extras["running_max"]))
    ctx.emit_json("bt.json", {
        "alpha_hat": rep.alpha_hat,
        "beta_hat": rep.beta_hat,
        "product": rep.product,
        "decay_fit": {"r2": rep.decay.fit.r2,
                      "window": list(rep.decay.fit.window)},
        "resolvent_fit": {"r2": rep.resolvent.fit.r2,
                          "window": list(rep.resolvent.fit.window)},
    })
    ctx.emit_plot("bt_plot.gp", _gp_header("resolvent vs decay") + [
        "set logscale xy",
        "set xlabel 't  (decay) / eta  (resolvent)'",
        f"plot '{ctx.prefix}decay.csv' skip 1 using 1:3 with lines"
        " title 'decay running min', \\",
        f"     '{ctx.prefix}resolvent.csv' skip 1 using 1:3 with lines"
        f" title 'resolvent running max (alpha*beta = {rep.product:.3f})'",
    ])


def _task_interpolation_check(cfg, bundle, ctx):
    scan_spec = cfg["scan"]
    alpha = scan_spec["alpha"]
    g = scan_spec["t_grid"]
    t = _grid(g)
    base = interpolation_check(bundle.model, alpha, t, threads=ctx.threads)
    ext_spec = dict(g)
    ext_spec["stop"] = g["stop"] * scan_spec.get("extension_factor", 1.5)
    ext_spec["num"] = 2 * g["num"] - 1
    ext = interpolation_check(bundle.model, alpha, _grid(ext_spec),
                              threads=ctx.threads)
    sup0, sup1 = base.extras["sup"], ext.extras["sup"]
    ctx.emit_csv("interpolation.csv",
                 [("t", "t"), ("ratio", "1"), ("h_alpha", "1"), ("h_one", "1")],
                 zip(t, base.values, base.extras["h_alpha"],
                     base.extras["h_one"]))
    ctx.emit_json("interpolation.json", {
        "alpha": alpha,
        "sup_ratio": sup0,
        "arg_sup": base.extras["arg_sup"],
        "sup_ratio_extended": sup1,
        "relative_change": abs(sup1 - sup0) / sup0,
    })


def _task_mlog_bound(cfg, bundle, ctx):
    scan_spec = cfg["scan"]
    rep = mlog_bound_curve(bundle.model, _grid(scan_spec["eta_grid"]),
                           _grid(scan_spec["t_grid"]), threads=ctx.threads)
    ctx.emit_csv("mlog_resolvent.csv",
                 [("eta", "1/t"), ("M", "1"), ("M_log", "1")],
                 zip(rep.eta_grid, rep.resolvent_max, rep.m_log))
    ctx.emit_csv("mlog.csv",
                 [("t", "t"), ("decay", "1"), ("bound", "1")],
                 zip(rep.t_grid, rep.decay, rep.bound))
    ctx.emit_json("mlog.json", {
        "constant": rep.constant,
        "fraction_satisfied": rep.fraction_satisfied,
    })
    ctx.emit_plot("mlog_plot.gp", _gp_header("log-corrected bound") + [
        "set logscale xy",
        "set xlabel 't'",
        f"plot '{ctx.prefix}mlog.csv' skip 1 using 1:2 with lines"
        " title 'measured decay', \\",
        f"     '{ctx.prefix}mlog.csv' skip 1 using 1:3 with lines"
        " title 'inverted M_log bound'",
    ])


def _task_gain_identity(cfg, bundle, ctx):
    model = bundle.model
    f = build_forcing(bundle, cfg["forcing"], ctx.rng)
    orders = cfg.get("scan", {}).get("gain_orders", [1, 2, 3])
    quad = _quad_kwargs(_solver_spec(cfg))
    FT = duhamel_FT(model, f, **quad)

    def raw_and_corrected(forcing, k):
        lhs = np.linalg.matrix_power(model.A, k) @ duhamel_FT(model, forcing,
                                                              **quad)
        rhs = duhamel_FT(model, forcing.derivative_forcing(k), **quad)
        defect = endpoint_defect(model, forcing, k)
        scale = max(model.space.norm(lhs), 1e-300)
        return (model.space.norm(lhs - rhs) / scale,
                model.space.norm(lhs - rhs - defect) / scale)

    rows = []
    errors = {}
    corrected = {}
    for k in orders:
        raw, corr = raw_and_corrected(f, k)
        errors[str(k)] = raw
        corrected[str(k)] = corr
        rows.append((k, raw, corr))

    # negative control: same spatial profile but a plain cosine in time,
    # whose derivatives do not vanish at the period endpoints
    vec = f.coefficients[int(np.argmin(np.abs(f.harmonics)))]
    control = make_fourier_forcing(f.period, {1: vec, -1: np.conj(vec)},
                                   space=model.space)
    ctl_raw, ctl_corr = raw_and_corrected(control, orders[0])
    ctx.emit_csv("gain.csv",
                 [("k", "1"), ("relative_error", "1"),
                  ("corrected_error", "1")], rows)
    ctx.emit_json("gain.json", {
        "orders": list(orders),
        "errors": errors,
        "corrected_errors": corrected,
        "control_error": ctl_raw,
        "control_corrected_error": ctl_corr,
        "forcing_order": f.per0_order,
        "ft_norm": model.space.norm(FT),
    })


def _task_growth(cfg, bundle, ctx):
    gspec = cfg["growth"]
    block = bundle.sphere
    j = gspec["j"]
    k = gspec.get("k", 0)
    _require(j == block.m, "growth.j must equal the block order model.params.m")
    lam = j * (j + 1.0)
    period = 2.0 * math.pi
    if gspec.get("period_mode", "resonant") == "detuned":
        period *= 1.0 + 1.0 / (2.0 * lam)
    f = resonant_forcing(block, j, k, period)
    exp = growth_experiment(block, j, k, n_max=gspec.get("n_max"),
                            period=period, forcing=f,
                            deviation_checks=gspec.get("deviation_checks", 200))
    ctx.emit_csv("growth.csv",
                 [("n", "1"), ("norm", "X"), ("lower_bound", "X")],
                 zip(exp.n_grid, exp.norms, exp.lower_bound_curve))
    ctx.emit_csv("deviations.csv",
                 [("m", "1"), ("deviation", "X"), ("bound", "X")],
                 [(m + 1, exp.deviation_norms[m],
                   (m + 1) * period * exp.concentration_norm)
                  for m in range(exp.deviation_norms.size)])
    payload = {
        "j": j, "k": k, "Jmax": exp.Jmax,
        "period": period,
        "period_mode": gspec.get("period_mode", "resonant"),
        "C_j": exp.C_j,
        "concentration_norm": exp.concentration_norm,
        "fitted_c": exp.fitted_c,
        "propagation_bound": exp.propagation_bound,
        "forcing_l1_norm": exp.forcing_l1_norm,
        "single_period_response": exp.single_period_response,
        "n_max": int(exp.n_grid[-1]),
        "resonant_horizon": resonant_horizon(block, k),
        "final_norm": float(exp.norms[-1]),
        "final_over_Cjn": float(exp.norms[-1] / (exp.C_j * exp.n_grid[-1])),
        "truncation_leakage": exp.truncation_leakage,
        "multiplier_tail": truncation_tail(block),
    }
    plot = _gp_header("resonant growth") + [
        "set xlabel 'n (periods)'",
        "set ylabel '|u(nT)|'",
        f"plot '{ctx.prefix}growth.csv' skip 1 using 1:2 with lines"
        " title 'measured', \\",
        f"     '{ctx.prefix}growth.csv' skip 1 using 1:3 with lines"
        " title 'lower bound'",
    ]
    if "control_damping" in gspec:
        ctrl_damping = DampingProfile.from_dict(gspec["control_damping"])
        cblock = build_sphere_schrodinger(block.Jmax, block.m, ctrl_damping,
                                          quad_nodes=block.quad_nodes)
        cexp = growth_experiment(cblock, j, k, n_max=int(exp.n_grid[-1]),
                                 period=period, forcing=f,
                                 deviation_checks=1)
        ctx.emit_csv("growth_control.csv",
                     [("n", "1"), ("norm", "X"), ("norm_over_n", "X")],
                     zip(cexp.n_grid, cexp.norms, cexp.norms / cexp.n_grid))
        payload["control_sup"] = float(np.max(cexp.norms))
        payload["control_final_over_n"] = float(cexp.norms[-1] / cexp.n_grid[-1])
        plot[-1] += ", \\"
        plot.append(f"     '{ctx.prefix}growth_control.csv' skip 1 using 1:2"
                    " with lines title 'fully damped control'")
    ctx.emit_json("growth.json", payload)
    ctx.emit_plot("growth_plot.gp", plot)


def _task_concentration(cfg, ctx):
    cspec = cfg["concentration"]
    damping = DampingProfile.from_dict(cfg["model"]["damping"])
    scan = concentration_scan(cspec["js"], damping,
                              extra_degrees=cspec.get("extra_degrees", 60),
                              quad_nodes=cspec.get("quad_nodes"))
    payload = {
        "js": scan.js,
        "fitted_c": scan.fitted_c,
        "slope_vs_j": scan.slope_vs_j,
        "intercept": scan.intercept,
        "r2": scan.r2,
    }
    if damping.kind == "cap":
        aperture = math.acos(damping.cutoff)
        payload["aperture"] = aperture
        payload["reference_slope"] = math.log(math.sin(aperture))
    ctx.emit_csv("concentration.csv",
                 [("j", "1"), ("sqrt_eigenvalue", "1"), ("norm", "1"),
                  ("multiplier_tail", "1")],
                 zip(scan.js, scan.sqrt_eigenvalues,
                     scan.concentration_norms, scan.tails))
    ctx.emit_json("concentration.json", payload)
    ctx.emit_plot("concentration_plot.gp",
                  _gp_header("damping seen by equatorial modes") + [
                      "set logscale y",
                      "set xlabel 'j'",
                      "set ylabel '|M_a Phi_j|'",
                      f"C = {scan.intercept!r}",
                      f"c = {scan.fitted_c!r}",
                      f"plot '{ctx.prefix}concentration.csv' skip 1 using 1:3"
                      " with points title 'measured', \\",
                      "     C * exp(-c * sqrt(x*(x+1)))"
                      " title sprintf('fit c=%.3f', c)",
                  ])


def _task_picard(cfg, bundle, ctx):
    model = bundle.model
    pspec = cfg["picard"]
    f = build_forcing(bundle, cfg["forcing"], ctx.rng)
    eps = pspec.get("epsilon", 1.0)
    f_eps = FourierForcing(f.period, f.harmonics, eps * f.coefficients,
                           space=model.space)
    poly = {int(p): c for p, c in zip(pspec["powers"], pspec["coefficients"])}
    structure = pspec.get("structure", "wave")
    kwargs = dict(structure=structure,
                  n_nodes=pspec.get("n_nodes", 64),
                  gauss_order=pspec.get("gauss_order", 8),
                  max_iter=pspec.get("max_iter", 30),
                  tol=pspec.get("tol", 1e-10))
    rep = picard_nonlinear(model, f_eps, poly, **kwargs)
    ctx.emit_json("picard.json", {
        "converged": rep.converged,
        "iterations": rep.iterations,
        "contraction_ratios": rep.contraction_ratios,
        "max_ratio": max(rep.contraction_ratios) if rep.contraction_ratios
        else None,
        "ode_residual": rep.ode_residual,
        "w0_norm": model.space.norm(rep.w0),
        "epsilon": eps,
    })
    rows = [(i + 1, g, rep.contraction_ratios[i - 1] if i >= 1 else float("nan"))
            for i, g in enumerate(rep.gap_history)]
    ctx.emit_csv("picard.csv",
                 [("sweep", "1"), ("gap", "X"), ("ratio", "1")], rows)
    if "amplitudes" in pspec:
        thresh = picard_divergence_threshold(model, f, poly,
                                             amplitudes=pspec["amplitudes"],
                                             **kwargs)
        ctx.emit_json("picard_threshold.json", thresh)


def _task_boundary_solve(cfg, bundle, ctx):
    model = bundle.model
    fspec = cfg["forcing"]
    sspec = _solver_spec(cfg)
    periods = fspec.get("periods") or [fspec.get("period", 1.0)]
    rows = []
    details = {}
    for T in periods:
        g = boundary_signal_forcing(model, fspec, T)
        rep = boundary_periodic_solve(model, g,
                                      n_periods=sspec.get("n_periods", 1),
                                      panels=sspec.get("panels"),
                                      order=sspec.get("order", 8))
        worst = max(rep.residual_per_period)
        rows.append((T, worst, rep.norm_ratio, rep.admissibility))
        details[f"T={T:g}"] = {
            "residuals": rep.residual_per_period,
            "norm_ratio": rep.norm_ratio,
            "admissibility": rep.admissibility,
            "w0_norm": model.space.norm(rep.w0),
        }
    ctx.emit_csv("boundary.csv",
                 [("period", "t"), ("residual", "X"), ("norm_ratio", "1"),
                  ("admissibility", "1")], rows)
    ctx.emit_json("boundary.json", {"periods": periods, "runs": details})


def _invariant_models():
    bump = DampingProfile("bump", amplitude=1.0, center=0.5 * math.pi,
                          width=2.0)
    cap = DampingProfile("cap", amplitude=1.0, width=0.05, cutoff=0.85)
    return [
        ("scalar", build_scalar_model(-1.0)),
        ("interval", build_damped_wave_interval(24, math.pi, bump)),
        ("circle", build_damped_wave_circle(24,
                                            DampingProfile("constant",
                                                           amplitude=1.0))),
        ("heat_wave", build_heat_wave_1d(8, 8)),
        ("sphere", build_sphere_schrodinger(12, 2, cap,
                                            quad_nodes=1200).model),
        ("synthetic", build_synthetic_resolvent_model(12, 1.0)),
        ("diagonal", build_diagonal_model([-1.0, -4.0])),
    ]


def _task_invariants(cfg, ctx):
    models = _invariant_models()
    checks = {}

    worst = 0.0
    for _, model in models:
        x = ctx.rng.standard_normal(model.dim)
        if model.space.field_tag == "complex":
            x = x + 1j * ctx.rng.standard_normal(model.dim)
        for t, s in ((0.3, 0.7), (1.1, 0.4)):
            lhs = propagator_matrix(model, t + s) @ x
            rhs = propagator_matrix(model, t) @ (propagator_matrix(model, s) @ x)
            worst = max(worst, model.space.norm(lhs - rhs)
                        / max(model.space.norm(x), 1e-300))
    checks["semigroup_law"] = {"max_error": worst, "tol": 1e-9}

    worst = 0.0
    for _, model in models:
        for a, b in ((0.5, 0.5), (1.0, 0.5)):
            fa = fractional_power(model, a, reduced=True)
            fb = fractional_power(model, b, reduced=True)
            fab = fractional_power(model, a + b, reduced=True)
            scale = max(float(np.linalg.norm(fab, 2)), 1e-300)
            worst = max(worst,
                        float(np.linalg.norm(fab - fa @ fb, 2)) / scale)
    checks["fractional_power_law"] = {"max_error": worst, "tol": 1e-8}

    worst = 0.0
    for _, model in models:
        if not model.has_kernel:
            continue
        p = model.pi0
        worst = max(worst, float(np.linalg.norm(p @ p - p, 2)))
        scale = float(np.linalg.norm(model.A, 2))
        worst = max(worst, float(np.linalg.norm(p @ model.A, 2)) / scale)
        worst = max(worst, float(np.linalg.norm(model.A @ p, 2)) / scale)
        worst = max(worst,
                    float(np.linalg.norm(contour_spectral_projector(model) - p,
                                         2)))
    checks["kernel_projector"] = {"max_error": worst, "tol": 1e-8}

    worst = 0.0
    for name, model in models:
        if name in ("synthetic", "diagonal", "scalar"):
            continue
        T = 1.0
        xi = np.arange(1, model.dim + 1) / (model.dim + 1)
        va = np.sin(np.pi * xi)
        vb = np.cos(3 * np.pi * xi) * xi
        fa = per0_bump_forcing(T, 1, va, space=model.space)
        fb = make_fourier_forcing(T, {1: vb / 2, -1: vb / 2},
                                  space=model.space)
        double = _sum_fourier(fa, fa, 1.0, 1.0, model.space)
        lhs = duhamel_FT(model, double)
        rhs = 2.0 * duhamel_FT(model, fa)
        worst = max(worst, model.space.norm(lhs - rhs)
                    / max(model.space.norm(rhs), 1e-300))
        sum_f = _sum_fourier(fa, fb, 0.5, -1.5, model.space)
        lhs2 = duhamel_FT(model, sum_f)
        rhs2 = 0.5 * duhamel_FT(model, fa) - 1.5 * duhamel_FT(model, fb)
        worst = max(worst, model.space.norm(lhs2 - rhs2)
                    / max(model.space.norm(rhs2), 1e-300))
    checks["duhamel_linearity"] = {"max_error": worst, "tol": 1e-10}

    # uniform boundedness, not contraction: the circle Gram carries the
    # conserved mean separately, so transient gains up to sqrt(2) are real
    worst = 0.0
    for name, model in models:
        if name == "synthetic":
            continue
        for t in (0.0, 0.5, 2.0, 10.0, 40.0):
            gain = model.space.op_norm(propagator_matrix(model, t))
            worst = max(worst, gain)
    checks["uniform_bound"] = {"max_error": worst, "tol": 4.0}

    for rec in checks.values():
        rec["pass"] = bool(rec["max_error"] <= rec["tol"])
    ctx.emit_json("invariants.json", {
        "checks": checks,
        "all_pass": all(rec["pass"] for rec in checks.values()),
    })


def _sum_fourier(fa: FourierForcing, fb: FourierForcing, ca, cb, space):
    coeffs = {}
    for h, c in zip(fa.harmonics, fa.coefficients):
        coeffs[int(h)] = coeffs.get(int(h), 0) + ca * c
    for h, c in zip(fb.harmonics, fb.coefficients):
        coeffs[int(h)] = coeffs.get(int(h), 0) + cb * c
    return make_fourier_forcing(fa.period, coeffs, space=space)


_TASKS = {
    "spectrum": _task_spectrum,
    "periodic_solve": _task_periodic_solve,
    "convergence": _task_convergence,
    "decay_scan": _task_decay_scan,
    "resolvent_scan": _task_resolvent_scan,
    "bt_crosscheck": _task_bt_crosscheck,
    "interpolation_check": _task_interpolation_check,
    "mlog_bound": _task_mlog_bound,
    "gain_identity": _task_gain_identity,
    "growth": _task_growth,
    "concentration": _task_concentration,
    "picard": _task_picard,
    "boundary_solve": _task_boundary_solve,
    "invariants": _task_invariants,
}


# ---------------------------------------------------------------------------
# manifest and the run driver
# ---------------------------------------------------------------------------

@dataclass
class RunManifest:
    task: str
    label: str
    config_path: str
    config_sha256: str
    seed: int
    threads: int
    package_version: str
    numpy_version: str
    scipy_version: str
    wall_clock: dict
    outputs: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return _jsonable(self.__dict__)


def _sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def run(config_path, out_dir=None, seed=None, threads: int = 1) -> RunManifest:
    config_path = Path(config_path)
    raw = config_path.read_bytes()
    cfg = json.loads(raw)
    validate_config(cfg)

    task = cfg["task"]
    if seed is None:
        seed = cfg.get("seed", 0)
    out_dir = Path(out_dir) if out_dir is not None else Path("out") / config_path.stem
    out_dir.mkdir(parents=True, exist_ok=True)
    prefix = cfg.get("outputs", {}).get("prefix", "")
    ctx = RunContext(out_dir, prefix, int(seed), int(threads))

    clock = {}
    t0 = time.perf_counter()
    if task in _NO_MODEL_TASKS:
        bundle = None
    else:
        bundle = build_bundle(cfg)
    clock["build"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    if bundle is None:
        _TASKS[task](cfg, ctx)
    else:
        _TASKS[task](cfg, bundle, ctx)
    clock["solve"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    outputs = []
    for name in sorted(ctx.files):
        path = out_dir / name
        data = path.read_bytes()
        outputs.append({"name": name, "bytes": len(data),
                        "sha256": _sha256_bytes(data)})
    manifest = RunManifest(
        task=task,
        label=cfg.get("label", ""),
        config_path=str(config_path),
        config_sha256=_sha256_bytes(raw),
        seed=int(seed),
        threads=int(threads),
        package_version=__version__,
        numpy_version=np.__version__,
        scipy_version=scipy.__version__,
        wall_clock=clock,
        outputs=outputs,
    )
    clock["emit"] = time.perf_counter() - t0
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest.to_dict(), sort_keys=True, indent=2) + "\n")
    return manifest


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="semiper",
        description="periodic responses and decay diagnostics for damped "
                    "evolution models")
    sub = parser.add_subparsers(dest="command", required=True)
    runp = sub.add_parser("run", help="run one experiment config")
    runp.add_argument("--config", required=True, help="JSON config path")
    runp.add_argument("--out", default=None, help="output directory")
    runp.add_argument("--seed", type=int, default=None,
                      help="override the config seed")
    runp.add_argument("--threads", type=int, default=1,
                      help="worker threads for scans")
    args = parser.parse_args(argv)

    try:
        manifest = run(args.config, out_dir=args.out, seed=args.seed,
                       threads=args.threads)
    except (jsonschema.ValidationError, json.JSONDecodeError, ValueError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except FileNotFoundError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (SemiperError, np.linalg.LinAlgError) as e:
        name = f"{type(e).__module__}.{type(e).__name__}"
        print(f"error: {name}: {e}", file=sys.stderr)
        return 3
    n = len(manifest.outputs)
    print(f"{manifest.task}: wrote {n} files (+ manifest.json), "
          f"config {manifest.config_sha256[:12]}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
