"""Scenario configuration, orchestration, and report emission.

A scenario is a flat key=value text file (diff-friendly, no nesting):

    name                 = case1
    mode                 = kinetic            # or macro
    potential.x_mode     = power              # power | logarithmic | zero
    potential.alpha      = 2.0                # (or potential.gamma)
    beta                 = 2.0
    grid.x_half_width    = 8
    grid.v_half_width    = 8
    grid.nx              = 129
    grid.nv              = 129
    grid.truncation_tol  = 1e-8
    schedule.dt          = 0.02
    schedule.t_final     = 20
    schedule.sample_stride = 10
    delta                = auto               # or a number in (0, delta_star)
    moments.x            = 2                  # comma-separated powers
    moments.v            = 2
    rates.k              = 2                  # classification parameters
    rates.ell            = 2
    initial.kind         = bump               # bump | odd_v | shifted_gaussian
    initial.epsilon      = 0.5                #   | macro_gaussian | macro_bump
    seed                 = 1234
    output_dir           = out

Reports: one CSV trajectory (columns exactly t, norm_sq_mu, entropy_H,
dissipation_D, envelope, J_<k>..., K_<l>..., max_principle_ok) and one JSON
summary per scenario; batch mode adds an index file. All outputs are
deterministic for a fixed (config, seed).
"""

import json
import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import evolution, hypo, rates, spectral
from .equilibria import PotentialSpec, build_equilibrium
from .errors import NumericalError, ValidationError
from .grids import Grid1D, PhaseGrid
from .operators import assemble

_INITIAL_KINDS = ("bump", "odd_v", "shifted_gaussian", "macro_gaussian",
                  "macro_bump")


def parse_config_text(text):
    """Flat key=value lines; '#' starts a comment; later keys win."""
    mapping = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ValidationError("config line %d has no '=': %r" % (lineno, line))
        key, value = body.split("=", 1)
        mapping[key.strip()] = value.strip()
    return mapping


def _floats_list(text):
    items = [p.strip() for p in str(text).split(",") if p.strip()]
    return tuple(float(p) for p in items)


class ScenarioConfig:
    """Validated scenario description; .raw echoes the source mapping."""

    def __init__(self, mapping, name=None):
        raw = dict(mapping)
        self.raw = raw
        get = raw.get
        self.name = str(get("name", name or "scenario"))
        self.mode = str(get("mode", "kinetic"))
        if self.mode not in ("kinetic", "macro"):
            raise ValidationError("mode must be 'kinetic' or 'macro'")

        x_mode = str(get("potential.x_mode", "power"))
        alpha = get("potential.alpha")
        gamma = get("potential.gamma")
        self.beta = float(get("beta", 2.0))
        self.potential = PotentialSpec(
            x_mode, self.beta,
            alpha=None if alpha is None else float(alpha),
            gamma=None if gamma is None else float(gamma))

        self.x_half_width = float(get("grid.x_half_width", 8.0))
        self.v_half_width = float(get("grid.v_half_width", 8.0))
        self.nx = int(get("grid.nx", 129))
        self.nv = int(get("grid.nv", 129))
        if self.nx % 2 == 0 or self.nv % 2 == 0:
            raise ValidationError("grid.nx and grid.nv must be odd")
        self.truncation_tol = float(get("grid.truncation_tol", 1e-8))

        self.dt = float(get("schedule.dt", 0.02))
        self.t_final = float(get("schedule.t_final", 10.0))
        self.sample_stride = int(get("schedule.sample_stride", 10))
        if self.dt <= 0 or self.t_final <= self.dt or self.sample_stride < 1:
            raise ValidationError("schedule must satisfy dt > 0, "
                                  "t_final > dt, sample_stride >= 1")

        delta = str(get("delta", "auto"))
        self.delta = None if delta == "auto" else float(delta)

        self.moments_x = _floats_list(get("moments.x", "2"))
        default_mv = "" if self.mode == "macro" else "2"
        self.moments_v = _floats_list(get("moments.v", default_mv))

        self.rates_k = float(get("rates.k",
                                 self.moments_x[0] if self.moments_x else 2.0))
        self.rates_ell = float(get("rates.ell",
                                   self.moments_v[0] if self.moments_v else 2.0))

        self.initial_kind = str(get("initial.kind",
                                    "bump" if self.mode == "kinetic"
                                    else "macro_bump"))
        if self.initial_kind not in _INITIAL_KINDS:
            raise ValidationError("unknown initial.kind %r" % self.initial_kind)
        self.initial_epsilon = float(get("initial.epsilon", 0.5))
        self.initial_center = (float(get("initial.center_x", 0.5)),
                               float(get("initial.center_v", 0.5)))
        self.initial_width = float(get("initial.width", 1.0))
        self.initial_clip_factor = float(get("initial.clip_factor", 4.0))
        self.initial_s0 = float(get("initial.s0", 2.0))

        self.scheme = str(get("scheme", "implicit_euler"))
        self.seed = int(get("seed", 0))
        self.output_dir = str(get("output_dir", "out"))

    @classmethod
    def from_file(cls, path):
        with open(path, "r") as fh:
            mapping = parse_config_text(fh.read())
        stem = os.path.splitext(os.path.basename(path))[0]
        return cls(mapping, name=stem)

    def override(self, dt=None, t_final=None, output_dir=None):
        raw = dict(self.raw)
        if dt is not None:
            raw["schedule.dt"] = repr(float(dt))
        if t_final is not None:
            raw["schedule.t_final"] = repr(float(t_final))
        if output_dir is not None:
            raw["output_dir"] = str(output_dir)
        return ScenarioConfig(raw, name=self.name)


# ---------------------------------------------------------------------------
# orchestration
# ---------------------------------------------------------------------------

def build_problem(config):
    """Equilibrium and operators for a config: (spec, grid, eq, ops)."""
    spec = config.potential
    grid = PhaseGrid(Grid1D(config.x_half_width, config.nx),
                     Grid1D(config.v_half_width, config.nv))
    eq = build_equilibrium(spec, grid, truncation_tol=config.truncation_tol)
    ops = assemble(eq, spec, grid)
    return spec, grid, eq, ops


def make_initial_state(config, eq):
    kind = config.initial_kind
    if config.mode == "macro":
        if kind == "macro_gaussian":
            return evolution.initial_macro_gaussian(eq.grid.x_grid,
                                                    config.initial_s0)
        if kind == "macro_bump":
            return evolution.initial_macro_bump(eq, config.initial_epsilon)
        raise ValidationError("initial.kind %r is not a macro generator" % kind)
    if kind == "bump":
        return evolution.initial_bump(eq, config.initial_epsilon)
    if kind == "odd_v":
        return evolution.initial_odd_v(eq, config.initial_epsilon)
    if kind == "shifted_gaussian":
        return evolution.initial_shifted_gaussian(
            eq, config.initial_center, config.initial_width,
            config.initial_clip_factor)
    raise ValidationError("initial.kind %r is not a kinetic generator" % kind)


class ReportBundle:
    """Everything run_scenario produced: summary dict, record, status."""

    def __init__(self, config, summary, record, status):
        self.config = config
        self.summary = summary
        self.record = record
        self.status = status


def _attach_envelope(record, prediction, delta, mode):
    """Rebuild the record with the theoretical norm_sq envelope column.

    Kinetic exponential regime: (4/(2-delta)) H0 e^{-lambda t}, valid from
    t = 0 by the entropy sandwich; macro exponential: norm0 e^{-rate t}.
    Algebraic regime: C (1+t)^{-zeta} anchored at the default fitting-window
    start (the theorems are asymptotic; domination is asserted beyond the
    window start only).
    """
    t = record.times
    if prediction.regime == "exponential":
        if mode == "macro":
            env = record.norm_sq_mu[0] * np.exp(-prediction.rate * t)
        else:
            h0 = record.entropy_H[0]
            env = (4.0 / (2.0 - delta)) * h0 * np.exp(-prediction.rate * t)
    else:
        zeta = prediction.exponent
        lo = rates.default_window(record)[0]
        idx = int(np.searchsorted(t, lo - 1e-12))
        idx = min(idx, t.size - 1)
        c_anchor = record.norm_sq_mu[idx] * (1.0 + t[idx]) ** zeta
        env = c_anchor * (1.0 + t) ** (-zeta)
    rebuilt = evolution.TrajectoryRecord(
        t, record.norm_sq_mu, record.entropy_H, record.dissipation_D,
        record.moments_J, record.moments_K, record.max_principle_ok, env)
    rebuilt.dissipation_from_H = record.dissipation_from_H
    return rebuilt


def run_scenario(config, out_dir=None):
    """Build, evolve, fit, classify; returns a ReportBundle (never raises for
    in-run numerical failures -- those produce a 'failed' bundle)."""
    spec, grid, eq, ops = build_problem(config)
    constants = hypo.compute_constants(eq, ops, delta=config.delta,
                                       seed=config.seed)
    dynamics = "macro" if config.mode == "macro" else "kinetic"
    if dynamics == "macro":
        # the macro exponential rate is 2 sigma C_P, not the kinetic lambda
        rate_hint = None
        if spec.x_mode == "power" and spec.alpha >= 1.0:
            gap = spectral.poincare_constant(spec, grid.x_grid)
            rate_hint = 2.0 * eq.sigma_normalized * gap.constant
    else:
        rate_hint = constants.lambda_rate
    prediction = rates.classify_regime(spec, config.beta, k=config.rates_k,
                                       ell=config.rates_ell, d=1,
                                       dynamics=dynamics, rate=rate_hint)
    f0 = make_initial_state(config, eq)
    schedule = (config.dt, config.t_final, config.sample_stride)

    base_summary = {
        "name": config.name,
        "mode": config.mode,
        "regime": prediction.regime,
        "paper_case": prediction.source,
        "predicted_exponent_or_rate": (prediction.rate
                                       if prediction.regime == "exponential"
                                       else prediction.exponent),
        "constants": dict(constants.to_dict(), sigma=eq.sigma),
        "sigma_normalized": eq.sigma_normalized,
        "c_M_empirical": constants.c_M_empirical,
        "grid": {"x_half_width": config.x_half_width,
                 "v_half_width": config.v_half_width,
                 "nx": config.nx, "nv": config.nv,
                 "truncation_tol": config.truncation_tol},
        "schedule": {"dt": config.dt, "t_final": config.t_final,
                     "sample_stride": config.sample_stride},
        "initial_data": {"kind": config.initial_kind,
                         "epsilon": config.initial_epsilon,
                         "seed": config.seed},
        "moment_powers": {"x": list(config.moments_x),
                          "v": list(config.moments_v)},
        "seed": config.seed,
        "config_echo": dict(config.raw),
    }

    try:
        record = evolution.run_trajectory(
            f0, schedule, config.mode, eq, ops, delta=constants.delta,
            moment_powers=(config.moments_x, config.moments_v),
            scheme=config.scheme)
    except NumericalError as exc:
        summary = dict(base_summary)
        summary.update({
            "status": "failed",
            "error": str(exc),
            "last_good_time": getattr(exc, "last_good_time", None),
            "fitted_value": None, "r_squared": None,
        })
        bundle = ReportBundle(config, summary, None, "failed")
        bundle.partial_samples = getattr(exc, "partial_samples", {})
        return bundle

    record = _attach_envelope(record, prediction, constants.delta, config.mode)
    fit = rates.fit_rate_with_sensitivity(record, prediction.regime)
    summary = dict(base_summary)
    summary.update({
        "status": "ok",
        "fitted_value": fit["value"],
        "r_squared": fit["r_squared"],
        "fit_window": list(fit["window"]),
        "fit_sensitivity": {"window_30": fit["value_window_30"],
                            "window_70": fit["value_window_70"]},
    })
    return ReportBundle(config, summary, record, "ok")


# ---------------------------------------------------------------------------
# report emission
# ---------------------------------------------------------------------------

def _fmt(x):
    return repr(float(x))


def _moment_columns(record_or_config):
    if isinstance(record_or_config, ScenarioConfig):
        jx, kv = record_or_config.moments_x, record_or_config.moments_v
    else:
        jx = sorted(record_or_config.moments_J)
        kv = sorted(record_or_config.moments_K)
    j_cols = [("J_%g" % p, p) for p in jx]
    k_cols = [("K_%g" % p, p) for p in kv]
    return j_cols, k_cols


def _json_safe(obj):
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return None if not np.isfinite(x) else x
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    return obj


def emit_report(bundle, out_dir):
    """Write <name>.csv and <name>.json; returns (csv_path, json_path)."""
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, bundle.config.name + ".csv")
    json_path = os.path.join(out_dir, bundle.config.name + ".json")

    record = bundle.record
    j_cols, k_cols = _moment_columns(record if record is not None
                                     else bundle.config)
    header = (["t", "norm_sq_mu", "entropy_H", "dissipation_D", "envelope"]
              + [c for c, _ in j_cols] + [c for c, _ in k_cols]
              + ["max_principle_ok"])
    lines = [",".join(header)]
    if record is not None:
        for i, t in enumerate(record.times):
            row = [_fmt(t), _fmt(record.norm_sq_mu[i]),
                   _fmt(record.entropy_H[i]), _fmt(record.dissipation_D[i]),
                   _fmt(record.envelope[i])]
            row += [_fmt(record.moments_J[p][i]) for _, p in j_cols]
            row += [_fmt(record.moments_K[p][i]) for _, p in k_cols]
            row.append(str(int(record.max_principle_ok[i])))
            lines.append(",".join(row))
    else:
        partial = getattr(bundle, "partial_samples", {}) or {}
        times = partial.get("times", [])
        for i, t in enumerate(times):
            row = [_fmt(t),
                   _fmt(partial["norm_sq_mu"][i]),
                   _fmt(partial["entropy_H"][i]),
                   _fmt(partial["dissipation_D"][i]),
                   "nan"]
            row += ["nan"] * (len(j_cols) + len(k_cols))
            row.append("0")
            lines.append(",".join(row))
    with open(csv_path, "w") as fh:
        fh.write("\n".join(lines) + "\n")

    summary = dict(bundle.summary)
    summary["csv_path"] = os.path.basename(csv_path)
    with open(json_path, "w") as fh:
        json.dump(_json_safe(summary), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return csv_path, json_path


def emit_constants_report(config, out_dir):
    """The `constants` command: constants bundle only, no evolution."""
    spec, grid, eq, ops = build_problem(config)
    constants = hypo.compute_constants(eq, ops, delta=config.delta,
                                       seed=config.seed)
    payload = {
        "name": config.name,
        "constants": dict(constants.to_dict(), sigma=eq.sigma),
        "sigma_normalized": eq.sigma_normalized,
        "c_M_empirical": constants.c_M_empirical,
        "z_constant": eq.z_constant,
        "transport_integrals": hypo.transport_coefficient_integrals(eq),
        "grid": {"x_half_width": config.x_half_width,
                 "v_half_width": config.v_half_width,
                 "nx": config.nx, "nv": config.nv},
        "config_echo": dict(config.raw),
    }
    os.makedirs(out_dir, exist_ok=True)
    json_path = os.path.join(out_dir, config.name + "_constants.json")
    with open(json_path, "w") as fh:
        json.dump(_json_safe(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return json_path


# ---------------------------------------------------------------------------
# batch execution
# ---------------------------------------------------------------------------

def _run_one(args):
    path, out_dir, dt, t_final = args
    try:
        config = ScenarioConfig.from_file(path)
        if dt is not None or t_final is not None:
            config = config.override(dt=dt, t_final=t_final)
        bundle = run_scenario(config)
        _, json_path = emit_report(bundle, out_dir)
        return {"config": path, "json": json_path, "status": bundle.status}
    except ValidationError as exc:
        return {"config": path, "json": None, "status": "invalid",
                "error": str(exc)}
    except NumericalError as exc:
        return {"config": path, "json": None, "status": "failed",
                "error": str(exc)}


def run_batch(list_path, out_dir, workers=1, dt=None, t_final=None):
    """Run every config named in list_path (one path per line, # comments).

    Writes out_dir/batch_index.json mapping configs to their summaries and
    returns the index entries in input order.
    """
    with open(list_path, "r") as fh:
        base = os.path.dirname(os.path.abspath(list_path))
        paths = []
        for line in fh:
            body = line.split("#", 1)[0].strip()
            if body:
                paths.append(body if os.path.isabs(body)
                             else os.path.join(base, body))
    if not paths:
        raise ValidationError("config list %r names no configs" % list_path)
    jobs = [(p, out_dir, dt, t_final) for p in paths]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            entries = list(pool.map(_run_one, jobs))
    else:
        entries = [_run_one(j) for j in jobs]
    os.makedirs(out_dir, exist_ok=True)
    index_path = os.path.join(out_dir, "batch_index.json")
    with open(index_path, "w") as fh:
        json.dump(_json_safe({"entries": entries}), fh, indent=2,
                  sort_keys=True)
        fh.write("\n")
    return entries
