"""Command-line front end: masses, curvature checks, mode analysis, solves.

Reports are emitted as JSON (schema ``alf-mass/1``), CSV, or a plain text
table.  Output is deterministic: fixed 12-significant-digit float
formatting, sorted keys, and fixed-order reductions underneath, so
identical configurations produce byte-identical files.

Exit codes: 0 on success, 2 for an invalid configuration (the message
names the offending key), 3 for numerical non-convergence (a diagnostic
report is still written).
"""

import argparse
import json
import math
import sys

import numpy as np

from .errors import AlfMassError, ConfigError, DomainError, NonConvergenceError
from .geometry import ricci_fd
from .mass import (
    QuadratureSpec,
    RadiusSchedule,
    chart_invariance_check,
    mass_dirac,
    mass_gb,
)
from .modes import (
    RadialGrid,
    RadialProfile,
    classify_membership,
    critical_set,
    default_grid,
    green_mid,
    green_outer,
    indicial_data,
    inversion_residual,
    solve_k_mode,
    weighted_norm,
)
from .zoo import AREA_RADIAL, ISOTROPIC, SchwarzschildParams, build_family, FAMILY_NAMES

SCHEMA = "alf-mass/1"

__all__ = ["main", "run", "parse_args", "canonical_json"]


# ---------------------------------------------------------------------------
# deterministic serialization
# ---------------------------------------------------------------------------

def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    if x == 0.0:
        x = 0.0  # normalize negative zero
    return format(float(x), ".12g")


def canonical_json(obj) -> str:
    """JSON with sorted keys and fixed 12-significant-digit floats."""

    def render(node):
        if isinstance(node, dict):
            items = ", ".join(
                f"{json.dumps(str(key))}: {render(val)}" for key, val in sorted(node.items())
            )
            return "{" + items + "}"
        if isinstance(node, (list, tuple, np.ndarray)):
            return "[" + ", ".join(render(v) for v in node) + "]"
        if isinstance(node, bool):
            return "true" if node else "false"
        if isinstance(node, (int, np.integer)):
            return str(int(node))
        if isinstance(node, (float, np.floating)):
            return _fmt_float(float(node))
        if node is None:
            return "null"
        return json.dumps(str(node))

    return render(obj) + "\n"


def _csv_text(header, rows):
    lines = [",".join(str(h) for h in header)]
    for row in rows:
        lines.append(
            ",".join(
                format(0.0 if v == 0 else float(v), ".12g") if isinstance(v, (float, np.floating)) else str(v)
                for v in row
            )
        )
    return "\n".join(lines) + "\n"


def _table_text(header, rows):
    str_rows = [[str(h) for h in header]]
    for row in rows:
        str_rows.append(
            [
                format(0.0 if v == 0 else float(v), ".12g") if isinstance(v, (float, np.floating)) else str(v)
                for v in row
            ]
        )
    widths = [max(len(r[i]) for r in str_rows) for i in range(len(header))]
    lines = ["  ".join(cell.rjust(widths[i]) for i, cell in enumerate(row)) for row in str_rows]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

_FLOAT_KEYS = {
    "gamma", "mass_param", "charge", "fiber_length", "r0", "growth",
    "exponent", "delta", "delta_prime", "s_min", "s_max", "radius",
}
_INT_KEYS = {
    "n", "m", "monopole_k", "count", "polar_nodes", "azimuth_nodes",
    "fiber_nodes", "jmax", "j", "k", "grid_points",
}
_STR_KEYS = {"family", "chart", "output", "out", "source", "command"}


def _read_config_file(path):
    values = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"config line {lineno} is not KEY = VALUE: {raw!r}")
                key, val = (part.strip() for part in line.split("=", 1))
                values[key.replace("-", "_")] = val
    except OSError as err:
        raise ConfigError(f"config: cannot read {path}: {err}") from err
    return values


def _coerce(key, val):
    try:
        if key in _FLOAT_KEYS:
            return float(val)
        if key in _INT_KEYS:
            return int(val)
    except (TypeError, ValueError) as err:
        raise ConfigError(f"{key}: expected a number, got {val!r}") from err
    return val


def parse_args(argv=None):
    parser = argparse.ArgumentParser(
        prog="alfmass",
        description="Boundary-integral masses and exterior mode analysis "
        "for metrics asymptotic to circle fibrations.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="key = value config file; flags override it")
        p.add_argument("--family", choices=FAMILY_NAMES)
        p.add_argument("--n", type=int, help="total dimension (schwarzschild)")
        p.add_argument("--m", type=int, help="base dimension")
        p.add_argument("--gamma", type=float)
        p.add_argument("--mass-param", dest="mass_param", type=float)
        p.add_argument("--charge", type=float)
        p.add_argument("--monopole-k", dest="monopole_k", type=int)
        p.add_argument("--fiber-length", dest="fiber_length", type=float)
        p.add_argument("--chart", choices=[ISOTROPIC, AREA_RADIAL])
        p.add_argument("--r0", type=float)
        p.add_argument("--growth", type=float)
        p.add_argument("--count", type=int)
        p.add_argument("--polar-nodes", dest="polar_nodes", type=int)
        p.add_argument("--azimuth-nodes", dest="azimuth_nodes", type=int)
        p.add_argument("--fiber-nodes", dest="fiber_nodes", type=int)
        p.add_argument("--output", choices=["json", "csv", "table"])
        p.add_argument("--out", help="report path (default: stdout)")

    p_mass = sub.add_parser("mass", help="boundary-integral masses of a family")
    add_common(p_mass)

    p_curv = sub.add_parser("curvature", help="finite-difference Ricci on a radius ladder")
    add_common(p_curv)

    p_modes = sub.add_parser("modes", help="sphere eigenvalues, indicial roots, critical set")
    add_common(p_modes)
    p_modes.add_argument("--jmax", type=int)

    p_solve = sub.add_parser("solve-exterior", help="radial exterior solves")
    add_common(p_solve)
    p_solve.add_argument("--j", type=int)
    p_solve.add_argument("--k", type=int)
    p_solve.add_argument("--grid-points", dest="grid_points", type=int)
    p_solve.add_argument("--s-min", dest="s_min", type=float)
    p_solve.add_argument("--s-max", dest="s_max", type=float)
    p_solve.add_argument("--source", choices=["power", "bump"])
    p_solve.add_argument("--exponent", type=float, help="a in the source r^{a-2}")
    p_solve.add_argument("--outer", action="store_true", help="use the infinity-based inverse")

    p_norms = sub.add_parser("norms", help="weighted-space membership of r^a")
    add_common(p_norms)
    p_norms.add_argument("--exponent", type=float)
    p_norms.add_argument("--delta", type=float)

    p_inv = sub.add_parser("invariance", help="mass agreement across two charts")
    add_common(p_inv)

    return parser.parse_args(argv)


_DEFAULTS = {
    "family": "schwarzschild",
    "output": "json",
    "r0": 16.0,
    "growth": 2.0,
    "count": 6,
    "polar_nodes": 12,
    "azimuth_nodes": 12,
    "fiber_nodes": 8,
    "jmax": 3,
    "j": 0,
    "k": 0,
    "grid_points": 1024,
    "source": "power",
    "exponent": -0.5,
    "delta": 1.0,
    "m": 3,
}


class RunConfig(dict):
    """Merged configuration: defaults, then config file, then CLI flags."""

    def require(self, key):
        if self.get(key) is None:
            raise ConfigError(f"{key}: required for this command but not set")
        return self[key]


def build_config(args) -> RunConfig:
    cfg = RunConfig(_DEFAULTS)
    cfg["command"] = args.command
    if getattr(args, "config", None):
        for key, raw in _read_config_file(args.config).items():
            cfg[key] = _coerce(key, raw)
    for key, val in vars(args).items():
        if key in ("config",) or val is None or val is False:
            continue
        cfg[key] = val
    return cfg


def _family_from_config(cfg) -> object:
    name = cfg["family"]
    params = {}
    mapping = {
        "schwarzschild": (("n", "n"), ("gamma", "gamma"), ("chart", "chart")),
        "reissner-nordstrom": (
            ("mass_param", "mass_param"), ("charge", "charge"), ("chart", "chart"),
        ),
        "taub-nut": (("mass_param", "mass_param"), ("monopole_k", "monopole_k")),
        "flat": (("m", "m"), ("fiber_length", "fiber_length")),
    }
    if name not in mapping:
        raise ConfigError(f"family: unknown family {name!r}")
    for cfg_key, param_key in mapping[name]:
        if cfg.get(cfg_key) is not None:
            params[param_key] = cfg[cfg_key]
    try:
        return build_family(name, params)
    except DomainError as err:
        raise ConfigError(str(err)) from err


def _schedule_from_config(cfg) -> RadiusSchedule:
    try:
        return RadiusSchedule(cfg["r0"], cfg["growth"], cfg["count"])
    except DomainError as err:
        raise ConfigError(str(err)) from err


def _quad_from_config(cfg) -> QuadratureSpec:
    try:
        return QuadratureSpec(cfg["polar_nodes"], cfg["azimuth_nodes"], cfg["fiber_nodes"])
    except DomainError as err:
        raise ConfigError(str(err)) from err


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _cmd_mass(cfg):
    family = _family_from_config(cfg)
    schedule = _schedule_from_config(cfg)
    quad = _quad_from_config(cfg)
    rep_gb = mass_gb(family, schedule, quad)
    rep_dirac = mass_dirac(family, schedule, quad) if family.model.is_trivial else None
    doc = {
        "schema": SCHEMA,
        "command": "mass",
        "family": family.name,
        "params": dict(family.params),
        "model": rep_gb.metadata["model"],
        "mass_gb": rep_gb.to_json_dict(),
        "mass_dirac": rep_dirac.to_json_dict() if rep_dirac else None,
    }
    header = ["R", "value_gb"] + (["value_dirac"] if rep_dirac else [])
    rows = []
    for idx, (r, v) in enumerate(rep_gb.per_radius):
        row = [r, v]
        if rep_dirac:
            row.append(rep_dirac.per_radius[idx][1])
        rows.append(row)
    rows.append(["extrapolated", rep_gb.extrapolated] + (
        [rep_dirac.extrapolated] if rep_dirac else []))
    return doc, header, rows


def _curvature_point(family, radius):
    chart_pref = {"taub-nut": "gibbons-hawking", "flat": "cartesian"}
    chart_name = chart_pref.get(family.name, "polar")
    chart = family.chart(chart_name)
    if chart_name == "polar":
        m = family.model.base_dim
        point = np.zeros(m + 1)
        point[0] = radius
        point[1 : m - 1] = 1.1  # generic colatitudes
        point[m - 1] = 0.7
        return chart, point
    direction = np.array([0.48666426339228763, 0.3244428422615251, 0.8111071056538127])
    point = np.zeros(chart.dim)
    point[: chart.dim - 1] = radius * direction[: chart.dim - 1]
    return chart, point


def _cmd_curvature(cfg):
    family = _family_from_config(cfg)
    schedule = _schedule_from_config(cfg)
    entries = []
    for radius in schedule.radii:
        chart, point = _curvature_point(family, float(radius))
        res = ricci_fd(family, chart, point)
        entries.append(
            {
                "r": float(radius),
                "chart": chart.name,
                "eigenvalues": res.eigenvalues.tolist(),
                "scalar": res.scalar,
            }
        )
    doc = {
        "schema": SCHEMA,
        "command": "curvature",
        "family": family.name,
        "params": dict(family.params),
        "points": entries,
    }
    header = ["R", "scalar", "min_eig", "max_eig"]
    rows = [
        [e["r"], e["scalar"], min(e["eigenvalues"]), max(e["eigenvalues"])] for e in entries
    ]
    return doc, header, rows


def _cmd_modes(cfg):
    m = int(cfg.require("m"))
    jmax = int(cfg.require("jmax"))
    if m < 3:
        raise ConfigError(f"m: base dimension must be >= 3, got {m}")
    if jmax < 0:
        raise ConfigError(f"jmax: must be >= 0, got {jmax}")
    table = [indicial_data(j, m) for j in range(jmax + 1)]
    doc = {
        "schema": SCHEMA,
        "command": "modes",
        "m": m,
        "modes": [
            {
                "j": d.j,
                "lambda": d.lambda_j,
                "delta": d.delta_j,
                "nu_plus": d.nu_plus,
                "nu_minus": d.nu_minus,
            }
            for d in table
        ],
        "critical_set": critical_set(m, jmax),
    }
    header = ["j", "lambda", "delta", "nu_plus", "nu_minus"]
    rows = [[d.j, d.lambda_j, d.delta_j, d.nu_plus, d.nu_minus] for d in table]
    return doc, header, rows


def _cmd_solve_exterior(cfg):
    m = int(cfg.require("m"))
    j = int(cfg.require("j"))
    k = int(cfg.require("k"))
    n_points = int(cfg.require("grid_points"))
    grid = default_grid(n_points) if cfg.get("s_min") is None else RadialGrid(
        float(cfg["s_min"]), float(cfg.require("s_max")), n_points
    )
    s = grid.s
    if cfg["source"] == "power":
        a = float(cfg.require("exponent"))
        values = np.exp((a - 2.0) * s)
    else:
        # narrow enough that weighted tails vanish at the grid end for all
        # indicial weights exercised by the CLI
        mid = 0.5 * (grid.s_min + grid.s_max)
        width = 0.05 * (grid.s_max - grid.s_min)
        values = np.exp(-((s - mid) ** 2) / (2.0 * width**2))
    f = RadialProfile(grid, values, mode=(j, k))
    fiber_length = float(cfg.get("fiber_length") or 2.0 * math.pi)
    if k == 0:
        solver = green_outer if cfg.get("outer") else green_mid
        u = solver(m, j, f)
        rel = inversion_residual(u, f, m, j)
    else:
        u = solve_k_mode(m, j, k, fiber_length, f)
        rel = u.info["residual"]
    doc = {
        "schema": SCHEMA,
        "command": "solve-exterior",
        "m": m,
        "j": j,
        "k": k,
        "grid": {"s_min": grid.s_min, "s_max": grid.s_max, "n_points": grid.n_points},
        "residual": rel,
        "max_abs_solution": float(np.max(np.abs(u.values))),
    }
    header = ["s", "r", "value"]
    rows = [[s[i], grid.r[i], u.values[i]] for i in range(grid.n_points)]
    return doc, header, rows


def _cmd_norms(cfg):
    m = int(cfg.require("m"))
    a = float(cfg.require("exponent"))
    delta = float(cfg.require("delta"))
    grid = default_grid()
    profile = RadialProfile(grid, grid.r**a)
    member, slope = classify_membership(profile, delta, m)
    norm_window = weighted_norm(profile, delta, m, region=(2.0, 64.0))
    doc = {
        "schema": SCHEMA,
        "command": "norms",
        "m": m,
        "exponent": a,
        "delta": delta,
        "member_detected": member,
        "annulus_log_slope": slope,
        "theory_member": delta > m / 2.0 + a,
        "window_norm": norm_window,
    }
    header = ["quantity", "value"]
    rows = [
        ["member_detected", str(member)],
        ["annulus_log_slope", slope],
        ["theory_member", str(delta > m / 2.0 + a)],
        ["window_norm", norm_window],
    ]
    return doc, header, rows


def _cmd_invariance(cfg):
    if cfg["family"] != "schwarzschild":
        raise ConfigError("family: invariance check currently runs on 'schwarzschild'")
    n = int(cfg.require("n"))
    gamma = float(cfg.require("gamma"))
    from .zoo import schwarzschild_family

    params = SchwarzschildParams(n, gamma)
    schedule = _schedule_from_config(cfg)
    quad = _quad_from_config(cfg)
    result = chart_invariance_check(
        schwarzschild_family(params, AREA_RADIAL),
        schwarzschild_family(params, ISOTROPIC),
        schedule,
        quad,
    )
    doc = {
        "schema": SCHEMA,
        "command": "invariance",
        "family": "schwarzschild",
        "params": {"n": n, "gamma": gamma},
        "value_area_radial": result.value_a,
        "value_isotropic": result.value_b,
        "difference": result.difference,
    }
    header = ["chart", "mass"]
    rows = [
        [AREA_RADIAL, result.value_a],
        [ISOTROPIC, result.value_b],
        ["difference", result.difference],
    ]
    return doc, header, rows


_COMMANDS = {
    "mass": _cmd_mass,
    "curvature": _cmd_curvature,
    "modes": _cmd_modes,
    "solve-exterior": _cmd_solve_exterior,
    "norms": _cmd_norms,
    "invariance": _cmd_invariance,
}


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------

def _emit(cfg, text):
    path = cfg.get("out")
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def run(cfg: RunConfig) -> int:
    """Execute a merged configuration; returns the process exit code."""
    try:
        doc, header, rows = _COMMANDS[cfg["command"]](cfg)
    except ConfigError as err:
        sys.stderr.write(f"error: invalid configuration: {err}\n")
        if cfg.get("out"):
            _emit(cfg, canonical_json(
                {"schema": SCHEMA, "error": "invalid-config", "message": str(err)}
            ))
        return 2
    except NonConvergenceError as err:
        sys.stderr.write(f"error: non-convergence: {err}\n")
        doc = {
            "schema": SCHEMA,
            "error": "non-convergence",
            "message": str(err),
            "table": [[float(r), float(v)] for r, v in err.table],
            "diagnostics": err.diagnostics,
        }
        _emit(cfg, canonical_json(doc))
        return 3
    except AlfMassError as err:
        sys.stderr.write(f"error: {err}\n")
        if cfg.get("out"):
            _emit(cfg, canonical_json(
                {"schema": SCHEMA, "error": type(err).__name__, "message": str(err)}
            ))
        return 3

    fmt = cfg["output"]
    if fmt == "json":
        _emit(cfg, canonical_json(doc))
    elif fmt == "csv":
        _emit(cfg, _csv_text(header, rows))
    else:
        _emit(cfg, _table_text(header, rows))
    return 0


def main(argv=None) -> int:
    args = parse_args(argv)
    try:
        cfg = build_config(args)
    except ConfigError as err:
        sys.stderr.write(f"error: invalid configuration: {err}\n")
        return 2
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
