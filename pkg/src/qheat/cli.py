"""Command-line driver: ``qheat <subcommand> [--preset P] [--config F] [--set k=v ...]``.

Parameters are resolved in the order preset < config file < ``--set``.
Every CSV starts with one ``#`` line recording the resolved configuration,
floats are written with 17 significant digits, and rows are emitted in a
fixed order so identical inputs give byte-identical files.

Exit codes: 0 success, 1 failed verification, 2 usage or configuration
error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import io
import os
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, DomainError, NumericalError
from .heat import (
    HeatSetup,
    admissible_strip,
    characteristic_function,
    choose_l_max,
    effective_beta,
    heat_distribution,
    integral_ft_value,
    log_transition_probability,
    mean_heat,
    xi_grid,
)
from .oracle import SingleParticleModel, single_particle_u_v
from .propagator import TimeGrid, markovian_trajectory, propagate
from .spectral import Discrete, Ohmic, Semicircle, discretize_bath, memory_kernel_mu, noise_kernel_nu
from .spectrum import asymptotic_state, find_bound_states, sum_rule

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


@dataclass(frozen=True)
class RunConfig:
    model: str = "ohmic"
    unit: str = "omega0"
    eta: float = 0.05
    s: float = 1.0
    omega_c: float = 10.0
    omega_cut: float = 0.0  # 0 means no hard cutoff
    g: float = 0.12
    zeta: float = 0.03
    big_omega: float = 1.0
    modes: str = ""  # discrete model: "w1:g1,w2:g2"
    omega0: float = 1.0
    beta_s: float = 1.2
    beta_b: float = 0.2
    t_end: float = 30.0
    n_steps: int = 6000
    extrapolate: bool = True
    l_max: int = 0  # 0 chooses the truncation by the tail rule
    xi_points: int = 41
    heat_rows: int = 200
    taus: str = "1,5,20"
    oracle_modes: int = 3200
    oracle_rows: int = 600
    oracle_omega_max: float = 20.0
    output: str = ""
    emit_svg: bool = False

    def density(self):
        if self.model == "ohmic":
            return Ohmic(self.eta, self.s, self.omega_c, self.omega_cut or None)
        if self.model == "semicircle":
            return Semicircle(self.g, self.zeta, self.big_omega)
        return Discrete(_parse_modes(self.modes))

    def grid(self) -> TimeGrid:
        return TimeGrid(self.t_end, self.n_steps)

    def coupling_key(self) -> str:
        return "eta" if self.model == "ohmic" else "g"

    def validate(self) -> "RunConfig":
        if self.model not in ("ohmic", "semicircle", "discrete"):
            raise ConfigError(f"model must be ohmic, semicircle or discrete, got {self.model!r}")
        for name in ("omega0", "beta_s", "beta_b", "t_end"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("n_steps", "xi_points", "heat_rows", "oracle_modes", "oracle_rows"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be at least 1")
        if self.l_max < 0:
            raise ConfigError("l_max must be non-negative")
        try:
            self.density()
        except DomainError as exc:
            raise ConfigError(str(exc)) from exc
        return self

    def header(self, command: str) -> str:
        items = " ".join(f"{k}={_fmt_value(v)}" for k, v in sorted(asdict(self).items()) if k != "output")
        return f"# qheat {command} {items}\n"


PRESETS = {
    "fig2": dict(model="ohmic", unit="omega0", s=1.0, omega_c=10.0, beta_s=1.2, beta_b=0.2, omega0=1.0,
                 eta=0.05, t_end=30.0, n_steps=6000),
    "fig3": dict(model="semicircle", unit="Omega", big_omega=1.0, zeta=0.03, g=0.12, omega0=1.05,
                 beta_s=1.0, beta_b=5.0, t_end=400.0, n_steps=10000),
    "sm1": dict(model="semicircle", unit="Omega", big_omega=1.0, zeta=0.08, g=0.12, omega0=1.05,
                beta_s=0.5, beta_b=0.2, t_end=400.0, n_steps=10000),
}

_FIELDS = {f.name: f for f in fields(RunConfig)}


def _parse_modes(text: str):
    modes = []
    for item in filter(None, (p.strip() for p in text.split(","))):
        try:
            w, g = item.split(":")
            modes.append((float(w), float(g)))
        except ValueError as exc:
            raise ConfigError(f"bad mode {item!r}; expected omega:g") from exc
    return tuple(modes)


def _fmt(x) -> str:
    return "" if x is None else format(float(x), ".17g")


def _fmt_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return _fmt(v)
    return str(v)


def _coerce(key: str, raw: str):
    if key not in _FIELDS:
        raise ConfigError(f"unknown key {key!r}")
    kind = _FIELDS[key].type
    raw = raw.strip()
    try:
        if kind == "bool":
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return low in ("true", "1", "yes")
        if kind == "int":
            return int(raw)
        if kind == "float":
            value = float(raw)
            if not np.isfinite(value):
                raise ValueError(raw)
            return value
    except ValueError as exc:
        raise ConfigError(f"cannot parse {key} = {raw!r} as {kind}") from exc
    return raw


def _parse_assignment(text: str, sep: str = "="):
    if sep not in text:
        raise ConfigError(f"expected key{sep}value, got {text!r}")
    key, value = text.split(sep, 1)
    return key.strip(), value


def parse_config_text(text: str) -> dict:
    """``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            key, raw = _parse_assignment(line)
            values[key] = _coerce(key, raw)
        except ConfigError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from exc
    return values


def parse_config(preset: str | None = None, file_text: str | None = None, sets=(),
                 output: str | None = None, emit_svg: bool = False) -> RunConfig:
    """Resolve a :class:`RunConfig` from a preset, config text and overrides."""
    values = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {', '.join(PRESETS)}")
        values.update(PRESETS[preset])
    if file_text is not None:
        values.update(parse_config_text(file_text))
    for item in sets:
        key, raw = _parse_assignment(item)
        values[key] = _coerce(key, raw)
    if output is not None:
        values["output"] = output
    if emit_svg:
        values["emit_svg"] = True
    return RunConfig(**values).validate()


def parse_range(text: str):
    """``key=a:b:n`` to ``(key, n evenly spaced values from a to b)``."""
    key, spec = _parse_assignment(text)
    parts = spec.split(":")
    if len(parts) != 3:
        raise ConfigError(f"range must be key=a:b:n, got {text!r}")
    if _FIELDS.get(key) is None or _FIELDS[key].type != "float":
        raise ConfigError(f"cannot sweep non-numeric or unknown key {key!r}")
    try:
        a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as exc:
        raise ConfigError(f"bad range {text!r}") from exc
    if n < 1:
        raise ConfigError("range needs at least one point")
    return key, np.linspace(a, b, n)


# ---------------------------------------------------------------- commands


def _csv(header: str, columns: str, rows) -> str:
    buf = io.StringIO()
    buf.write(header)
    buf.write(columns + "\n")
    for row in rows:
        buf.write(",".join(c if isinstance(c, str) else _fmt(c) for c in row) + "\n")
    return buf.getvalue()


def _trajectory(cfg: RunConfig):
    return propagate(cfg.density(), cfg.omega0, cfg.beta_b, cfg.grid(), extrapolate=cfg.extrapolate)


def cmd_kernels(cfg: RunConfig):
    sd, t = cfg.density(), cfg.grid().times
    mu, nu = memory_kernel_mu(sd, t), noise_kernel_nu(sd, cfg.beta_b, t)
    rows = zip(t, mu.real, mu.imag, nu.real, nu.imag)
    plot = (t, {"Re mu": mu.real, "Im mu": mu.imag, "Re nu": nu.real, "Im nu": nu.imag}, "t")
    return "t,re_mu,im_mu,re_nu,im_nu", rows, plot, EXIT_OK


def cmd_propagate(cfg: RunConfig):
    tr = _trajectory(cfg)
    t, u = tr.times, tr.u
    rows = zip(t, u.real, u.imag, np.abs(u), tr.v)
    return "t,re_u,im_u,abs_u,v", rows, (t, {"|u|": np.abs(u), "v": tr.v}, "t"), EXIT_OK


def _spectrum_row(cfg: RunConfig, tolerate: bool = False):
    """Spectrum CSV cells; with ``tolerate`` a failed long-time integral leaves them empty."""
    sd = cfg.density()
    bound = find_bound_states(sd, cfg.omega0)
    try:
        asym = asymptotic_state(sd, cfg.omega0, cfg.beta_b, bound)
    except NumericalError:
        # v(inf) diverges at a binding threshold, where the integrand is not integrable
        if not tolerate:
            raise
        asym = None
    cells = []
    for i in range(2):
        if i < bound.count:
            cells += [bound.energies[i], bound.weights[i]]
        else:
            cells += ["", ""]
    tail = [asym.v_constant, asym.beat_frequency] if asym else ["", ""]
    return [getattr(cfg, cfg.coupling_key()), bound.count, *cells, *tail], asym


def cmd_spectrum(cfg: RunConfig):
    row, _ = _spectrum_row(cfg)
    return "g_or_eta,count,E_b_1,Z_1,E_b_2,Z_2,v_inf_const,beat_freq", [row], None, EXIT_OK


def _ft_values(cfg: RunConfig, u, v):
    L = cfg.l_max or choose_l_max(cfg.beta_s, cfg.omega0, u, v)
    setup = HeatSetup(cfg.beta_s, cfg.beta_b, cfg.omega0, L)
    dist = heat_distribution(setup, u, v)
    beta = effective_beta(cfg.omega0, u, v)
    gjw = integral_ft_value(dist, beta - cfg.beta_s)
    # outside the strip the exact average diverges; a truncated sum would hide that
    xi_max = admissible_strip(setup, u, v)[1]
    w_jw = cfg.beta_b - cfg.beta_s
    jw = integral_ft_value(dist, w_jw) if w_jw < xi_max else np.inf
    return setup, beta, gjw, jw


def cmd_heat(cfg: RunConfig):
    tr = _trajectory(cfg)
    n = tr.grid.n_steps
    idx = np.unique(np.round(np.linspace(0, n, min(cfg.heat_rows, n) + 1)).astype(int))
    rows = []
    for i in idx:
        u, v, t = tr.u[i], float(tr.v[i]), tr.times[i]
        L = cfg.l_max or choose_l_max(cfg.beta_s, cfg.omega0, u, v)
        q = mean_heat(HeatSetup(cfg.beta_s, cfg.beta_b, cfg.omega0, L), u, v)
        if v <= 1e-12:
            rows.append([t, "", q, 1.0, 1.0])
            continue
        _, beta, gjw, jw = _ft_values(cfg, u, v)
        rows.append([t, beta, q, gjw, "inf" if np.isinf(jw) else jw])
    arr = [(r[0], r[2]) for r in rows]
    plot = (np.array([a for a, _ in arr]), {"<Q>": np.array([b for _, b in arr])}, "t")
    return "t,beta_eff,mean_heat,ft_gjw,ft_jw", rows, plot, EXIT_OK


def _oracle_density(cfg: RunConfig):
    """Continuum density shared by the Volterra solver and its discretisation.

    Ohmic baths are cut hard at ``oracle_omega_max`` so both sides describe
    the same truncated bath.
    """
    sd = cfg.density()
    if isinstance(sd, Ohmic):
        sd = Ohmic(sd.eta, sd.s, sd.omega_c, cfg.oracle_omega_max)
        return sd, discretize_bath(sd, cfg.oracle_modes, cfg.oracle_omega_max)
    return sd, discretize_bath(sd, cfg.oracle_modes)


def _oracle_pair(cfg: RunConfig):
    """Volterra and oracle trajectories at (at most) ``oracle_rows + 1`` common times."""
    sd, disc = _oracle_density(cfg)
    grid = cfg.grid()
    tr = propagate(sd, cfg.omega0, cfg.beta_b, grid, extrapolate=cfg.extrapolate)
    stride = -(-grid.n_steps // cfg.oracle_rows)
    sel = np.arange(0, grid.n_steps + 1, stride)
    ref = single_particle_u_v(SingleParticleModel.from_density(disc, cfg.omega0), cfg.beta_b, grid.times[sel])
    return grid.times[sel], tr.u[sel], tr.v[sel], ref


def cmd_oracle(cfg: RunConfig):
    t, u, v, ref = _oracle_pair(cfg)
    au, ao = np.abs(u), np.abs(ref.u)
    rows = zip(t, au, ao, v, ref.v, np.abs(u - ref.u), np.abs(v - ref.v))
    plot = (t, {"|u| volterra": au, "|u| oracle": ao, "v volterra": v, "v oracle": ref.v}, "t")
    return "t,abs_u_volterra,abs_u_oracle,v_volterra,v_oracle,err_u,err_v", rows, plot, EXIT_OK


def _verify_checks(cfg: RunConfig):
    """Yield ``(name, residual, tolerance, expected_to_hold)``."""
    sd = cfg.density()
    grid = cfg.grid()
    tr = _trajectory(cfg)
    taus = sorted({float(x) for x in cfg.taus.split(",") if x.strip()})
    idx = sorted({min(grid.n_steps, max(1, int(round(tau / grid.dt)))) for tau in taus})
    chi0 = ft = gjw_sym = jw_sym = 0.0
    db = 0.0
    for i in idx:
        u, v = tr.u[i], float(tr.v[i])
        setup, beta, gjw, _ = _ft_values(cfg, u, v)
        chi0 = max(chi0, abs(characteristic_function(0.0, setup, u, v) - 1.0))
        ft = max(ft, abs(gjw - 1.0))
        xi = xi_grid(setup, u, v, cfg.xi_points, mirror_beta=beta)
        c = characteristic_function(xi, setup, u, v)
        gjw_sym = max(gjw_sym, float(np.max(np.abs(c - characteristic_function(beta - cfg.beta_s - xi, setup, u, v)) / c)))
        xj = xi_grid(setup, u, v, cfg.xi_points, mirror_beta=cfg.beta_b)
        cj = characteristic_function(xj, setup, u, v)
        jw_sym = max(jw_sym, float(np.max(np.abs(cj - characteristic_function(cfg.beta_b - cfg.beta_s - xj, setup, u, v)) / cj)))
        bw = beta * cfg.omega0
        for l in range(0, 21, 4):
            for lp in range(0, 21, 5):
                r = log_transition_probability(u, v, l, lp) - log_transition_probability(u, v, lp, l)
                db = max(db, abs(np.expm1(r + bw * (lp - l))))
    yield "chi_zero", chi0, 1e-14, True
    yield "gjw_symmetry", gjw_sym, 1e-8, True
    yield "integral_ft", ft, 1e-6, True
    yield "detailed_balance", db, 1e-10, True
    yield "jw_symmetry", jw_sym, 1e-3, False
    ma = markovian_trajectory(sd, cfg.omega0, cfg.beta_b, grid)
    sel = np.linspace(1, grid.n_steps, 20).round().astype(int)
    v_ma = ma.v[sel]
    ok = v_ma > 1e-12
    if np.any(ok):
        b_ma = effective_beta(cfg.omega0, ma.u[sel][ok], v_ma[ok])
        yield "markov_beta_eff", float(np.max(np.abs(b_ma - cfg.beta_b)) / cfg.beta_b), 1e-12, True
    if not isinstance(sd, Discrete):
        yield "sum_rule", abs(sum_rule(sd, cfg.omega0) - 1.0), 1e-4, True
    _, u_o, v_o, ref = _oracle_pair(cfg)
    yield "oracle_u", float(np.max(np.abs(u_o - ref.u))), 1e-3, True
    yield "oracle_v", float(np.max(np.abs(v_o - ref.v))), 2e-3, True


def cmd_verify(cfg: RunConfig):
    rows, code = [], EXIT_OK
    for name, residual, tol, expected in _verify_checks(cfg):
        passed = residual <= tol
        if expected:
            status = "PASS" if passed else "FAIL"
            if not passed:
                code = EXIT_VERIFY
        else:
            # informational: the check is expected to break down away from the Markov limit
            status = "XFAIL" if not passed else "XPASS"
        rows.append([name, residual, tol, status])
    return "check,residual,tolerance,status", rows, None, code


def _sweep_point(cfg: RunConfig):
    row, asym = _spectrum_row(cfg, tolerate=True)
    if asym is None:
        return row + ["", "", "", ""]
    w, bs = cfg.omega0, cfg.beta_s
    if asym.beat_frequency > 0:
        t = np.linspace(0.0, 2 * np.pi / asym.beat_frequency, 513)
    else:
        t = np.zeros(1)
    u2 = np.abs(asym.u(t)) ** 2
    v = np.broadcast_to(asym.v(t), t.shape)
    q = w * (v + (1 - u2) / -np.expm1(bs * w))
    if np.all(v > 1e-12):
        b = effective_beta(w, np.sqrt(u2), v)
        b_cells = [float(b.min()), float(b.max())]
    else:
        b_cells = ["", ""]
    return row + b_cells + [float(q.min()), float(q.max())]


def _workers() -> int:
    raw = os.environ.get("QHEAT_THREADS", "")
    try:
        n = int(raw) if raw else (os.cpu_count() or 1)
    except ValueError as exc:
        raise ConfigError(f"QHEAT_THREADS must be an integer, got {raw!r}") from exc
    return max(1, n)


def cmd_sweep(cfg: RunConfig, sweep):
    key, values = sweep if sweep else (cfg.coupling_key(), np.linspace(0.02, 0.2, 19))
    cfgs = [replace(cfg, **{key: float(x)}).validate() for x in values]
    n = min(_workers(), len(cfgs))
    if n > 1:
        with ProcessPoolExecutor(max_workers=n) as pool:
            rows = list(pool.map(_sweep_point, cfgs))
    else:
        rows = [_sweep_point(c) for c in cfgs]
    rows = [[float(x)] + r for x, r in zip(values, rows)]
    rows.sort(key=lambda r: r[0])
    cols = ("value,g_or_eta,count,E_b_1,Z_1,E_b_2,Z_2,v_inf_const,beat_freq,"
            "beta_eff_inf_min,beta_eff_inf_max,mean_heat_inf_min,mean_heat_inf_max")
    x = np.array([r[0] for r in rows])
    qmin = np.array([np.nan if r[-2] == "" else r[-2] for r in rows], dtype=float)
    qmax = np.array([np.nan if r[-1] == "" else r[-1] for r in rows], dtype=float)
    return cols, rows, (x, {"<Q(inf)> min": qmin, "<Q(inf)> max": qmax}, key), EXIT_OK


COMMANDS = {
    "kernels": cmd_kernels,
    "propagate": cmd_propagate,
    "spectrum": cmd_spectrum,
    "heat": cmd_heat,
    "verify": cmd_verify,
    "sweep": cmd_sweep,
    "oracle": cmd_oracle,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qheat", description="Exact non-Markovian heat statistics of a damped oscillator.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--preset", choices=sorted(PRESETS))
        p.add_argument("--config", type=Path, help="file of key = value lines")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", dest="sets")
        p.add_argument("--output", "-o", help="CSV path (default: standard output)")
        p.add_argument("--svg", action="store_true", help="also write an SVG plot next to the CSV")
        if name == "sweep":
            p.add_argument("--range", dest="sweep_range", metavar="KEY=A:B:N")
    return parser


def run_subcommand(cfg: RunConfig, command: str, sweep=None, stdout=None) -> int:
    """Run ``command`` with ``cfg`` and write its CSV; returns the exit code."""
    fn = COMMANDS[command]
    columns, rows, plot, code = fn(cfg, sweep) if command == "sweep" else fn(cfg)
    text = _csv(cfg.header(command), columns, list(rows))
    if cfg.output:
        out = Path(cfg.output)
        out.write_text(text)
        if cfg.emit_svg and plot is not None:
            from .plotting import line_plot

            x, series, xlabel = plot
            line_plot(out.with_suffix(".svg"), x, series, xlabel=xlabel, title=f"qheat {command}")
    else:
        (stdout or sys.stdout).write(text)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        file_text = args.config.read_text() if args.config else None
        if args.svg and not args.output:
            raise ConfigError("--svg needs --output")
        cfg = parse_config(args.preset, file_text, args.sets, args.output, args.svg)
        sweep = parse_range(args.sweep_range) if getattr(args, "sweep_range", None) else None
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return run_subcommand(cfg, args.command, sweep)
    except (ConfigError, OSError) as exc:
        print(f"qheat: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DomainError, NumericalError) as exc:
        print(f"qheat: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
