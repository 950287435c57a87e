"""Batch front-end: ``covlab <subcommand> [options]``.

Every output starts with ``#`` header lines giving the tool version, the full
argv and the seed. Raw numbers are written with 17 significant digits, with
``inf`` and ``nan`` as literal tokens. Rounded report values go in separate
fields.
"""

from __future__ import annotations

import argparse
import math
import os
import shlex
import sys

import numpy as np

from . import __version__
from .cantor_bounds import (
    BernoulliSpec,
    bernoulli_measure,
    critical_constant_bounds,
    optimize_bernoulli,
)
from .config import (
    ConfigError,
    Section,
    build_bernoulli,
    build_ifs,
    build_measure,
    build_radii,
    load_config,
    parse_int,
    parse_number,
    parse_numbers,
)
from .conformal import (
    SelfSimilarIFS,
    average_density,
    critical_exponent,
    cylinder_discretization,
    natural_measure,
    parse_word,
    pw_billard_series,
    step_discretization,
)
from .covering import (
    crux_check_exact,
    empirical_survival,
    martingale_moments,
    simulate_realization,
    uncovered_fraction,
)
from .energy import (
    ball_mass_power_series,
    energy_truncated,
    jk_sequence,
    shepp_series,
)
from .errors import CovlabError, InvalidArgument
from .measures import (
    AtomicMeasure,
    ExplicitRadii,
    PolynomialRadii,
    SelfSimilarMeasure,
    StepDensityMeasure,
    ball_measure,
)
from .streams import check_seed

THREADS_ENV = "COVLAB_THREADS"


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return format(v, ".17g")


def fmt5(v: float) -> str:
    return format(v, ".5f")


class Output:
    def __init__(self, argv, seed=None):
        self.lines = [f"# covlab {__version__}", f"# argv: {shlex.join(argv)}",
                      f"# seed: {'none' if seed is None else seed}"]

    def comment(self, text: str):
        self.lines.append(f"# {text}")

    def kv(self, key: str, value):
        self.lines.append(f"{key} = {value if isinstance(value, str) else fmt(value)}")

    def row(self, *values):
        self.lines.append(",".join(v if isinstance(v, str) else fmt(v) for v in values))

    def write(self, path):
        text = "\n".join(self.lines) + "\n"
        if path in (None, "-"):
            sys.stdout.write(text)
        else:
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)


# --- argument resolution ----------------------------------------------------


class _Resolver:
    """Merges command-line flags over config sections; flags win."""

    def __init__(self, args):
        self.args = args
        self.sections = load_config(args.config) if args.config else {}
        self.run = self.sections.get("run", Section("run"))

    def value(self, name: str, parse, default=None):
        v = getattr(self.args, name, None)
        if v is not None:
            return parse(v, "--" + name.replace("_", "-")) if isinstance(v, str) else v
        key = name.replace("-", "_")
        if key in self.run:
            return parse(self.run.raw(key), self.run.field(key))
        return default

    def number(self, name, default=None):
        return self.value(name, parse_number, default)

    def integer(self, name, default=None):
        return self.value(name, parse_int, default)

    def required(self, name, parse):
        v = self.value(name, parse)
        if v is None:
            raise ConfigError("--" + name.replace("_", "-"), "missing required value")
        return v

    def seed(self) -> int:
        seed = self.integer("seed", 0)
        try:
            return check_seed(seed)
        except ValueError as exc:
            raise ConfigError("--seed", str(exc)) from None

    def measure(self, prefix: str = "", section: str = "measure"):
        a = self.args
        get = lambda n: getattr(a, prefix + n, None)  # noqa: E731
        if get("atoms") is not None:
            pts = parse_numbers(get("atoms"), f"--{prefix}atoms")
            w = parse_numbers(get("weights"), f"--{prefix}weights") if get("weights") else None
            try:
                return AtomicMeasure(pts, w)
            except ValueError as exc:
                raise ConfigError(f"--{prefix}atoms", str(exc)) from None
        if get("cantor"):
            return natural_measure(SelfSimilarIFS.cantor())
        if get("lebesgue"):
            return StepDensityMeasure.lebesgue(torus=bool(getattr(a, "torus", False)))
        if section in self.sections:
            return build_measure(self.sections[section], self.sections)
        return None

    def radii(self, mu=None):
        a = self.args
        if getattr(a, "radii", None):
            try:
                return ExplicitRadii(parse_numbers(a.radii, "--radii"))
            except ValueError as exc:
                raise ConfigError("--radii", str(exc)) from None
        if getattr(a, "c", None) is not None or getattr(a, "t", None) is not None:
            c = parse_number(a.c, "--c") if a.c is not None else 1.0
            if a.t is None:
                raise ConfigError("--t", "missing exponent for polynomial radii")
            if a.t.strip() == "critical":
                if mu is None:
                    raise ConfigError("--t", "'critical' needs a measure")
                t = 1.0 / critical_exponent(mu)
            else:
                t = parse_number(a.t, "--t")
            try:
                return PolynomialRadii(c, t)
            except ValueError as exc:
                raise ConfigError("--t", str(exc)) from None
        if "radii" in self.sections:
            return build_radii(self.sections["radii"])
        raise ConfigError("--radii", "no radius sequence given (use --c/--t, --radii or [radii])")


def _need(value, field):
    if value is None:
        raise ConfigError(field, "missing required value")
    return value


# --- subcommands ------------------------------------------------------------


def cmd_ball_measure(res: _Resolver, out: Output):
    mu = _need(res.measure(), "--measure")
    x = res.required("x", parse_number)
    r = res.required("r", parse_number)
    tol = res.number("tol", 1e-14)
    out.row("x", "r", "mass")
    out.row(x, r, ball_measure(mu, x, r, tol))


def cmd_simulate(res: _Resolver, out: Output):
    mu = _need(res.measure(), "--measure")
    seq = res.radii(mu)
    k = res.required("k", parse_int)
    real = simulate_realization(mu, seq, k, res.seed(), res.integer("trial", 0))
    grid_n = res.integer("grid", 1000)
    lo, hi = (0.0, 1.0) if mu.torus else mu.support
    grid = np.linspace(lo, hi, grid_n, endpoint=not mu.torus)
    out.kv("uncovered_fraction", uncovered_fraction(real, grid))
    out.row("n", "center", "radius")
    for n, (w, r) in enumerate(zip(real.centers, real.radii), start=1):
        out.row(n, w, r)


def _ks(res, default="10"):
    text = res.value("k", lambda v, f: v, default)
    return [parse_int(t, "--k") for t in str(text).split(",")] if isinstance(text, str) else [text]


def cmd_survival(res: _Resolver, out: Output):
    mu = _need(res.measure(), "--measure")
    seq = res.radii(mu)
    x = res.required("x", parse_number)
    trials = res.integer("trials", 10 ** 4)
    seed = res.seed()
    out.row("k", "analytic", "empirical", "stderr", "seed")
    for k in _ks(res):
        rep = empirical_survival(mu, seq, x, k, trials, seed)
        out.row(k, rep.analytic, rep.empirical, rep.stderr, seed)


def _nu(res: _Resolver, mu):
    nu = res.measure("nu_", "measure.nu")
    if nu is not None:
        return nu
    cells = res.integer("nu_cells")
    if cells is None:
        raise ConfigError("--nu-atoms", "no test measure nu given")
    if isinstance(mu, SelfSimilarMeasure):
        return cylinder_discretization(mu, cells)
    if isinstance(mu, StepDensityMeasure):
        return step_discretization(mu, cells)
    raise ConfigError("--nu-cells", "discretization needs a self-similar or step measure")


def cmd_martingale(res: _Resolver, out: Output):
    mu = _need(res.measure(), "--measure")
    seq = res.radii(mu)
    nu = _nu(res, mu)
    trials = res.integer("trials", 10 ** 4)
    seed = res.seed()
    out.row("k", "mean", "mean_stderr", "second_moment", "second_stderr", "jk", "seed")
    for k in _ks(res):
        m = martingale_moments(nu, mu, seq, k, trials, seed)
        jk = jk_sequence(nu, mu, seq, k)[-1] if k else 1.0
        out.row(k, m.mean, m.mean_stderr, m.second, m.second_stderr, jk, seed)


def cmd_energy(res: _Resolver, out: Output):
    mu = _need(res.measure(), "--measure")
    seq = res.radii(mu)
    nu = _nu(res, mu)
    jk = res.integer("jk")
    if jk is not None:
        out.row("k", "jk")
        for k, v in enumerate(jk_sequence(nu, mu, seq, jk), start=1):
            out.row(k, v)
        return
    N = res.integer("N", 10 ** 4)
    e = energy_truncated(nu, mu, seq, N)
    out.kv("energy", e.value)
    out.kv("overflow", e.overflow)
    out.kv("capacity_lower_bound", e.capacity_lower_bound)
    out.row("atom", "weight", "diagonal_sum", "last_block_increment")
    for x, w, dsum, inc in zip(nu.points, nu.weights, e.diagonal_sums[:, -1], e.last_block_increment):
        out.row(x, w, dsum, inc)


def _probe_out(out: Output, probe):
    out.kv("model", probe.model)
    out.kv("exponent", probe.exponent)
    out.kv("classification", probe.classification)
    for note in probe.notes:
        out.comment(note)
    out.row("n", "partial_sum")
    for n, s in probe.rows():
        out.row(n, s)


def cmd_shepp(res: _Resolver, out: Output):
    seq = res.radii()
    _probe_out(out, shepp_series(seq, res.integer("N", 10 ** 5)))


def cmd_series(res: _Resolver, out: Output):
    mu = _need(res.measure(), "--measure")
    seq = res.radii(mu)
    x = res.required("x", parse_number)
    probe = ball_mass_power_series(mu, seq, x, res.number("power", 1.0), res.number("scale", 1.0),
                                   res.integer("N", 10 ** 5))
    _probe_out(out, probe)


def cmd_annulus_series(res: _Resolver, out: Output):
    sec = res.sections.get("measure.nu")
    if res.args.nu_weights:
        nu = build_bernoulli(Section("--nu-weights", {"weights": res.args.nu_weights}))
    elif sec is not None:
        nu = build_bernoulli(sec)
    else:
        nu = bernoulli_measure(BernoulliSpec.published())
    mu = natural_measure(nu.ifs)
    c = res.number("c", 1.0)
    seq = PolynomialRadii(c, 1.0 / mu.ifs.dimension)
    word = parse_word(res.value("word", lambda v, f: v, "") or "", nu.ifs.n_symbols)
    b = pw_billard_series(nu, mu, seq, word, K=res.integer("K", 60), seed=res.seed())
    out.kv("c", c)
    out.kv("rate", b.probe.exponent)
    out.kv("classification", b.probe.classification)
    out.kv("regularity_c1", b.regularity.c1)
    out.kv("regularity_c2", b.regularity.c2)
    out.kv("word", "".join(map(str, b.word)) if nu.ifs.n_symbols <= 10 else ",".join(map(str, b.word)))
    out.row("k", "n_upper", "log_term", "ball_sum", "partial_sum")
    for k, (nu_, lt, bs, ps) in enumerate(zip(b.n_upper, b.log_terms, b.ball_sums,
                                               b.probe.partial_sums), start=1):
        out.row(k, nu_, lt, bs, ps)


def _spec(res: _Resolver) -> BernoulliSpec:
    a = res.args
    if a.paper_vector:
        return BernoulliSpec.published()
    if a.weights:
        w = parse_numbers(a.weights, "--weights")
        n = int(round(math.log2(len(w))))
        try:
            return BernoulliSpec(n, tuple(w))
        except ValueError as exc:
            raise ConfigError("--weights", str(exc)) from None
    if a.uniform is not None:
        return BernoulliSpec.uniform(a.uniform)
    raise ConfigError("--paper-vector", "choose --paper-vector, --weights or --uniform")


ROUNDED = {"alpha_min_lower_floor5", "alpha_prime_upper_ceil5", "constant_lower", "constant_upper"}


def cmd_cantor_bounds(res: _Resolver, out: Output):
    spec = _spec(res)
    rep = critical_constant_bounds(spec, res.integer("k_density", 3), res.integer("k_zero", 5))
    out.kv("weights", ",".join(fmt(w) for w in spec.weights))
    if res.args.csv:
        out.row("key", "raw", "rounded")
        for key, v in rep.items():
            if key in ROUNDED:
                rawkey = {"constant_lower": "constant_lower_raw",
                          "constant_upper": "constant_upper_raw",
                          "alpha_min_lower_floor5": "alpha_min_lower",
                          "alpha_prime_upper_ceil5": "alpha_prime_upper"}[key]
                out.row(key, dict(rep.items())[rawkey], fmt5(v))
            else:
                out.row(key, v, "")
        return
    for key, v in rep.items():
        out.kv(key, fmt5(v) if key in ROUNDED else v)


def cmd_optimize(res: _Resolver, out: Output):
    n = res.integer("n", 3)
    seed = res.seed()
    start = BernoulliSpec.published() if res.args.seeded else None
    opt = optimize_bernoulli(n, res.integer("budget", 10 ** 4), seed, start)
    out.kv("bound", fmt5(opt.bound))
    out.kv("bound_raw", opt.bound_raw)
    out.kv("k", opt.k)
    out.kv("evaluations", opt.evaluations)
    out.kv("weights", ";".join(fmt(w) for w in opt.spec.weights))
    out.row("iteration", "vector", "bound")
    for it, vec, val in opt.trace:
        out.row(it, ";".join(fmt(v) for v in vec), val)


DEMO_CRUX = dict(points=[0.0, 0.3, 0.5, 0.8, 1.0], weights=[0.2, 0.15, 0.3, 0.15, 0.2],
                 radii=[0.25, 0.2, 0.15, 0.1], A=[0.0], x=0.35, y=0.65)


def cmd_crux_check(res: _Resolver, out: Output):
    a = res.args
    if a.preset is not None:
        if a.preset != "demo":
            raise ConfigError("--preset", f"unknown preset {a.preset!r}")
        d = DEMO_CRUX
        mu = AtomicMeasure(d["points"], d["weights"])
        seq = ExplicitRadii(d["radii"])
        A, x, y = d["A"], d["x"], d["y"]
        k = len(d["radii"])
    else:
        mu = _need(res.measure(), "--atoms")
        if not isinstance(mu, AtomicMeasure):
            raise ConfigError("--atoms", "crux check needs an atomic measure")
        seq = res.radii(mu)
        if not isinstance(seq, ExplicitRadii):
            raise ConfigError("--radii", "crux check needs explicit radii")
        A = parse_numbers(a.A, "--A") if a.A else []
        x = res.required("x", parse_number)
        y = res.required("y", parse_number)
        k = res.integer("k", seq.length)
    r = crux_check_exact(mu, seq, k, A, x, y)
    for key in ("lhs_i", "rhs_i", "lhs_ii", "rhs_ii", "defined_i", "defined_ii"):
        out.kv(key, getattr(r, key))
    holds_i = (not r.defined_i) or r.slack_i >= -1e-12
    holds_ii = (not r.defined_ii) or r.slack_ii >= -1e-12
    out.kv("holds", holds_i and holds_ii)


def cmd_avg_density(res: _Resolver, out: Output):
    ifs = build_ifs(res.sections["ifs"]) if "ifs" in res.sections else SelfSimilarIFS.cantor()
    if res.args.word is not None:
        x = parse_word(res.args.word, ifs.n_symbols)
    else:
        x = res.number("x", 0.0)
    ad = average_density(ifs, x, res.number("t_min", 1e-6), res.number("quad_tol", 1e-8))
    out.kv("value", ad.value)
    out.kv("error_bound", ad.error_bound)
    out.kv("s", ifs.dimension)
    out.kv("cells", ad.cells)
    out.kv("converged", ad.converged)
    out.row("r_lo", "r_hi", "band_integral")
    for lo, hi, v in ad.trace:
        out.row(lo, hi, v)


COMMANDS = {
    "ball-measure": cmd_ball_measure,
    "simulate": cmd_simulate,
    "survival": cmd_survival,
    "martingale": cmd_martingale,
    "energy": cmd_energy,
    "shepp": cmd_shepp,
    "series": cmd_series,
    "annulus-series": cmd_annulus_series,
    "cantor-bounds": cmd_cantor_bounds,
    "optimize": cmd_optimize,
    "crux-check": cmd_crux_check,
    "avg-density": cmd_avg_density,
}
STOCHASTIC = {"simulate", "survival", "martingale", "annulus-series", "optimize"}


def _measure_flags(p, prefix=""):
    dash = prefix.replace("_", "-")
    p.add_argument(f"--{dash}atoms", dest=f"{prefix}atoms", help="comma-separated atom positions")
    p.add_argument(f"--{dash}weights", dest=f"{prefix}weights", help="comma-separated atom weights")
    if not prefix:
        p.add_argument("--cantor", action="store_true", help="natural measure on the Cantor set")
        p.add_argument("--lebesgue", action="store_true", help="Lebesgue measure on [0, 1]")
        p.add_argument("--torus", action="store_true", help="wrap Lebesgue measure on the circle")


def _radii_flags(p):
    p.add_argument("--c", help="polynomial radii c * n**-t")
    p.add_argument("--t", help="exponent, or 'critical' for 1/(critical exponent of the measure)")
    p.add_argument("--radii", help="explicit comma-separated radii")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="covlab", description="Random covering numerical lab.")
    parser.add_argument("--version", action="version", version=f"covlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="subcommand")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI configuration file")
    common.add_argument("--out", help="output path (default: standard output)")
    common.add_argument("--seed", type=int)

    def add(name, help_):
        return sub.add_parser(name, parents=[common], help=help_)

    p = add("ball-measure", "mass of an open ball")
    _measure_flags(p)
    p.add_argument("--x")
    p.add_argument("--r")
    p.add_argument("--tol", type=float)

    p = add("simulate", "one covering realization")
    _measure_flags(p)
    _radii_flags(p)
    p.add_argument("--k", type=int)
    p.add_argument("--trial", type=int)
    p.add_argument("--grid", type=int)

    p = add("survival", "analytic and empirical survival probabilities")
    _measure_flags(p)
    _radii_flags(p)
    p.add_argument("--x")
    p.add_argument("--k", help="ball count or comma-separated sweep")
    p.add_argument("--trials", type=int)

    for name, help_ in (("martingale", "Monte Carlo moments of the martingale"),
                        ("energy", "truncated energy or second-moment sweep")):
        p = add(name, help_)
        _measure_flags(p)
        _measure_flags(p, "nu_")
        p.add_argument("--nu-cells", dest="nu_cells", type=int,
                       help="discretize mu into this many cells (levels for self-similar mu)")
        _radii_flags(p)
        if name == "martingale":
            p.add_argument("--k", help="ball count or comma-separated sweep")
            p.add_argument("--trials", type=int)
        else:
            p.add_argument("--N", type=int)
            p.add_argument("--jk", type=int, help="emit J_1..J_k instead of the energy")

    p = add("shepp", "partial sums of the circle covering series")
    _radii_flags(p)
    p.add_argument("--N", type=int)

    p = add("series", "partial sums of ball masses raised to a power")
    _measure_flags(p)
    _radii_flags(p)
    p.add_argument("--x")
    p.add_argument("--power")
    p.add_argument("--scale")
    p.add_argument("--N", type=int)

    p = add("annulus-series", "pointwise second-moment series on the Cantor set")
    p.add_argument("--nu-weights", dest="nu_weights", help="2**n block weights (default: published)")
    p.add_argument("--c")
    p.add_argument("--word", help="symbol prefix of the point")
    p.add_argument("--K", type=int)

    p = add("cantor-bounds", "critical-constant bounds for the Cantor measure")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--paper-vector", action="store_true", help="published 3-step weights")
    g.add_argument("--weights", help="2**n block weights")
    g.add_argument("--uniform", type=int, metavar="N", help="uniform N-step weights")
    p.add_argument("--k-density", dest="k_density", type=int)
    p.add_argument("--k-zero", dest="k_zero", type=int)
    p.add_argument("--csv", action="store_true")

    p = add("optimize", "maximize the lower constant over Bernoulli weights")
    p.add_argument("--n", type=int)
    p.add_argument("--budget", type=int)
    p.add_argument("--seeded", action="store_true", help="include the published vector as a start")

    p = add("crux-check", "exact check of the conditional survival inequalities")
    _measure_flags(p)
    _radii_flags(p)
    p.add_argument("--preset")
    p.add_argument("--A", help="comma-separated points left of x")
    p.add_argument("--x")
    p.add_argument("--y")
    p.add_argument("--k", type=int)

    p = add("avg-density", "average density of the natural measure at a point")
    p.add_argument("--x")
    p.add_argument("--word")
    p.add_argument("--t-min", dest="t_min")
    p.add_argument("--quad-tol", dest="quad_tol")
    return parser


def _check_threads():
    v = os.environ.get(THREADS_ENV)
    if v is None:
        return
    try:
        if int(v) < 1:
            raise ValueError
    except ValueError:
        raise ConfigError(THREADS_ENV, f"must be a positive integer, got {v!r}") from None


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        _check_threads()
        res = _Resolver(args)
        seed = res.seed() if args.command in STOCHASTIC else None
        out = Output(["covlab", *argv], seed)
        COMMANDS[args.command](res, out)
        # leftover keys in a section the command read are most likely typos;
        # [run] is shared across subcommands and exempt
        for name, sec in res.sections.items():
            if name != "run" and sec._used:
                sec.check_unused()
    except (ConfigError, InvalidArgument) as exc:
        print(f"covlab: configuration error: {exc}", file=sys.stderr)
        return 2
    except CovlabError as exc:
        print(f"covlab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    out.write(args.out)
    return 0


def main() -> None:
    sys.exit(run())
