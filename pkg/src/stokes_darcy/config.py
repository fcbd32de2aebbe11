"""Run configuration: flat ``key = value`` text with dotted section names.

Example::

    # comments start with '#'
    mode = convergence
    params.gamma = 1.0
    study.h_list = 1/4, 1/8, 1/16
    output.dir = results

Unset keys take the smooth benchmark defaults (nu = k1 = k2 = g0 = alpha =
S0 = gamma = 1, T = 1, tau = h^2, h = 1/4 ... 1/32). Values given on the
command line override the file.
"""
import os
from dataclasses import dataclass, field
from fractions import Fraction

from .assembly import ModelParams, ParameterError
from .manufactured import CASES
from .mesh import SIDES, DomainSpec, MeshError
from .solver import SOLVE_RTOL

OUTPUT_ENV = "STOKES_DARCY_OUTPUT_DIR"
MODES = ("convergence", "run", "ritz")


class ConfigError(ValueError):
    pass


def _float(text):
    try:
        return float(Fraction(text.strip()))
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"not a number: {text!r}") from None


def _int(text):
    try:
        return int(text.strip())
    except ValueError:
        raise ConfigError(f"not an integer: {text!r}") from None


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _floats(text):
    return tuple(_float(v) for v in text.split(",") if v.strip())


def _str(text):
    return text.strip()


def _tau(text):
    t = text.strip().lower()
    return None if t in ("h2", "h^2", "h**2") else _float(t)


# key -> (parser, default)
SCHEMA = {
    "mode": (_str, "convergence"),
    "case": (_str, "example51"),
    "geometry.fluid": (_floats, (0.0, 1.0, 0.0, 1.0)),
    "geometry.porous": (_floats, (0.0, 1.0, 1.0, 2.0)),
    "geometry.dirichlet_side": (_str, "top"),
    "params.nu": (_float, 1.0),
    "params.k1": (_float, 1.0),
    "params.k2": (_float, 1.0),
    "params.g0": (_float, 1.0),
    "params.alpha": (_float, 1.0),
    "params.S0": (_float, 1.0),
    "params.gamma": (_float, 1.0),
    "study.h_list": (_floats, (0.25, 0.125, 0.0625, 0.03125)),
    "run.n": (_int, 8),
    "time.T": (_float, 1.0),
    "time.tau": (_tau, None),
    "ritz.t": (_float, 0.0),
    "output.dir": (_str, None),
    "output.csv": (_str, "convergence.csv"),
    "output.vtk": (_str, "fields.vtk"),
    "output.summary": (_str, "summary.json"),
    "output.wall_time": (_bool, True),
    "solver.rtol": (_float, SOLVE_RTOL),
    "quadrature.error_degree": (_int, 6),
    "jobs": (_int, 0),
}


def read_pairs(path):
    """``{key: raw value}`` from a config file; later duplicates win."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    pairs = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        pairs[key] = value
    return pairs


@dataclass(frozen=True)
class RunConfig:
    mode: str = "convergence"
    case: str = "example51"
    domain: DomainSpec = field(default_factory=DomainSpec)
    params: ModelParams = field(default_factory=ModelParams)
    h_list: tuple = (0.25, 0.125, 0.0625, 0.03125)
    n: int = 8
    T: float = 1.0
    tau: float | None = None  # None: tau = h^2
    ritz_t: float = 0.0
    output_dir: str = "."
    csv_name: str = "convergence.csv"
    vtk_name: str = "fields.vtk"
    summary_name: str = "summary.json"
    wall_time: bool = True
    rtol: float = SOLVE_RTOL
    error_degree: int = 6
    jobs: int = 0

    @property
    def levels(self):
        return tuple(round(1.0 / h) for h in self.h_list)

    def output_path(self, name):
        return os.path.join(self.output_dir, name)


def _rect(vals, key):
    if len(vals) != 4:
        raise ConfigError(f"{key} needs four numbers x0, x1, y0, y1")
    return ((vals[0], vals[1]), (vals[2], vals[3]))


def _check_h_list(h_list):
    if not h_list:
        raise ConfigError("study.h_list is empty")
    for h in h_list:
        n = round(1.0 / h) if h > 0 else 0
        if n < 2 or abs(n * h - 1.0) > 1e-9:
            raise ConfigError(f"study.h_list entry {h} is not 1/n for an integer n >= 2")
    for a, b in zip(h_list, h_list[1:]):
        if abs(a - 2.0 * b) > 1e-12 * a:
            raise ConfigError("study.h_list must halve from one entry to the next")


def build_config(pairs, env=None):
    """Validate raw ``{key: text}`` pairs into a :class:`RunConfig`."""
    env = os.environ if env is None else env
    unknown = sorted(set(pairs) - set(SCHEMA))
    if unknown:
        raise ConfigError(f"unknown config key: {unknown[0]}")
    v = {k: default for k, (_, default) in SCHEMA.items()}
    for k, raw in pairs.items():
        v[k] = SCHEMA[k][0](raw) if isinstance(raw, str) else raw
    if v["mode"] not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {v['mode']!r}")
    if v["case"] not in CASES:
        raise ConfigError(f"case must be one of {tuple(CASES)}, got {v['case']!r}")
    if v["geometry.dirichlet_side"] not in SIDES:
        raise ConfigError(f"geometry.dirichlet_side must be one of {SIDES}")
    try:
        domain = DomainSpec(
            _rect(v["geometry.fluid"], "geometry.fluid"),
            _rect(v["geometry.porous"], "geometry.porous"),
            v["geometry.dirichlet_side"],
        )
        params = ModelParams(
            nu=v["params.nu"],
            K=(v["params.k1"], v["params.k2"]),
            g0=v["params.g0"],
            alpha=v["params.alpha"],
            S0=v["params.S0"],
            gamma=v["params.gamma"],
        )
    except (ParameterError, MeshError) as exc:
        raise ConfigError(str(exc)) from None
    h_list = tuple(v["study.h_list"])
    _check_h_list(h_list)
    checks = {
        "run.n >= 2": v["run.n"] >= 2,
        "time.T > 0": v["time.T"] > 0,
        "time.tau > 0": v["time.tau"] is None or v["time.tau"] > 0,
        "ritz.t >= 0": v["ritz.t"] >= 0,
        "0 < solver.rtol < 1": 0 < v["solver.rtol"] < 1,
        "6 <= quadrature.error_degree <= 10": 6 <= v["quadrature.error_degree"] <= 10,
        "jobs >= 0": v["jobs"] >= 0,
    }
    for rule, ok in checks.items():
        if not ok:
            raise ConfigError(f"config invariant violated: {rule}")
    tau = v["time.tau"]
    if tau is not None and abs(round(v["time.T"] / tau) * tau - v["time.T"]) > 1e-9 * v["time.T"]:
        raise ConfigError("config invariant violated: time.T must be a whole number of time.tau steps")
    out_dir = v["output.dir"] or env.get(OUTPUT_ENV) or "."
    return RunConfig(
        mode=v["mode"],
        case=v["case"],
        domain=domain,
        params=params,
        h_list=h_list,
        n=v["run.n"],
        T=v["time.T"],
        tau=v["time.tau"],
        ritz_t=v["ritz.t"],
        output_dir=out_dir,
        csv_name=v["output.csv"],
        vtk_name=v["output.vtk"],
        summary_name=v["output.summary"],
        wall_time=v["output.wall_time"],
        rtol=v["solver.rtol"],
        error_degree=v["quadrature.error_degree"],
        jobs=v["jobs"],
    )


def parse_config(path=None, overrides=None, env=None):
    """Read ``path`` (optional), apply ``overrides`` (``{key: text}``), validate."""
    pairs = read_pairs(path) if path else {}
    pairs.update(overrides or {})
    return build_config(pairs, env)
