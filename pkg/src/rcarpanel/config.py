"""YAML configuration: strict parsing, defaults, and domain-object builders.

Configs are nested mappings with sections ``model``, ``init``, ``seed``,
``analysis``, ``estimation``, ``simulate``, and ``mc``.  Unknown keys are
rejected with their full dotted path; every default is listed by
``reference_text()`` (also printable via ``python -m rcarpanel.config``).

``effective_config()`` returns the fully defaulted mapping that reports
embed, so any output file names the exact settings that produced it.
"""

import yaml

from .distributions import (
    DegenerateCoefficients,
    DiscreteCoefficients,
    GaussianCoefficients,
    ModelSpec,
    NoiseSpec,
)
from .exceptions import ConfigError
from .montecarlo import ExperimentPlan
from .simulate import InitMode

__all__ = [
    "load_config",
    "parse_config",
    "effective_config",
    "model_spec_from",
    "init_from",
    "plan_from",
    "reference_text",
    "DEFAULTS",
]

DEFAULTS = {
    "seed": 0,
    "init": {"kind": "exact_stationary", "n": 500, "terms": None, "state": None},
    "analysis": {
        "lags": [0, 1, 2],
        "frequencies": [0.0],
        "tol": 1e-12,
        "max_terms": 100000,
        "samples": 100000,
        "boundary_tol": 1e-9,
    },
    "estimation": {"pathway": "cross_sectional", "max_lag": 2, "max_power": 1},
    "simulate": {"keep_truth": False, "policy": "reject"},
    "mc": {
        "experiment": "consistency",
        "sweep": "N",
        "grid": [100, 400, 1600],
        "replications": 200,
        "lags": [0],
        "statistics": ["bias", "rmse", "slope"],
        "workers": None,
    },
}

_SECTION_KEYS = {
    "model": {"order", "coefficients", "noise", "n_individuals", "horizon"},
    "coefficients": {"kind", "value", "atoms", "weights", "mean", "covariance"},
    "noise": {"kind", "sigma2", "atoms", "weights"},
    "init": {"kind", "n", "terms", "state"},
    "analysis": set(DEFAULTS["analysis"]),
    "estimation": set(DEFAULTS["estimation"]),
    "simulate": set(DEFAULTS["simulate"]),
    "mc": set(DEFAULTS["mc"]),
}
_TOP_KEYS = {"model", "init", "seed", "analysis", "estimation", "simulate", "mc"}


def _expect_mapping(node, path):
    if not isinstance(node, dict):
        raise ConfigError(f"'{path}' must be a mapping, got {type(node).__name__}")
    return node


def _check_keys(node, allowed, path):
    for key in node:
        if key not in allowed:
            raise ConfigError(f"unknown key '{path}.{key}'" if path
                              else f"unknown key '{key}'")


def _number(node, path, kind=float, minimum=None):
    if isinstance(node, bool) or not isinstance(node, (int, float)):
        raise ConfigError(f"'{path}' must be a number, got {node!r}")
    val = kind(node)
    if kind is int and node != val:
        raise ConfigError(f"'{path}' must be an integer, got {node!r}")
    if minimum is not None and val < minimum:
        raise ConfigError(f"'{path}' must be >= {minimum}, got {node!r}")
    return val


def _number_list(node, path, kind=float):
    if not isinstance(node, (list, tuple)):
        raise ConfigError(f"'{path}' must be a list, got {node!r}")
    return [_number(v, f"{path}[{i}]", kind) for i, v in enumerate(node)]


def _choice(node, path, options):
    if node not in options:
        raise ConfigError(f"'{path}' must be one of {sorted(options)}, got {node!r}")
    return node


def load_config(path):
    """Read and validate a YAML config file."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)


def parse_config(text):
    """Parse YAML config text; reject unknown keys with their dotted path."""
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from None
    if raw is None:
        raw = {}
    _expect_mapping(raw, "config")
    _check_keys(raw, _TOP_KEYS, "")
    for section in ("model", "init", "analysis", "estimation", "simulate", "mc"):
        if section in raw:
            node = _expect_mapping(raw[section], section)
            _check_keys(node, _SECTION_KEYS[section], section)
    if "model" in raw:
        model = raw["model"]
        for sub in ("coefficients", "noise"):
            if sub in model:
                node = _expect_mapping(model[sub], f"model.{sub}")
                _check_keys(node, _SECTION_KEYS[sub], f"model.{sub}")
    return raw


def _merged(cfg, section):
    base = dict(DEFAULTS.get(section, {}))
    base.update(cfg.get(section) or {})
    return base


def effective_config(cfg):
    """The fully defaulted configuration embedded in reports."""
    out = {"seed": cfg.get("seed", DEFAULTS["seed"])}
    if "model" in cfg:
        out["model"] = cfg["model"]
    for section in ("init", "analysis", "estimation", "simulate", "mc"):
        out[section] = _merged(cfg, section)
    return out


def _coeff_dist_from(node, path="model.coefficients"):
    kind = _choice(node.get("kind"), f"{path}.kind",
                   {"degenerate", "discrete", "gaussian"})
    if kind == "degenerate":
        if "value" not in node:
            raise ConfigError(f"'{path}.value' is required for kind degenerate")
        return DegenerateCoefficients(tuple(_number_list(node["value"],
                                                         f"{path}.value")))
    if kind == "discrete":
        if "atoms" not in node:
            raise ConfigError(f"'{path}.atoms' is required for kind discrete")
        atoms = node["atoms"]
        if not isinstance(atoms, list) or not atoms:
            raise ConfigError(f"'{path}.atoms' must be a nonempty list")
        values = tuple(tuple(_number_list(a, f"{path}.atoms[{i}]"))
                       for i, a in enumerate(atoms))
        weights = node.get("weights")
        if weights is not None:
            weights = tuple(_number_list(weights, f"{path}.weights"))
        return DiscreteCoefficients(values=values, weights=weights)
    for key in ("mean", "covariance"):
        if key not in node:
            raise ConfigError(f"'{path}.{key}' is required for kind gaussian")
    mean = tuple(_number_list(node["mean"], f"{path}.mean"))
    cov_node = node["covariance"]
    if not isinstance(cov_node, list):
        raise ConfigError(f"'{path}.covariance' must be a list of rows")
    cov = tuple(tuple(_number_list(row, f"{path}.covariance[{i}]"))
                for i, row in enumerate(cov_node))
    return GaussianCoefficients(mean_vector=mean, covariance=cov)


def _noise_from(node, path="model.noise"):
    kind = _choice(node.get("kind", "constant"), f"{path}.kind",
                   {"constant", "discrete"})
    if kind == "constant":
        sigma2 = _number(node.get("sigma2", 1.0), f"{path}.sigma2", minimum=0.0)
        return NoiseSpec.constant(sigma2)
    if "atoms" not in node:
        raise ConfigError(f"'{path}.atoms' is required for kind discrete")
    atoms = tuple(_number_list(node["atoms"], f"{path}.atoms"))
    weights = node.get("weights")
    if weights is not None:
        weights = tuple(_number_list(weights, f"{path}.weights"))
    return NoiseSpec(variances=atoms, weights=weights)


def model_spec_from(cfg):
    """Build the generative ModelSpec from a validated config mapping."""
    if "model" not in cfg:
        raise ConfigError("'model' section is required for this command")
    model = _expect_mapping(cfg["model"], "model")
    if "coefficients" not in model:
        raise ConfigError("'model.coefficients' is required")
    dist = _coeff_dist_from(_expect_mapping(model["coefficients"],
                                            "model.coefficients"))
    if "order" in model:
        order = _number(model["order"], "model.order", int, minimum=1)
        if order != dist.order:
            raise ConfigError(
                f"'model.order' is {order} but the coefficient law has "
                f"order {dist.order}"
            )
    noise = _noise_from(_expect_mapping(model.get("noise", {"kind": "constant"}),
                                        "model.noise"))
    n = _number(model.get("n_individuals", 1), "model.n_individuals", int, 1)
    horizon = _number(model.get("horizon", dist.order), "model.horizon", int, 1)
    return ModelSpec(coeff_dist=dist, noise=noise, n_individuals=n,
                     horizon=horizon)


def init_from(cfg):
    node = _merged(cfg, "init")
    kind = _choice(node["kind"], "init.kind",
                   {"exact_stationary", "burn_in", "ma_truncation", "fixed_start"})
    if kind == "exact_stationary":
        return InitMode.exact_stationary()
    if kind == "burn_in":
        return InitMode.with_burn_in(_number(node["n"], "init.n", int, 0))
    if kind == "ma_truncation":
        if node.get("terms") is None:
            raise ConfigError("'init.terms' is required for kind ma_truncation")
        return InitMode.ma_truncation(_number(node["terms"], "init.terms", int, 1))
    if node.get("state") is None:
        raise ConfigError("'init.state' is required for kind fixed_start")
    return InitMode.fixed_start(_number_list(node["state"], "init.state"))


def plan_from(cfg, spec=None):
    """Build an ExperimentPlan; the model comes from cfg unless given."""
    node = _merged(cfg, "mc")
    if spec is None:
        spec = model_spec_from(cfg)
    experiment = _choice(node["experiment"], "mc.experiment",
                         {"consistency", "clt", "ahat", "diagnostic"})
    stats = node["statistics"]
    if not isinstance(stats, list):
        raise ConfigError(f"'mc.statistics' must be a list, got {stats!r}")
    for i, s in enumerate(stats):
        _choice(s, f"mc.statistics[{i}]", {"bias", "rmse", "slope", "normality"})
    workers = node["workers"]
    if workers is not None:
        workers = _number(workers, "mc.workers", int, 1)
    plan = ExperimentPlan(
        spec=spec,
        sweep=_choice(node["sweep"], "mc.sweep", {"N", "T"}),
        grid=tuple(_number_list(node["grid"], "mc.grid", int)),
        replications=_number(node["replications"], "mc.replications", int, 1),
        lags=tuple(_number_list(node["lags"], "mc.lags", int)),
        seed=_number(cfg.get("seed", DEFAULTS["seed"]), "seed", int, 0),
        statistics=tuple(stats),
        init=init_from(cfg),
        policy=_choice(_merged(cfg, "simulate")["policy"], "simulate.policy",
                       {"reject", "keep"}),
        workers=workers,
    )
    return experiment, plan


def reference_text():
    """A commented YAML reference listing every key and its default."""
    return """\
# Configuration reference. Every key shown with its default; unknown keys
# are rejected with their dotted path.

model:                      # required by analyze, simulate, mc
  order: 1                  # optional; must match the coefficient law
  coefficients:             # required
    kind: degenerate        # degenerate | discrete | gaussian
    value: [0.5]            # degenerate: the fixed coefficient vector
    # atoms: [[0.2], [0.4]] # discrete: list of coefficient vectors
    # weights: [0.5, 0.5]   # discrete: optional, uniform when omitted
    # mean: [0.5]           # gaussian: mean vector
    # covariance: [[0.01]]  # gaussian: symmetric PSD matrix
  noise:
    kind: constant          # constant | discrete
    sigma2: 1.0             # constant variance (0 allowed: noiseless limit)
    # atoms: [0.5, 1.5]     # discrete: positive variance atoms
    # weights: [0.5, 0.5]   # discrete: optional, uniform when omitted
  n_individuals: 1
  horizon: 1                # observations run t = 0..horizon

init:
  kind: exact_stationary    # exact_stationary | burn_in | ma_truncation | fixed_start
  n: 500                    # burn_in length
  terms: null               # ma_truncation term count (required for that kind)
  state: null               # fixed_start state vector, oldest first (required)

seed: 0                     # overridden by --seed or RCARPANEL_SEED

analysis:
  lags: [0, 1, 2]           # covariance lags to tabulate
  frequencies: [0.0]        # spectral density grid (radians)
  tol: 1.0e-12              # series truncation tolerance
  max_terms: 100000         # series term budget
  samples: 100000           # sampling budget for gaussian coefficient laws
  boundary_tol: 1.0e-9      # stationarity boundary tolerance

estimation:
  pathway: cross_sectional  # cross_sectional | per_individual | both
  max_lag: 2
  max_power: 1              # per-individual moment power budget

simulate:
  keep_truth: false         # also write the sidecar of per-individual draws
  policy: reject            # reject | keep nonstationary coefficient draws

mc:
  experiment: consistency   # consistency | clt | ahat | diagnostic
  sweep: N                  # N | T
  grid: [100, 400, 1600]
  replications: 200
  lags: [0]
  statistics: [bias, rmse, slope]   # add normality for CLT screens (needs R >= 50)
  workers: null             # thread count; overridden by RCARPANEL_THREADS
"""


if __name__ == "__main__":
    print(reference_text(), end="")
