"""Run configuration: strict YAML parsing with defaults, validation, and
lossless round-tripping."""

from __future__ import annotations

from dataclasses import dataclass

import yaml

from .errors import ConfigurationError, ParameterError
from .kernel import ModelParams
from .operators import TestFunction

_MODEL_KEYS = {"gamma", "asymmetry", "c_plus", "c_minus", "energies", "densities",
               "d1", "kn", "n", "lattice_size"}
_EXPERIMENT_KEYS = {"trajectories", "horizon", "dt", "test_function", "pair_terms",
                    "block_eps", "quad_eps", "energy_eps", "r_cut", "static_samples",
                    "autocov_times"}
_TF_KEYS = {"family", "center", "width", "wavenumber"}
_TOP_KEYS = {"model", "experiment", "tests", "output", "seed", "threads"}


@dataclass
class RunConfig:
    """Validated experiment configuration (a pure value object)."""

    params: ModelParams
    test_function: TestFunction
    trajectories: int
    horizon: float
    dt: float | None
    pair_terms: bool
    block_eps: tuple[float, ...]
    quad_eps: tuple[float, ...]
    energy_eps: tuple[float, ...]
    r_cut: int | None
    static_samples: int
    autocov_times: tuple[float, ...]
    tolerance_sigma: float
    out_dir: str
    seed: int
    threads: int

    def to_dict(self) -> dict:
        p = self.params
        tf = self.test_function
        return {
            "model": {
                "gamma": p.gamma, "c_plus": p.c_plus, "c_minus": p.c_minus,
                "energies": list(p.energies), "densities": list(p.densities),
                "d1": p.d1, "kn": {"kappa0": p.kn_rule[0], "beta": p.kn_rule[1]},
                "n": p.n, "lattice_size": p.lattice_size,
            },
            "experiment": {
                "trajectories": self.trajectories, "horizon": self.horizon,
                "dt": self.dt,
                "test_function": {"family": tf.family, "center": tf.center,
                                  "width": tf.width, "wavenumber": tf.wavenumber},
                "pair_terms": self.pair_terms,
                "block_eps": list(self.block_eps), "quad_eps": list(self.quad_eps),
                "energy_eps": list(self.energy_eps), "r_cut": self.r_cut,
                "static_samples": self.static_samples,
                "autocov_times": list(self.autocov_times),
            },
            "tests": {"tolerance_sigma": self.tolerance_sigma},
            "output": {"directory": self.out_dir},
            "seed": self.seed,
            "threads": self.threads,
        }

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True)


def _reject_unknown(section: dict, allowed: set, where: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigurationError(
            f"unknown key(s) {sorted(unknown)} in {where}")


def _need(section: dict, key: str, where: str):
    if key not in section or section[key] is None:
        raise ConfigurationError(f"missing required key {key!r} in {where}")
    return section[key]


def parse_config(text: str) -> RunConfig:
    """Parse and validate a YAML configuration.

    Unknown keys are rejected; kernel and lattice invariants are checked
    eagerly, and failures name the offending key and constraint.
    """
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"malformed YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigurationError("configuration must be a mapping")
    _reject_unknown(raw, _TOP_KEYS, "top level")
    model = raw.get("model") or {}
    _reject_unknown(model, _MODEL_KEYS, "model")
    exp = raw.get("experiment") or {}
    _reject_unknown(exp, _EXPERIMENT_KEYS, "experiment")
    tests = raw.get("tests") or {}
    _reject_unknown(tests, {"tolerance_sigma"}, "tests")
    output = raw.get("output") or {}
    _reject_unknown(output, {"directory"}, "output")

    gamma = float(_need(model, "gamma", "model"))
    if gamma <= 0:
        raise ConfigurationError(f"model.gamma must be positive, got {gamma}")
    n = int(_need(model, "n", "model"))
    lattice_size = int(model.get("lattice_size") or 32 * n)
    kn = model.get("kn") or {"kappa0": 0.0, "beta": 0.0}
    _reject_unknown(kn, {"kappa0", "beta"}, "model.kn")
    energies = tuple(float(e) for e in _need(model, "energies", "model"))
    if len(energies) != 3:
        raise ConfigurationError("model.energies must list exactly three values")
    densities = model.get("densities")
    densities = (1 / 3, 1 / 3, 1 / 3) if densities is None \
        else tuple(float(r) for r in densities)
    if len(densities) != 3:
        raise ConfigurationError("model.densities must list exactly three values")
    has_asym = model.get("asymmetry") is not None
    has_c = model.get("c_plus") is not None or model.get("c_minus") is not None
    if has_asym and has_c:
        raise ConfigurationError(
            "model: give either asymmetry or c_plus/c_minus, not both")
    try:
        if has_c:
            params = ModelParams(
                gamma=gamma, c_plus=float(_need(model, "c_plus", "model")),
                c_minus=float(_need(model, "c_minus", "model")),
                energies=energies, densities=densities,
                d1=float(model.get("d1", 1.0)),
                kn_rule=(float(kn.get("kappa0", 0.0)), float(kn.get("beta", 0.0))),
                n=n, lattice_size=lattice_size)
        else:
            params = ModelParams.from_asymmetry(
                gamma, float(model.get("asymmetry", 0.0)), energies=energies,
                densities=densities, d1=float(model.get("d1", 1.0)),
                kn_rule=(float(kn.get("kappa0", 0.0)), float(kn.get("beta", 0.0))),
                n=n, lattice_size=lattice_size)
    except ParameterError as exc:
        raise ConfigurationError(f"model: {exc}") from exc

    tf_raw = exp.get("test_function") or {"family": "gaussian", "center": None,
                                          "width": 1.0}
    _reject_unknown(tf_raw, _TF_KEYS, "experiment.test_function")
    family = tf_raw.get("family", "gaussian")
    if family not in ("gaussian", "bump", "modulated_gaussian"):
        raise ConfigurationError(
            f"experiment.test_function.family must be gaussian, bump, or "
            f"modulated_gaussian, got {family!r}")
    center = tf_raw.get("center")
    center = lattice_size / (2 * n) if center is None else float(center)
    tf = TestFunction(family=family, center=center,
                      width=float(tf_raw.get("width", 1.0)),
                      wavenumber=float(tf_raw.get("wavenumber", 0.0) or 0.0))

    dt = exp.get("dt")
    r_cut = exp.get("r_cut")
    cfg = RunConfig(
        params=params, test_function=tf,
        trajectories=int(exp.get("trajectories", 0)),
        horizon=float(exp.get("horizon", 1.0)),
        dt=None if dt is None else float(dt),
        pair_terms=bool(exp.get("pair_terms", False)),
        block_eps=tuple(float(e) for e in exp.get("block_eps") or ()),
        quad_eps=tuple(float(e) for e in exp.get("quad_eps") or ()),
        energy_eps=tuple(float(e) for e in exp.get("energy_eps") or ()),
        r_cut=None if r_cut is None else int(r_cut),
        static_samples=int(exp.get("static_samples", 0)),
        autocov_times=tuple(float(t) for t in exp.get("autocov_times") or ()),
        tolerance_sigma=float(tests.get("tolerance_sigma", 4.0)),
        out_dir=str(output.get("directory", "out")),
        seed=int(raw.get("seed", 0)),
        threads=int(raw.get("threads", 1)),
    )
    if cfg.trajectories < 0:
        raise ConfigurationError("experiment.trajectories must be nonnegative")
    if cfg.horizon < 0:
        raise ConfigurationError("experiment.horizon must be nonnegative")
    for name, eps_list in (("block_eps", cfg.block_eps), ("quad_eps", cfg.quad_eps),
                           ("energy_eps", cfg.energy_eps)):
        for e in eps_list:
            if not 0.0 < e < 0.5:
                raise ConfigurationError(
                    f"experiment.{name} entries must lie in (0, 1/2), got {e}")
            if e * n < 2:
                raise ConfigurationError(
                    f"experiment.{name}: eps*n = {e * n:.2f} < 2 gives empty blocks")
    return cfg
