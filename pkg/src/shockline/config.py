"""Flat ``key = value`` experiment configuration.

One key per line, ``#`` starts a comment, list values are comma separated::

    experiment = shock-law
    seed = 2024
    alpha = 0.25
    t = 125, 250, 500

Only ``experiment`` and ``seed`` are mandatory; every other key falls back
to the experiment's default.  Unknown keys are rejected.
"""

from dataclasses import dataclass, field


class ConfigError(ValueError):
    pass


def _floats(v):
    return [float(x) for x in v.split(",") if x.strip()]


def _ints(v):
    return [int(x) for x in v.split(",") if x.strip()]


# key -> parser
SCHEMA = {
    "experiment": str,
    "seed": int,
    "out": str,
    "threads": int,
    "trials": int,
    "alpha": float,
    "M": int,
    "eta": float,
    "t": _floats,
    "nu": float,
    "eps": float,
    "delta": float,
    "deltas": _floats,
    "alphas": _floats,
    "Ms": _ints,
    "etas": _floats,
    "max_label": int,
    "checkpoint_step": float,
    "canary_trials": int,
    "nu_compare": _floats,
    "compare_t": float,
    "compare_trials": int,
    "tau_points": int,
    "s_min": float,
    "s_max": float,
    "grid_points": int,
    "samples": int,
    "nus": _floats,
    "n": int,
    "xs": _ints,
    "cond_t": _floats,
    "ft_n": int,
    "ft_t": float,
    "ft_alpha": float,
    "ft_Ms": _ints,
    "ft_trials": int,
    "gap_points": int,
}

EXPERIMENTS = ("shock-law", "min-identity", "slow-decorrelation", "localization", "tails",
               "system-a-limit", "gue-cdf", "kernel-limit", "direct-cdf")


@dataclass
class ExperimentConfig:
    """Experiment id, seed, output directory and the parameter table."""

    experiment: str
    seed: int
    params: dict = field(default_factory=dict)
    out: str = "out"
    threads: int = 1

    def __getitem__(self, key):
        return self.params[key]

    def get(self, key, default=None):
        return self.params.get(key, default)

    def with_defaults(self, defaults):
        merged = dict(defaults)
        merged.update(self.params)
        return ExperimentConfig(self.experiment, self.seed, merged, self.out, self.threads)

    def as_dict(self):
        return dict(experiment=self.experiment, seed=self.seed, out=self.out,
                    threads=self.threads, **self.params)


def parse_config(text, overrides=None):
    """Parse config text; ``overrides`` (already typed) win over the file."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, val = (p.strip() for p in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            raw[key] = SCHEMA[key](val)
        except ValueError as e:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {e}") from None
    for k, v in (overrides or {}).items():
        if v is not None:
            if k not in SCHEMA:
                raise ConfigError(f"unknown key {k!r}")
            raw[k] = v
    if "experiment" not in raw:
        raise ConfigError("missing 'experiment'")
    if raw["experiment"] not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {raw['experiment']!r}")
    if "seed" not in raw:
        raise ConfigError("missing 'seed' (there is no clock-based default)")
    exp = raw.pop("experiment")
    seed = raw.pop("seed")
    if seed < 0:
        raise ConfigError("seed must be non-negative")
    out = raw.pop("out", "out")
    threads = raw.pop("threads", 1)
    if threads < 1:
        raise ConfigError("threads must be at least 1")
    return ExperimentConfig(exp, seed, raw, out, threads)


def load_config(path, overrides=None):
    with open(path) as fh:
        return parse_config(fh.read(), overrides)


def make_config(experiment, seed, **params):
    """Programmatic construction with the same validation as a file."""
    out = params.pop("out", "out")
    threads = params.pop("threads", 1)
    lines = [f"experiment = {experiment}", f"seed = {seed}"]
    cfg = parse_config("\n".join(lines))
    for k in params:
        if k not in SCHEMA:
            raise ConfigError(f"unknown key {k!r}")
    cfg.params.update(params)
    cfg.out = out
    cfg.threads = threads
    return cfg
