"""Experiment configuration: strict JSON schema with field-path errors.

One JSON object per experiment.  Unknown fields are rejected (anywhere in
the tree), so typos fail loudly instead of silently running defaults.  The
parsed config is an immutable value object built from primitives, which
makes save -> load -> compare an exact round trip.

Schema:

    {
      "driver":       {"beta": 1.5, "scale": 1.0},
      "kernels":      [{"family": "ou", "lam": 1.0},
                       {"family": "ou", "lam": 2.0, "alpha": 4.0},
                       {"family": "truncated-power-law", "kappa": 0.0, "alpha": 2.0},
                       {"family": "lfsn-noise", "hurst": 0.3},
                       {"family": "indicator"}],
      "functional":   {"amps": [...], "freqs": [[...], ...], "phases": [...]},
      "n_list":       [256, 512, 1024],
      "replications": 2000,
      "master_seed":  1,
      "grid_tol":     0.01,        // optional
      "tail_frac":    0.01,        // optional
      "out_dir":      "reports",   // optional
      "threads":      1            // optional
    }
"""
from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import ConfigError
from .kernels import (
    KernelBank,
    indicator_kernel,
    lfsn_kernel,
    ou_kernel,
    power_kernel,
)
from .stable import StableParams
from .stats import Functional, make_trig_functional

__all__ = ["ExperimentConfig", "parse_config", "load_config", "save_config"]

_REQUIRED = object()

# family -> (required params, optional params with defaults)
_FAMILIES = {
    "ou": (("lam",), (("alpha", 4.0),)),
    "lfsn-noise": (("hurst",), ()),
    "truncated-power-law": (("kappa", "alpha"), ()),
    "indicator": ((), ()),
}


def _need(obj: dict, key: str, path: str, default=_REQUIRED):
    if key not in obj:
        if default is _REQUIRED:
            raise ConfigError(f"{path}.{key}: missing required field")
        return default
    return obj[key]


def _number(value, path: str, integer: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    if integer and int(value) != value:
        raise ConfigError(f"{path}: expected an integer, got {value!r}")
    return int(value) if integer else float(value)


def _reject_unknown(obj: dict, allowed, path: str):
    extra = sorted(set(obj) - set(allowed))
    if extra:
        raise ConfigError(f"{path}: unknown field(s) {', '.join(extra)}")


def _parse_kernel(obj, idx: int) -> tuple[str, tuple[tuple[str, float], ...]]:
    path = f"kernels[{idx}]"
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: expected an object")
    family = _need(obj, "family", path)
    if family not in _FAMILIES:
        raise ConfigError(f"{path}.family: unknown family {family!r}")
    required, optional = _FAMILIES[family]
    _reject_unknown(obj, ("family",) + required + tuple(k for k, _ in optional), path)
    params = []
    for name in required:
        params.append((name, _number(_need(obj, name, path), f"{path}.{name}")))
    for name, default in optional:
        params.append((name, _number(_need(obj, name, path, default), f"{path}.{name}")))
    return family, tuple(params)


def _parse_vector(obj, path: str) -> tuple[float, ...]:
    if not isinstance(obj, list) or not obj:
        raise ConfigError(f"{path}: expected a non-empty array of numbers")
    return tuple(_number(v, f"{path}[{i}]") for i, v in enumerate(obj))


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description (primitives only, exact equality)."""

    beta: float
    scale: float
    kernels: tuple[tuple[str, tuple[tuple[str, float], ...]], ...]
    amps: tuple[float, ...]
    freqs: tuple[tuple[float, ...], ...]
    phases: tuple[float, ...]
    n_list: tuple[int, ...]
    replications: int
    master_seed: int
    grid_tol: float = 1e-2
    tail_frac: float = 0.01
    out_dir: str = "reports"
    threads: int = 1

    @property
    def m(self) -> int:
        return len(self.kernels)

    @property
    def d(self) -> int:
        return len(self.amps)

    def driver(self) -> StableParams:
        return StableParams(beta=self.beta, scale=self.scale)

    def bank(self) -> KernelBank:
        specs = []
        for family, params in self.kernels:
            p = dict(params)
            if family == "ou":
                specs.append(ou_kernel(p["lam"], alpha=p["alpha"]))
            elif family == "lfsn-noise":
                specs.append(lfsn_kernel(p["hurst"], self.beta))
            elif family == "truncated-power-law":
                specs.append(power_kernel(p["kappa"], p["alpha"]))
            else:
                specs.append(indicator_kernel())
        return KernelBank(tuple(specs))

    def functional(self) -> Functional:
        return make_trig_functional([list(r) for r in self.freqs], self.phases, self.amps)

    def to_dict(self) -> dict:
        return {
            "driver": {"beta": self.beta, "scale": self.scale},
            "kernels": [{"family": fam, **dict(params)} for fam, params in self.kernels],
            "functional": {
                "amps": list(self.amps),
                "freqs": [list(r) for r in self.freqs],
                "phases": list(self.phases),
            },
            "n_list": list(self.n_list),
            "replications": self.replications,
            "master_seed": self.master_seed,
            "grid_tol": self.grid_tol,
            "tail_frac": self.tail_frac,
            "out_dir": self.out_dir,
            "threads": self.threads,
        }


_TOP_KEYS = (
    "driver",
    "kernels",
    "functional",
    "n_list",
    "replications",
    "master_seed",
    "grid_tol",
    "tail_frac",
    "out_dir",
    "threads",
)


def parse_config(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root: expected a JSON object")
    _reject_unknown(data, _TOP_KEYS, "config")

    driver = _need(data, "driver", "config")
    if not isinstance(driver, dict):
        raise ConfigError("driver: expected an object")
    _reject_unknown(driver, ("beta", "scale"), "driver")
    beta = _number(_need(driver, "beta", "driver"), "driver.beta")
    scale = _number(_need(driver, "scale", "driver"), "driver.scale")
    if not (0.0 < beta < 2.0):
        raise ConfigError(f"driver.beta: must lie in (0, 2), got {beta}")
    if not (scale > 0.0):
        raise ConfigError(f"driver.scale: must be positive, got {scale}")

    kernels_raw = _need(data, "kernels", "config")
    if not isinstance(kernels_raw, list) or not kernels_raw:
        raise ConfigError("kernels: expected a non-empty array")
    kernels = tuple(_parse_kernel(k, i) for i, k in enumerate(kernels_raw))

    fn = _need(data, "functional", "config")
    if not isinstance(fn, dict):
        raise ConfigError("functional: expected an object")
    _reject_unknown(fn, ("amps", "freqs", "phases"), "functional")
    amps = _parse_vector(_need(fn, "amps", "functional"), "functional.amps")
    phases = _parse_vector(_need(fn, "phases", "functional"), "functional.phases")
    freqs_raw = _need(fn, "freqs", "functional")
    if not isinstance(freqs_raw, list) or not freqs_raw:
        raise ConfigError("functional.freqs: expected a non-empty array of rows")
    freqs = tuple(_parse_vector(r, f"functional.freqs[{i}]") for i, r in enumerate(freqs_raw))
    if len(freqs) != len(amps) or len(phases) != len(amps):
        raise ConfigError(
            "functional: amps, freqs and phases must share the leading dimension"
        )
    for i, row in enumerate(freqs):
        if len(row) != len(kernels):
            raise ConfigError(
                f"functional.freqs[{i}]: row length {len(row)} != number of kernels {len(kernels)}"
            )

    n_raw = _need(data, "n_list", "config")
    if not isinstance(n_raw, list):
        raise ConfigError("n_list: expected an array of integers")
    n_list = tuple(int(_number(v, f"n_list[{i}]", integer=True)) for i, v in enumerate(n_raw))
    if len(n_list) < 2:
        raise ConfigError("n_list: need at least 2 entries")
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ConfigError("n_list: must be strictly increasing")
    if n_list[0] < 1:
        raise ConfigError("n_list: entries must be >= 1")

    replications = int(_number(_need(data, "replications", "config"), "replications", integer=True))
    if replications < 100:
        raise ConfigError(f"replications: must be >= 100, got {replications}")
    master_seed = int(_number(_need(data, "master_seed", "config"), "master_seed", integer=True))
    if not (0 <= master_seed < 2**64):
        raise ConfigError("master_seed: must fit in an unsigned 64-bit integer")

    grid_tol = _number(_need(data, "grid_tol", "config", 1e-2), "grid_tol")
    if not (grid_tol > 0.0):
        raise ConfigError(f"grid_tol: must be positive, got {grid_tol}")
    tail_frac = _number(_need(data, "tail_frac", "config", 0.01), "tail_frac")
    if not (0.0 < tail_frac < 1.0):
        raise ConfigError(f"tail_frac: must lie in (0, 1), got {tail_frac}")
    out_dir = _need(data, "out_dir", "config", "reports")
    if not isinstance(out_dir, str) or not out_dir:
        raise ConfigError("out_dir: expected a non-empty string")
    threads = int(_number(_need(data, "threads", "config", 1), "threads", integer=True))
    if threads < 1:
        raise ConfigError(f"threads: must be >= 1, got {threads}")

    cfg = ExperimentConfig(
        beta=beta,
        scale=scale,
        kernels=kernels,
        amps=amps,
        freqs=freqs,
        phases=phases,
        n_list=n_list,
        replications=replications,
        master_seed=master_seed,
        grid_tol=grid_tol,
        tail_frac=tail_frac,
        out_dir=out_dir,
        threads=threads,
    )
    # Constructing the domain objects validates cross-field constraints
    # (kernel parameter domains, functional shape) at load time.
    try:
        cfg.bank()
        cfg.functional()
    except ValueError as exc:
        raise ConfigError(f"config: {exc}") from exc
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return parse_config(data)


def save_config(config: ExperimentConfig, path) -> None:
    with open(path, "w") as fh:
        json.dump(config.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
