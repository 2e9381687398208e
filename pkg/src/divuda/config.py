"""Flat key-value experiment configuration.

Grammar: one ``key = value`` per line, ``#`` starts a comment. Scenario keys
(classes.common, classes.source_private, classes.target_private, noise.kind,
noise.rate, blobs.centers, blobs.std, samples_per_class, seed) describe the
data; hyper.* keys set training hyperparameters; sweep.* keys enumerate
values for one recognized axis each. See README for the full key list.
"""

import itertools
import os
from dataclasses import dataclass, field, replace

from .divergence import VARIANT_MODES
from .errors import ConfigError, ParameterError, ParseError
from .harness import config_hash
from .synthdata import NoiseSpec, ScenarioSpec, toy_scenario
from .trainer import Hyperparams

HYPER_KEYS = {
    "hyper.lambda": ("lam", float),
    "hyper.alpha": ("alpha", float),
    "hyper.delta": ("delta", float),
    "hyper.margin": ("margin", float),
    "hyper.n_repeat": ("n_repeat", int),
    "hyper.batch_size": ("batch_size", int),
    "hyper.lr": ("lr", float),
    "hyper.momentum": ("momentum", float),
    "hyper.weight_decay": ("weight_decay", float),
    "hyper.iterations": ("iterations", int),
    "hyper.hidden": ("hidden", int),
    "hyper.dropout_rate": ("dropout_rate", float),
}

SWEEP_AXES = {"noise.rate", "noise.kind", "hyper.alpha", "hyper.lambda",
              "hyper.delta", "hyper.margin", "hyper.n_repeat",
              "classes.target_private_size"}


def parse_kv(text):
    """Parse the flat key = value grammar into an ordered dict of strings."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"expected 'key = value', got {line!r}", line=lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ParseError("empty key", line=lineno)
        if key in out:
            raise ParseError(f"duplicate key {key!r}", line=lineno)
        out[key] = value
    return out


def _int_list(value):
    return tuple(int(v) for v in value.split(",") if v.strip() != "")


def _parse_centers(value):
    """``id:x y;id:x y;...`` -> {id: (x, y, ...)}"""
    centers = {}
    for part in value.split(";"):
        part = part.strip()
        if not part:
            continue
        cid, coords = part.split(":", 1)
        centers[int(cid)] = tuple(float(v) for v in coords.split())
    return centers


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: ScenarioSpec
    hyper: Hyperparams
    variant: str = "full"
    model_mode: str = "twin"
    seeds: tuple = (0,)
    out_dir: str = "runs"
    eval_every: int = 500
    density_bins: int = 50
    grid_resolution: int = 0
    grid_bounds: tuple = None
    sweeps: tuple = ()              # ((axis, (values...)), ...)
    content_hash: str = ""
    raw: dict = field(default_factory=dict)

    def _apply_axis(self, scenario, hyper, axis, value):
        if axis == "noise.rate":
            return replace(scenario, noise=NoiseSpec(scenario.noise.kind, float(value))), hyper
        if axis == "noise.kind":
            return replace(scenario, noise=NoiseSpec(value, scenario.noise.rate)), hyper
        if axis == "classes.target_private_size":
            k = int(value)
            pool = self.raw.get("classes.target_private_pool")
            pool = _int_list(pool) if pool else scenario.target_private
            if k > len(pool):
                raise ConfigError(f"target_private_size {k} exceeds pool size {len(pool)}")
            return replace(scenario, target_private=pool[:k]), hyper
        name, cast = HYPER_KEYS[axis]
        return scenario, replace(hyper, **{name: cast(value)})

    def sweep_points(self):
        """Yield (label, scenario, hyper) per cartesian sweep combination."""
        if not self.sweeps:
            yield "base", self.scenario, self.hyper
            return
        axes = [axis for axis, _ in self.sweeps]
        for combo in itertools.product(*(values for _, values in self.sweeps)):
            scenario, hyper = self.scenario, self.hyper
            for axis, value in zip(axes, combo):
                scenario, hyper = self._apply_axis(scenario, hyper, axis, value)
            label = "_".join(f"{a.replace('.', '-')}={v}" for a, v in zip(axes, combo))
            yield label, scenario, hyper


def build_config(text):
    """Turn config text into an ExperimentConfig; unknown keys are errors."""
    kv = parse_kv(text)
    known = set(HYPER_KEYS) | {
        "classes.common", "classes.source_private", "classes.target_private",
        "classes.target_private_pool", "noise.kind", "noise.rate",
        "blobs.centers", "blobs.std", "samples_per_class", "seed",
        "variant", "model.mode", "seeds", "out", "eval.every",
        "density.bins", "grid.resolution", "grid.bounds",
    }
    for key in kv:
        if key in known:
            continue
        if key.startswith("sweep."):
            axis = key[len("sweep."):]
            if axis not in SWEEP_AXES:
                raise ConfigError(f"unrecognized sweep axis {axis!r}")
            continue
        raise ConfigError(f"unrecognized config key {key!r}")

    try:
        base = toy_scenario()
        scenario = ScenarioSpec(
            common=_int_list(kv["classes.common"]) if "classes.common" in kv else base.common,
            source_private=_int_list(kv["classes.source_private"])
            if "classes.source_private" in kv else base.source_private,
            target_private=_int_list(kv["classes.target_private"])
            if "classes.target_private" in kv else base.target_private,
            blob_centers=_parse_centers(kv["blobs.centers"])
            if "blobs.centers" in kv else base.blob_centers,
            blob_std=float(kv.get("blobs.std", base.blob_std)),
            samples_per_class=int(kv.get("samples_per_class", base.samples_per_class)),
            feature_dim=len(next(iter(_parse_centers(kv["blobs.centers"]).values())))
            if "blobs.centers" in kv else base.feature_dim,
            noise=NoiseSpec(kv.get("noise.kind", base.noise.kind),
                            float(kv.get("noise.rate", base.noise.rate))),
            seed=int(kv.get("seed", 0)),
        )
        scenario.validate()
        hyper_kwargs = {}
        for key, (name, cast) in HYPER_KEYS.items():
            if key in kv:
                hyper_kwargs[name] = cast(kv[key])
        hyper = Hyperparams(**hyper_kwargs)
        variant = kv.get("variant", "full")
        if variant not in VARIANT_MODES:
            raise ConfigError(f"unknown variant {variant!r}")
        model_mode = kv.get("model.mode", "twin")
        if model_mode not in ("twin", "dropout"):
            raise ConfigError(f"unknown model.mode {model_mode!r}")
        seeds = _int_list(kv.get("seeds", kv.get("seed", "0")))
        out_dir = os.environ.get("DIVUDA_OUT") or kv.get("out", "runs")
        grid_bounds = None
        if "grid.bounds" in kv and kv["grid.bounds"] != "auto":
            grid_bounds = tuple(float(v) for v in kv["grid.bounds"].split())
            if len(grid_bounds) != 4:
                raise ConfigError("grid.bounds needs four numbers: x0 x1 y0 y1")
        sweeps = tuple(
            (key[len("sweep."):], tuple(v.strip() for v in value.split(",")))
            for key, value in kv.items() if key.startswith("sweep."))
        return ExperimentConfig(
            scenario=scenario, hyper=hyper, variant=variant, model_mode=model_mode,
            seeds=seeds, out_dir=out_dir, eval_every=int(kv.get("eval.every", 500)),
            density_bins=int(kv.get("density.bins", 50)),
            grid_resolution=int(kv.get("grid.resolution", 0)),
            grid_bounds=grid_bounds, sweeps=sweeps,
            content_hash=config_hash(text), raw=kv,
        )
    except ConfigError:
        raise
    except (KeyError, ValueError, TypeError, ParameterError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc


def load_config(path):
    with open(path) as fh:
        return build_config(fh.read())
