"""The multi-head network: a three-layer fully-connected feature generator
feeding two independently initialized linear classifier heads, or a single
head viewed twice through independent dropout masks.
"""

import json
from dataclasses import dataclass

import numpy as np

from . import diffcore as dc
from .errors import ConfigError, DimensionError, ParameterError

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class Architecture:
    in_dim: int = 2
    hidden: int = 64
    num_classes: int = 3
    mode: str = "twin"          # "twin" | "dropout"
    dropout_rate: float = 0.5


@dataclass
class ProbPair:
    """Two row-stochastic views of the same inputs, with live graph handles."""

    p1: dc.Node
    p2: dc.Node


def _init_linear(rng, fan_in, fan_out, prefix):
    bound = 1.0 / np.sqrt(fan_in)
    w = dc.parameter(rng.uniform(-bound, bound, size=(fan_in, fan_out)), f"{prefix}.w")
    b = dc.parameter(rng.uniform(-bound, bound, size=(1, fan_out)), f"{prefix}.b")
    return w, b


class TwinModel:
    """Generator G plus classifier heads; parameter groups partition exactly."""

    def __init__(self, arch, seed):
        if min(arch.in_dim, arch.hidden, arch.num_classes) < 1:
            raise ConfigError("layer widths must be positive")
        if arch.mode not in ("twin", "dropout"):
            raise ConfigError(f"unknown model mode {arch.mode!r}")
        if not 0.0 <= arch.dropout_rate < 1.0:
            raise ParameterError("dropout_rate must be in [0, 1)")
        self.arch = arch
        gen_seed, h1_seed, h2_seed = np.random.SeedSequence(seed).spawn(3)
        rng = np.random.default_rng(gen_seed)
        self._gen = [
            _init_linear(rng, arch.in_dim, arch.hidden, "g.l1"),
            _init_linear(rng, arch.hidden, arch.hidden, "g.l2"),
            _init_linear(rng, arch.hidden, arch.hidden, "g.l3"),
        ]
        self._head1 = _init_linear(np.random.default_rng(h1_seed),
                                   arch.hidden, arch.num_classes, "f1")
        self._head2 = None
        if arch.mode == "twin":
            self._head2 = _init_linear(np.random.default_rng(h2_seed),
                                       arch.hidden, arch.num_classes, "f2")

    @property
    def generator_params(self):
        return dc.ParamSet([(n.name, n) for w, b in self._gen for n in (w, b)])

    @property
    def classifier_params(self):
        heads = [self._head1] + ([self._head2] if self._head2 else [])
        return dc.ParamSet([(n.name, n) for w, b in heads for n in (w, b)])

    @property
    def params(self):
        return self.generator_params | self.classifier_params

    def features(self, x):
        """Generator forward; x is an N x in_dim Node."""
        if x.shape[1] != self.arch.in_dim:
            raise DimensionError(f"expected {self.arch.in_dim} input columns, got {x.shape[1]}")
        h = x
        for w, b in self._gen:
            h = dc.relu(dc.add(dc.matmul(h, w), b))
        return h

    def _head_probs(self, h, head):
        w, b = head
        return dc.rowwise_softmax(dc.add(dc.matmul(h, w), b))

    def forward_twin(self, x):
        if self.arch.mode != "twin":
            raise ConfigError("forward_twin requires twin mode")
        h = self.features(dc.constant(x) if isinstance(x, np.ndarray) else x)
        return ProbPair(self._head_probs(h, self._head1),
                        self._head_probs(h, self._head2))

    def forward_dropout(self, x, seed):
        """Two stochastic views through the single head, inverted scaling."""
        if self.arch.mode != "dropout":
            raise ConfigError("forward_dropout requires dropout mode")
        h = self.features(dc.constant(x) if isinstance(x, np.ndarray) else x)
        rng = np.random.default_rng(seed) if isinstance(seed, (int, np.integer)) else seed
        rate = self.arch.dropout_rate
        views = []
        for _ in range(2):
            if rate == 0.0:
                masked = h
            else:
                mask = (rng.random(h.shape) >= rate) / (1.0 - rate)
                masked = dc.mul(h, dc.constant(mask))
            views.append(self._head_probs(masked, self._head1))
        return ProbPair(*views)

    def forward(self, x, seed=0):
        """Mode-dispatching forward; dropout mode draws masks from seed."""
        if self.arch.mode == "twin":
            return self.forward_twin(x)
        return self.forward_dropout(x, seed)

    # -- checkpointing -----------------------------------------------------

    def save(self, path):
        payload = {
            "version": CHECKPOINT_VERSION,
            "arch": {
                "in_dim": self.arch.in_dim,
                "hidden": self.arch.hidden,
                "num_classes": self.arch.num_classes,
                "mode": self.arch.mode,
                "dropout_rate": self.arch.dropout_rate,
            },
            "params": {name: {"shape": list(node.value.shape),
                              "data": [v.hex() for v in node.value.ravel()]}
                       for name, node in self.params.items()},
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, sort_keys=True)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            payload = json.load(fh)
        if payload.get("version") != CHECKPOINT_VERSION:
            raise ConfigError(f"unsupported checkpoint version {payload.get('version')}")
        arch = Architecture(**payload["arch"])
        model = cls(arch, seed=0)
        params = model.params
        for name, entry in payload["params"].items():
            if name not in params:
                raise ConfigError(f"checkpoint parameter {name!r} not in model")
            arr = np.array([float.fromhex(v) for v in entry["data"]])
            params[name].value[...] = arr.reshape(entry["shape"])
        return model
