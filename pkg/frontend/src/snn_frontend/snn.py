"""Module-style network definition: SNN, Sequential, Linear, LIF.

These classes only *describe* a network. No numeric simulation happens in
this package: export hands the definition to the deployment toolchain, and
inference goes through `SNNAccelerator`, so there is exactly one
implementation of the runtime semantics.
"""

from __future__ import annotations

import numpy as np


class SNN:
    """Base module. Subclasses describe structure; they do not compute."""

    def forward(self, *args, **kwargs):
        raise NotImplementedError(
            "definition-only module: run inference through SNNAccelerator"
        )

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


class Linear(SNN):
    """Fully connected stage with an (out_features, in_features) weight
    matrix in training-domain units. Weights are stored as float32, the
    precision of the exported tensor file."""

    def __init__(self, in_features: int, out_features: int, weight=None):
        if in_features < 1 or out_features < 1:
            raise ValueError("feature counts must be positive")
        self.in_features = in_features
        self.out_features = out_features
        if weight is None:
            weight = np.zeros((out_features, in_features), dtype=np.float32)
        self.weight = weight

    @property
    def weight(self) -> np.ndarray:
        return self._weight

    @weight.setter
    def weight(self, value):
        w = np.asarray(value, dtype=np.float32)
        if w.shape != (self.out_features, self.in_features):
            raise ValueError(
                f"weight shape {w.shape} != ({self.out_features}, {self.in_features})"
            )
        self._weight = w


class LIF(SNN):
    """Fire-once integrate-and-fire activation stage.

    `threshold` is a positive scalar or per-neuron vector; `leak` is the
    (numerator, denominator) of the per-step retention ratio.
    """

    def __init__(self, threshold=1.0, leak=(1, 1)):
        thr = np.atleast_1d(np.asarray(threshold, dtype=np.float32))
        if np.any(thr <= 0):
            raise ValueError("thresholds must be positive")
        num, den = int(leak[0]), int(leak[1])
        if den <= 0 or num < 0 or num > den:
            raise ValueError("leak ratio must lie in [0, 1]")
        self.threshold = thr
        self.leak = (num, den)


class Sequential(SNN):
    """Ordered container; validates the stage chain at construction."""

    def __init__(self, *modules: SNN):
        if not modules:
            raise ValueError("empty network")
        self.modules = list(modules)
        width = None
        for m in self.modules:
            if isinstance(m, Linear):
                if width is not None and m.in_features != width:
                    raise ValueError(
                        f"linear stage expects {m.in_features} inputs, got {width}"
                    )
                width = m.out_features
            elif isinstance(m, LIF):
                if width is None:
                    raise ValueError("spiking stage cannot be first")
                if m.threshold.shape not in ((1,), (width,)):
                    raise ValueError(
                        f"threshold vector length {m.threshold.shape[0]} != {width}"
                    )
            else:
                raise ValueError(f"unsupported module {type(m).__name__}")

    def __iter__(self):
        return iter(self.modules)

    def __len__(self):
        return len(self.modules)
