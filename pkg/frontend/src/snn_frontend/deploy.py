"""Export companion to the module graph.

`gen_config` turns a definition into the toolkit's export parameters;
`export` writes the tensor interchange files and invokes the toolkit CLI,
so the produced `.snna` file is byte-identical to an export of the same
parameters done inside the toolkit itself.
"""

from __future__ import annotations

import os
import tempfile

import numpy as np

from ._io import default_command, run_cli, write_wts
from .snn import LIF, Linear, Sequential


def _stages(network) -> tuple[Linear, LIF]:
    modules = list(network) if isinstance(network, Sequential) else [network]
    if len(modules) != 2 or not isinstance(modules[0], Linear) or not isinstance(
        modules[1], LIF
    ):
        raise ValueError(
            "deployable networks are one Linear stage followed by one LIF stage"
        )
    return modules[0], modules[1]


def gen_config(
    network, num_classes: int = 10, time_window: int = 64,
    clock_hz: int = 80_000_000,
) -> dict:
    """Export parameter map for `network` (validates the definition)."""
    linear, lif = _stages(network)
    if linear.out_features % num_classes:
        raise ValueError(
            f"{linear.out_features} outputs do not split into {num_classes} classes"
        )
    thr = lif.threshold
    if thr.shape == (1,):
        thr = np.full(linear.out_features, thr[0], dtype=np.float32)
    return {
        "in_features": linear.in_features,
        "out_features": linear.out_features,
        "weight": linear.weight,
        "threshold": thr,
        "leak_num": lif.leak[0],
        "leak_den": lif.leak[1],
        "num_classes": num_classes,
        "time_window": time_window,
        "clock_hz": clock_hz,
    }


def export(
    network,
    out_path,
    num_classes: int = 10,
    time_window: int = 64,
    clock_hz: int = 80_000_000,
    command=None,
) -> str:
    """Write the deployment artifact for `network` to `out_path`."""
    cfg = gen_config(network, num_classes, time_window, clock_hz)
    command = command or default_command()
    with tempfile.TemporaryDirectory(prefix="snnfe-") as tmp:
        w_path = os.path.join(tmp, "weights.wts")
        t_path = os.path.join(tmp, "thresholds.wts")
        write_wts(w_path, cfg["weight"])
        write_wts(t_path, cfg["threshold"].reshape(-1, 1))
        run_cli(
            [
                "export",
                "--weights", w_path,
                "--thresholds", t_path,
                "--out", out_path,
                "--num-classes", cfg["num_classes"],
                "--time-window", cfg["time_window"],
                "--leak-num", cfg["leak_num"],
                "--leak-den", cfg["leak_den"],
                "--clock-hz", cfg["clock_hz"],
            ],
            command,
        )
    return str(out_path)
