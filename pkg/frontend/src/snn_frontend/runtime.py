"""Runtime invocation: module-style forward() over a deployed artifact.

`SNNAccelerator` wraps an artifact path and dispatches every batch to the
toolkit CLI, keeping one implementation of the execution semantics. Labels
come back exactly as the CLI's `run` subcommand reports them.
"""

from __future__ import annotations

import os
import tempfile

import numpy as np

from ._io import default_command, read_prediction_labels, run_cli, write_idx_images
from .snn import SNN


class SNNAccelerator(SNN):
    def __init__(self, artifact_path, backend: str = "accel", command=None, jobs: int = 1):
        if not os.path.exists(artifact_path):
            raise FileNotFoundError(f"artifact not found: {artifact_path}")
        self.artifact_path = str(artifact_path)
        self.backend = backend
        self.command = list(command or default_command())
        self.jobs = jobs

    def forward(self, images) -> np.ndarray:
        """Classify a batch of (N, 784) intensity images; returns N labels."""
        batch = np.asarray(images, dtype=np.uint8).reshape(-1, 784)
        if len(batch) == 0:
            return np.empty(0, dtype=np.int64)
        with tempfile.TemporaryDirectory(prefix="snnfe-") as tmp:
            img_path = os.path.join(tmp, "batch-images-idx3-ubyte")
            out_path = os.path.join(tmp, "predictions.csv")
            write_idx_images(img_path, batch)
            run_cli(
                [
                    "run",
                    "--artifact", self.artifact_path,
                    "--images", img_path,
                    "--backend", self.backend,
                    "--jobs", self.jobs,
                    "--out", out_path,
                ],
                self.command,
            )
            return read_prediction_labels(out_path)
