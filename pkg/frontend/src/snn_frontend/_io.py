"""Wire formats and CLI plumbing shared by export and runtime dispatch.

The frontend talks to the deployment toolkit exclusively through its
external surfaces: the `snnaccel` command line, WTS1 tensor files, IDX
image files, and prediction CSVs.
"""

from __future__ import annotations

import json
import os
import shutil
import struct
import subprocess
import sys

import numpy as np

CLI_ENV = "SNNACCEL_CLI"


def default_command() -> list[str]:
    """Locate the toolkit CLI: explicit env override, PATH, then module."""
    override = os.environ.get(CLI_ENV)
    if override:
        return override.split()
    exe = shutil.which("snnaccel")
    if exe:
        return [exe]
    return [sys.executable, "-m", "snnaccel.cli"]


class CliError(RuntimeError):
    """The toolkit CLI exited nonzero; carries its machine-readable error."""

    def __init__(self, argv, returncode, stderr):
        self.kind = None
        message = stderr.strip()
        for line in reversed(message.splitlines() or [""]):
            try:
                payload = json.loads(line)
                self.kind = payload.get("error")
                message = payload.get("message", message)
                break
            except (json.JSONDecodeError, AttributeError):
                continue
        super().__init__(f"{' '.join(map(str, argv))} failed ({self.kind}): {message}")


def run_cli(args: list, command=None) -> str:
    argv = list(command or default_command()) + [str(a) for a in args]
    proc = subprocess.run(argv, capture_output=True, text=True)
    if proc.returncode != 0:
        raise CliError(argv, proc.returncode, proc.stderr)
    return proc.stdout


def write_wts(path, array) -> None:
    """16-byte header (magic, rows, cols, dtype tag) + little-endian f32."""
    a = np.atleast_2d(np.asarray(array, dtype="<f4"))
    with open(path, "wb") as f:
        f.write(b"WTS1")
        f.write(struct.pack("<III", a.shape[0], a.shape[1], 0))
        f.write(np.ascontiguousarray(a).tobytes())


def write_idx_images(path, images) -> None:
    images = np.asarray(images, dtype=np.uint8).reshape(-1, 28, 28)
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x803, len(images), 28, 28))
        f.write(images.tobytes())


def read_prediction_labels(csv_path) -> np.ndarray:
    with open(csv_path) as f:
        header = f.readline().strip()
        if header != "index,label,no_spike":
            raise ValueError(f"unexpected prediction header {header!r}")
        labels = [int(line.split(",")[1]) for line in f if line.strip()]
    return np.asarray(labels, dtype=np.int64)
