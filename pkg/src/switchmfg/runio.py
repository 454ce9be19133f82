"""Persistence: CSV trajectories (17 significant digits, lossless
round-trip), JSON reports, and run manifests."""

import json
import time
from dataclasses import dataclass

import numpy as np

TOOL_VERSION = "0.1.0"


def write_csv(path, names, columns):
    """Plain CSV with a mandatory header; floats carry 17 significant
    digits so re-ingestion reproduces them bitwise."""
    cols = [np.asarray(c) for c in columns]
    if len(names) != len(cols):
        raise ValueError("one name per column")
    n = cols[0].shape[0]
    if any(c.shape != (n,) for c in cols):
        raise ValueError("columns must be 1-d of equal length")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(names) + "\n")
        for i in range(n):
            fh.write(",".join(_fmt(c[i]) for c in cols) + "\n")


def _fmt(x):
    if isinstance(x, (np.integer, int)):
        return str(int(x))
    return format(float(x), ".17g")


def read_csv(path):
    """Inverse of write_csv: returns (names, dict of float columns)."""
    with open(path, "r", encoding="utf-8") as fh:
        names = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    return names, {name: data[:, i] for i, name in enumerate(names)}


def trajectory_csv(path, grid, arrays, stride=1):
    """Write named trajectories against the time column `t`."""
    names = ["t"]
    cols = [grid.nodes[::stride]]
    for name, arr in arrays:
        arr = np.asarray(arr)
        if arr.ndim == 1:
            names.append(name)
            cols.append(arr[::stride])
        elif arr.ndim == 2:
            for k in range(arr.shape[1]):
                names.append(f"{name}_{k + 1}")
                cols.append(arr[::stride, k])
        elif arr.ndim == 3:
            for k in range(arr.shape[1]):
                for j in range(arr.shape[2]):
                    if k == j:
                        continue
                    names.append(f"{name}_{k + 1}_{j + 1}")
                    cols.append(arr[::stride, k, j])
        else:
            raise ValueError("trajectories are at most matrix valued")
    write_csv(path, names, cols)


def write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


@dataclass
class RunManifest:
    command: str
    config_sha256: str
    version: str
    seed: int
    outputs: list
    wall_clock_sec: float

    def write(self, path):
        write_json(path, {
            "command": self.command,
            "config_sha256": self.config_sha256,
            "version": self.version,
            "seed": self.seed,
            "outputs": sorted(self.outputs),
            "wall_clock_sec": self.wall_clock_sec,
        })


class ManifestTimer:
    """Collects output paths and wall-clock for a command run."""

    def __init__(self, command, config_sha256, seed):
        self.manifest = RunManifest(command=command, config_sha256=config_sha256,
                                    version=TOOL_VERSION, seed=seed,
                                    outputs=[], wall_clock_sec=0.0)
        self._t0 = time.perf_counter()

    def add(self, path):
        self.manifest.outputs.append(str(path))
        return path

    def finish(self, manifest_path):
        self.manifest.wall_clock_sec = time.perf_counter() - self._t0
        self.manifest.outputs.append(str(manifest_path))
        self.manifest.write(manifest_path)
