"""Run artifacts: time-history CSV schemas, campaign summaries, and the
reproducibility manifest. All floats are written with shortest round-trip
representation so identical runs produce byte-identical files."""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

TRAJECTORY_HEADER = ["epoch_s", "p_km", "l", "m", "n", "s", "q_rad", "mass_ratio",
                     "ar", "atheta", "ah"]
PSI_HEADER = ["epoch_s", "psi1_du", "psi2", "psi3", "lyapunov"]
ATTITUDE_HEADER = ["epoch_s", "q0", "q1", "q2", "q3", "wx", "wy", "wz", "qe0",
                   "Tcx", "Tcy", "Tcz"]
WHEEL_HEADER = ["epoch_s", "ws1", "ws2", "ws3", "ws4",
                "dws1", "dws2", "dws3", "dws4"]
ANGLES_HEADER = ["epoch_s", "alpha_rad", "beta_rad"]
SYNODIC_HEADER = ["epoch_s", "x_km", "y_km", "z_km"]
ELEMENTS_HEADER = ["epoch_s", "p_km", "e", "i_deg", "a_km"]
TORQUE_HEADER = ["epoch_s", "Tcx", "Tcy", "Tcz", "Tax", "Tay", "Taz"]
QE0_HEADER = ["epoch_s", "qe0"]


def _fmt(x) -> str:
    return repr(float(x))


def write_csv(path, header: list[str], rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return path


def read_csv(path, expected_header: list[str] | None = None):
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty file")
        if expected_header is not None and header != expected_header:
            missing = set(expected_header) - set(header)
            raise ValueError(f"{path}: header mismatch (missing {sorted(missing)})")
        data = np.array([[float(c) for c in row] for row in reader if row])
    if data.size == 0:
        raise ValueError(f"{path}: no data rows")
    return header, data


def sha256_of(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class ResultManifest:
    """What produced the outputs and their checksums; regeneration under the
    same manifest inputs is byte-identical."""

    config_hash: str
    code_version: str
    seeds: dict = field(default_factory=dict)
    files: dict = field(default_factory=dict)   # relative path -> sha256

    def add(self, path, base_dir) -> None:
        rel = str(Path(path).relative_to(base_dir))
        self.files[rel] = sha256_of(path)

    def write(self, path) -> Path:
        path = Path(path)
        payload = dict(config_hash=self.config_hash, code_version=self.code_version,
                       seeds=self.seeds, files=dict(sorted(self.files.items())))
        path.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")
        return path

    @staticmethod
    def load(path) -> "ResultManifest":
        payload = json.loads(Path(path).read_text())
        return ResultManifest(config_hash=payload["config_hash"],
                              code_version=payload["code_version"],
                              seeds=payload["seeds"], files=payload["files"])
