"""Constants and run manifests: versioned JSON records of calibrated numbers
and of everything needed to reproduce a run bit for bit."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field
from importlib import resources

CONSTANTS_SCHEMA = "bubbleflow.constants/1"
RUN_SCHEMA = "bubbleflow.run/1"
CONSTANTS_ENV = "BUBBLEFLOW_CONSTANTS"


@dataclass
class ConstantsManifest:
    """Calibrated spectral/modulation constants for one dimension.

    kappa2 is the computed negative-eigenvalue magnitude; c0 the coercivity
    constant (observed minimum ratio over the calibration corpus, halved);
    eta the scale-ratio smallness gate for the multi-bubble estimates; the
    modulation block carries the calibrated comparability constants.  All
    are computed artifacts, never asserted literature values.
    """

    dimension: int
    grid: dict
    kappa2: float
    c0: float
    eta: float
    z_profile: dict
    modulation: dict = field(default_factory=dict)
    provenance: str = "scripts/calibrate_constants.py"
    schema: str = CONSTANTS_SCHEMA

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "ConstantsManifest":
        d = dict(d)
        d.pop("schema", None)
        return cls(schema=CONSTANTS_SCHEMA, **d)


def save_constants(manifest: ConstantsManifest, path) -> None:
    with open(path, "w") as fh:
        fh.write(manifest.to_json() + "\n")


def load_constants(dimension: int, path: str | None = None) -> ConstantsManifest:
    """Constants for a dimension: explicit path, else $BUBBLEFLOW_CONSTANTS
    (file or directory), else the packaged defaults."""
    candidates = []
    if path is not None:
        candidates.append(path)
    env = os.environ.get(CONSTANTS_ENV)
    if env:
        if os.path.isdir(env):
            candidates.append(os.path.join(env, f"D{dimension}.json"))
        else:
            candidates.append(env)
    for cand in candidates:
        with open(cand) as fh:
            data = json.load(fh)
        if data["dimension"] != dimension:
            raise ValueError(
                f"constants manifest {cand} is for D={data['dimension']}, not D={dimension}"
            )
        return ConstantsManifest.from_dict(data)
    ref = resources.files("bubbleflow") / "constants" / f"D{dimension}.json"
    with ref.open() as fh:
        return ConstantsManifest.from_dict(json.load(fh))


@dataclass
class RunManifest:
    """Reproducibility record for one simulation run.

    config_hash is a sha256 over the canonical JSON of every input that
    determines the outputs; two runs with equal hashes must produce
    byte-identical CSVs.
    """

    tool_version: str
    dimension: int
    grid: dict
    solver: dict
    initial: dict
    constants_ref: str
    outputs: dict
    config_hash: str = ""
    wall_clock_s: float | None = None
    termination: str = ""
    schema: str = RUN_SCHEMA

    def compute_hash(self) -> str:
        payload = {
            "tool_version": self.tool_version,
            "dimension": self.dimension,
            "grid": self.grid,
            "solver": self.solver,
            "initial": self.initial,
            "constants_ref": self.constants_ref,
        }
        blob = json.dumps(payload, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    def finalize(self) -> "RunManifest":
        self.config_hash = self.compute_hash()
        return self

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def save_run_manifest(manifest: RunManifest, path) -> None:
    with open(path, "w") as fh:
        fh.write(manifest.to_json() + "\n")
