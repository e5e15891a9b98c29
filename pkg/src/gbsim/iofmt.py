"""File formats and run manifests shared by the CLI.

Config files are INI-style with sections [experiment], [sampler], [kernel]
and [validate]; unknown sections or keys are rejected so typos fail loudly.
All output files carry a comment header with the manifest digest, so a run
can be traced back to the exact configuration that produced it.
"""

from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .states import ExperimentConfig, GaussianState, state_from_text, state_to_text


class ConfigError(ValueError):
    pass


_EXPERIMENT_KEYS = {
    "modes": int,
    "squeezing": float,
    "transmission": float,
    "sources": int,
    "unitary_file": str,
    "unitary_seed": int,
    "detector": str,
    "n_cut": int,
    "sub_detectors": int,
    "global_cutoff": int,
    "rng_seed": int,
}
_SAMPLER_KEYS = {
    "sampler": str,
    "num_samples": int,
    "chain_length": int,
    "burn_in": int,
    "thin": int,
    "post_select": int,
}
_KERNEL_KEYS = {"method": str, "workers": int, "max_terms": int}
_VALIDATE_KEYS = {"test": str, "bound": float, "num_pairs": int}

_SECTIONS = {
    "experiment": _EXPERIMENT_KEYS,
    "sampler": _SAMPLER_KEYS,
    "kernel": _KERNEL_KEYS,
    "validate": _VALIDATE_KEYS,
}


def parse_config(path):
    """Read the INI config; returns (ExperimentConfig, extras dict)."""
    cp = configparser.ConfigParser()
    read = cp.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    out = {}
    for section in cp.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown config section [{section}]")
        keys = _SECTIONS[section]
        got = {}
        for key, raw in cp.items(section):
            if key not in keys:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            try:
                got[key] = keys[key](raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for {section}.{key}: {raw!r}") from exc
        out[section] = got
    exp = dict(out.get("experiment", {}))
    unitary = None
    if "unitary_file" in exp:
        unitary = load_unitary(exp.pop("unitary_file"), exp.get("modes"))
    if "modes" not in exp:
        raise ConfigError("experiment.modes is required")
    try:
        cfg = ExperimentConfig(unitary=unitary, **exp)
    except Exception as exc:
        raise ConfigError(str(exc)) from exc
    return cfg, out


def load_unitary(path, modes=None):
    """Whitespace-separated re/im pairs, row-major, one matrix row per line."""
    rows = []
    with open(path) as fh:
        for ln in fh:
            ln = ln.strip()
            if not ln or ln.startswith("#"):
                continue
            vals = [float(v) for v in ln.split()]
            if len(vals) % 2:
                raise ConfigError("unitary file rows need re/im pairs")
            rows.append([complex(vals[2 * i], vals[2 * i + 1]) for i in range(len(vals) // 2)])
    U = np.array(rows, dtype=complex)
    if modes is not None and U.shape != (modes, modes):
        raise ConfigError(f"unitary file is {U.shape}, expected {(modes, modes)}")
    return U


def load_matrix(path):
    """Kernel input: first line N, then N rows of re/im pairs."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.strip().startswith("#")]
    n = int(lines[0])
    rows = []
    for ln in lines[1 : 1 + n]:
        vals = [float(v) for v in ln.split()]
        rows.append([complex(vals[2 * i], vals[2 * i + 1]) for i in range(len(vals) // 2)])
    A = np.array(rows, dtype=complex)
    if A.shape != (n, n):
        raise ConfigError(f"matrix file is {A.shape}, expected {(n, n)}")
    return A


def save_matrix(path, A):
    A = np.asarray(A, dtype=complex)
    with open(path, "w") as fh:
        fh.write(f"{A.shape[0]}\n")
        for row in A:
            fh.write(" ".join(f"{v.real:.17g} {v.imag:.17g}" for v in row) + "\n")


@dataclass
class RunManifest:
    """Content hash plus parameters identifying a run."""

    params: dict
    master_seed: int
    version: str = __version__
    timing: dict = field(default_factory=dict)

    @property
    def digest(self):
        blob = json.dumps(
            {"params": self.params, "seed": self.master_seed, "version": self.version},
            sort_keys=True,
            default=str,
        )
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def header_lines(self):
        yield f"# gbsim {self.version} manifest {self.digest}"
        yield f"# seed {self.master_seed}"
        for key in sorted(self.params):
            yield f"# {key} = {self.params[key]}"


def seed_streams(master_seed, labels):
    """Deterministic per-component RNG streams from one master seed.

    Streams are spawned in the (sorted) label order, so adding a new label
    never perturbs the streams of existing ones with earlier names.
    """
    ss = np.random.SeedSequence(master_seed)
    children = ss.spawn(len(labels))
    return {lab: np.random.default_rng(child) for lab, child in zip(sorted(labels), children)}


def write_samples(path, samples, manifest: RunManifest):
    with open(path, "w") as fh:
        for ln in manifest.header_lines():
            fh.write(ln + "\n")
        for s in samples:
            fh.write(" ".join(str(int(v)) for v in np.atleast_1d(s)) + "\n")


def read_samples(path):
    """Returns (samples array, header dict)."""
    header, rows = {}, []
    with open(path) as fh:
        for ln in fh:
            ln = ln.strip()
            if not ln:
                continue
            if ln.startswith("#"):
                if "=" in ln:
                    k, v = ln[1:].split("=", 1)
                    header[k.strip()] = v.strip()
                continue
            rows.append([int(v) for v in ln.split()])
    return np.array(rows, dtype=int), header


def write_csv(path, columns, rows, manifest: RunManifest | None = None):
    with open(path, "w") as fh:
        if manifest is not None:
            for ln in manifest.header_lines():
                fh.write(ln + "\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(str(v) for v in row) + "\n")


def write_state(path, state: GaussianState, manifest: RunManifest | None = None):
    with open(path, "w") as fh:
        if manifest is not None:
            for ln in manifest.header_lines():
                fh.write(ln + "\n")
        fh.write(state_to_text(state))


def read_state(path) -> GaussianState:
    with open(path) as fh:
        return state_from_text(fh.read())
