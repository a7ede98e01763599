"""File formats: trace CSV, one-port text traces, reports, run manifests."""

import hashlib
import json
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .saw import FrequencyTrace

TRACE_HEADER = "frequency_hz,re_s11,im_s11"


def write_trace_csv(path, trace: FrequencyTrace):
    lines = [TRACE_HEADER]
    for f, v in zip(trace.frequencies, trace.values):
        lines.append(f"{f:.12e},{v.real:.12e},{v.imag:.12e}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_trace_csv(path) -> FrequencyTrace:
    raw = Path(path).read_text().strip().splitlines()
    if not raw or raw[0].strip() != TRACE_HEADER:
        raise ValueError(f"{path}: expected header '{TRACE_HEADER}'")
    rows = [line.split(",") for line in raw[1:] if line.strip()]
    f = np.array([float(r[0]) for r in rows])
    v = np.array([float(r[1]) + 1j * float(r[2]) for r in rows])
    return FrequencyTrace(frequencies=f, values=v)


def write_trace_oneport(path, trace: FrequencyTrace, z0: float):
    """Whitespace-separated one-port trace with the reference impedance on
    a leading comment line."""
    lines = [f"# Z0={z0:g}"]
    for f, v in zip(trace.frequencies, trace.values):
        lines.append(f"{f:.12e} {v.real:.12e} {v.imag:.12e}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_trace_oneport(path):
    raw = Path(path).read_text().strip().splitlines()
    if not raw or not raw[0].startswith("# Z0="):
        raise ValueError(f"{path}: missing '# Z0=' comment line")
    z0 = float(raw[0].split("=", 1)[1])
    rows = [line.split() for line in raw[1:] if line.strip() and not line.startswith("#")]
    f = np.array([float(r[0]) for r in rows])
    v = np.array([float(r[1]) + 1j * float(r[2]) for r in rows])
    return FrequencyTrace(frequencies=f, values=v), z0


def write_columns_csv(path, header, columns):
    """Write equal-length columns under a comma-separated header line."""
    names = header.split(",")
    cols = [np.asarray(c) for c in columns]
    if len(cols) != len(names) or len({c.size for c in cols}) > 1:
        raise ValueError("header and column shapes disagree")
    lines = [header]
    for row in zip(*cols):
        lines.append(",".join(f"{float(v):.12e}" for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_columns_csv(path):
    raw = Path(path).read_text().strip().splitlines()
    names = raw[0].split(",")
    data = np.array([[float(x) for x in line.split(",")] for line in raw[1:] if line.strip()])
    return names, data


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def config_sha256(config_dict) -> str:
    canon = json.dumps(config_dict, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


MANIFEST_NAME = "manifest.json"


def write_manifest(out_dir, command, args, config_dict, seed, tolerances=None,
                   tool_version=None):
    """Inventory every data file in out_dir with hashes, plus enough
    context (config snapshot, seed, command) to rerun it exactly."""
    from . import __version__

    out_dir = Path(out_dir)
    files = []
    for f in sorted(out_dir.iterdir()):
        if f.name == MANIFEST_NAME or not f.is_file():
            continue
        files.append({"name": f.name, "sha256": file_sha256(f), "bytes": f.stat().st_size})
    manifest = {
        "tool_version": tool_version or __version__,
        "command": command,
        "args": args,
        "seed": seed,
        "config": config_dict,
        "config_sha256": config_sha256(config_dict),
        "tolerances": tolerances or {},
        "created_at": datetime.now(timezone.utc).isoformat(),
        "files": files,
    }
    path = out_dir / MANIFEST_NAME
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def read_manifest(out_dir):
    return json.loads((Path(out_dir) / MANIFEST_NAME).read_text())


def verify_manifest(out_dir):
    """Check every listed file hash; return a list of mismatch messages."""
    out_dir = Path(out_dir)
    manifest = read_manifest(out_dir)
    problems = []
    listed = {f["name"] for f in manifest["files"]}
    for entry in manifest["files"]:
        p = out_dir / entry["name"]
        if not p.exists():
            problems.append(f"missing file {entry['name']}")
        elif file_sha256(p) != entry["sha256"]:
            problems.append(f"hash mismatch for {entry['name']}")
    for f in out_dir.iterdir():
        if f.is_file() and f.name != MANIFEST_NAME and f.name not in listed:
            problems.append(f"unlisted file {f.name}")
    return problems
