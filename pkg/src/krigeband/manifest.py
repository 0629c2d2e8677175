"""Run manifests: record a command, its inputs and outputs, and verify reruns.

Output digests are computed on a normalized view of each file with timing
fields blanked (``tt``/``mt`` CSV columns; ``tt``, ``mt``, ``timings``,
``elapsed``, ``created`` JSON keys), so a rerun counts as identical exactly
when everything except wall-clock measurements matches bit for bit.
"""

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone

TIMING_COLUMNS = frozenset({"tt", "mt"})
TIMING_KEYS = frozenset({"tt", "mt", "timings", "elapsed", "created"})

__all__ = [
    "RunManifest",
    "file_digest",
    "normalized_digest",
    "write_manifest",
    "load_manifest",
    "compare_outputs",
]


def file_digest(path):
    """Plain sha256 of the file bytes."""
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _strip_json_timings(obj):
    if isinstance(obj, dict):
        return {
            k: _strip_json_timings(v) for k, v in obj.items() if k not in TIMING_KEYS
        }
    if isinstance(obj, list):
        return [_strip_json_timings(v) for v in obj]
    return obj


def _normalized_bytes(path):
    text = None
    if str(path).endswith(".json"):
        with open(path) as fh:
            payload = json.load(fh)
        text = json.dumps(_strip_json_timings(payload), sort_keys=True)
    elif str(path).endswith(".csv"):
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if rows:
            blank = [i for i, name in enumerate(rows[0]) if name in TIMING_COLUMNS]
            for row in rows[1:]:
                for i in blank:
                    if i < len(row):
                        row[i] = ""
        buf = io.StringIO()
        csv.writer(buf).writerows(rows)
        text = buf.getvalue()
    if text is not None:
        return text.encode()
    with open(path, "rb") as fh:
        return fh.read()


def normalized_digest(path):
    """sha256 of the file with timing fields blanked (see module docstring)."""
    return hashlib.sha256(_normalized_bytes(path)).hexdigest()


@dataclass
class RunManifest:
    """What ran, with what settings, reading which inputs, producing which files."""

    command: str
    params: dict
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    created: str = ""

    def to_dict(self):
        return {
            "format": 1,
            "command": self.command,
            "params": self.params,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "created": self.created,
        }


def write_manifest(path, command, params, input_paths, output_paths):
    """Digest inputs/outputs and write the manifest JSON; returns the manifest."""
    manifest = RunManifest(
        command=command,
        params=params,
        inputs={str(p): file_digest(p) for p in input_paths},
        outputs={name: normalized_digest(p) for name, p in sorted(output_paths.items())},
        created=datetime.now(timezone.utc).isoformat(),
    )
    with open(path, "w") as fh:
        json.dump(manifest.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def load_manifest(path):
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("format") != 1:
        raise ValueError(f"unsupported manifest format in {path}")
    return RunManifest(
        command=payload["command"],
        params=payload["params"],
        inputs=payload["inputs"],
        outputs=payload["outputs"],
        created=payload.get("created", ""),
    )


def compare_outputs(manifest, produced):
    """Mismatched output names: recorded normalized digest vs the fresh files."""
    problems = []
    for name, digest in manifest.outputs.items():
        if name not in produced:
            problems.append(f"{name}: missing from rerun")
        elif normalized_digest(produced[name]) != digest:
            problems.append(f"{name}: digest mismatch")
    for name in produced:
        if name not in manifest.outputs:
            problems.append(f"{name}: extra output not in manifest")
    return problems
