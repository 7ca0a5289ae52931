"""Manifest and CSV artifacts.

Every output CSV begins with a comment line carrying the manifest hash;
`analyze` refuses inputs whose hashes disagree. Floats are written with
repr (shortest round-trip), so reruns with the same master seed are
byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import os

import numpy as np

from .analysis import EnsembleResult, TestResult
from .errors import ConfigurationError
from .fields import FieldSeries

SERIES_HEADER = ["trajectory_id", "t", "z_plus", "z_minus", "b", "i", "m", "qv"]


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def manifest_dict(config_dict: dict, code_version: str) -> dict:
    return {"schema": 1, "code_version": code_version, "config": config_dict}


def manifest_hash(manifest: dict) -> str:
    canonical = json.dumps(manifest, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def write_manifest(path: str, manifest: dict) -> str:
    digest = manifest_hash(manifest)
    payload = dict(manifest)
    payload["hash"] = digest
    with open(path, "w", newline="\n") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")
    return digest


def read_manifest(path: str) -> tuple[dict, str]:
    with open(path) as fh:
        payload = json.load(fh)
    digest = payload.pop("hash", None)
    if digest != manifest_hash(payload):
        raise ConfigurationError(f"manifest {path} failed its hash check")
    return payload, digest


def write_csv(path: str, header: list[str], rows, digest: str) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(f"# manifest={digest}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def read_csv(path: str) -> tuple[list[str], list[list[str]], str]:
    with open(path) as fh:
        first = fh.readline().strip()
        if not first.startswith("# manifest="):
            raise ConfigurationError(f"{path} lacks the manifest comment line")
        digest = first.split("=", 1)[1]
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    return header, rows, digest


def series_rows(series_list: list[FieldSeries]):
    for s in series_list:
        for j, t in enumerate(s.sample_times):
            yield (s.trajectory_id, t, s.z_plus[j], s.z_minus[j], s.b_plus[j],
                   s.i_plus[j], s.m_plus[j], s.qv_plus[j])


def extra_rows(series_list: list[FieldSeries], columns: list[str]):
    for s in series_list:
        for j, t in enumerate(s.sample_times):
            yield (s.trajectory_id, t, s.z_minus[j], s.b_minus[j], s.i_minus[j],
                   s.m_minus[j], s.qv_minus[j],
                   *(s.extras[c][j] for c in columns))


def write_series(out_dir: str, result: EnsembleResult, digest: str) -> None:
    write_csv(os.path.join(out_dir, "series.csv"), SERIES_HEADER,
              series_rows(result.series), digest)
    extra_cols = sorted(result.series[0].extras.keys()) if result.series else []
    header = ["trajectory_id", "t", "z_minus", "b_minus", "i_minus", "m_minus",
              "qv_minus"] + extra_cols
    write_csv(os.path.join(out_dir, "series_extra.csv"), header,
              extra_rows(result.series, extra_cols), digest)


def read_series(out_dir: str) -> tuple[list[FieldSeries], str]:
    header, rows, digest = read_csv(os.path.join(out_dir, "series.csv"))
    if header != SERIES_HEADER:
        raise ConfigurationError("series.csv header mismatch")
    eheader, erows, edigest = read_csv(os.path.join(out_dir, "series_extra.csv"))
    if edigest != digest:
        raise ConfigurationError("series_extra.csv was produced by a different run")
    extra_cols = eheader[7:]
    by_traj: dict[int, dict] = {}
    for row, erow in zip(rows, erows):
        tid = int(row[0])
        entry = by_traj.setdefault(tid, {"t": [], "cols": [[] for _ in range(6)],
                                         "extra": [[] for _ in extra_cols],
                                         "minus": [[] for _ in range(5)]})
        entry["t"].append(float(row[1]))
        for k in range(6):
            entry["cols"][k].append(float(row[2 + k]))
        for k in range(5):
            entry["minus"][k].append(float(erow[2 + k]))
        for k in range(len(extra_cols)):
            entry["extra"][k].append(float(erow[7 + k]))
    out = []
    for tid in sorted(by_traj):
        e = by_traj[tid]
        zp, zm, bp, ip, mp, qp = (np.asarray(c) for c in e["cols"])
        zm2, bm, im, mm, qm = (np.asarray(c) for c in e["minus"])
        out.append(FieldSeries(
            trajectory_id=tid, sample_times=np.asarray(e["t"]),
            z_plus=zp, z_minus=zm, b_plus=bp, b_minus=bm, i_plus=ip, i_minus=im,
            qv_plus=qp, qv_minus=qm, m_plus=mp, m_minus=mm,
            extras={c: np.asarray(vals) for c, vals in zip(extra_cols, e["extra"])}))
    return out, digest


def write_battery(path: str, results: list[TestResult], digest: str) -> None:
    rows = [(r.name, r.estimate, r.reference, r.se, r.z, int(r.passed))
            for r in results]
    write_csv(path, ["test_name", "estimate", "reference", "se", "z", "pass"],
              rows, digest)
