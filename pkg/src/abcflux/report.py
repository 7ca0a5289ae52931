"""Report rendering: matplotlib figures plus a plain-text summary, generated
from the CSV artifacts of simulate/analyze."""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .errors import ConfigurationError
from .io import read_csv, read_manifest, read_series


def _battery_figure(out_dir: str, fig_dir: str, written: list[str]) -> None:
    path = os.path.join(out_dir, "battery.csv")
    if not os.path.exists(path):
        return
    header, rows, _ = read_csv(path)
    names = [r[0] for r in rows]
    zs = [float(r[4]) for r in rows]
    passed = [r[5] == "1" for r in rows]
    fig, ax = plt.subplots(figsize=(8, 0.4 * len(names) + 1.5))
    ypos = np.arange(len(names))
    finite = np.array([z if np.isfinite(z) else 0.0 for z in zs])
    ax.barh(ypos, finite, color=["tab:blue" if p else "tab:red" for p in passed])
    ax.axvline(4, color="k", ls="--", lw=0.8)
    ax.axvline(-4, color="k", ls="--", lw=0.8)
    ax.set_yticks(ypos)
    ax.set_yticklabels(names, fontsize=8)
    ax.set_xlabel("z-score vs reference")
    ax.set_title("test battery")
    fig.tight_layout()
    target = os.path.join(fig_dir, "battery.png")
    fig.savefig(target, dpi=120)
    plt.close(fig)
    written.append(target)


def _series_figure(out_dir: str, fig_dir: str, written: list[str]) -> None:
    series, _ = read_series(out_dir)
    if not series:
        return
    times = series[0].sample_times
    z_plus = np.array([s.z_plus for s in series])
    z_minus = np.array([s.z_minus for s in series])
    qv = np.array([s.qv_plus for s in series])
    m = np.array([s.m_plus for s in series])
    fig, axes = plt.subplots(2, 2, figsize=(9, 6), sharex=True)
    axes[0, 0].plot(times, z_plus.var(axis=0), label="var Z+")
    axes[0, 0].plot(times, z_minus.var(axis=0), label="var Z-")
    axes[0, 0].set_title("field variance")
    axes[0, 0].legend(fontsize=8)
    axes[0, 1].plot(times, (z_plus * z_minus).mean(axis=0))
    axes[0, 1].set_title("cross moment E[Z+ Z-]")
    axes[1, 0].plot(times, qv.mean(axis=0))
    axes[1, 0].set_title("mean quadratic variation")
    axes[1, 0].set_xlabel("t")
    axes[1, 1].plot(times, m.mean(axis=0), label="mean M")
    axes[1, 1].plot(times, (m ** 2).mean(axis=0) - qv.mean(axis=0),
                    label="E[M^2] - E<M>")
    axes[1, 1].axhline(0.0, color="k", lw=0.6)
    axes[1, 1].set_title("martingale diagnostics")
    axes[1, 1].set_xlabel("t")
    axes[1, 1].legend(fontsize=8)
    fig.tight_layout()
    target = os.path.join(fig_dir, "series.png")
    fig.savefig(target, dpi=120)
    plt.close(fig)
    written.append(target)


def _opconv_figure(out_dir: str, fig_dir: str, written: list[str]) -> None:
    path = os.path.join(out_dir, "opconv.csv")
    if not os.path.exists(path):
        return
    header, rows, _ = read_csv(path)
    fig, axes = plt.subplots(1, 2, figsize=(9, 4))
    by_key: dict = {}
    for fam, gma, n, es, ea in rows:
        by_key.setdefault((fam, float(gma)), []).append(
            (int(n), float(es), float(ea)))
    for (fam, gma), vals in sorted(by_key.items()):
        vals.sort()
        ns = [v[0] for v in vals]
        axes[0].loglog(ns, [v[1] for v in vals], "o-", label=f"{fam} g={gma:g}")
        axes[1].loglog(ns, [max(v[2], 1e-300) for v in vals], "o-")
    axes[0].set_title("sym-operator grid error")
    axes[1].set_title("asym-operator grid error")
    for ax in axes:
        ax.set_xlabel("n")
    axes[0].legend(fontsize=6)
    fig.tight_layout()
    target = os.path.join(fig_dir, "operator_convergence.png")
    fig.savefig(target, dpi=120)
    plt.close(fig)
    written.append(target)


def _summary(out_dir: str, fig_dir: str, written: list[str]) -> None:
    lines = []
    manifest_path = os.path.join(out_dir, "manifest.json")
    if os.path.exists(manifest_path):
        manifest, digest = read_manifest(manifest_path)
        lines.append(f"manifest {digest}")
        model = manifest["config"]["model"]
        lines.append("model: " + ", ".join(f"{k}={v}" for k, v in sorted(model.items())))
    battery_path = os.path.join(out_dir, "battery.csv")
    if os.path.exists(battery_path):
        _, rows, _ = read_csv(battery_path)
        n_pass = sum(r[5] == "1" for r in rows)
        lines.append(f"battery: {n_pass}/{len(rows)} tests passed")
        for r in rows:
            lines.append(f"  {r[0]}: est={float(r[1]):+.5g} ref={float(r[2]):+.5g} "
                         f"pass={r[5]}")
    target = os.path.join(fig_dir, "summary.txt")
    with open(target, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    written.append(target)


def render_report(out_dir: str, fig_dir: str) -> list[str]:
    """Render figures + summary from an output directory; returns paths."""
    if not os.path.isdir(out_dir):
        raise ConfigurationError(f"{out_dir!r} is not a directory")
    os.makedirs(fig_dir, exist_ok=True)
    written: list[str] = []
    if os.path.exists(os.path.join(out_dir, "series.csv")):
        _series_figure(out_dir, fig_dir, written)
    _battery_figure(out_dir, fig_dir, written)
    _opconv_figure(out_dir, fig_dir, written)
    _summary(out_dir, fig_dir, written)
    if not written:
        raise ConfigurationError(f"nothing to report in {out_dir!r}")
    return written
