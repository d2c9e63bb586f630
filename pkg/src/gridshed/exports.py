"""Plot-ready CSV exports for learning curves and voltage trajectories."""

from __future__ import annotations

import csv

import numpy as np

from .envelope import TvrcEnvelope
from .errors import ConfigError


def write_learning_curve_csv(curve, path, provenance=None) -> None:
    """Raw per-episode training record."""
    with open(path, "w", newline="") as fh:
        if provenance:
            fh.write(f"# {provenance}\n")
        writer = csv.writer(fh)
        writer.writerow(["episode", "R_k", "alpha_k", "joint_reward", "epsilon"])
        for p in curve:
            writer.writerow([p.episode, repr(float(p.episode_reward)),
                             p.success, repr(float(p.joint_reward)),
                             repr(float(p.epsilon))])


def read_csv_records(path):
    """(comment_lines, header, rows) of a CSV with '#' comment prefix lines."""
    comments, header, rows = [], None, []
    with open(path, newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                comments.append(line.rstrip("\n"))
                continue
            break
        fh.seek(0)
        reader = csv.reader(l for l in fh if not l.startswith("#"))
        for rec in reader:
            if header is None:
                header = rec
            else:
                rows.append(rec)
    if header is None:
        raise ConfigError(f"empty CSV {path}")
    return comments, header, rows


def moving_average(values, window: int) -> np.ndarray:
    """Trailing mean over the last ``window`` points (shorter at the start)."""
    values = np.asarray(values, dtype=float)
    out = np.empty_like(values)
    csum = np.cumsum(values)
    for i in range(len(values)):
        lo = max(0, i - window + 1)
        total = csum[i] - (csum[lo - 1] if lo > 0 else 0.0)
        out[i] = total / (i - lo + 1)
    return out


def export_learning_curve(curve_csv, out_csv, window: int = 500,
                          provenance=None, render_svg=None) -> None:
    """Add a trailing moving-average column to a learning curve CSV."""
    comments, header, rows = read_csv_records(curve_csv)
    joint = [float(r[header.index("joint_reward")]) for r in rows]
    avg = moving_average(joint, window)
    with open(out_csv, "w", newline="") as fh:
        if provenance:
            fh.write(f"# {provenance}\n")
        for c in comments:
            fh.write(c + "\n")
        writer = csv.writer(fh)
        writer.writerow(header + [f"joint_reward_ma{window}"])
        for rec, a in zip(rows, avg):
            writer.writerow(rec + [repr(float(a))])
    if render_svg:
        _render_curve_svg(rows, header, avg, window, render_svg)


def export_trajectories(voltage_csv, out_csv, envelope: TvrcEnvelope | None = None,
                        provenance=None, render_svg=None) -> None:
    """Append the TVRC envelope as a reference series to a voltage trace.

    The input must be an evaluation voltage trace carrying a ``# t_fc=``
    comment. The envelope column holds the active threshold for samples at
    or after clearing and is empty before.
    """
    envelope = envelope or TvrcEnvelope()
    comments, header, rows = read_csv_records(voltage_csv)
    t_fc = None
    for c in comments:
        if c.startswith("# t_fc="):
            t_fc = float(c.split("=", 1)[1])
    if t_fc is None:
        raise ConfigError(f"{voltage_csv} carries no t_fc marker")
    with open(out_csv, "w", newline="") as fh:
        if provenance:
            fh.write(f"# {provenance}\n")
        for c in comments:
            fh.write(c + "\n")
        writer = csv.writer(fh)
        writer.writerow(header + ["tvrc_envelope"])
        for rec in rows:
            t = float(rec[0])
            if t >= t_fc:
                writer.writerow(rec + [repr(envelope.threshold(t - t_fc))])
            else:
                writer.writerow(rec + [""])
    if render_svg:
        _render_trajectories_svg(rows, header, t_fc, envelope, render_svg)


def _savefig(fig, path) -> None:
    # strip volatile metadata so re-renders are byte-identical
    fig.savefig(path, format="svg", metadata={"Date": None})


def _render_curve_svg(rows, header, avg, window, path) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    episodes = [int(r[header.index("episode")]) for r in rows]
    joint = [float(r[header.index("joint_reward")]) for r in rows]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(episodes, joint, lw=0.5, alpha=0.5, label="joint reward")
    ax.plot(episodes, avg, lw=1.5, label=f"moving average ({window})")
    ax.set_xlabel("episode")
    ax.set_ylabel("joint reward")
    ax.legend()
    fig.tight_layout()
    _savefig(fig, path)
    plt.close(fig)


def _render_trajectories_svg(rows, header, t_fc, envelope, path) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    t = np.array([float(r[0]) for r in rows])
    fig, ax = plt.subplots(figsize=(7, 4))
    for j in range(1, len(header)):
        ax.plot(t, [float(r[j]) for r in rows], lw=0.8,
                label=header[j].replace("_vm", ""))
    env_t = t[t >= t_fc]
    ax.step(env_t, [envelope.threshold(x - t_fc) for x in env_t],
            where="post", color="k", ls="--", lw=1.2, label="TVRC")
    ax.set_xlabel("t [s]")
    ax.set_ylabel("|V| [p.u.]")
    ax.legend(fontsize=6, ncol=2)
    fig.tight_layout()
    _savefig(fig, path)
    plt.close(fig)
