"""Plot a run directory's diagnostics.csv, or a sweep's sweep.csv.

    python scripts/plot.py demo/             # energy, gap and Newton health
    python scripts/plot.py sweep/ --sweep    # gap/flux/distances against L
"""
import argparse
from pathlib import Path

import matplotlib.pyplot as plt
import pandas as pd


def plot_run(d: Path) -> None:
    df = pd.read_csv(d / "diagnostics.csv")
    fig, ax = plt.subplots(1, 3, figsize=(13, 3.6))
    ax[0].plot(df.t, df.energy)
    ax[0].set(xlabel="t", ylabel="energy")
    ax[1].semilogy(df.t[1:], df.equilibrium_gap[1:].clip(lower=1e-300))
    ax[1].set(xlabel="t", ylabel="equilibrium gap")
    ax[2].semilogy(df.step[1:], df.residual[1:].clip(lower=1e-300), ".")
    ax[2].set(xlabel="step", ylabel="final Newton residual")
    fig.tight_layout()
    fig.savefig(d / "diagnostics.png", dpi=120)


def plot_sweep(d: Path) -> None:
    df = pd.read_csv(d / "sweep.csv")
    fig, ax = plt.subplots(1, 2, figsize=(9, 3.6))
    ax[0].loglog(df.L, df.gap_l2, "o-", label="gap")
    ax[0].loglog(df.L, df.flux_l2, "s-", label="flux")
    ax[0].set(xlabel="L", ylabel="time-L² norm")
    ax[0].legend()
    for col in ["dist_dirichlet_0star", "dist_decoupled_l2"]:
        if df[col].notna().any():
            ax[1].loglog(df.L, df[col], "o-", label=col)
    ax[1].set(xlabel="L", ylabel="terminal distance")
    ax[1].legend()
    fig.tight_layout()
    fig.savefig(d / "sweep.png", dpi=120)


if __name__ == "__main__":
    p = argparse.ArgumentParser()
    p.add_argument("dir", type=Path)
    p.add_argument("--sweep", action="store_true")
    a = p.parse_args()
    (plot_sweep if a.sweep else plot_run)(a.dir)
