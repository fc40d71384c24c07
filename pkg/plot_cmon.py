"""
Adaptive sensitivity updates on the nonlinear chain: closed loop with and
without CMoN, per-sample update percentage and tracking comparison.

    python plot_cmon.py --t-end 6 --eta-pri 0.1 --out out/cmon
"""

import argparse
from dataclasses import replace
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

from src.ms_ import CmonConfig
from src.nmpc_ import SimConfig, run_closed_loop
from src.ocp_ import get_benchmark
from src.sqp_ import NmpcOptions, SqpConfig, SqpMode


def step_references(n_samples: int) -> np.ndarray:
    """End-position reference: hold, then a step to a new point halfway through."""
    ref = np.tile([1.0, 0.0, 0.0], (n_samples, 1))
    ref[n_samples // 2 :] = [0.8, 0.3, -0.2]
    return ref


def run(t_end: float, eta_pri: float, eta_dual: float, out: Path) -> pd.DataFrame:
    problem = get_benchmark("chain_nonlinear")
    sim = SimConfig(t_end=t_end)
    ref = step_references(int(round(t_end / problem.dims.Ts)))
    base = NmpcOptions(sqp=SqpConfig(mode=SqpMode.RTI))
    variants = {
        "full": base,
        "cmon": replace(base, cmon=CmonConfig(enabled=True, eta_pri=eta_pri, eta_dual=eta_dual)),
    }

    frames = []
    for name, options in variants.items():
        print(f"Run info:\n{name=} | {t_end=} | {eta_pri=} | {eta_dual=}")
        log = run_closed_loop(problem, options, sim, references=ref, progress=True)
        frame = pd.DataFrame(log.to_rows())
        frame["variant"] = name
        frame["update_percent"] = 100.0 * frame["update_fraction"]
        frames.append(frame)
    data = pd.concat(frames, ignore_index=True)

    out.mkdir(parents=True, exist_ok=True)
    data.to_csv(out / "cmon.csv", index=False)

    fig, (ax_upd, ax_trk) = plt.subplots(2, 1, sharex=True, figsize=(7, 6))
    for name, frame in data.groupby("variant"):
        ax_upd.step(frame["t"], frame["update_percent"], where="post", label=name)
        ax_trk.plot(frame["t"], frame["tracking_error"], label=name)
    ax_upd.set_ylabel("exact sensitivities [%]")
    ax_upd.set_ylim(-5, 105)
    ax_trk.set_ylabel("end position error [m]")
    ax_trk.set_xlabel("time [s]")
    for ax in (ax_upd, ax_trk):
        ax.grid(True)
        ax.legend()
    fig.tight_layout()
    fig.savefig(out / "cmon.png", dpi=150)

    table = data.groupby("variant").agg(
        update_mean=("update_percent", "mean"),
        update_max=("update_percent", "max"),
        tracking_rms=("tracking_error", lambda s: float(np.sqrt(np.mean(s**2)))),
        qp_iters=("qp_iters", "sum"),
    )
    states = {
        name: frame.filter(regex=r"^x\d+$").to_numpy() for name, frame in data.groupby("variant")
    }
    print(table.to_string())
    print(f"max state deviation cmon vs full: {np.max(np.abs(states['cmon'] - states['full'])):.3e}")
    return data


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description="CMoN closed-loop experiment")
    parser.add_argument("--t-end", type=float, default=6.0)
    parser.add_argument("--eta-pri", type=float, default=0.1)
    parser.add_argument("--eta-dual", type=float, default=float("inf"))
    parser.add_argument("--out", default="out/cmon")
    args = parser.parse_args()
    run(args.t_end, args.eta_pri, args.eta_dual, Path(args.out))
