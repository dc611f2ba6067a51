"""Same Lindblad decay, opposite verdicts from the three-time protocol.

White noise with gamma_w = gamma/2 and a Cauchy-coupling spin ensemble of
half-width gamma produce the identical coherence e^{-gamma t}, so no
two-time experiment separates them.  The conditional past-future
correlation does: it vanishes identically for the white case and reaches
(1 - e^{-2 gamma t})/2 on the diagonal for the ensemble.  A sampled run of
the actual measurement protocol (finite trajectories, literal
postselection) is included for the white case to show the experimental
estimate sits on zero within its error bar.
"""

import argparse
import csv
import math
from pathlib import Path

import numpy as np

from cpfsim import analytic, spinbath, stochastic
from cpfsim.stochastic import McConfig

GAMMA = 1.0


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results")
    ap.add_argument("--trajectories", type=int, default=200_000)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    white = analytic.White(GAMMA / 2.0)
    t_grid = np.linspace(0.05, 3.0, 30)

    rows = []
    for t in t_grid:
        rows.append(
            (
                t,
                analytic.first_moment(white, t),  # equals exp(-gamma t)
                analytic.cpf(white, t, t),
                spinbath.lorentz_cpf(GAMMA, t, t),
                spinbath.lorentz_conditional_coherence(GAMMA, t, t, +1),
                analytic.conditional_coherence(white, t, t, +1),
            )
        )

    path = out_dir / "lorentz_vs_lindblad.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ("t", "coherence", "cpf_white", "cpf_lorentz", "cc_lorentz", "cc_white")
        )
        writer.writerows(rows)
    print(f"wrote {path}")

    worst = max(abs(r[2]) for r in rows)
    peak = max(r[3] for r in rows)
    print(f"white-noise CPF: max |C| = {worst:.1e} (identically zero)")
    print(f"ensemble CPF:    max  C  = {peak:.4f} "
          f"(limit {0.5 * (1 - math.exp(-2 * GAMMA * 3.0)):.4f} at t = 3)")

    cfg = McConfig(n_trajectories=args.trajectories, seed=args.seed)
    est = stochastic.mc_cpf_sampling(white, 1.0, 1.0, +1, cfg)
    print(
        f"sampled protocol, white noise at t = tau = 1: "
        f"C = {est.value:+.5f} +- {est.std_error:.5f} ({est.n_samples} kept), "
        f"pull = {est.value / est.std_error:+.2f}"
    )


if __name__ == "__main__":
    main()
