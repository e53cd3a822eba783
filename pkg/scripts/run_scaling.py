"""Run a scaling sweep from a JSON config and write every metric as CSV + SVG.

    python3 scripts/run_scaling.py configs/mitm2_scaling.json [--outdir results]
"""
import argparse
from pathlib import Path

from qmitm.experiments import ExperimentConfig, emit_report, run_scaling_metrics


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("config")
    ap.add_argument("--outdir", default="results")
    args = ap.parse_args()
    cfg = ExperimentConfig.load(args.config)
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    for metric, series in run_scaling_metrics(cfg).items():
        stem = out / f"{cfg.algorithm}_{metric}"
        emit_report(series, "csv", stem.with_suffix(".csv"))
        emit_report(series, "svg", stem.with_suffix(".svg"))
        print(f"{cfg.algorithm:<10} {metric:<18} exponent {series.fitted_exponent:.4f}  r^2 {series.r_squared:.5f}")


if __name__ == "__main__":
    main()
