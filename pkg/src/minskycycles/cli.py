"""Command-line entry point: ``minsky-cycles --input data.csv --real-col gdp --fin-col debt``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .em import EstimationConfig
from .errors import DataError
from .pipeline import EXIT_VALIDATION, PipelineConfig, run_pipeline


class _Parser(argparse.ArgumentParser):
    # usage errors are validation errors (exit 1); argparse would use 2,
    # which this tool reserves for estimation failures
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"error: [config] {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(
        prog="minsky-cycles",
        description="Detrend a real/financial series pair, fit a two-regime MS-VAR(1) "
                    "and test regime 1 for real-financial cycles.",
    )
    p.add_argument("--input", required=True, type=Path, help="CSV with a header row")
    p.add_argument("--real-col", required=True, help="column holding the real series")
    p.add_argument("--fin-col", required=True, help="column holding the financial series")
    p.add_argument("--year-col", default="year")
    p.add_argument("--log-real", action="store_true", help="take natural logs of the real series")
    p.add_argument("--lambda", dest="lamb", type=float, default=100.0, help="HP smoothing weight")
    p.add_argument("--max-iter", type=int, default=1000)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mc-reps", type=int, default=0, help="Monte Carlo replications (0 disables)")
    p.add_argument("--mc-T", type=int, default=None, help="simulated length (default: sample length)")
    p.add_argument("--mc-unit-noise", action="store_true",
                   help="simulate with identity-covariance shocks")
    p.add_argument("--significance", type=float, default=0.05, choices=(0.01, 0.05, 0.10))
    p.add_argument("--df-lags", type=int, default=0, help="lagged differences in the DF test")
    p.add_argument("--lb-lags", type=int, default=1, help="Ljung-Box lags")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = PipelineConfig(
            input_path=args.input,
            output_dir=args.out,
            real_column=args.real_col,
            financial_column=args.fin_col,
            year_column=args.year_col,
            log_real=args.log_real,
            lamb=args.lamb,
            est=EstimationConfig(max_iter=args.max_iter, tol=args.tol,
                                 restarts=args.restarts, seed=args.seed),
            mc_reps=args.mc_reps,
            mc_T=args.mc_T,
            mc_unit_noise=args.mc_unit_noise,
            significance_level=args.significance,
            df_lags=args.df_lags,
            lb_lags=args.lb_lags,
        )
    except (DataError, ValueError) as exc:
        print(f"error: [config] {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    outcome = run_pipeline(config)
    if outcome.status:
        print(f"error: {outcome.message}", file=sys.stderr)
    else:
        print(outcome.message)
        for path in outcome.files:
            print(f"wrote {path}")
    return outcome.status


if __name__ == "__main__":
    sys.exit(main())
