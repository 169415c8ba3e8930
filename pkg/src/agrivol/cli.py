"""Command-line interface.

Subcommands cover each pipeline stage plus the full run:

    ingest, returns, egarch-fit, tests, sarimax, lstm, surfaces, run,
    fetch-weather

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import load_config
from .errors import DataError, NumericalError
from .pipeline import Pipeline
from .series import Month
from .weather import fetch_weather, weather_to_series, write_weather_csv


class _Parser(argparse.ArgumentParser):
    """argparse defaults to exit code 2 on usage errors; this CLI uses 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="agrivol",
        description="Climate-linked agricultural price volatility toolkit",
    )
    parser.add_argument("--config", help="pipeline config file (INI-style sections)")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--out-dir", help="override the config output directory")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, doc in (
        ("ingest", "parse and align the price panel and weather inputs"),
        ("returns", "state-level log returns and summary statistics"),
        ("egarch-fit", "fit the volatility model to state-level returns"),
        ("tests", "CCF, KPSS, and Granger diagnostics against weather"),
        ("sarimax", "seasonal ARMA forecast evaluation on the test window"),
        ("lstm", "LSTM forecast evaluation on the test window"),
        ("surfaces", "monthly smoothed and interpolated volatility surfaces"),
        ("run", "full pipeline: all of the above plus the report bundle"),
    ):
        sub.add_parser(name, help=doc)

    fw = sub.add_parser("fetch-weather", help="download monthly point weather into the cache")
    fw.add_argument("--lat", type=float, required=True)
    fw.add_argument("--lon", type=float, required=True)
    fw.add_argument("--start", required=True, help="first month, YYYY-MM")
    fw.add_argument("--end", required=True, help="last month, YYYY-MM")
    fw.add_argument("--cache-dir", default="weather_cache")
    fw.add_argument("--out", help="also write the series to this CSV")
    return parser


def _emit(payload: dict) -> None:
    print(json.dumps(payload, indent=2, sort_keys=True))


def _run_stage(args) -> int:
    if not args.config:
        return _usage_error("--config is required for this command")
    config = load_config(args.config, seed=args.seed, out_dir=args.out_dir)
    pipe = Pipeline(config)
    command = args.command
    if command == "ingest":
        _emit(pipe.load())
    elif command == "returns":
        _emit(pipe.returns())
    elif command == "egarch-fit":
        _emit(pipe.egarch()["state"])
    elif command == "tests":
        _emit(pipe.tests())
    elif command == "sarimax":
        _emit(pipe.forecast_sarimax())
    elif command == "lstm":
        _emit(pipe.forecast_lstm())
    elif command == "surfaces":
        _emit(pipe.spatial())
    elif command == "run":
        report = pipe.run()
        _emit(
            {
                "out_dir": str(pipe.out_dir),
                "mape_table": report["forecast"]["mape_table"],
                "outputs": report["outputs"],
            }
        )
    else:  # pragma: no cover - argparse restricts the choices
        return _usage_error(f"unknown command {command!r}")
    return 0


def _usage_error(message: str) -> int:
    print(f"agrivol: error: {message}", file=sys.stderr)
    return 1


def _fetch_weather_cmd(args) -> int:
    records = fetch_weather(
        args.lat, args.lon, Month.parse(args.start), Month.parse(args.end), args.cache_dir
    )
    precip, tasmax = weather_to_series(records)
    if args.out:
        write_weather_csv(Path(args.out), precip, tasmax)
    _emit(
        {
            "months": len(precip),
            "start": str(precip.start),
            "end": str(precip.end),
            "cache_dir": str(args.cache_dir),
            "out": args.out,
        }
    )
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "fetch-weather":
            return _fetch_weather_cmd(args)
        return _run_stage(args)
    except DataError as exc:
        print(f"agrivol: data error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"agrivol: numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
