"""``kdbench``: time the three builders on generated data.

Exit codes: 0 success, 1 invalid arguments, 2 verification failure,
3 internal consistency error.
"""

from __future__ import annotations

import argparse
import re
import sys

from .core import ConsistencyError, InvalidInputError, VerificationError
from .mt64 import DEFAULT_SEED
from .registration import build_registration, write_snapshot
from .workbench import (ALGORITHMS, SWEEPS, GenSpec, attach_scalability, digest,
                        generate_tuples, run_benchmark, run_sweep, warmup, write_csv,
                        write_plot_data)

EXIT_OK, EXIT_USAGE, EXIT_VERIFY, EXIT_INTERNAL = 0, 1, 2, 3

_POWER = re.compile(r"^\s*2\s*(?:\^|\*\*)\s*(\d+)\s*$")


def parse_count(text: str) -> int:
    """``"2^20"``, ``"2**20"`` or a plain integer."""
    m = _POWER.match(text)
    try:
        value = 1 << int(m.group(1)) if m else int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a count: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1: {text!r}")
    return value


def parse_range(text: str) -> tuple[int, int]:
    lo, sep, hi = text.partition("..")
    if not sep:
        raise argparse.ArgumentTypeError(f"range must look like a..b, got {text!r}")
    a, b = parse_count(lo), parse_count(hi)
    if a > b:
        raise argparse.ArgumentTypeError(f"empty range {text!r}")
    return a, b


def sweep_values(sweep: str, lo: int, hi: int) -> list[int]:
    """k steps by one; n and threads double from ``lo`` up to ``hi``."""
    if sweep == "k":
        return list(range(lo, hi + 1))
    values = []
    v = lo
    while v <= hi:
        values.append(v)
        v *= 2
    return values


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def make_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="kdbench", description=__doc__,
                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--algorithm", choices=ALGORITHMS + ("all",), default="all")
    p.add_argument("--n", type=parse_count, default=1 << 16,
                   help="tuple count, e.g. 65536 or 2^16 (default 2^16)")
    p.add_argument("--k", type=int, default=3, help="dimensions (default 3)")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--iterations", type=int, default=10)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--mode", choices=("single", "dual"), default="single",
                   help="registration partitioning mode")
    p.add_argument("--preallocate", action="store_true",
                   help="allocate auxiliary arrays once, outside the timed loop")
    p.add_argument("--sweep", choices=SWEEPS)
    p.add_argument("--range", type=parse_range, dest="range_",
                   help="sweep range a..b; n and threads double, k steps by one")
    p.add_argument("--out", help="write records as CSV")
    p.add_argument("--emit-plot-data", dest="plot_data", help="write plot-ready columns")
    p.add_argument("--registration-trace",
                   help="write per-pass bn/ss/cur rows of one registration build")
    p.add_argument("--no-warmup", action="store_true",
                   help="skip compiling kernels before timing")
    return p


def _print_record(r, out):
    scal = "" if r.scalability is None else f" scal={r.scalability:.3f}"
    out.write(f"{r.algorithm:<12} n={r.n} k={r.k} threads={r.threads} mode={r.mode} "
              f"sort={r.sort_mean_s:.4g}±{r.sort_sd_s:.2g}s "
              f"build={r.build_mean_s:.4g}±{r.build_sd_s:.2g}s "
              f"verify={r.verify_mean_s:.3g}s total={r.total_mean_s:.4g}±{r.total_sd_s:.2g}s"
              f"{scal}\n")
    out.flush()


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    out = sys.stdout
    algorithms = ALGORITHMS if args.algorithm == "all" else (args.algorithm,)
    try:
        if (args.sweep is None) != (args.range_ is None):
            raise InvalidInputError("--sweep and --range go together")
        spec = GenSpec(args.n, args.k, args.seed)
        if not args.no_warmup:
            warmup()
        if args.registration_trace:
            with open(args.registration_trace, "w") as fh:
                build_registration(generate_tuples(spec), args.threads, args.mode,
                                   on_pass=lambda s: write_snapshot(s, fh))
        if args.sweep:
            values = sweep_values(args.sweep, *args.range_)
            records = run_sweep(args.sweep, values, algorithms, n=args.n, k=args.k,
                                threads=args.threads, iterations=args.iterations,
                                mode=args.mode, preallocate=args.preallocate,
                                seed=args.seed, progress=lambda r: _print_record(r, out))
        else:
            records = []
            for algorithm in algorithms:
                digests = set()

                def record_digests(it, tuples, tree, algorithm=algorithm, digests=digests):
                    digests.add((digest(tuples), digest(tree.index)))

                mode = args.mode if algorithm == "registration" else "single"
                r = run_benchmark(algorithm, spec, args.threads, args.iterations, mode,
                                  args.preallocate, record_digests)
                if len(digests) != 1:
                    raise ConsistencyError(f"{algorithm}: iterations disagree on data or tree")
                (data_sha, tree_sha), = digests
                _print_record(r, out)
                out.write(f"{algorithm:<12} dataset sha256={data_sha} tree sha256={tree_sha}\n")
                records.append(r)
            attach_scalability(records)
        if args.out:
            write_csv(records, args.out)
        if args.plot_data:
            write_plot_data(records, args.plot_data, x=args.sweep or "n")
    except VerificationError as exc:
        print(f"kdbench: verification failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except ConsistencyError as exc:
        print(f"kdbench: internal consistency error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except InvalidInputError as exc:
        print(f"kdbench: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
