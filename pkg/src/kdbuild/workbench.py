"""Dataset generation, timed benchmark runs, sweeps and their CSV/plot output."""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import statistics
import time
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .core import InvalidInputError, KdTree, VerificationError, verify_tree
from .medians import MediansWorkspace, build_medians
from .mt64 import DEFAULT_SEED, MT19937_64
from .presort import PresortWorkspace, build_presort
from .registration import RegistrationWorkspace, build_registration

ALGORITHMS = ("medians", "presort", "registration")
PHASES = ("sort", "build", "alloc", "verify")
SWEEPS = ("n", "threads", "k")


@dataclass(frozen=True)
class GenSpec:
    n: int
    k: int
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        if self.n < 1:
            raise InvalidInputError(f"n must be >= 1, got {self.n}")
        if self.k < 2:
            raise InvalidInputError(f"k must be >= 2, got {self.k}")
        if not 0 <= self.seed < 1 << 64:
            raise InvalidInputError(f"seed must fit in 64 unsigned bits, got {self.seed}")


def equally_spaced(n: int) -> np.ndarray:
    """``n`` int64 values from the minimum int64 upward in steps of 2**64 // n."""
    # n == 1 gives a step of 2**64, which wraps to 0; only offset 0 is used then
    step = ((1 << 64) // n) & 0xFFFFFFFFFFFFFFFF
    offsets = np.arange(n, dtype=np.uint64) * np.uint64(step)
    # adding -2**63 to an unsigned offset is flipping its top bit
    return (offsets ^ np.uint64(1 << 63)).view(np.int64)


def generate_tuples(spec: GenSpec) -> np.ndarray:
    """Equally spaced values, reshuffled once per dimension from one generator.

    The shuffles accumulate: dimension j receives the sequence after j + 1
    shuffles. Tuples are distinct because every column is a permutation.
    """
    values = equally_spaced(spec.n)
    rng = MT19937_64(spec.seed)
    out = np.empty((spec.n, spec.k), dtype=np.int64)
    for dim in range(spec.k):
        rng.shuffle(values)
        out[:, dim] = values
    return out


def digest(arr: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(arr).tobytes()).hexdigest()


@dataclass
class BenchRecord:
    algorithm: str
    n: int
    k: int
    threads: int
    mode: str
    iterations: int
    sort_mean_s: float
    sort_sd_s: float
    build_mean_s: float
    build_sd_s: float
    alloc_mean_s: float
    alloc_sd_s: float
    verify_mean_s: float
    verify_sd_s: float
    total_mean_s: float
    total_sd_s: float
    scalability: float | None = None


CSV_COLUMNS = [f.name for f in dataclasses.fields(BenchRecord)]


def mean_sd(samples: Sequence[float]) -> tuple[float, float]:
    """Mean and sample (n - 1) standard deviation; a single sample has sd 0."""
    if not samples:
        raise InvalidInputError("no samples")
    mean = statistics.fmean(samples)
    sd = statistics.stdev(samples) if len(samples) > 1 else 0.0
    return mean, sd


def allocate_workspace(algorithm: str, n: int, k: int):
    if algorithm == "medians":
        return MediansWorkspace.allocate(n)
    if algorithm == "presort":
        return PresortWorkspace.allocate(n, k)
    if algorithm == "registration":
        return RegistrationWorkspace.allocate(n, k)
    raise InvalidInputError(f"unknown algorithm {algorithm!r}")


def build(algorithm: str, tuples: np.ndarray, threads: int = 1, mode: str = "single",
          workspace=None) -> KdTree:
    if algorithm == "medians":
        return build_medians(tuples, threads, workspace=workspace)
    if algorithm == "presort":
        return build_presort(tuples, threads, workspace=workspace)
    if algorithm == "registration":
        return build_registration(tuples, threads, mode, workspace=workspace)
    raise InvalidInputError(f"unknown algorithm {algorithm!r}")


def warmup():
    """Compile every kernel, including the threaded paths, outside timed regions."""
    tuples = generate_tuples(GenSpec(1 << 15, 3))
    for algorithm in ALGORITHMS:
        build(algorithm, tuples, 1)
        build(algorithm, tuples, 2, "dual" if algorithm == "registration" else "single")
    verify_tree(build_medians(tuples[:64]))


def _check_args(algorithm, threads, iterations, mode):
    if algorithm not in ALGORITHMS:
        raise InvalidInputError(f"unknown algorithm {algorithm!r}")
    if threads < 1:
        raise InvalidInputError(f"threads must be >= 1, got {threads}")
    if iterations < 1:
        raise InvalidInputError(f"iterations must be >= 1, got {iterations}")
    if mode not in ("single", "dual"):
        raise InvalidInputError(f"unknown mode {mode!r}")
    if algorithm == "registration" and mode == "dual" and threads < 2:
        raise InvalidInputError("dual mode needs threads >= 2")


def run_benchmark(algorithm: str, spec: GenSpec, threads: int = 1, iterations: int = 10,
                  mode: str = "single", preallocate: bool = False,
                  on_iteration: Callable[[int, np.ndarray, KdTree], None] | None = None
                  ) -> BenchRecord:
    """Time ``iterations`` builds of the same generated dataset.

    Data generation is outside the timed phases. Every tree is verified; a
    failure raises :class:`VerificationError` naming the iteration. With
    ``preallocate`` the auxiliary arrays are allocated once, before the loop,
    and that single allocation time is reported as the alloc phase.
    """
    _check_args(algorithm, threads, iterations, mode)
    if algorithm != "registration":
        mode = "single"
    samples = {phase: [] for phase in PHASES}
    totals = []
    workspace = None
    if preallocate:
        t0 = time.perf_counter()
        workspace = allocate_workspace(algorithm, spec.n, spec.k)
        samples["alloc"].append(time.perf_counter() - t0)
    for it in range(iterations):
        tuples = generate_tuples(spec)
        tree = build(algorithm, tuples, threads, mode, workspace)
        t0 = time.perf_counter()
        report = verify_tree(tree)
        verify_s = time.perf_counter() - t0
        if not report.ok or report.node_count != tree.n:
            raise VerificationError(
                f"{algorithm} iteration {it}: {report.node_count} nodes, height {report.height}, "
                f"violations {report.violations[:5]}", report)
        timings = tree.timings
        if not preallocate:
            samples["alloc"].append(timings["alloc"])
        samples["sort"].append(timings["sort"])
        samples["build"].append(timings["build"])
        samples["verify"].append(verify_s)
        totals.append(timings["sort"] + timings["build"] + verify_s
                      + (0.0 if preallocate else timings["alloc"]))
        if on_iteration is not None:
            on_iteration(it, tuples, tree)
    stats = {phase: mean_sd(samples[phase]) for phase in PHASES}
    total = mean_sd(totals)
    return BenchRecord(
        algorithm, spec.n, spec.k, threads, mode, iterations,
        *stats["sort"], *stats["build"], *stats["alloc"], *stats["verify"], *total,
        scalability=1.0 if threads == 1 else None)


def attach_scalability(records: list[BenchRecord]) -> list[BenchRecord]:
    """Set ``scalability = t1 / tn`` from the single-thread record with the
    same algorithm, n, k and mode; left empty where there is none."""
    base = {(r.algorithm, r.n, r.k, r.mode): r.total_mean_s for r in records if r.threads == 1}
    for r in records:
        t1 = base.get((r.algorithm, r.n, r.k, r.mode))
        r.scalability = t1 / r.total_mean_s if t1 is not None and r.total_mean_s > 0 else None
    return records


def run_sweep(sweep: str, values: Iterable[int], algorithms: Sequence[str] = ALGORITHMS, *,
              n: int = 1 << 16, k: int = 3, threads: int = 1, iterations: int = 10,
              mode: str = "single", preallocate: bool = False, seed: int = DEFAULT_SEED,
              progress: Callable[[BenchRecord], None] | None = None) -> list[BenchRecord]:
    """One record per grid point per algorithm, varying n, threads or k."""
    if sweep not in SWEEPS:
        raise InvalidInputError(f"sweep must be one of {SWEEPS}, got {sweep!r}")
    values = list(values)
    if not values:
        raise InvalidInputError("empty sweep range")
    records = []
    for value in values:
        params = {"n": n, "k": k, "threads": threads}
        params[sweep] = value
        spec = GenSpec(params["n"], params["k"], seed)
        for algorithm in algorithms:
            record = run_benchmark(algorithm, spec, params["threads"], iterations,
                                   mode if algorithm == "registration" else "single", preallocate)
            records.append(record)
            if progress is not None:
                progress(record)
    return attach_scalability(records)


def write_csv(records: Iterable[BenchRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for r in records:
            row = []
            for name in CSV_COLUMNS:
                v = getattr(r, name)
                row.append("" if v is None else repr(v) if isinstance(v, float) else v)
            writer.writerow(row)


def read_csv(path) -> list[BenchRecord]:
    types = {f.name: f.type for f in dataclasses.fields(BenchRecord)}
    records = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            values = {}
            for name in CSV_COLUMNS:
                raw = row[name]
                kind = types[name]
                if kind == "int":
                    values[name] = int(raw)
                elif kind == "str":
                    values[name] = raw
                else:
                    values[name] = None if raw == "" else float(raw)
            records.append(BenchRecord(**values))
    return records


def write_plot_data(records: Sequence[BenchRecord], path, x: str = "n") -> None:
    """Whitespace-separated ``x y1 y2 ...`` columns, one y per algorithm.

    The first block is the mean total time; a second block, after two blank
    lines, holds scalability when any record has it.
    """
    algorithms = [a for a in ALGORITHMS if any(r.algorithm == a for r in records)]
    xs = sorted({getattr(r, x) for r in records})
    table = {(getattr(r, x), r.algorithm): r for r in records}

    def block(title, field):
        lines = [f"# {title}", "# " + " ".join([x] + algorithms)]
        for xv in xs:
            cells = [str(xv)]
            for a in algorithms:
                r = table.get((xv, a))
                v = None if r is None else getattr(r, field)
                cells.append("nan" if v is None else repr(v))
            lines.append(" ".join(cells))
        return "\n".join(lines) + "\n"

    text = block("total_mean_s", "total_mean_s")
    if any(r.scalability is not None for r in records):
        text += "\n\n" + block("scalability", "scalability")
    with open(path, "w") as fh:
        fh.write(text)
