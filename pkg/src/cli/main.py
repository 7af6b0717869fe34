"""
Command-line front end.

    python -m src.cli.main gen    --supernet S.json --picks P.json
    python -m src.cli.main table  --supernet S.json --descriptors D.json --hw H.json
    python -m src.cli.main sim    --supernet S.json --descriptors D.json --hw H.json --table-dir DIR
    python -m src.cli.main dse    --supernet S.json --descriptors D.json --hw H.json --grid G.json
    python -m src.cli.main report --supernet S.json --descriptors D.json --hw H.json [--records R.csv]

Defaults come from config.settings (SGS_* environment variables); flags win.
Exit status is 0 only when every output file was written, 2 on invalid input.
"""
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from pydantic import ValidationError

from config.settings import Settings
from ..accel.roofline import boundedness_flips, roofline_report, reverse_flips
from ..dse.sweep import GridSpec, sweep, table_size_ablation, window_sweep
from ..models.exceptions import ConfigurationError, SGSError
from ..models.hardware import HardwareConfig
from ..models.serving import SchedulerConfig, SchedulingPolicy, TraceMix
from ..models.supernet import DescriptorFile
from ..monitoring.metrics import MetricsCollector
from ..sim.analysis import aggregate, read_records_csv, scatter_frame, write_records_csv, write_summary_json
from ..sim.replay import replay
from ..sim.workload import generate_trace, read_trace, write_trace
from ..supernet.elastic import SuperNet, load_descriptors, load_picks, write_descriptors
from ..table.candidates import CandidateSet, build_candidate_set
from ..table.latency_table import LatencyTable, build_table

logger = logging.getLogger(__name__)

TABLE_FILE = "table.json"
CANDIDATES_FILE = "candidates.json"


def _window(value: str) -> Optional[int]:
    if value.lower() == "none":
        return None
    window = int(value)
    if window < 1:
        raise argparse.ArgumentTypeError(f"window must be >= 1 or 'none', got {value}")
    return window


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_serving(args):
    supernet = SuperNet.from_file(args.supernet)
    descriptors = load_descriptors(args.descriptors)
    if descriptors.supernet != supernet.name:
        raise ConfigurationError(f"descriptors were generated for {descriptors.supernet}, not {supernet.name}")
    if not descriptors.subnets:
        raise ConfigurationError(f"{args.descriptors} lists no subnets")
    for subnet in descriptors.subnets:
        supernet.check_descriptor(subnet, what=f"subnet {subnet.id}")
    return supernet, descriptors.subnets


def _load_hw(path) -> HardwareConfig:
    return HardwareConfig.model_validate_json(Path(path).read_text())


def cmd_gen(args) -> None:
    supernet = SuperNet.from_file(args.supernet)
    picks = load_picks(args.picks)
    if picks.supernet != supernet.name:
        raise ConfigurationError(f"picks target {picks.supernet}, SuperNet file describes {supernet.name}")
    subnets = supernet.enumerate_subnets(picks.picks)
    subgraphs = [supernet.shared_core(subnets)] + supernet.pairwise_intersections(subnets)
    out = _out_dir(args) / "descriptors.json"
    write_descriptors(out, DescriptorFile(supernet=supernet.name, subnets=subnets, subgraphs=subgraphs))
    sizes = [s.weight_bytes for s in subnets]
    print(f"{len(subnets)} subnets ({min(sizes) / 1e6:.3f}-{max(sizes) / 1e6:.3f} MB), "
          f"shared core {subgraphs[0].weight_bytes / 1e6:.3f} MB -> {out}")


def cmd_table(args) -> None:
    supernet, subnets = _load_serving(args)
    hw = _load_hw(args.hw)
    candidates = build_candidate_set(
        supernet, subnets, hw, args.max_columns, alpha=args.alpha, seed=args.seed, grid_samples=args.grid_samples
    )
    table = build_table(supernet, subnets, candidates, hw)
    out = _out_dir(args)
    candidates.to_json(out / CANDIDATES_FILE)
    table.to_json(out / TABLE_FILE)
    table.to_csv(out / "table.csv")
    low, high = candidates.byte_range()
    print(f"|S| = {len(candidates)} subgraphs, {low}-{high} bytes; table {table.shape[0]}x{table.shape[1]} -> {out}")


def cmd_sim(args) -> None:
    supernet, subnets = _load_serving(args)
    hw = _load_hw(args.hw)
    table_dir = Path(args.table_dir)
    table = LatencyTable.from_json(table_dir / TABLE_FILE)
    candidates = CandidateSet.from_json(table_dir / CANDIDATES_FILE, supernet)
    table.ensure_fresh(hw)
    out = _out_dir(args)

    if args.trace:
        trace = read_trace(args.trace)
    else:
        trace = generate_trace(
            subnets, args.queries, mix=TraceMix(args.mix), seed=args.seed, table=table, epsilon=args.epsilon
        )
    write_trace(trace, out / "trace.csv")

    windows = args.window
    config = SchedulerConfig(
        policy=SchedulingPolicy(args.policy), window=windows[0], seed=args.seed, initial_cache=args.initial_cache
    )
    metrics = MetricsCollector()
    records = replay(trace, config, table, subnets, candidates, hw, supernet, metrics=metrics)
    summary = aggregate(records)
    header = {
        "seed": args.seed,
        "trace_seed": trace.seed,
        "policy": config.policy.value,
        "window": config.window,
        "hw_fingerprint": table.hw_fingerprint,
        "supernet": supernet.name,
    }
    write_records_csv(records, out / "records.csv", header=header)
    write_summary_json(summary, out / "summary.json", header=header)
    metrics.write_textfile(out / "metrics.prom")
    logger.info(f"Replay metrics: {metrics.get_metrics_summary()['histograms']}")

    if len(windows) > 1:
        frame = window_sweep(trace, table, subnets, candidates, hw, supernet, windows=windows, config=config)
        frame.to_csv(out / "windows.csv", index=False)
    print(f"mean latency {summary.mean_latency * 1e3:.3f} ms, mean accuracy {summary.mean_accuracy:.4f}, "
          f"SLO attainment {summary.slo_attainment:.1%}, hit ratio {summary.mean_hit_ratio:.3f} -> {out}")


def cmd_dse(args) -> None:
    supernet, subnets = _load_serving(args)
    hw = _load_hw(args.hw)
    grid = GridSpec.from_file(args.grid)
    probe = build_table(supernet, subnets, CandidateSet.empty(supernet), hw.with_pb(0))
    trace = generate_trace(subnets, args.queries, mix=TraceMix(args.mix), seed=args.seed, table=probe,
                           epsilon=args.epsilon)
    config = SchedulerConfig(policy=SchedulingPolicy(args.policy), window=args.window[0], seed=args.seed)
    frame = sweep(
        supernet, subnets, grid, hw, trace,
        cache_policy=args.cache_policy,
        config=config,
        max_columns=args.max_columns,
        alpha=args.alpha,
        seed=args.seed,
        grid_samples=args.grid_samples,
        workers=args.workers,
    )
    out = _out_dir(args)
    frame.to_csv(out / "dse.csv", index=False)
    if args.ablation:
        ablation = table_size_ablation(
            supernet, subnets, hw, trace, config=config, alpha=args.alpha, seed=args.seed,
            grid_samples=args.grid_samples,
        )
        ablation.to_csv(out / "table_ablation.csv", index=False)
    print(f"{len(frame)} grid points, best time save {frame['time_save_pct'].max():.2f}% -> {out}")


def cmd_report(args) -> None:
    supernet, subnets = _load_serving(args)
    hw = _load_hw(args.hw)
    if args.subnet:
        matches = [s for s in subnets if s.id == args.subnet]
        if not matches:
            raise ConfigurationError(f"unknown subnet id {args.subnet!r}")
        subnet = matches[0]
    else:
        subnet = max(subnets, key=lambda s: s.weight_bytes)
    cached = supernet.shared_core(subnets)
    report = roofline_report(supernet, subnet, cached, hw)
    out = _out_dir(args)
    report.to_csv(out / "roofline.csv", index=False)
    summary = {
        "subnet": subnet.id,
        "cached": cached.id,
        "cached_bytes": cached.weight_bytes,
        "ridge_point": hw.ridge_point,
        "flips": boundedness_flips(report),
        "reverse_flips": reverse_flips(report),
    }
    (out / "roofline.json").write_text(json.dumps(summary, indent=2) + "\n")
    if args.records:
        scatter_frame(read_records_csv(args.records)).to_csv(out / "scatter.csv", index=False)
    print(f"{len(report)} layers, {len(summary['flips'])} memory->compute flips with {cached.id} cached -> {out}")


def build_parser(settings: Settings) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description='SubGraph-stationary SuperNet serving simulator')
    parser.add_argument('--log-level', default=settings.LOG_LEVEL, help='Logging level')
    commands = parser.add_subparsers(dest='command', required=True)

    def common(sub, serving=True):
        sub.add_argument('--supernet', required=True, help='SuperNet layer file (JSON)')
        if serving:
            sub.add_argument('--descriptors', required=True, help='Descriptor JSON written by gen')
            sub.add_argument('--hw', required=True, help='Hardware configuration JSON')
        sub.add_argument('--out', default=settings.OUTPUT_DIR, help='Output directory')
        sub.add_argument('--seed', type=int, default=settings.SEED, help='Seed for every random draw')

    def candidate_flags(sub):
        sub.add_argument('--max-columns', type=int, default=settings.MAX_COLUMNS,
                         help='Maximum number of cacheable SubGraphs')
        sub.add_argument('--alpha', type=float, default=settings.FILL_FRACTION,
                         help='Minimum candidate size as a fraction of the PB')
        sub.add_argument('--grid-samples', type=int, default=settings.GRID_SAMPLES,
                         help='Random elastic samples added to the candidate pool')

    def workload_flags(sub):
        sub.add_argument('--queries', type=int, default=settings.TRACE_LENGTH, help='Generated trace length')
        sub.add_argument('--mix', choices=[m.value for m in TraceMix], default=settings.TRACE_MIX.value,
                         help='Query target distribution')
        sub.add_argument('--epsilon', type=float, default=settings.ACCURACY_MARGIN,
                         help='Accuracy margin around the SubNet accuracy range')
        sub.add_argument('--policy', choices=[p.value for p in SchedulingPolicy], default=settings.POLICY.value,
                         help='Which constraint is hard')
        sub.add_argument('--window', type=_window, nargs='+',
                         default=[settings.WINDOW], help="AvgNet window Q, or 'none'; several values sweep Q")

    gen = commands.add_parser('gen', help='Derive SubNet and SubGraph descriptors')
    common(gen, serving=False)
    gen.add_argument('--picks', required=True, help='Elastic picks JSON')
    gen.set_defaults(func=cmd_gen)

    table = commands.add_parser('table', help='Build the candidate set and latency table')
    common(table)
    candidate_flags(table)
    table.set_defaults(func=cmd_table)

    sim = commands.add_parser('sim', help='Replay a query trace through the scheduler')
    common(sim)
    workload_flags(sim)
    sim.add_argument('--table-dir', required=True, help='Directory written by the table command')
    sim.add_argument('--trace', help='Existing trace.csv; otherwise one is generated')
    sim.add_argument('--initial-cache', type=int, default=settings.INITIAL_CACHE,
                     help='Candidate index cached before the first query (default: seeded random)')
    sim.set_defaults(func=cmd_sim)

    dse = commands.add_parser('dse', help='Sweep PB size, bandwidth and throughput')
    common(dse)
    candidate_flags(dse)
    workload_flags(dse)
    dse.add_argument('--grid', required=True, help='Grid JSON with pb_bytes, bandwidth and throughput lists')
    dse.add_argument('--cache-policy', choices=['static_core', 'scheduler'], default='static_core',
                     help='What the PB holds at each grid point')
    dse.add_argument('--workers', type=int, default=settings.DSE_WORKERS, help='Parallel grid points')
    dse.add_argument('--ablation', action='store_true', help='Also run the table-size ablation')
    dse.set_defaults(func=cmd_dse)

    report = commands.add_parser('report', help='Roofline and latency-vs-accuracy CSVs')
    common(report)
    report.add_argument('--subnet', help='SubNet for the roofline report (default: largest)')
    report.add_argument('--records', help='records.csv from sim for the scatter CSV')
    report.set_defaults(func=cmd_report)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    settings = Settings()
    args = build_parser(settings).parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.INFO))
    try:
        args.func(args)
    except (SGSError, ValidationError, OSError) as e:
        logger.error(f"{args.command} failed: {e}")
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
