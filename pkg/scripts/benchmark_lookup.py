import os
import sys
import argparse
import logging
import timeit

import numpy as np
import pandas as pd

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.table.latency_table import LatencyTable, lookup

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)


def synthetic_table(n_subnets: int, n_columns: int, seed: int = 0) -> LatencyTable:
    """Random positive latencies; only the lookup path is being timed."""
    rng = np.random.default_rng(seed)
    entries = rng.uniform(1e-3, 1e-2, size=(n_subnets, n_columns))
    return LatencyTable(
        [f"sn{i}" for i in range(n_subnets)],
        [f"sg{j:04d}" for j in range(n_columns)],
        entries,
        hw_fingerprint="benchmark",
    )


def time_lookups(table: LatencyTable, n_lookups: int, seed: int = 0) -> float:
    """Mean seconds per lookup over random (subnet, subgraph) pairs."""
    rng = np.random.default_rng(seed)
    rows = rng.integers(len(table.subnet_ids), size=n_lookups)
    cols = rng.integers(len(table.subgraph_ids), size=n_lookups)
    pairs = [(table.subnet_ids[i], table.subgraph_ids[j]) for i, j in zip(rows, cols)]

    def run():
        for subnet_id, subgraph_id in pairs:
            lookup(table, subnet_id, subgraph_id)

    best = min(timeit.repeat(run, number=1, repeat=5))
    return best / n_lookups


def main():
    parser = argparse.ArgumentParser(description='Benchmark latency-table lookups')
    parser.add_argument('--subnets', type=int, default=6,
                       help='Rows in the synthetic table')
    parser.add_argument('--columns', type=int, nargs='+', default=[100, 500, 1000, 2000],
                       help='Column counts to benchmark')
    parser.add_argument('--lookups', type=int, default=100000,
                       help='Lookups per timing run')
    parser.add_argument('--output', type=str, default=None,
                       help='Optional CSV path for the results')

    args = parser.parse_args()

    results = []
    for n_columns in args.columns:
        table = synthetic_table(args.subnets, n_columns)
        seconds = time_lookups(table, args.lookups)
        logger.info(f"{args.subnets}x{n_columns} table: {seconds * 1e6:.3f} us per lookup")
        results.append({'subnets': args.subnets, 'columns': n_columns, 'us_per_lookup': seconds * 1e6})

    frame = pd.DataFrame(results)
    print(frame.to_string(index=False))
    if args.output:
        frame.to_csv(args.output, index=False)
        logger.info(f"Results written to {args.output}")


if __name__ == "__main__":
    main()
