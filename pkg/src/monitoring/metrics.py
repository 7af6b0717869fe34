from typing import Dict, Any, Optional
from collections import defaultdict
from pathlib import Path
import threading

import numpy as np
from prometheus_client import (
    CollectorRegistry,
    Counter,
    Gauge,
    Histogram,
    generate_latest,
    write_to_textfile,
)
import logging

logger = logging.getLogger(__name__)

LATENCY_BUCKETS = [1e-4, 2.5e-4, 5e-4, 1e-3, 2.5e-3, 5e-3, 1e-2, 2.5e-2, 5e-2, 0.1]
RATIO_BUCKETS = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]


class MetricsCollector:
    """Replay counters mirrored into a private Prometheus registry.

    Each collector owns its registry so independent replays in one process do
    not collide on metric names.
    """

    def __init__(self, registry: Optional[CollectorRegistry] = None):
        self.registry = registry or CollectorRegistry()
        self.counters = defaultdict(int)
        self.histograms = defaultdict(list)
        self.gauges = defaultdict(float)
        self.lock = threading.RLock()

        self.prometheus_counters = {
            'queries_served': Counter('sgs_queries_served_total', 'Queries served', registry=self.registry),
            'cache_updates': Counter('sgs_cache_updates_total', 'Persistent buffer reloads', registry=self.registry),
            'constraint_violations': Counter(
                'sgs_constraint_violations_total', 'Queries served outside their hard constraint',
                registry=self.registry
            ),
            'slo_misses': Counter('sgs_slo_misses_total', 'Queries slower than their latency target',
                                  registry=self.registry),
            'subnet_selections': Counter(
                'sgs_subnet_selections_total', 'Queries served per SubNet', ['subnet'], registry=self.registry
            ),
        }

        self.prometheus_histograms = {
            'served_latency_seconds': Histogram(
                'sgs_served_latency_seconds', 'Served latency including cache fill',
                buckets=LATENCY_BUCKETS, registry=self.registry
            ),
            'hit_ratio': Histogram('sgs_hit_ratio', 'Per-query cache-hit ratio', buckets=RATIO_BUCKETS,
                                   registry=self.registry),
        }

        self.prometheus_gauges = {
            'cache_fill_bytes': Gauge('sgs_cache_fill_bytes', 'Bytes fetched by the latest cache update',
                                      registry=self.registry),
        }

    def increment_counter(self, metric_name: str, value: int = 1, labels: Dict[str, str] = None):
        with self.lock:
            key = metric_name if not labels else f"{metric_name}{{{','.join(f'{k}={v}' for k, v in labels.items())}}}"
            self.counters[key] += value

            if metric_name in self.prometheus_counters:
                if labels:
                    self.prometheus_counters[metric_name].labels(**labels).inc(value)
                else:
                    self.prometheus_counters[metric_name].inc(value)

    def record_histogram(self, metric_name: str, value: float):
        with self.lock:
            self.histograms[metric_name].append(value)

            if len(self.histograms[metric_name]) > 100000:
                self.histograms[metric_name] = self.histograms[metric_name][-50000:]

            if metric_name in self.prometheus_histograms:
                self.prometheus_histograms[metric_name].observe(value)

    def set_gauge(self, metric_name: str, value: float):
        with self.lock:
            self.gauges[metric_name] = value

            if metric_name in self.prometheus_gauges:
                self.prometheus_gauges[metric_name].set(value)

    def get_counter(self, metric_name: str) -> int:
        with self.lock:
            return self.counters.get(metric_name, 0)

    def get_histogram_stats(self, metric_name: str) -> Dict[str, float]:
        with self.lock:
            values = self.histograms.get(metric_name, [])

            if not values:
                return {'count': 0, 'mean': 0, 'min': 0, 'max': 0, 'p50': 0, 'p95': 0, 'p99': 0}

            return {
                'count': len(values),
                'mean': float(np.mean(values)),
                'min': float(np.min(values)),
                'max': float(np.max(values)),
                'p50': float(np.percentile(values, 50)),
                'p95': float(np.percentile(values, 95)),
                'p99': float(np.percentile(values, 99))
            }

    def generate_prometheus_metrics(self) -> bytes:
        return generate_latest(self.registry)

    def write_textfile(self, path) -> None:
        write_to_textfile(str(Path(path)), self.registry)
        logger.info(f"Wrote Prometheus metrics to {path}")

    def get_metrics_summary(self) -> Dict[str, Any]:
        with self.lock:
            summary = {
                'counters': dict(self.counters),
                'gauges': dict(self.gauges),
                'histograms': {}
            }

            for metric_name in self.histograms:
                summary['histograms'][metric_name] = self.get_histogram_stats(metric_name)

            return summary
