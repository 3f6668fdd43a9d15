"""
Thread pool for independent Monte Carlo trials.

Results are keyed by trial index and handed back in key order whatever the
completion order, so aggregates are identical for any worker count.
"""
import logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field

from django.conf import settings

from core.exception import LabException

logger = logging.getLogger(__name__)


@dataclass
class TrialBatch:
    keys: list
    results: dict
    failures: dict = field(default_factory=dict)

    @property
    def values(self):
        """Successful results in key order."""
        return [self.results[key] for key in self.keys if key in self.results]

    @property
    def excluded(self):
        return len(self.failures)

    @property
    def exclusion_rate(self):
        return self.excluded / len(self.keys) if self.keys else 0.0


class TrialExecutor:
    """
    Runs `fn(key)` for every key. Lab exceptions raised by a trial are
    recorded as failures of that key; anything else propagates.
    """

    def __init__(self, threads=None):
        self.threads = max(1, int(threads if threads is not None else settings.LAB_THREADS))

    def run(self, fn, keys):
        keys = list(keys)
        results, failures = {}, {}
        if self.threads == 1:
            for key in keys:
                self._collect(key, lambda key=key: fn(key), results, failures)
        else:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                futures = {pool.submit(fn, key): key for key in keys}
                for future in as_completed(futures):
                    self._collect(futures[future], future.result, results, failures)
        if failures:
            logger.warning("%d of %d trials excluded", len(failures), len(keys))
        ordered_failures = {key: failures[key] for key in keys if key in failures}
        return TrialBatch(keys=keys, results=results, failures=ordered_failures)

    @staticmethod
    def _collect(key, produce, results, failures):
        try:
            results[key] = produce()
        except LabException as exc:
            logger.debug("trial %s failed: %s", key, exc.detail)
            failures[key] = str(exc.detail)
