from concurrent.futures import Future, ThreadPoolExecutor
from threading import RLock
from typing import Any, Callable, Dict, Iterable, List, Mapping, Optional

from sperimeter import constants
from sperimeter.exception import InvalidConfigError


class Workers:
    """Thread pool shared by kernel assembly, oracle enumeration and experiment jobs.

    Results always come back in submission order and reductions happen after collection,
    so the worker count changes wall time only.
    """

    def __init__(self, max_workers: int = constants.DEFAULT_WORKERS):
        if max_workers < 1:
            raise InvalidConfigError(f"Worker count must be positive, got {max_workers}")
        self.max_workers = max_workers
        self.threads_pool: Optional[ThreadPoolExecutor] = None
        self.is_active = True
        self.pool_lock = RLock()

    def start(self):
        with self.pool_lock:
            if self.threads_pool is None:
                self.threads_pool = ThreadPoolExecutor(max_workers=self.max_workers)
                self.is_active = True

    def stop(self):
        with self.pool_lock:
            self.is_active = False
            if self.threads_pool is not None:
                self.threads_pool.shutdown()
                self.threads_pool = None

    def submit(self, fn: Callable, *args, **kwargs) -> Future:
        self.start()
        return self.threads_pool.submit(fn, *args, **kwargs)

    def map(self, fn: Callable, items: Iterable[Any]) -> List[Any]:
        items = list(items)
        if self.max_workers == 1 or len(items) <= 1:
            return [fn(item) for item in items]
        futures = [self.submit(fn, item) for item in items]
        return [future.result() for future in futures]

    def run_jobs(self, jobs: Mapping[str, Callable[[], Any]]) -> Dict[str, Any]:
        names = sorted(jobs)
        results = self.map(lambda name: jobs[name](), names)
        return dict(zip(names, results))

    def __enter__(self):
        self.start()
        return self

    def __exit__(self, exc_type, exc_value, traceback):
        self.stop()


def serial_workers() -> Workers:
    return Workers(max_workers=1)
