from concurrent.futures import ProcessPoolExecutor

from .logger import logger


class ParallelMap:
    """Order-preserving map over a process pool; ``threads <= 1`` maps serially.

    Modules receive an instance and never create their own pools. Results
    come back in submission order, so merges downstream are deterministic.
    """

    def __init__(self, threads=1):
        self.threads = max(1, int(threads))

    def __call__(self, fn, items):
        items = list(items)
        if self.threads == 1 or len(items) <= 1:
            return [fn(item) for item in items]
        workers = min(self.threads, len(items))
        logger.info(f"Dispatching {len(items)} tasks to {workers} workers")
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))


serial_map = ParallelMap(1)
