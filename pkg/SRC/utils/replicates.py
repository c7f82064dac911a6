import logging
from typing import Callable

import numpy as np
from joblib import Parallel, delayed
from tqdm import tqdm

from SRC.utils.config import DEFAULT_THREADS, REPLICATE_CHUNK_SIZE

logger = logging.getLogger(__name__)


def run_replicates(
    task: Callable[[int, int], np.ndarray],
    count: int,
    threads: int = DEFAULT_THREADS,
    chunk_size: int = REPLICATE_CHUNK_SIZE,
    progress: bool = False,
    desc: str = "replicates",
) -> np.ndarray:
    """
    Run `count` replicates through `task` in fixed index chunks and merge by index.

    Args:
        task (callable): Picklable callable task(start, stop) returning one value per
                         replicate index in [start, stop).
        count (int): Number of replicates.
        threads (int): joblib worker cap; results do not depend on it.
        chunk_size (int): Replicates per task.
        progress (bool): Show a tqdm bar over chunks.
        desc (str): Progress label.

    Returns:
        np.ndarray: Replicate values ordered by replicate index.
    """
    if count <= 0:
        return np.empty(0, dtype=np.float64)
    bounds = [(s, min(s + chunk_size, count)) for s in range(0, count, chunk_size)]
    logger.info(f"running {count} {desc} in {len(bounds)} chunks on {threads} worker(s)")
    jobs = (delayed(task)(start, stop) for start, stop in tqdm(bounds, desc=desc, disable=not progress))
    results = Parallel(n_jobs=max(1, int(threads)))(jobs)
    return np.concatenate([np.asarray(r, dtype=np.float64) for r in results])
