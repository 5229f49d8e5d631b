import base64
from contextlib import contextmanager
import hashlib
import os
import os.path
import shutil
import tempfile

import billiard
import numpy


@contextmanager
def atomic_write(filename, mode='w'):
    """Open a sibling temp file and move it over filename on success.

    :param mode: Either `w` or `wb` for text or binary access.
    """
    dirname = os.path.dirname(os.path.abspath(filename))
    fd, tmp_path = tempfile.mkstemp(
        prefix='.' + os.path.basename(filename) + '.', dir=dirname)
    try:
        with os.fdopen(fd, mode) as out:
            yield out
        os.replace(tmp_path, filename)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise


@contextmanager
def selfdestruct_tempdir():
    base_path = tempfile.mkdtemp()
    try:
        yield base_path
    finally:
        shutil.rmtree(base_path)


def stage_seed(seed, name):
    """Derive a stable 32 bit seed for a named stage."""
    digest = hashlib.sha256(('%s:%s' % (seed, name)).encode('utf-8'))
    return int(digest.hexdigest()[:8], 16)


def encode_array(values, dtype='<f4'):
    """Encode an array as base64 of its little-endian bytes."""
    data = numpy.ascontiguousarray(values, dtype=dtype).tobytes()
    return base64.b64encode(data).decode('ascii')


def decode_array(text, shape, dtype='<f4'):
    data = base64.b64decode(text.encode('ascii'))
    values = numpy.frombuffer(data, dtype=dtype).astype(numpy.float64)
    return values.reshape(shape)


def chunked(count, parts):
    """Split range(count) into at most parts ordered index arrays."""
    if count == 0:
        return []
    parts = max(1, min(parts, count))
    return [chunk for chunk in numpy.array_split(numpy.arange(count), parts)
            if len(chunk)]


def parallel_map(func, tasks, jobs=1):
    """
    Apply func to every argument tuple in tasks and return the results
    in task order, using a process pool when more than one job is asked.
    """
    tasks = list(tasks)
    if jobs <= 1 or len(tasks) <= 1:
        return [func(*task) for task in tasks]

    pool = billiard.Pool(processes=min(jobs, len(tasks)))
    try:
        pending = [pool.apply_async(func, task) for task in tasks]
        results = [job.get() for job in pending]
    finally:
        pool.close()
        pool.join()
    return results
