"""Run deeply recursive work on a worker thread with a large C stack."""

import sys
import threading

STACK_BYTES = 512 * 1024 * 1024
RECURSION_LIMIT = 1_000_000


def run_deep(fn, *args, **kwargs):
    if getattr(_local, "deep", False):
        return fn(*args, **kwargs)
    result = {}

    def target():
        _local.deep = True
        try:
            result["value"] = fn(*args, **kwargs)
        except BaseException as exc:  # re-raised on the calling thread
            result["error"] = exc

    old = threading.stack_size()
    threading.stack_size(STACK_BYTES)
    try:
        if sys.getrecursionlimit() < RECURSION_LIMIT:
            sys.setrecursionlimit(RECURSION_LIMIT)
        t = threading.Thread(target=target)
        t.start()
    finally:
        threading.stack_size(old)
    t.join()
    if "error" in result:
        raise result["error"]
    return result["value"]


_local = threading.local()
