import threading

import pytest

from gridsten.workers import WorkerPool, nonempty


def test_results_in_order():
    with WorkerPool(3) as pool:
        assert pool.run(lambda a, b: (a, b), [(0, 2), (2, 5), (5, 6)]) == [(0, 2), (2, 5), (5, 6)]


def test_inline_when_single_worker():
    pool = WorkerPool(1)
    seen = []
    pool.run(lambda a, b: seen.append(threading.current_thread()), [(0, 1), (1, 2)])
    assert seen == [threading.main_thread()] * 2
    pool.shutdown()


def test_errors_propagate():
    def boom(a, b):
        raise ZeroDivisionError("x")

    with WorkerPool(2) as pool:
        with pytest.raises(ZeroDivisionError):
            pool.run(boom, [(0, 1), (1, 2)])


def test_rejects_bad_count():
    with pytest.raises(ValueError):
        WorkerPool(0)


def test_nonempty():
    assert nonempty([(0, 0), (0, 3), (3, 3), (3, 4)]) == [(0, 3), (3, 4)]
