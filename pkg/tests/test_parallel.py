import numpy as np
import pytest

from parallel import chunk_sizes, run_chunked, run_chunked_async, run_indexed, spawn_generators


def uniform(size, rng):
    return rng.random(size)


def test_chunk_sizes():
    assert chunk_sizes(10, 3) == [3, 3, 4]
    assert chunk_sizes(8, 8) == [1] * 8
    assert chunk_sizes(2, 5) == [1, 1]
    with pytest.raises(ValueError):
        chunk_sizes(0, 2)


def test_spawned_streams_are_reproducible_and_distinct():
    a = [rng.random() for rng in spawn_generators(7, 3)]
    b = [rng.random() for rng in spawn_generators(7, 3)]
    assert a == b
    assert len(set(a)) == 3


def test_results_do_not_depend_on_thread_count():
    serial = run_chunked(uniform, 1001, seed=42, chunks=4, threads=1)
    threaded = run_chunked(uniform, 1001, seed=42, chunks=4, threads=4)
    assert serial.shape == (1001,)
    assert np.array_equal(serial, threaded)


def test_results_depend_on_seed_and_chunks():
    base = run_chunked(uniform, 100, seed=1, chunks=2)
    assert not np.array_equal(base, run_chunked(uniform, 100, seed=2, chunks=2))
    assert not np.array_equal(base, run_chunked(uniform, 100, seed=1, chunks=3))


def test_tuple_seeds_give_separate_streams():
    a = run_chunked(uniform, 50, seed=(9, 1), chunks=2)
    b = run_chunked(uniform, 50, seed=(9, 2), chunks=2)
    assert not np.array_equal(a, b)


@pytest.mark.asyncio
async def test_async_runner_matches_sync():
    expected = run_chunked(uniform, 300, seed=3, chunks=5, threads=2)
    result = await run_chunked_async(uniform, 300, 3, chunks=5, threads=2)
    assert np.array_equal(result, expected)


def test_indexed_tasks_keep_order():
    assert run_indexed(lambda i: i * i, 6, threads=3) == [0, 1, 4, 9, 16, 25]
