import threading
import time
import unittest

from sperimeter.exception import InvalidConfigError
from sperimeter.worker import Workers, serial_workers


class LabWorkersTestCase(unittest.TestCase):

    def setUp(self) -> None:
        self.workers = Workers(4)

    def tearDown(self) -> None:
        self.workers.stop()

    def test_worker_initialize_lazily_success(self):
        self.assertTrue(self.workers.is_active)
        self.assertIsNone(self.workers.threads_pool)
        self.workers.start()
        self.assertIsNotNone(self.workers.threads_pool)

    def test_worker_stop_success(self):
        self.workers.start()
        self.workers.stop()
        self.assertFalse(self.workers.is_active)
        self.assertIsNone(self.workers.threads_pool)

    def test_worker_zero_workers_raise_error(self):
        with self.assertRaises(InvalidConfigError):
            Workers(0)

    def test_worker_map_keeps_submission_order_success(self):
        def slow_square(x):
            time.sleep(0.01 * (5 - x))
            return x * x

        self.assertEqual([0, 1, 4, 9, 16], self.workers.map(slow_square, range(5)))

    def test_worker_map_uses_pool_threads_success(self):
        names = self.workers.map(lambda _: threading.current_thread().name, range(8))
        self.assertTrue(all(name != threading.main_thread().name for name in names))

    def test_worker_serial_map_runs_inline_success(self):
        workers = serial_workers()
        names = workers.map(lambda _: threading.current_thread().name, range(3))
        self.assertEqual([threading.current_thread().name] * 3, names)
        self.assertIsNone(workers.threads_pool)

    def test_worker_run_jobs_sorted_names_success(self):
        result = self.workers.run_jobs({"b": lambda: 2, "a": lambda: 1, "c": lambda: 3})
        self.assertEqual(["a", "b", "c"], list(result))
        self.assertEqual({"a": 1, "b": 2, "c": 3}, result)

    def test_worker_job_exception_propagates_raise_error(self):
        def fail():
            raise ValueError("boom")

        with self.assertRaises(ValueError):
            self.workers.run_jobs({"ok": lambda: 1, "fail": fail})

    def test_worker_context_manager_stops_pool_success(self):
        with Workers(2) as workers:
            self.assertEqual([1, 2], workers.map(lambda x: x, [1, 2]))
        self.assertFalse(workers.is_active)
        self.assertIsNone(workers.threads_pool)


if __name__ == '__main__':
    unittest.main()
