from threading import Event, Lock, Thread

import logging
import queue


class PoolError(Exception):
    pass


class PoolStopped(PoolError):
    pass


class ReplicaWorker(Thread):

    def __init__(self, name, tasks, results, stop_event, lock):
        """Constructor of the class.

        :name: Name of the worker, used in log messages
        :tasks: Queue of (index, function, args) tuples
        :results: Dict receiving index -> result
        :stop_event: Event shared by the pool
        :lock: Lock guarding results
        """

        super().__init__(name=name, daemon=True)

        self._tasks = tasks
        self._results = results
        self._stop_event = stop_event
        self._lock = lock
        self.error = None

    def run(self):
        """Run tasks until the queue is drained or the pool is stopped.

        :returns: Nothing
        """

        while not self._stop_event.is_set():

            try:
                index, func, args = self._tasks.get_nowait()
            except queue.Empty:
                return

            try:
                result = func(*args)
            except Exception as e:
                logging.debug(f'Worker "{self.name}" failed on task {index}: {e}.')
                self.error = e
                self._stop_event.set()
                return

            with self._lock:
                self._results[index] = result


class ReplicaPool(object):
    """Run independent tasks on a fixed number of threads.

    Results come back as a list in task order whatever the scheduling, so any
    fold over them is independent of the worker count.
    """

    def __init__(self, workers=1):
        if workers < 1:
            raise PoolError(f"Invalid number of workers {workers}.")

        self._workers = workers
        self._stop_event = Event()
        self._stopped = False

    def map(self, func, arglist):
        """Apply func to every argument tuple.

        :func: Callable run in the worker threads
        :arglist: List of argument tuples
        :returns: List of results, in the order of arglist
        :raises: The first exception raised by a task, or PoolStopped after stop()
        """

        if self._stopped:
            raise PoolStopped("The pool was stopped.")

        tasks = queue.Queue()
        for index, args in enumerate(arglist):
            tasks.put((index, func, tuple(args)))

        results = {}
        lock = Lock()
        self._stop_event.clear()
        workers = [
            ReplicaWorker(f"replica-{w}", tasks, results, self._stop_event, lock)
            for w in range(min(self._workers, max(len(arglist), 1)))
        ]

        for worker in workers:
            worker.start()
        for worker in workers:
            worker.join()

        for worker in workers:
            if worker.error is not None:
                raise worker.error

        if self._stopped or len(results) != len(arglist):
            raise PoolStopped(f"The pool stopped after {len(results)} of {len(arglist)} tasks.")

        return [results[i] for i in range(len(arglist))]

    def stop(self):
        """Stop the workers after their current task.

        :returns: Nothing
        """

        self._stopped = True
        self._stop_event.set()
