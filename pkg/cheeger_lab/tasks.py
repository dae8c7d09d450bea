import logging
import queue
import threading
import time

from . import settings

logger = logging.getLogger(__name__)

PROGRESS_WIDTH = 40


def progress_line(conf, done, full, info):
    fraction = float(done) / full if full else 1.0
    progress_len = int(fraction * PROGRESS_WIDTH)
    return conf.get('PROGRESS_FORMAT', settings.PROGRESS_FORMAT).format(
        progress='=' * progress_len,
        left=' ' * (PROGRESS_WIDTH - progress_len),
        progress_percent=fraction * 100,
        info=info,
    )


class Worker(threading.Thread):
    """ Thread executing tasks from a given tasks queue """

    def __init__(self, index, task_queue, result_queue, conf, output=None):
        super(Worker, self).__init__()
        self.index = index
        self.task_queue = task_queue
        self.result_queue = result_queue
        self.conf = conf
        self.daemon = True
        self.output = output

    def run(self):
        while self.task_queue.unfinished_tasks:
            try:
                task = self.task_queue.get(timeout=1)
            except queue.Empty:
                break

            try:
                task(self.conf, worker=self)
                if self.result_queue:
                    self.result_queue.put(task)
            finally:
                self.task_queue.task_done()


class System(threading.Thread):
    def __init__(self, index, result_queue, output, tasks_total, conf):
        super(System, self).__init__()
        self.daemon = True

        self.index = index
        self.queue = result_queue
        self.output = output
        self.conf = conf

        self.tasks_total = tasks_total
        self.tasks_processed = 0
        self.failed = 0

    def run(self):
        while True:
            task = self.queue.get()
            try:
                self.handler(task)
            finally:
                self.queue.task_done()

    def handler(self, task):
        self.tasks_processed += 1
        if task.error is not None:
            self.failed += 1

        if self.output is None:
            return
        info = '{}/{}'.format(self.tasks_processed, self.tasks_total)
        if self.failed:
            info += ' ({} failed)'.format(self.failed)
        self.output[self.index] = progress_line(
            self.conf, self.tasks_processed, self.tasks_total, info)


class ThreadPool:
    """Runs queued tasks on num_threads - 1 workers plus a progress thread.

    With a single thread there are no workers and join() runs the tasks
    inline, in submission order.
    """

    def __init__(self, num_threads, conf=None, auto_start=False):
        self.num_threads = num_threads
        self.result_queue = queue.Queue()
        self.task_queue = queue.Queue()
        self.sys = None
        self.workers = []
        self.tasks = []
        self.conf = conf or {}

        if auto_start:
            self.start()

    @property
    def tasks_total(self):
        return len(self.tasks)

    def start(self, output=None):
        if self.num_threads < 2:
            return

        self.sys = System(
            0, self.result_queue, output, self.tasks_total, self.conf)
        self.sys.start()

        for index in range(1, min(self.num_threads, self.tasks_total + 1)):
            worker = Worker(
                index, self.task_queue, self.result_queue, self.conf, output)
            worker.start()
            self.workers.append(worker)

    def add_task(self, task):
        self.tasks.append(task)
        self.task_queue.put(task)
        return task

    def join(self, raise_errors=True):
        if not self.workers:
            while not self.task_queue.empty():
                task = self.task_queue.get_nowait()
                try:
                    task(self.conf)
                finally:
                    self.task_queue.task_done()

        self.task_queue.join()
        if self.sys is not None:
            self.result_queue.join()

        if raise_errors:
            for task in self.tasks:
                if task.error is not None:
                    raise task.error
        return self.tasks


class Task:
    done = 'finished'

    def __init__(self, name, **data):
        self.name = name
        self.data = data
        self.conf = None
        self.worker = None
        self.result = None
        self.error = None
        self.elapsed = None
        self._t = None

    def __str__(self):
        return type(self).__name__.lower()

    def handler(self):
        raise NotImplementedError()

    def __call__(self, conf, worker=None):
        self.conf = conf
        self.worker = worker

        self._t = time.time()
        try:
            self.result = self.handler()
        except Exception as exc:  # pylint: disable=broad-except
            logger.debug('%s %s failed: %s', self, self.name, exc)
            self.error = exc
        self.elapsed = time.time() - self._t

        self.output_finish()
        return self

    def progress(self, done, full, info=''):
        line = progress_line(
            self.conf, done, full, '{} {} {}'.format(self, self.name, info))
        self.output_edit(line)

    def output_edit(self, line):
        if self.worker and self.worker.output is not None:
            self.worker.output[self.worker.index] = line
        else:
            logger.debug(line)

    def output_finish(self):
        state = 'failed' if self.error is not None else self.done
        line = '{} {} ({:.2f}s)'.format(state, self.name, self.elapsed)
        if self.worker and self.worker.output is not None:
            self.worker.output[self.worker.index] = line
        else:
            logger.debug(line)
