import pytest

from cheeger_lab import errors, tasks


class Square(tasks.Task):
    done = 'squared'

    def handler(self):
        self.progress(0, 1, 'x={}'.format(self.data['x']))
        if self.data['x'] < 0:
            raise errors.NegativeField('negative input')
        return self.data['x'] ** 2


@pytest.mark.unit
def test_progress_line():
    line = tasks.progress_line({}, 1, 4, 'info')
    assert line.startswith('[' + '=' * 10 + '>')
    assert line.endswith(' 25% info')
    custom = tasks.progress_line(
        {'PROGRESS_FORMAT': '{progress_percent:.0f}'}, 0, 0, '')
    assert custom == '100'


@pytest.mark.unit
def test_task_captures_result_and_error():
    good = Square('good', x=3)({})
    assert good.result == 9
    assert good.error is None
    assert good.elapsed >= 0

    bad = Square('bad', x=-1)({})
    assert bad.result is None
    assert isinstance(bad.error, errors.NegativeField)
    assert str(bad) == 'square'


@pytest.mark.unit
def test_task_handler_required():
    task = tasks.Task('plain')({})
    assert isinstance(task.error, NotImplementedError)


@pytest.mark.unit
@pytest.mark.parametrize('threads', [1, 2, 4])
def test_pool_runs_all_tasks_in_order(threads):
    pool = tasks.ThreadPool(threads)
    for x in range(10):
        pool.add_task(Square('x{}'.format(x), x=x))
    pool.start()
    done = pool.join()
    assert [task.result for task in done] == [x * x for x in range(10)]
    assert pool.tasks_total == 10


@pytest.mark.unit
@pytest.mark.parametrize('threads', [1, 3])
def test_pool_raises_task_errors(threads):
    pool = tasks.ThreadPool(threads)
    pool.add_task(Square('ok', x=2))
    pool.add_task(Square('bad', x=-2))
    pool.start()
    with pytest.raises(errors.NegativeField):
        pool.join()


@pytest.mark.unit
def test_pool_keeps_errors_when_asked():
    pool = tasks.ThreadPool(2)
    pool.add_task(Square('ok', x=2))
    pool.add_task(Square('bad', x=-2))
    pool.start()
    ok, bad = pool.join(raise_errors=False)
    assert ok.result == 4
    assert bad.error is not None


@pytest.mark.unit
def test_pool_writes_progress_to_output():
    output = [''] * 3
    pool = tasks.ThreadPool(3)
    for x in range(4):
        pool.add_task(Square('x{}'.format(x), x=x))
    pool.start(output)
    pool.join()
    assert output[0].endswith('100% 4/4')
    assert any(line.startswith('squared') for line in output[1:])
