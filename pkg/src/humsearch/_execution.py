#  -*- coding: utf-8 -*-
"""Functions supporting multiprocessing execution of independent tasks."""

import logging
import multiprocessing as mp
import sys
import traceback
from time import time

from ._classes import Err
from ._exceptions import TaskError, TaskTimeoutError
from ._scheduling import earliest_finish_time

logger = logging.getLogger(__name__)


def call_task(task, args):
    """Call ``task`` with a single argument, positional or keyword arguments.

    Parameters
    ----------
    task : Callable
    args : Any

    Returns
    -------
    Any
    """

    if isinstance(args, dict):
        return task(**args)
    elif isinstance(args, (tuple, list)):
        return task(*args)
    else:
        return task(args)


def execute_task_list(task_list, pipe=None, costs=False):
    """Sequentially execute a task list, wrapping exceptions in ``Err``.

    Parameters
    ----------
    task_list : List[(Callable, Any)]
        A list of tasks and their arguments
    pipe : Optional[multiprocessing.connection.Connection]
        A pipe used to return the result list to a master process
    costs : Optional[bool]
        Include the wall time of each task

    Returns
    -------
    List[Union[(Any, float), (Any,)]]
        A list of results
    """

    results = []
    for task, args in task_list:
        this_start = time()
        try:
            this_result = call_task(task, args)
        except Exception as e:
            _, _, tb = sys.exc_info()
            this_result = Err(e, traceback.extract_tb(tb))
        this_end = time()

        results.append((this_result,) if costs is False
                       else (this_result, this_end - this_start))

    if pipe is not None:
        pipe.send(results)
        pipe.close()

    return results


def collect_results(results, task_ids):
    """Collect execution result lists into a dict keyed by task ID.

    Parameters
    ----------
    results : List[List[Any]]
        A nested list of execution results
    task_ids : List[List[Hashable]]
        A nested list of task IDs

    Returns
    -------
    Dict[Hashable, Any]
    """

    return {task: result[0]
            for task_ids_k, results_k in zip(task_ids, results)
            for task, result in zip(task_ids_k, results_k)}


def execute_task_lists(task_lists, task_ids, timeout=None):
    """Execute a number of task lists over equally many processes.

    The first task list runs in the calling process.

    Parameters
    ----------
    task_lists : List[List[(Callable, Any)]]
        A list of task lists.
    task_ids : List[List[Hashable]]
        A list of lists for mapping execution results to task IDs.
    timeout : Optional[float]
        Timeout in seconds for collecting results from spawned processes,
        default is no timeout.

    Returns
    -------
    Dict[Hashable, Any]
        Task results keyed by task ID; failed tasks hold an ``Err``.
    """

    n_processes = len(task_lists)

    pipes = [None for _ in range(n_processes)]
    p = [None for _ in range(n_processes)]
    for k in range(1, n_processes):
        pipes[k] = mp.Pipe(duplex=False)
        p[k] = mp.Process(target=execute_task_list,
                          args=(task_lists[k], pipes[k][1]))
        p[k].start()
        pipes[k][1].close()

    results = [execute_task_list(task_lists[0])]

    for k in range(1, n_processes):
        if timeout is None or pipes[k][0].poll(timeout):
            try:
                results.append(pipes[k][0].recv())
            except EOFError:
                err = Err(TaskError("Process {k} exited without results"
                                    .format(k=k)))
                results.append([(err,) for _ in task_lists[k]])
        else:
            err = Err(TaskTimeoutError.default(k))
            results.append([(err,) for _ in task_lists[k]])
        pipes[k][0].close()

    for k in range(1, n_processes):
        p[k].join(1)
        if p[k].is_alive():
            p[k].terminate()

    return collect_results(results, task_ids)


def run(tasks, n_processes=1, timeout=None):
    """Schedule and execute independent tasks.

    Parameters
    ----------
    tasks : Dict[Hashable, Tuple[Callable, Any, float]]
        Tasks keyed by ID, each a triple of (function, arguments, estimated
        cost).
    n_processes : int, optional
        Number of processes to use for execution, default 1 (in-process).
    timeout : float, optional
        Optional timeout in seconds, default is no timeout.

    Returns
    -------
    Dict[Hashable, Any]
        Task results keyed by task ID; failed tasks hold an ``Err``.
    """

    task_lists, task_ids = earliest_finish_time(tasks, n_processes)
    logger.debug("Running %d tasks on %d process(es)", len(tasks),
                 len(task_lists))
    return execute_task_lists(task_lists, task_ids, timeout=timeout)


def unwrap(results):
    """Raise the first failure in a result dict, otherwise return it.

    Parameters
    ----------
    results : Dict[Hashable, Any]

    Returns
    -------
    Dict[Hashable, Any]
    """

    for key in sorted(results, key=repr):
        if isinstance(results[key], Err):
            raise TaskError.default(results[key])
    return results
