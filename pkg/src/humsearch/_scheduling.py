#  -*- coding: utf-8 -*-
"""Scheduling of independent tasks over several processes.

A task dict maps task IDs to ``(function, arguments, cost)`` triples. The
arguments are a single argument, a tuple or list of positional arguments or a
dict of keyword arguments; a tuple or dict that is itself the sole argument
must therefore be wrapped in a tuple.
"""


def costs(tasks):
    """Collect the computation cost of each task.

    Parameters
    ----------
    tasks : Dict[Hashable, (Callable, Any, Number)]

    Returns
    -------
    Dict[Hashable, float]
    """

    return {key: float(val[2]) for key, val in tasks.items()}


def priority(tasks):
    """Order task IDs by descending cost, ties kept in insertion order.

    With no dependencies among tasks the upward rank of a task is its own
    cost, so this is the rank order of the earliest finish time heuristic.

    Parameters
    ----------
    tasks : Dict[Hashable, (Callable, Any, Number)]

    Returns
    -------
    List[Hashable]
    """

    computation_costs = costs(tasks)
    order = list(tasks.keys())
    ranked = sorted(range(len(order)),
                    key=lambda k: (-computation_costs[order[k]], k))
    return [order[k] for k in ranked]


def add_task_eft(task, cost, finish_times, schedule):
    """Put a task on the process where it finishes first.

    Parameters
    ----------
    task : Hashable
    cost : float
    finish_times : List[float]
        Current finish time of each process, updated in place
    schedule : List[List[(Hashable, float, float)]]
        One list of (task, start, finish)-tuples per process, updated in
        place

    Returns
    -------
    int
        Index of the chosen process
    """

    process = min(range(len(finish_times)),
                  key=lambda k: (finish_times[k] + cost, k))
    start = finish_times[process]
    schedule[process].append((task, start, start + cost))
    finish_times[process] = start + cost
    return process


def earliest_finish_time(tasks, n_processes):
    """Generate a list of ``n_processes`` task lists from independent tasks.

    Parameters
    ----------
    tasks : Dict[Hashable, (Callable, Any, Number)]
        Independent tasks keyed by task ID.
    n_processes : int
        Number of processes to use for execution.

    Returns
    -------
    List[List[(Callable, Any)]]
        A list of task lists.
    List[List[Hashable]]
        A list of lists for mapping execution results to task IDs.
    """

    if n_processes < 1:
        raise ValueError("n_processes must be at least 1")

    n_processes = max(1, min(n_processes, len(tasks)))
    computation_costs = costs(tasks)
    schedule = [[] for _ in range(n_processes)]
    finish_times = [0.0] * n_processes

    for task in priority(tasks):
        add_task_eft(task, computation_costs[task], finish_times, schedule)

    task_lists = [[(tasks[task][0], tasks[task][1])
                   for task, _, _ in process_schedule]
                  for process_schedule in schedule]
    task_ids = [[task for task, _, _ in process_schedule]
                for process_schedule in schedule]

    return task_lists, task_ids

