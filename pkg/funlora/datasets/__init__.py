"""
Task streams for class-incremental runs
"""
from funlora.datasets.streams import Task, TaskStream, make_task_stream

__all__ = ["Task", "TaskStream", "make_task_stream"]
