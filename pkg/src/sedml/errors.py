"""Warnings shared across solvers."""


class ConvergenceWarning(UserWarning):
    """An iterative solver hit its iteration cap; the best iterate is kept."""
