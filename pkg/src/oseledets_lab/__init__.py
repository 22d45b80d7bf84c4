"""Numerical laboratory for Oseledets regularity functions on Anosov suspension flows."""

from .dynamics import BaseMap, FlowPoint, Observable, PointSet, RoofFunction, SuspensionFlow, cat_suspension
from .errors import LabError

__version__ = "0.1.0"

__all__ = [
    "BaseMap",
    "FlowPoint",
    "LabError",
    "Observable",
    "PointSet",
    "RoofFunction",
    "SuspensionFlow",
    "cat_suspension",
]
