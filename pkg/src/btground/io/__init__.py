"""File formats: domains, task sets, behavior trees and results."""

from .bttext import parse_bt, render_bt, render_dot
from .domain import (
    DomainFile,
    TaskSetFile,
    load_domain,
    load_taskset,
    parse_domain,
    parse_taskset,
    serialize_domain,
    serialize_taskset,
)

__all__ = [
    "DomainFile",
    "TaskSetFile",
    "load_domain",
    "load_taskset",
    "parse_bt",
    "parse_domain",
    "parse_taskset",
    "render_bt",
    "render_dot",
    "serialize_domain",
    "serialize_taskset",
]
