"""trex: a literate-tracing compiler.

Build documents that run a program under a debugger and splice live
values, call stacks, listings, and step-through traces into HTML or
LaTeX output.
"""

from __future__ import annotations

__version__ = "0.1.0"
