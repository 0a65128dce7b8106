"""minirel: a small relational database server.

The SQL frontend is built on a reusable event-driven automaton framework
(:mod:`minirel.automaton`).  Tables live in fixed-length plain-text record
files fronted by a paged cache, secondary access paths are B+ trees, and a
length-prefixed TCP protocol exposes the whole thing to clients in any
language.
"""

__version__ = "0.1.0"
