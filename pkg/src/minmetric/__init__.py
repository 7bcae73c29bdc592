"""Compatible left-invariant metrics on concrete groups.

Constructs metrics (Birkhoff, Kakutani, word, path, bi-invariant),
certifies the power-growth conditions characterising minimal metrics,
and builds one-parameter subgroups from iterated square roots.
"""

__version__ = "0.1.0"
