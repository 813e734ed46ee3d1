"""S-machines, their presentations and van Kampen diagrams."""

__version__ = "0.1.0"
