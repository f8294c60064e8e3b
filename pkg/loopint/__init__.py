"""loopint: the loop-space integral map on flat tori and the circle."""

__version__ = "0.1.0"
