"""Synthetic instrument-segmentation datasets from one background image.

One background and a few alpha-matted cutouts per class are expanded into
augmented pools, pasted together into labeled scenes and optionally mixed
with chained photometric augmentations.
"""

__version__ = "0.1.0"
