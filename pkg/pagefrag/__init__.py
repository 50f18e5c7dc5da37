"""
Fragment-based state abstraction for web app crawling and regression testing.

Modules:
- snapshot, raster: page snapshot model, file format and synthetic rasterizer
- fragmentation: separator-based page segmentation into fragments
- treedist, comparison: tree edit distance and fragment classification
- memo: crawl-wide fragment memoization and data-fluid flags
- harness: simulated apps and whole-page baseline SAFs
- crawler: model inference
- testgen, report: test generation, execution and HTML report
- mutation, metrics: oracle and classifier evaluation
- cli: command-line entry point
"""

__version__ = "1.0.0"
