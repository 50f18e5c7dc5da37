"""
Helper modules for the pagefrag command line and pipeline.

This package contains infrastructure code:
- paths: output-root and fixture path helpers
- run_manifest: per-run manifest (configs, seed, versions, output digests)
"""

__version__ = "1.0.0"
