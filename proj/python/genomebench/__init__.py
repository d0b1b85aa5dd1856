"""Python bindings for the genomebench C++ core.

The heavy lifting lives in the compiled `_core` extension: mbox ingestion,
the rule-based reward, MCQ assembly, curation, the GRPO trainer, the expert
router, and the evaluation harness.
"""

try:
    # installed wheel layout: the extension sits inside this package
    from genomebench._core import *  # noqa: F401,F403
    from genomebench._core import __version__  # noqa: F401
except ImportError:
    # development layout: the extension is on PYTHONPATH from the build tree
    from _core import *  # noqa: F401,F403
    from _core import __version__  # noqa: F401
