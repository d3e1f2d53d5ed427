"""Bayesian bipartite record linkage with transliteration-aware name comparison.

Links two files of person records (one file per record system, each record
matching at most one on the other side), scoring name agreement on a
four-level scale that knows pinyin and Wade-Giles are spellings of the same
names. Inference is a Gibbs sampler over the full linkage structure, with an
exact enumeration oracle for small instances and posterior summaries designed
for downstream per-record uncertainty propagation.
"""

__version__ = "0.1.0"

from .errors import ConfigError, DataError, TranslinkError

__all__ = ["ConfigError", "DataError", "TranslinkError", "__version__"]
