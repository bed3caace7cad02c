"""Normalized web distance (NWD) for sets of search terms.

Counts come from a :class:`FrequencySnapshot`, built from a local corpus
(:mod:`nwdkit.corpus`), a provider cache or a live search API
(:mod:`nwdkit.providers`). On top of the distance sit set-based
classification (:mod:`nwdkit.classify`) and gap-spectral clustering
(:mod:`nwdkit.cluster`).
"""
from .classify import ClassificationReport, ConfidenceInterval, LabeledClasses, classify, evaluate, wilson_interval
from .cluster import (
    ClusterAssignment,
    DistanceMatrix,
    GapCurve,
    SpectralParams,
    gap_statistic,
    intra_cluster_dispersion,
    kmeans,
    pairwise_matrix,
    select_k,
    spectral_cluster,
    symmetric_eigen,
)
from .core import MonotonicityReport, NwdValue, check_monotonicity, ngd_pair, nwd, nwd_delta, web_code_length
from .corpus import Document, PostingIndex, TokenizerConfig, ingest
from .errors import *  # noqa: F401,F403
from .kernels import BACKEND as KERNEL_BACKEND
from .snapshot import FrequencySnapshot, Provenance, TermSet, read_snapshot, write_snapshot

__version__ = "0.1.0"
