"""Design of low-coherence sensing matrices and projections.

``dmcm`` minimizes the mutual coherence of a unit-column matrix by proximal
gradient on a smoothed objective; ``dmcmp`` designs a projection ``P`` so that
``P D`` has low coherence for a given dictionary ``D``.
"""

from .dmcm import ContinuationSchedule, dmcm_continuation, random_unit_matrix
from .dmcmp import AmSchedule, Dictionary, dmcmp_continuation
from .matcore import coherence_of, mutual_coherence, normalize_columns, welch_bound

__version__ = "0.1.0"

__all__ = [
    "AmSchedule", "ContinuationSchedule", "Dictionary", "coherence_of", "dmcm_continuation",
    "dmcmp_continuation", "mutual_coherence", "normalize_columns", "random_unit_matrix",
    "welch_bound",
]
