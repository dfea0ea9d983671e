"""notesim: simulation harness for crowd-sourced note scoring.

Synthetic rater/note populations rate each other over a degree-realistic
bipartite graph; a matrix-factorization scorer with a rating-consistency
filter decides which notes get published; metrics compare decisions against
the ground-truth population.
"""

from .population import (GlobalParams, Group, GroupedNormal, NoteProfile, Population,
                         PopulationSpec, RaterProfile, RatingProbs, honest_probs,
                         sample_population)

__version__ = "0.1.0"
