"""Embedding-based dataset cleaning.

Ranks and flags off-topic samples, near duplicates, and label errors in a
precomputed embedding matrix, with an automatic statistical cutoff mode and
a human-in-the-loop review service.
"""

from .autocut import (
    CutoffDecision,
    TailFit,
    decide_cutoff,
    fit_left_tail,
    logit_transform,
    quantile_fractions,
    sensitivity_sweep,
)
from .bench import (
    EffortCurve,
    GroundTruth,
    auroc,
    average_precision,
    contaminate_labels_prevalence,
    contaminate_labels_uniform,
    effort_curve,
    evaluate,
    mann_whitney_one_sided,
    mixed_schedule,
    plant_duplicates,
    plant_offtopic,
)
from .errors import EmbcleanError, InputError
from .indicators import LabelErrorRanking, label_error_ranking, near_duplicate_ranking
from .io import (
    CleaningConfig,
    EmbeddingMatrix,
    LabelVector,
    Ranking,
    load_embeddings,
    load_labels,
    load_ranking,
    normalize_rows,
    save_embeddings,
    save_labels,
    save_ranking,
)
from .metric import NeighborResult, cosine_distance, nearest_same_diff, top_k_pairs
from .offtopic import (
    Dendrogram,
    LadScores,
    SortedDendrogram,
    lad_scores,
    offtopic_ranking,
    single_linkage,
    sort_dendrogram,
)

__version__ = "0.1.0"
