"""passviz: structural visualisation of password corpora.

Pipeline: load a dump, measure every password against a small anchor set
(Levenshtein), reduce the anchor-distance rows to the plane with t-SNE,
then colour, cluster, compare, and export for the interactive viewer.
"""

__version__ = "0.1.0"

from .cluster import (
    ClusterAssignment,
    center_passwords,
    dbscan,
    kmeans,
    majority_length_labels,
    optics,
)
from .compare import IntersectionReport, compare_digit_profiles, intersect, mark_membership
from .corpus import (
    Corpus,
    PasswordRecord,
    StatsReport,
    corpus_from_texts,
    corpus_stats,
    load_corpus,
    sample_corpus,
)
from .embed import (
    Embedding,
    TsneParams,
    kl_divergence,
    kl_gradient,
    load_embedding,
    save_embedding,
    trustworthiness,
    tsne_embed,
)
from .errors import (
    DomainError,
    NumericalError,
    PassvizError,
    SchemaVersionError,
    UsageError,
)
from .estimators import DBSCAN, OPTICS, AnchorDistance, KMeans, TsneEmbedder
from .features import (
    PasswordFeatures,
    char_at,
    digit_position_ratio,
    digit_ratio,
    digit_ratio_decile,
    extract_features,
    feature_table,
    find_years,
    has_keyboard_sequence,
    has_numeric_sequence,
    matches_regex,
)
from .metric import (
    AnchorSet,
    DistanceMatrix,
    anchor_row,
    build_distance_matrix,
    levenshtein,
    levenshtein_block,
    load_distance_matrix,
    save_distance_matrix,
    select_anchors,
)
from .render import (
    ExportBundle,
    HighlightRule,
    RenderSpec,
    build_bundle,
    read_bundle,
    render_scatter,
    write_bundle,
)
