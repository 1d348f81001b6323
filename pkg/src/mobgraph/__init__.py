"""Scientific mobility indicators from bibliographic records."""

from .disambig import Scholar, ScoringWeights, disambiguate
from .flows import FlowMatrix, flow_matrix
from .indicators import CountryProfile, ShareReport, percent, profile_report
from .ingest import AuthorMention, IngestConfig, PublicationRecord, parse_publications
from .taxonomy import CountryRole, MobilityClassification, MobilityType, classify, classify_all
from .timeline import AffiliationTimeline, build_timeline, impute_gaps, timelines_for_corpus

__version__ = "0.1.0"

__all__ = [
    "AffiliationTimeline",
    "AuthorMention",
    "CountryProfile",
    "CountryRole",
    "FlowMatrix",
    "IngestConfig",
    "MobilityClassification",
    "MobilityType",
    "PublicationRecord",
    "Scholar",
    "ScoringWeights",
    "ShareReport",
    "build_timeline",
    "classify",
    "classify_all",
    "disambiguate",
    "flow_matrix",
    "impute_gaps",
    "parse_publications",
    "percent",
    "profile_report",
    "timelines_for_corpus",
]
