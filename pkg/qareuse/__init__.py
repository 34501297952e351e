"""
A package for studying code reuse between a Q&A site and software apps.

This package extracts code snippets from Stack Exchange dumps and from
application releases, detects near-miss clones between the two corpora,
dates the app side from version-control history to infer the direction of
reuse, identifies the licenses involved, and reports potential license
violations, migrations of code between apps and clone lifespans.

Exports:
- Pipeline: Runs the stages over a work directory.
- DumpClient: Downloads remote dumps.
- config: Configuration handling for the module and application.
- Stage operations: parse_dump, filter_posts, extract_snippets, scan_release,
  index_history, load_inconsistencies, normalize, similarity, detect_cross,
  plan_shards, run_sharded, identify, satisfies_sharealike, same_license,
  date_snippet, classify_direction, compute_overlap, detect_migrations,
  track_lifespan, check_app_side, check_post_side, emit_report.
- Models: Post, CodeSnippet, ClonePair, CloneClass, ProvenanceRecord, ...
- Exceptions: qareuse-specific exceptions for error handling.
"""

# Import pipeline and client
from .pipeline import Pipeline, PipelineManifest
from .client import DumpClient

# Import stage operations
from .qa_ingest import parse_dump, filter_posts, extract_snippets, ingest_posts
from .repo_ingest import scan_release, index_history, load_inconsistencies
from .clone_engine import normalize, similarity, detect_cross, plan_shards, run_sharded
from .license_id import LicenseCatalog, identify, satisfies_sharealike, same_license
from .provenance import (
    date_snippet,
    classify_direction,
    compute_overlap,
    detect_migrations,
    track_lifespan,
)
from .report import RunReport, ReportFormat, check_app_side, check_post_side, emit_report

# Import models
from .models import (
    Post,
    CodeSnippet,
    AppRelease,
    FileRecord,
    AddedLineIndex,
    InconsistencyRange,
    CloneConfig,
    ClonePair,
    CloneClass,
    LicenseFinding,
    ProvenanceRecord,
    MigrationChain,
    LifespanRecord,
    ViolationReport,
    NormalizationLevel,
    Direction,
    Resolution,
    LicenseScope,
    Rule,
)

# Import exceptions
from .exceptions import (
    QAReuseError,
    ConfigurationError,
    InputError,
    DumpParseError,
    RepositoryError,
    InconsistencyRowError,
    ManifestError,
    DownloadError,
    DomainError,
    PipelineError,
    IncompleteShardsError,
)

# Import config
from .config import config

__version__ = "0.1.0"

__all__ = [
    # Pipeline and client
    'Pipeline',
    'PipelineManifest',
    'DumpClient',

    # Stage operations
    'parse_dump',
    'filter_posts',
    'extract_snippets',
    'ingest_posts',
    'scan_release',
    'index_history',
    'load_inconsistencies',
    'normalize',
    'similarity',
    'detect_cross',
    'plan_shards',
    'run_sharded',
    'LicenseCatalog',
    'identify',
    'satisfies_sharealike',
    'same_license',
    'date_snippet',
    'classify_direction',
    'compute_overlap',
    'detect_migrations',
    'track_lifespan',
    'RunReport',
    'ReportFormat',
    'check_app_side',
    'check_post_side',
    'emit_report',

    # Models
    'Post',
    'CodeSnippet',
    'AppRelease',
    'FileRecord',
    'AddedLineIndex',
    'InconsistencyRange',
    'CloneConfig',
    'ClonePair',
    'CloneClass',
    'LicenseFinding',
    'ProvenanceRecord',
    'MigrationChain',
    'LifespanRecord',
    'ViolationReport',
    'NormalizationLevel',
    'Direction',
    'Resolution',
    'LicenseScope',
    'Rule',

    # Exceptions
    'QAReuseError',
    'ConfigurationError',
    'InputError',
    'DumpParseError',
    'RepositoryError',
    'InconsistencyRowError',
    'ManifestError',
    'DownloadError',
    'DomainError',
    'PipelineError',
    'IncompleteShardsError',

    # Config
    'config',
]
