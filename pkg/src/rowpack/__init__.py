"""Model-based compression of relational datasets.

Rows are encoded against per-column probability models conditioned on
a learned inter-column dependency structure, using a deterministic
finite-precision interval coder.  Numeric columns support bounded-error
reconstruction; everything else is lossless.
"""

from .bayesnet import (
    BayesNetStructure,
    SearchReport,
    StructureSearchConfig,
    learn_structure,
)
from .codec import (
    Bits,
    BitReader,
    BitWriter,
    CodecConfig,
    CodecError,
    CorruptStream,
    DEFAULT_CONFIG,
    Decoder,
    Encoder,
    ProbabilityInterval,
    cumulative_intervals,
    encode_intervals,
    interval_product,
    snap_distribution,
)
from .core import (
    Categorical,
    Column,
    Dataset,
    Numerical,
    Schema,
    SchemaError,
    Text,
    Violation,
    closeness_check,
    validate_row,
    validate_rows,
    values_close,
)
from .delta import delta_decode, delta_encode
from .engine import (
    Archive,
    ArchiveStats,
    Compressor,
    EngineOptions,
    compress,
    decompress,
    iter_rows,
)
from .models import (
    CategoricalModel,
    ConfigError,
    ModelCost,
    ModelError,
    NumericModel,
    StringModel,
    fit_categorical,
    fit_numeric,
    fit_string,
    parent_interpreter,
)
from .probtree import (
    BisectionTree,
    BranchDistribution,
    CategoricalTree,
    GeometricBucketTree,
    IdentityInterpreter,
    LeafOutcome,
    LengthInterpreter,
    ProbabilityTree,
    RangeBinning,
    StringTree,
    TreeCursor,
    TreeError,
    build_numerical_tree,
    build_string_tree,
    interpret,
    route,
)
from .storage import (
    ColumnSpec,
    IngestError,
    IngestionConfig,
    StoredArchive,
    ingest_csv,
    read_archive,
    write_archive,
)

__version__ = "0.1.0"

__all__ = [
    "Archive",
    "ArchiveStats",
    "BayesNetStructure",
    "BisectionTree",
    "BitReader",
    "Bits",
    "BitWriter",
    "BranchDistribution",
    "Categorical",
    "CategoricalModel",
    "CategoricalTree",
    "CodecConfig",
    "CodecError",
    "Column",
    "ColumnSpec",
    "Compressor",
    "ConfigError",
    "CorruptStream",
    "DEFAULT_CONFIG",
    "Dataset",
    "Decoder",
    "Encoder",
    "EngineOptions",
    "GeometricBucketTree",
    "IdentityInterpreter",
    "IngestError",
    "IngestionConfig",
    "LeafOutcome",
    "LengthInterpreter",
    "ModelCost",
    "ModelError",
    "NumericModel",
    "Numerical",
    "ProbabilityInterval",
    "ProbabilityTree",
    "RangeBinning",
    "Schema",
    "SchemaError",
    "SearchReport",
    "StoredArchive",
    "StringModel",
    "StringTree",
    "StructureSearchConfig",
    "Text",
    "TreeCursor",
    "TreeError",
    "Violation",
    "closeness_check",
    "compress",
    "cumulative_intervals",
    "decompress",
    "delta_decode",
    "delta_encode",
    "encode_intervals",
    "fit_categorical",
    "fit_numeric",
    "fit_string",
    "ingest_csv",
    "interpret",
    "interval_product",
    "iter_rows",
    "learn_structure",
    "parent_interpreter",
    "read_archive",
    "route",
    "snap_distribution",
    "validate_row",
    "validate_rows",
    "values_close",
    "write_archive",
]
