use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Every failure the core can report.
///
/// [`Error::code`] gives a stable `module.kind` identifier that the command
/// line prints in front of the message.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    InvalidCoordinate { lat: f64, lon: f64 },
    InvalidArticle(String),
    DuplicateId(String),
    EmptyCorpus,
    EmptyVocabulary,
    Diverged { epoch: usize },
    UnknownDocument(String),
    InvalidConfig(String),
    EmptyIndex,
    InsufficientArticles { requested: usize, available: usize },
    TooFewColumns { usable: usize },
    TooFewRows { rows: usize },
    InvalidMatrix(String),
    MissingEmbedding(String),
    InvalidImage(String),
    DimensionMismatch { expected: usize, got: usize },
    EmptyDataset,
    UndefinedCorrelation,
    LengthMismatch { left: usize, right: usize },
    MissingCountry(String),
    MissingImage(String),
    OverlappingSplit(String),
    InvalidSpec(String),
    DegeneratePca,
    TooFewPoints { needed: usize, got: usize },
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidCoordinate { .. } => "geoindex.invalid_coordinate",
            Error::InvalidArticle(_) => "corpus.invalid_article",
            Error::DuplicateId(_) => "corpus.duplicate_id",
            Error::EmptyCorpus => "embed.empty_corpus",
            Error::EmptyVocabulary => "embed.empty_vocabulary",
            Error::Diverged { .. } => "train.diverged",
            Error::UnknownDocument(_) => "embed.unknown_document",
            Error::InvalidConfig(_) => "config.invalid",
            Error::EmptyIndex => "geoindex.empty",
            Error::InsufficientArticles { .. } => "geoindex.insufficient_articles",
            Error::TooFewColumns { .. } => "survey.too_few_columns",
            Error::TooFewRows { .. } => "survey.too_few_rows",
            Error::InvalidMatrix(_) => "survey.invalid_matrix",
            Error::MissingEmbedding(_) => "features.missing_embedding",
            Error::InvalidImage(_) => "features.invalid_image",
            Error::DimensionMismatch { .. } => "nn.dimension_mismatch",
            Error::EmptyDataset => "nn.empty_dataset",
            Error::UndefinedCorrelation => "eval.undefined_correlation",
            Error::LengthMismatch { .. } => "eval.length_mismatch",
            Error::MissingCountry(_) => "eval.missing_country",
            Error::MissingImage(_) => "eval.missing_image",
            Error::OverlappingSplit(_) => "eval.overlapping_split",
            Error::InvalidSpec(_) => "eval.invalid_spec",
            Error::DegeneratePca => "pca.degenerate",
            Error::TooFewPoints { .. } => "interpret.too_few_points",
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidCoordinate { lat, lon } => {
                write!(f, "coordinate ({lat}, {lon}) out of range")
            }
            Error::InvalidArticle(why) => write!(f, "invalid article: {why}"),
            Error::DuplicateId(id) => write!(f, "duplicate id {id:?}"),
            Error::EmptyCorpus => f.write_str("empty corpus"),
            Error::EmptyVocabulary => f.write_str("empty vocabulary"),
            Error::Diverged { epoch } => write!(f, "diverged (non-finite loss in epoch {epoch})"),
            Error::UnknownDocument(id) => write!(f, "unknown document {id:?}"),
            Error::InvalidConfig(why) => write!(f, "invalid configuration: {why}"),
            Error::EmptyIndex => f.write_str("cannot build an index from zero points"),
            Error::InsufficientArticles { requested, available } => write!(
                f,
                "insufficient articles: {requested} neighbours requested, {available} indexed"
            ),
            Error::TooFewColumns { usable } => {
                write!(f, "need at least 2 non-constant columns, found {usable}")
            }
            Error::TooFewRows { rows } => write!(f, "need at least 2 rows, found {rows}"),
            Error::InvalidMatrix(why) => write!(f, "invalid asset matrix: {why}"),
            Error::MissingEmbedding(id) => write!(f, "no embedding for article {id:?}"),
            Error::InvalidImage(why) => write!(f, "invalid image: {why}"),
            Error::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            Error::EmptyDataset => f.write_str("empty dataset"),
            Error::UndefinedCorrelation => {
                f.write_str("undefined correlation (constant input)")
            }
            Error::LengthMismatch { left, right } => {
                write!(f, "length mismatch: {left} vs {right}")
            }
            Error::MissingCountry(c) => write!(f, "no survey points for country {c:?}"),
            Error::MissingImage(id) => write!(f, "no nightlight image for point {id:?}"),
            Error::OverlappingSplit(id) => {
                write!(f, "train and test sets share cluster {id:?}")
            }
            Error::InvalidSpec(why) => write!(f, "invalid experiment: {why}"),
            Error::DegeneratePca => f.write_str("zero variance, principal components undefined"),
            Error::TooFewPoints { needed, got } => {
                write!(f, "need at least {needed} points, got {got}")
            }
        }
    }
}

impl core::error::Error for Error {}
