//! Statistics and chat-corpus analysis.

pub mod regression;
pub mod stats;
pub mod text;
pub mod window;

pub use regression::{contrast_code, ols_fit, Design, Factor, RegressionResult, RegressionTerm};
pub use stats::{
    chi_square_independence, chi_square_sf, t_test_two_sided, t_two_sided_p, ChiSquareResult,
    TTestKind, TTestResult,
};
pub use text::{
    category_proportions, lemmatize, ngram_counts, summarize_corpus, tokenize, Category,
    CategoryLexicon, CorpusSummary, TermCount,
};
pub use window::{canonical_weights, fit_window_utilities, window_dataset};
