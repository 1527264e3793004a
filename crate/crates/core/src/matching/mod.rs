//! Match conditions between descriptors and the search structures built on
//! them: the offline surface pair index and same-kind pair extraction.

pub mod conditions;
pub mod extract;
pub mod index;
pub mod rtree;

pub use conditions::{
    cc_sign_choices, check_conditions_cc, check_necessary_cs, check_simultaneous_cs, necessary_cs_with_slack,
    simultaneous_residual_cs, simultaneous_residual_terms, SimultaneityTerms,
};
pub use extract::{extract_pairs_cc, target_tuple, SameKindPairs};
pub use index::{
    build_pair_index, query_pair_index, record_matches, CorrespondenceOrder, MatchCandidate, PairIndex,
    PairIndexConfig, PairRecord, QueryParams, DEFAULT_SUBSAMPLE_SIZE,
};
