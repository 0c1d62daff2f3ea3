//! Utterance to program translation.

mod backend;
mod index;
mod normalize;
mod translate;

pub use backend::{BackendError, ExternalBackend};
pub use index::{smooth_idf, TfIdfIndex};
pub use normalize::{normalize_and_slot, pattern_slots, PatternError, SlotSpec, SlotValue, Unit, NUM_TOKEN};
pub use translate::{
    fill_slots, Backend, Nearest, TranslateError, TranslationCandidate, TranslationContext, Translator, TranslatorConfig,
    DEFAULT_MIN_SCORE, DEFAULT_TOP_K,
};
