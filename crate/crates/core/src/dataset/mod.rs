//! Training-record construction: grounding and description formats,
//! conversation compression, refusal pairing and scaling subsets.

mod compress;
mod manifest;
mod prompts;
mod record;
mod refusal;

pub use compress::compress_conversations;
pub use manifest::{
    select_records, stratified_subset, Counts, DatasetManifest, Entry, SourceEntry,
};
pub use prompts::{next_move_text, SystemPrompt};
pub use record::{
    bbox_text, build_description_record, build_grounding_record, build_layout_grounding_record,
    build_refusal_record, description_text, spaced_json, tool_call_arguments, tool_call_text,
    ImageInfo, ImagePart, Part, Provenance, Record, RecordMeta, Role, Turn, TurnValue,
    REFUSAL_TEMPLATE_ID, REFUSAL_TEXT,
};
pub use refusal::{
    pool_from_records, synthesize_refusals, synthesize_refusals_with, PoolItem, RefusalImage,
};

/// Strip pipeline-only fields, compress, and validate every line.
pub fn finalize(records: Vec<Record>) -> crate::Result<Vec<Record>> {
    let cleaned = records
        .into_iter()
        .map(|mut r| {
            r.meta = None;
            r
        })
        .collect();
    let out = compress_conversations(cleaned)?;
    for r in &out {
        r.validate()?;
    }
    Ok(out)
}
