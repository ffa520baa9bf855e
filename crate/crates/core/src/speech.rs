//! Discussion capture: the recording lifecycle, live transcripts, key
//! information extraction and retrieval of notes relevant to what was said.
//!
//! Only the latest recording's transcript is kept per workspace. Chunks are
//! transcribed concurrently but their segments are appended in arrival
//! order: [`Recorder::begin_chunk`] reserves a slot when the chunk arrives
//! and [`Recorder::finish_chunk`] releases every leading slot that is done.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::AiError;
use crate::gateway::schema::{KeyInfoOutput, RetrieveOutput};
use crate::gateway::{vars, ScopedGateway, TemplateId};
use crate::ids::{NoteId, RecordingId};
use crate::keyed::KeyedNotes;
use crate::workspace::{MutationKind, Page, Position, Provenance, WorkspaceState};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Segment {
    pub index: usize,
    pub text: String,
    pub start_ms: u64,
    pub end_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum TranscriptStatus {
    Recording,
    Stopped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Transcript {
    pub recording: RecordingId,
    pub segments: Vec<Segment>,
    pub status: TranscriptStatus,
}

impl Transcript {
    pub fn is_blank(&self) -> bool {
        self.segments.iter().all(|s| s.text.trim().is_empty())
    }

    pub fn text(&self) -> String {
        self.segments
            .iter()
            .map(|s| s.text.trim())
            .filter(|t| !t.is_empty())
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// One `[index] text` line per non-empty segment.
    pub fn numbered(&self) -> String {
        self.segments
            .iter()
            .filter(|s| !s.text.trim().is_empty())
            .map(|s| format!("[{}] {}", s.index, s.text.trim()))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct KeyInfoCard {
    pub summary: String,
    pub related_note: Option<NoteId>,
    pub relevance: f64,
    pub source_span: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RelevantIdeaCard {
    pub note: NoteId,
    pub matched_sentence: String,
    pub relevance: f64,
}

/// Key information is kept at or above the threshold.
pub fn keeps_key_info(relevance: f64, threshold: f64) -> bool {
    relevance >= threshold
}

/// Retrieved notes must score strictly above the threshold.
pub fn keeps_retrieval(relevance: f64, threshold: f64) -> bool {
    relevance > threshold
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChunkSlot(u64);

#[derive(Debug, Clone)]
struct Pending {
    start_ms: u64,
    end_ms: u64,
    outcome: Option<Option<String>>,
}

/// Per-workspace transcript holder. Times are milliseconds since the
/// recording started.
#[derive(Debug, Clone, Default)]
pub struct Recorder {
    transcript: Option<Transcript>,
    started_at_ms: u64,
    last_end_ms: u64,
    next_slot: u64,
    pending: BTreeMap<u64, Pending>,
    next_index: usize,
    /// The stopped transcript has been handed out.
    delivered: bool,
}

impl Recorder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn transcript(&self) -> Option<&Transcript> {
        self.transcript.as_ref()
    }

    pub fn active(&self) -> Option<&RecordingId> {
        self.transcript
            .as_ref()
            .filter(|t| t.status == TranscriptStatus::Recording)
            .map(|t| &t.recording)
    }

    /// Mutation that marks the workspace as recording, after checking none
    /// is active.
    pub fn start_mutation(state: &WorkspaceState, id: RecordingId) -> Result<MutationKind, AiError> {
        if state.active_recording.is_some() {
            return Err(AiError::RecordingAlreadyActive);
        }
        Ok(MutationKind::SetRecording {
            recording: Some(id),
        })
    }

    pub fn stop_mutation(state: &WorkspaceState) -> Result<MutationKind, AiError> {
        if state.active_recording.is_none() {
            return Err(AiError::NoActiveRecording);
        }
        Ok(MutationKind::SetRecording { recording: None })
    }

    /// Starts a fresh transcript, discarding the previous one.
    pub fn begin(&mut self, id: RecordingId, now_ms: u64) -> Result<(), AiError> {
        if self.active().is_some() {
            return Err(AiError::RecordingAlreadyActive);
        }
        *self = Recorder {
            transcript: Some(Transcript {
                recording: id,
                segments: Vec::new(),
                status: TranscriptStatus::Recording,
            }),
            started_at_ms: now_ms,
            ..Recorder::default()
        };
        Ok(())
    }

    /// Freezes the transcript. Chunks still being transcribed are dropped.
    /// Stops accepting chunks. Chunks already being transcribed still land;
    /// the transcript is returned once none is outstanding, otherwise later
    /// from [`Recorder::take_finished`].
    pub fn stop(&mut self) -> Result<Option<Transcript>, AiError> {
        let t = self
            .transcript
            .as_mut()
            .filter(|t| t.status == TranscriptStatus::Recording)
            .ok_or(AiError::NoActiveRecording)?;
        t.status = TranscriptStatus::Stopped;
        Ok(self.take_finished())
    }

    /// The stopped transcript, exactly once, when no chunk is outstanding.
    pub fn take_finished(&mut self) -> Option<Transcript> {
        let t = self.transcript.as_ref()?;
        if t.status != TranscriptStatus::Stopped || !self.pending.is_empty() || self.delivered {
            return None;
        }
        self.delivered = true;
        Some(t.clone())
    }

    /// Stops at once, dropping outstanding chunks. Returns the transcript
    /// unless it was already handed out.
    pub fn abort(&mut self) -> Option<Transcript> {
        let t = self.transcript.as_mut()?;
        t.status = TranscriptStatus::Stopped;
        self.pending.clear();
        self.take_finished()
    }

    /// The recording chunks may still land in: active, or stopped with
    /// transcriptions outstanding.
    pub fn accepting_results(&self) -> Option<&RecordingId> {
        let t = self.transcript.as_ref()?;
        (t.status == TranscriptStatus::Recording || !self.pending.is_empty()).then_some(&t.recording)
    }

    pub fn begin_chunk(&mut self, now_ms: u64) -> Result<ChunkSlot, AiError> {
        if self.active().is_none() {
            return Err(AiError::NoActiveRecording);
        }
        let end_ms = now_ms.saturating_sub(self.started_at_ms).max(self.last_end_ms);
        let slot = self.next_slot;
        self.next_slot += 1;
        self.pending.insert(
            slot,
            Pending {
                start_ms: self.last_end_ms,
                end_ms,
                outcome: None,
            },
        );
        self.last_end_ms = end_ms;
        Ok(ChunkSlot(slot))
    }

    /// Records a chunk's text (`None` when transcription failed) and returns
    /// the segments that became appendable, in order. Empty text is not
    /// appended.
    pub fn finish_chunk(&mut self, slot: ChunkSlot, text: Option<String>) -> Vec<Segment> {
        let Some(p) = self.pending.get_mut(&slot.0) else {
            return Vec::new();
        };
        p.outcome = Some(text);
        let mut ready = Vec::new();
        while let Some(entry) = self.pending.first_entry() {
            if entry.get().outcome.is_none() {
                break;
            }
            let p = entry.remove();
            let Some(text) = p.outcome.flatten().filter(|t| !t.trim().is_empty()) else {
                continue;
            };
            let segment = Segment {
                index: self.next_index,
                text: text.trim().to_string(),
                start_ms: p.start_ms,
                end_ms: p.end_ms,
            };
            self.next_index += 1;
            if let Some(t) = self.transcript.as_mut() {
                t.segments.push(segment.clone());
            }
            ready.push(segment);
        }
        ready
    }
}

/// Transcribes one chunk straight into the recorder (no concurrency).
pub async fn transcribe_chunk(
    gw: &ScopedGateway,
    recorder: &mut Recorder,
    chunk: &[u8],
    now_ms: u64,
) -> Result<Vec<Segment>, AiError> {
    let slot = recorder.begin_chunk(now_ms)?;
    if chunk.is_empty() {
        return Ok(recorder.finish_chunk(slot, Some(String::new())));
    }
    match gw.transcribe(chunk).await {
        Ok(text) => Ok(recorder.finish_chunk(slot, Some(text))),
        Err(e) => {
            recorder.finish_chunk(slot, None);
            Err(e.into())
        }
    }
}

pub async fn extract_key_info(
    gw: &ScopedGateway,
    state: &WorkspaceState,
    transcript: &Transcript,
) -> Result<Vec<KeyInfoCard>, AiError> {
    if transcript.is_blank() {
        return Err(AiError::EmptyTranscript);
    }
    let keyed = KeyedNotes::new(state.main_notes());
    let out = gw
        .complete_structured::<KeyInfoOutput>(
            TemplateId::KeyInfoExtract,
            &vars([
                ("notes", keyed.describe(state, |_| Vec::new())),
                ("transcript", transcript.numbered()),
            ]),
        )
        .await?;
    let threshold = state.settings.relevance_threshold;
    let valid_index = |i: &usize| transcript.segments.iter().any(|s| s.index == *i);
    Ok(out
        .value
        .key_information
        .into_iter()
        .filter(|k| keeps_key_info(k.relevance, threshold))
        .map(|k| KeyInfoCard {
            summary: k.summary.trim().to_string(),
            related_note: k
                .related_note
                .as_deref()
                .and_then(|key| keyed.resolve(key))
                .cloned(),
            relevance: k.relevance,
            source_span: k.segments.into_iter().filter(valid_index).collect(),
        })
        .collect())
}

pub async fn retrieve_relevant_ideas(
    gw: &ScopedGateway,
    state: &WorkspaceState,
    transcript: &Transcript,
) -> Result<Vec<RelevantIdeaCard>, AiError> {
    if transcript.is_blank() {
        return Err(AiError::EmptyTranscript);
    }
    let notes = state.main_notes();
    if notes.is_empty() {
        return Ok(Vec::new());
    }
    let keyed = KeyedNotes::new(notes);
    let out = gw
        .complete_structured::<RetrieveOutput>(
            TemplateId::RelevantIdeaRetrieve,
            &vars([
                ("notes", keyed.describe(state, |_| Vec::new())),
                ("transcript", transcript.text()),
            ]),
        )
        .await?;
    Ok(select_relevant(
        out.value
            .notes
            .iter()
            .filter_map(|n| Some((keyed.resolve(&n.note)?.clone(), n.sentence.trim().to_string(), n.relevance))),
        state.settings.relevance_threshold,
    ))
}

/// One card per note scoring strictly above the threshold, keeping that
/// note's best-scoring entry (earlier wins ties), best first. Cards with
/// equal scores keep the order in which their notes first qualified.
pub fn select_relevant(
    entries: impl IntoIterator<Item = (NoteId, String, f64)>,
    threshold: f64,
) -> Vec<RelevantIdeaCard> {
    let mut cards: Vec<RelevantIdeaCard> = Vec::new();
    let mut slot: HashMap<NoteId, usize> = HashMap::new();
    for (note, sentence, relevance) in entries {
        if !keeps_retrieval(relevance, threshold) {
            continue;
        }
        let card = RelevantIdeaCard {
            note: note.clone(),
            matched_sentence: sentence,
            relevance,
        };
        match slot.get(&note) {
            Some(&i) if cards[i].relevance >= relevance => {}
            Some(&i) => cards[i] = card,
            None => {
                slot.insert(note, cards.len());
                cards.push(card);
            }
        }
    }
    cards.sort_by(|a, b| b.relevance.total_cmp(&a.relevance));
    cards
}

/// A note holding the card's summary, one unit below its related note when
/// that note still exists.
pub fn card_to_note(state: &WorkspaceState, card: &KeyInfoCard) -> MutationKind {
    let (position, page) = match card.related_note.as_ref().and_then(|id| state.note(id)) {
        Some(n) => (n.position.offset(0.0, 1.0), n.page.clone()),
        None => (Position::ORIGIN, Page::Main),
    };
    MutationKind::CreateNote {
        id: None,
        text: card.summary.clone(),
        position,
        page,
        provenance: Provenance::DiscussionExtraction,
        group: None,
    }
}
