use std::collections::{BTreeMap, HashMap, VecDeque};
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Mutex;

use super::{read_transcript, BackendReply, ChatBackend, ChatExchange, ChatRequest, GatewayConfig, GatewayError, TokenUsage};
use crate::prompts::{extract_sections, parse_row, render_values, RowQuery};
use crate::schedule::COL_ID;
use crate::text::{token_count, tokens};

/// Answer emitted by [`ConstantWrong`] for every cell.
pub const WRONG_TOKEN: &str = "__WRONG__";

/// Row id to column to canonical value.
pub type TruthTable = BTreeMap<String, BTreeMap<String, String>>;

fn reply(request: &ChatRequest, text: String) -> BackendReply {
    BackendReply {
        usage: TokenUsage {
            prompt: (token_count(&request.system_text) + token_count(&request.user_text)) as u64,
            completion: token_count(&text) as u64,
        },
        text,
        latency_ms: 0,
    }
}

fn row_query(request: &ChatRequest) -> Option<RowQuery> {
    extract_sections(&request.user_text).map(|s| parse_row(&s.row))
}

/// The sections of a prompt as they would be rendered, or the whole user
/// text when it has no sections.
fn raw_context(request: &ChatRequest) -> String {
    extract_sections(&request.user_text)
        .map(|s| s.render())
        .unwrap_or_else(|| request.user_text.clone())
}

/// Answers every masked cell with its ground-truth value. Prompts without
/// masked cells are echoed back unchanged.
pub struct EchoOracle {
    truth: TruthTable,
}

impl EchoOracle {
    pub fn new(truth: TruthTable) -> Self {
        Self { truth }
    }
}

impl ChatBackend for EchoOracle {
    fn name(&self) -> &str {
        "mock:echo"
    }

    fn send(&self, _: &GatewayConfig, request: &ChatRequest) -> Result<BackendReply, GatewayError> {
        let query = row_query(request).filter(|q| !q.masked.is_empty());
        let Some(query) = query else {
            return Ok(reply(request, raw_context(request)));
        };
        let missing = |what: String| GatewayError::MissingMockData { mock: "EchoOracle", what };
        let id = query.value(COL_ID).ok_or_else(|| missing("row without id".into()))?;
        let row = self.truth.get(id).ok_or_else(|| missing(format!("row {id}")))?;
        let cells = query
            .masked
            .iter()
            .map(|c| row.get(c).map(|v| vec![v.as_str()]).ok_or_else(|| missing(format!("{id}/{c}"))))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(reply(request, render_values(&cells)))
    }
}

/// Answers [`WRONG_TOKEN`] for every masked cell.
pub struct ConstantWrong;

impl ChatBackend for ConstantWrong {
    fn name(&self) -> &str {
        "mock:wrong"
    }

    fn send(&self, _: &GatewayConfig, request: &ChatRequest) -> Result<BackendReply, GatewayError> {
        let arity = row_query(request).map_or(1, |q| q.masked.len().max(1));
        Ok(reply(request, render_values(&vec![vec![WRONG_TOKEN]; arity])))
    }
}

/// Fixed responses looked up by request key, falling back to the row id.
pub struct AnswerTable {
    answers: BTreeMap<String, String>,
}

impl AnswerTable {
    pub fn new(answers: BTreeMap<String, String>) -> Self {
        Self { answers }
    }
}

impl ChatBackend for AnswerTable {
    fn name(&self) -> &str {
        "mock:table"
    }

    fn send(&self, _: &GatewayConfig, request: &ChatRequest) -> Result<BackendReply, GatewayError> {
        let by_key = request.request_key.as_ref().and_then(|k| self.answers.get(k));
        let by_row = || {
            row_query(request)
                .and_then(|q| q.value(COL_ID).map(str::to_owned))
                .and_then(|id| self.answers.get(&id))
        };
        let text = by_key.or_else(by_row).ok_or_else(|| GatewayError::MissingMockData {
            mock: "AnswerTable",
            what: request.request_key.clone().unwrap_or_else(|| request.hash()),
        })?;
        Ok(reply(request, text.clone()))
    }
}

/// Replays recorded exchanges, matched by request hash in recorded order.
pub struct ScriptedTranscript {
    queue: Mutex<(usize, HashMap<String, VecDeque<Result<String, String>>>)>,
}

impl ScriptedTranscript {
    pub fn new(exchanges: Vec<ChatExchange>) -> Self {
        let total = exchanges.len();
        let mut by_hash: HashMap<String, VecDeque<_>> = HashMap::new();
        for e in exchanges {
            let outcome = match e.response_text {
                Some(text) => Ok(text),
                None => Err(e.error.unwrap_or_default()),
            };
            by_hash.entry(e.request_hash).or_default().push_back(outcome);
        }
        Self {
            queue: Mutex::new((total, by_hash)),
        }
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self, GatewayError> {
        Ok(Self::new(read_transcript(path)?))
    }
}

impl ChatBackend for ScriptedTranscript {
    fn name(&self) -> &str {
        "mock:replay"
    }

    fn send(&self, _: &GatewayConfig, request: &ChatRequest) -> Result<BackendReply, GatewayError> {
        let mut guard = self.queue.lock().expect("transcript queue");
        let (remaining, by_hash) = &mut *guard;
        if *remaining == 0 {
            return Err(GatewayError::TranscriptExhausted);
        }
        let hash = request.hash();
        let outcome = by_hash
            .get_mut(&hash)
            .and_then(VecDeque::pop_front)
            .ok_or(GatewayError::TranscriptMismatch(hash))?;
        *remaining -= 1;
        drop(guard);
        outcome.map(|text| reply(request, text)).map_err(GatewayError::Replayed)
    }
}

const STOPWORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "all", "also", "an", "and", "any", "are", "as", "at", "be", "because",
    "been", "before", "being", "below", "between", "both", "but", "by", "can", "could", "did", "do", "does", "doing",
    "down", "during", "each", "few", "for", "from", "further", "had", "has", "have", "having", "he", "her", "here",
    "hers", "him", "his", "how", "i", "if", "in", "into", "is", "it", "its", "itself", "just", "me", "more", "most",
    "my", "no", "nor", "not", "now", "of", "off", "on", "once", "only", "or", "other", "our", "ours", "out", "over",
    "own", "same", "she", "should", "so", "some", "such", "than", "that", "the", "their", "theirs", "them", "then",
    "there", "these", "they", "this", "those", "through", "to", "too", "under", "until", "up", "very", "was", "we",
    "were", "what", "when", "where", "which", "while", "who", "whom", "why", "will", "with", "would", "you", "your",
];

pub fn is_stopword(token: &str) -> bool {
    let word = token.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase();
    !word.is_empty() && STOPWORDS.binary_search(&word.as_str()).is_ok()
}

/// Polisher that drops English stopwords from the prompt's sections.
pub struct StopwordStripper;

impl ChatBackend for StopwordStripper {
    fn name(&self) -> &str {
        "mock:strip"
    }

    fn send(&self, _: &GatewayConfig, request: &ChatRequest) -> Result<BackendReply, GatewayError> {
        let raw = raw_context(request);
        let kept: Vec<String> = tokens(&raw).into_iter().filter(|t| !is_stopword(t)).collect();
        Ok(reply(request, kept.join(" ")))
    }
}

/// Polisher that returns the prompt's sections unchanged.
pub struct IdentityPolisher;

impl ChatBackend for IdentityPolisher {
    fn name(&self) -> &str {
        "mock:identity"
    }

    fn send(&self, _: &GatewayConfig, request: &ChatRequest) -> Result<BackendReply, GatewayError> {
        Ok(reply(request, raw_context(request)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MockKind {
    EchoOracle,
    ConstantWrong,
    ScriptedTranscript,
    AnswerTable,
    StopwordStripper,
    Identity,
}

impl FromStr for MockKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "echo" | "echooracle" => MockKind::EchoOracle,
            "wrong" | "constantwrong" => MockKind::ConstantWrong,
            "replay" | "scriptedtranscript" => MockKind::ScriptedTranscript,
            "table" | "answertable" => MockKind::AnswerTable,
            "strip" | "stopwordstripper" => MockKind::StopwordStripper,
            "identity" => MockKind::Identity,
            _ => return Err(format!("unknown mock {s:?}")),
        })
    }
}

#[derive(Clone, Debug, Default)]
pub struct MockData {
    pub truth: Option<TruthTable>,
    pub transcript: Option<PathBuf>,
    pub answers: Option<BTreeMap<String, String>>,
}

pub fn register_mock(kind: MockKind, data: MockData) -> Result<Box<dyn ChatBackend>, GatewayError> {
    let missing = |mock: &'static str, what: &str| GatewayError::MissingMockData {
        mock,
        what: what.to_owned(),
    };
    Ok(match kind {
        MockKind::EchoOracle => Box::new(EchoOracle::new(
            data.truth.ok_or_else(|| missing("EchoOracle", "ground-truth table"))?,
        )),
        MockKind::ConstantWrong => Box::new(ConstantWrong),
        MockKind::ScriptedTranscript => Box::new(ScriptedTranscript::from_file(
            &data.transcript.ok_or_else(|| missing("ScriptedTranscript", "transcript file"))?,
        )?),
        MockKind::AnswerTable => Box::new(AnswerTable::new(
            data.answers.ok_or_else(|| missing("AnswerTable", "answer table"))?,
        )),
        MockKind::StopwordStripper => Box::new(StopwordStripper),
        MockKind::Identity => Box::new(IdentityPolisher),
    })
}
