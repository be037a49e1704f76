//! Textual semantic graph: document loading, concise triplet rendering, and
//! text-only generation through an external chat service.
//!
//! Graph document: `{ "nodes": [str], "triplets": [[subject, relation, object]] }`.

use std::collections::HashSet;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{AfpError, Result};
use crate::ingest::Loaded;

/// Environment variable holding the bearer token for the graph service.
pub const API_KEY_ENV: &str = "AFP_LLM_API_KEY";

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Triplet {
    pub subject: String,
    pub relation: String,
    pub object: String,
}

impl Triplet {
    pub fn new(subject: &str, relation: &str, object: &str) -> Self {
        Triplet {
            subject: subject.to_string(),
            relation: relation.to_string(),
            object: object.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SemanticGraph {
    nodes: Vec<String>,
    triplets: Vec<Triplet>,
}

#[derive(Serialize, Deserialize)]
struct GraphDoc {
    #[serde(default)]
    nodes: Vec<String>,
    #[serde(default)]
    triplets: Vec<[String; 3]>,
}

impl SemanticGraph {
    /// Validates and repairs: missing endpoint nodes are appended, duplicate
    /// nodes and triplets dropped, each with a warning. Empty strings are
    /// rejected.
    pub fn new(nodes: Vec<String>, triplets: Vec<Triplet>) -> Result<Loaded<Self>> {
        let mut warnings = Vec::new();
        let mut graph = SemanticGraph::default();
        let mut node_set = HashSet::new();

        for (i, node) in nodes.into_iter().enumerate() {
            if node.trim().is_empty() {
                return Err(AfpError::validation(format!("nodes[{i}]"), "empty node name"));
            }
            if node_set.insert(node.clone()) {
                graph.nodes.push(node);
            } else {
                warnings.push(format!("duplicate node {node:?} dropped"));
            }
        }

        let mut triplet_set = HashSet::new();
        for (i, t) in triplets.into_iter().enumerate() {
            for (field, value) in [("subject", &t.subject), ("relation", &t.relation), ("object", &t.object)] {
                if value.trim().is_empty() {
                    return Err(AfpError::validation(format!("triplets[{i}]"), format!("empty {field}")));
                }
            }
            if !triplet_set.insert(t.clone()) {
                warnings.push(format!(
                    "duplicate triplet ({}, {}, {}) dropped",
                    t.subject, t.relation, t.object
                ));
                continue;
            }
            for endpoint in [&t.subject, &t.object] {
                if node_set.insert(endpoint.clone()) {
                    warnings.push(format!("node {endpoint:?} added from triplet {i}"));
                    graph.nodes.push(endpoint.clone());
                }
            }
            graph.triplets.push(t);
        }

        for w in &warnings {
            log::warn!("semantic graph: {w}");
        }
        Ok(Loaded {
            value: graph,
            warnings,
        })
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn triplets(&self) -> &[Triplet] {
        &self.triplets
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty() && self.triplets.is_empty()
    }

    pub fn to_json(&self) -> String {
        let doc = GraphDoc {
            nodes: self.nodes.clone(),
            triplets: self
                .triplets
                .iter()
                .map(|t| [t.subject.clone(), t.relation.clone(), t.object.clone()])
                .collect(),
        };
        serde_json::to_string(&doc).expect("graph serialization is infallible")
    }
}

pub fn parse_graph(text: &str) -> Result<Loaded<SemanticGraph>> {
    let doc: GraphDoc = serde_json::from_str(text).map_err(|e| AfpError::parse("graph", e))?;
    let triplets = doc
        .triplets
        .into_iter()
        .map(|[s, r, o]| Triplet {
            subject: s,
            relation: r,
            object: o,
        })
        .collect();
    SemanticGraph::new(doc.nodes, triplets)
}

pub fn load_graph(path: impl AsRef<Path>) -> Result<Loaded<SemanticGraph>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| AfpError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_graph(&text)
}

/// Concise triplet rendering. Empty graph renders as the empty string.
pub fn textualize_g1(g: &SemanticGraph) -> String {
    if g.is_empty() {
        return String::new();
    }
    let mut lines = vec![
        "Semantic graph:".to_string(),
        format!("Nodes: {}", g.nodes.join(", ")),
    ];
    lines.extend(
        g.triplets
            .iter()
            .map(|t| format!("({}, {}, {})", t.subject, t.relation, t.object)),
    );
    lines.join("\n")
}

/// A single-message chat completion transport.
pub trait ChatClient {
    /// Sends one user message and returns the reply text.
    fn complete(&self, user_message: &str) -> Result<String>;
}

const GRAPH_INSTRUCTION: &str = "You will see a multiple-choice question about a video, but not the video itself. \
List the objects and entities that matter for answering it and how they relate to each other. \
Reply with a single JSON object and nothing else, in the form \
{\"nodes\": [\"entity\", ...], \"triplets\": [[\"subject\", \"relation\", \"object\"], ...]}.";

/// The one message sent to the graph service: instruction, question and
/// options. No image data.
pub fn fallback_message(question: &str, options: &[String]) -> String {
    let mut msg = format!("{GRAPH_INSTRUCTION}\n\nQuestion: {question}");
    if !options.is_empty() {
        msg.push_str("\nOptions:");
        for (letter, opt) in ('A'..='Z').zip(options) {
            msg.push_str(&format!("\n{letter}) {opt}"));
        }
    }
    msg
}

/// Pulls the outermost `{...}` out of a reply that may be wrapped in prose or
/// code fences.
fn extract_json_object(reply: &str) -> Option<&str> {
    let start = reply.find('{')?;
    let end = reply.rfind('}')?;
    (end > start).then(|| &reply[start..=end])
}

pub fn generate_graph_fallback(
    question: &str,
    options: &[String],
    client: &dyn ChatClient,
) -> Result<Loaded<SemanticGraph>> {
    if question.trim().is_empty() {
        return Err(AfpError::InvalidPrompt("graph generation needs a question".into()));
    }
    let reply = client.complete(&fallback_message(question, options))?;
    let body = extract_json_object(&reply)
        .ok_or_else(|| AfpError::MalformedResponse("no JSON object in reply".into()))?;
    parse_graph(body).map_err(|e| AfpError::MalformedResponse(e.to_string()))
}

/// Blocking HTTP client posting `{"messages": [{"role": "user", "content": ...}]}`.
///
/// The reply text is read from `choices[0].message.content`,
/// `message.content` or `content`, whichever is present; otherwise the raw
/// body is used.
pub struct HttpChatClient {
    endpoint: String,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl HttpChatClient {
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>, timeout: Duration) -> Self {
        let agent = ureq::AgentBuilder::new().timeout(timeout).build();
        HttpChatClient {
            endpoint: endpoint.into(),
            api_key,
            agent,
        }
    }

    /// Reads the API key from [`API_KEY_ENV`].
    pub fn from_env(endpoint: impl Into<String>, timeout: Duration) -> Self {
        Self::new(endpoint, std::env::var(API_KEY_ENV).ok(), timeout)
    }
}

fn reply_text(body: &str) -> String {
    let Ok(value) = serde_json::from_str::<serde_json::Value>(body) else {
        return body.to_string();
    };
    ["/choices/0/message/content", "/message/content", "/content"]
        .into_iter()
        .find_map(|p| value.pointer(p).and_then(|v| v.as_str()).map(str::to_string))
        .unwrap_or_else(|| body.to_string())
}

impl ChatClient for HttpChatClient {
    fn complete(&self, user_message: &str) -> Result<String> {
        let mut req = self.agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            req = req.set("Authorization", &format!("Bearer {key}"));
        }
        let body = serde_json::json!({
            "messages": [{"role": "user", "content": user_message}]
        });
        let resp = req.send_json(body).map_err(|e| AfpError::Transport(e.to_string()))?;
        let text = resp
            .into_string()
            .map_err(|e| AfpError::Transport(e.to_string()))?;
        Ok(reply_text(&text))
    }
}
