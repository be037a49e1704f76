//! Direct QA prompt layout and token-cost reporting.

use serde::{Deserialize, Serialize};

use crate::error::{AfpError, Result};

pub const ANSWER_INSTRUCTION: &str = "Answer with the option letter only.";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TokenCostModel {
    pub tokens_per_frame: u64,
    pub tokens_per_text_char: f64,
}

impl Default for TokenCostModel {
    fn default() -> Self {
        TokenCostModel {
            tokens_per_frame: 255,
            tokens_per_text_char: 0.25,
        }
    }
}

impl TokenCostModel {
    pub fn validate(&self) -> Result<()> {
        if self.tokens_per_frame == 0 {
            return Err(AfpError::Range {
                name: "tokens_per_frame",
                value: 0.0,
                expected: "(0, inf)",
            });
        }
        if !(self.tokens_per_text_char.is_finite() && self.tokens_per_text_char > 0.0) {
            return Err(AfpError::Range {
                name: "tokens_per_text_char",
                value: self.tokens_per_text_char,
                expected: "(0, inf)",
            });
        }
        Ok(())
    }

    /// `frames * tokens_per_frame + ceil(chars * tokens_per_text_char)`.
    pub fn estimate(&self, frames: usize, text: &str) -> u64 {
        let chars = text.chars().count() as f64;
        frames as u64 * self.tokens_per_frame + (chars * self.tokens_per_text_char).ceil() as u64
    }
}

/// A frame placeholder in the prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRef {
    pub frame_id: String,
    pub timestamp_s: f64,
}

/// `100 * (1 - out / in)`, or 0 when `in` is 0.
pub fn reduction_pct(input: f64, output: f64) -> f64 {
    if input == 0.0 {
        0.0
    } else {
        100.0 * (1.0 - output / input)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub frames_in: usize,
    pub frames_out: usize,
    pub frame_reduction_pct: f64,
    pub tokens_in_est: u64,
    pub tokens_out_est: u64,
    pub token_reduction_pct: f64,
}

/// Lays out frame placeholders, the graph block, the question, lettered
/// options and the answer instruction, one per line. Frames must already be
/// in timestamp order.
pub fn assemble_prompt(
    frames: &[FrameRef],
    graph_text: &str,
    question: &str,
    options: &[String],
) -> Result<String> {
    if frames.is_empty() {
        return Err(AfpError::EmptySelection);
    }
    if question.trim().is_empty() {
        return Err(AfpError::InvalidPrompt("question is empty".into()));
    }
    if options.len() > 26 {
        return Err(AfpError::InvalidPrompt(format!(
            "{} options exceed the A-Z letter range",
            options.len()
        )));
    }

    let mut lines: Vec<String> = frames
        .iter()
        .map(|f| format!("[Frame {} @ {:.2}s]", f.frame_id, f.timestamp_s))
        .collect();
    if !graph_text.is_empty() {
        lines.push(graph_text.to_string());
    }
    lines.push(format!("Question: {question}"));
    lines.extend(
        ('A'..='Z')
            .zip(options)
            .map(|(letter, opt)| format!("{letter}) {opt}")),
    );
    lines.push(ANSWER_INSTRUCTION.to_string());
    Ok(lines.join("\n"))
}

pub fn compute_report(
    frames_in: usize,
    frames_out: usize,
    prompt_text: &str,
    baseline_prompt_text: &str,
    cost: &TokenCostModel,
) -> CostReport {
    let tokens_in_est = cost.estimate(frames_in, baseline_prompt_text);
    let tokens_out_est = cost.estimate(frames_out, prompt_text);
    CostReport {
        frames_in,
        frames_out,
        frame_reduction_pct: reduction_pct(frames_in as f64, frames_out as f64),
        tokens_in_est,
        tokens_out_est,
        token_reduction_pct: reduction_pct(tokens_in_est as f64, tokens_out_est as f64),
    }
}
