//! Language-model operators: templates, the client contract, response parsing
//! and execution analysis.

mod client;
mod live;
mod template;

use serde::{Deserialize, Serialize};

#[cfg(feature = "http")]
pub use client::HttpClient;
pub use client::{ChatClient, GenerationParams, MockClient, VERDICT_MARKER};
pub use live::{
    operator_prompt, CommandExecutor, Execution, Executor, LiveEnvironment, MockExecutor,
    TaskBinding,
};
pub use template::{
    complexity_paragraph, render_prompt, PromptContext, PromptTemplate, TemplateName,
};

use crate::error::{Error, Result};
use crate::operators::strip_think;

/// A model answer split into its parts.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParsedResponse {
    pub plan: String,
    pub code: String,
    pub thought: String,
    pub warnings: Vec<String>,
}

const FENCE: &str = "```";

/// Extracts the plan (text before the first fence) and the code (interior of
/// the first fenced block) from a response, after removing reasoning spans.
pub fn parse_solution(raw: &str) -> Result<ParsedResponse> {
    let (visible, thought) = strip_think(raw);
    let open = visible.find(FENCE).ok_or(Error::ParseFailure)?;
    let plan = visible[..open].trim().to_string();
    let after_open = &visible[open + FENCE.len()..];
    // skip the info string (e.g. `python`) up to the end of the fence line
    let body_start = after_open.find('\n').ok_or(Error::ParseFailure)? + 1;
    let body = &after_open[body_start..];
    let (code, tail) = if let Some(rest) = body.strip_prefix(FENCE) {
        ("", rest)
    } else {
        let close = body
            .find(&format!("\n{FENCE}"))
            .ok_or(Error::ParseFailure)?;
        (&body[..close], &body[close + 1 + FENCE.len()..])
    };
    let mut warnings = Vec::new();
    if tail.contains(FENCE) {
        warnings.push("response has more than one code block; using the first".to_string());
    }
    Ok(ParsedResponse {
        plan,
        code: code.to_string(),
        thought,
        warnings,
    })
}

/// Structured judgement of one execution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisVerdict {
    pub is_buggy: bool,
    pub summary: String,
    /// Present exactly when the run is not buggy.
    pub metric_value: Option<f64>,
}

/// JSON shape requested from the analysis model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireVerdict {
    pub is_bug: bool,
    pub summary: String,
    pub metric: Option<f64>,
}

impl AnalysisVerdict {
    pub fn to_wire(&self) -> WireVerdict {
        WireVerdict {
            is_bug: self.is_buggy,
            summary: self.summary.clone(),
            metric: self.metric_value,
        }
    }

    /// Enforces the buggy/metric coupling.
    pub fn from_wire(w: WireVerdict) -> Result<Self> {
        match (w.is_bug, w.metric) {
            (false, Some(m)) if m.is_finite() => {}
            (true, None) => {}
            _ => {
                return Err(Error::InvalidPayload(
                    "verdict must carry a finite metric exactly when not buggy".into(),
                ))
            }
        }
        Ok(AnalysisVerdict {
            is_buggy: w.is_bug,
            summary: w.summary,
            metric_value: w.metric,
        })
    }

    pub fn failed() -> Self {
        AnalysisVerdict {
            is_buggy: true,
            summary: "analysis failed".to_string(),
            metric_value: None,
        }
    }
}

/// Last `5-fold CV score: x` style line in an execution log.
pub fn extract_cv_score(output: &str) -> Option<f64> {
    output.lines().rev().find_map(|line| {
        let lower = line.to_ascii_lowercase();
        let at = lower.find("cv score")?;
        let rest = line[at + "cv score".len()..].trim_start_matches([':', '=', ' ']);
        let token: String = rest
            .chars()
            .take_while(|c| c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E'))
            .collect();
        token.parse::<f64>().ok().filter(|v| v.is_finite())
    })
}

fn has_traceback(output: &str) -> bool {
    output.contains("Traceback (most recent call last)")
        || output.lines().any(|l| {
            let l = l.trim_start();
            l.split(':')
                .next()
                .is_some_and(|head| head.ends_with("Error") && !head.contains(' '))
                && l.contains(':')
        })
}

/// Rule-based verdict: a run is clean when it printed a score and raised
/// nothing.
pub fn heuristic_verdict(output: &str) -> AnalysisVerdict {
    let traceback = has_traceback(output);
    let metric = extract_cv_score(output);
    match (traceback, metric) {
        (false, Some(m)) => AnalysisVerdict {
            is_buggy: false,
            summary: format!("Run completed with a cross-validation score of {m}."),
            metric_value: Some(m),
        },
        (true, _) => AnalysisVerdict {
            is_buggy: true,
            summary: "The execution raised an exception.".to_string(),
            metric_value: None,
        },
        (false, None) if output.trim().is_empty() => AnalysisVerdict {
            is_buggy: true,
            summary: "The execution produced no output.".to_string(),
            metric_value: None,
        },
        (false, None) => AnalysisVerdict {
            is_buggy: true,
            summary: "No validation metric was reported.".to_string(),
            metric_value: None,
        },
    }
}

/// Attempts allowed for a well-formed analysis verdict.
pub const ANALYSIS_ATTEMPTS: usize = 3;

fn verdict_instruction() -> String {
    format!(
        "\n\n{VERDICT_MARKER}\nReply with one JSON object: \
         {{\"is_bug\": <true|false>, \"summary\": \"<2-3 sentences>\", \"metric\": <number or null>}}. \
         `metric` is the validation score when the run succeeded and null otherwise.\n"
    )
}

fn parse_verdict(raw: &str) -> Result<AnalysisVerdict> {
    let (visible, _) = strip_think(raw);
    let start = visible.find('{').ok_or(Error::ParseFailure)?;
    let end = visible.rfind('}').ok_or(Error::ParseFailure)?;
    if end < start {
        return Err(Error::ParseFailure);
    }
    let wire: WireVerdict = serde_json::from_str(&visible[start..=end])?;
    AnalysisVerdict::from_wire(wire)
}

/// Asks `client` to judge an execution. Malformed answers are retried; after
/// [`ANALYSIS_ATTEMPTS`] failures the run counts as buggy.
pub fn analyze_execution(
    task_desc: &str,
    code: &str,
    execution_output: &str,
    client: &dyn ChatClient,
    params: &GenerationParams,
) -> Result<AnalysisVerdict> {
    let template = PromptTemplate::builtin(TemplateName::Analysis);
    let ctx: PromptContext = [
        ("task_desc", task_desc),
        ("code", code),
        ("execution_output", execution_output),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect();
    let prompt = template.render(&ctx)? + &verdict_instruction();
    for attempt in 0..ANALYSIS_ATTEMPTS {
        let request = if attempt == 0 {
            prompt.clone()
        } else {
            format!("{prompt}(retry {attempt}: the previous reply was not a valid JSON verdict)\n")
        };
        if let Ok(raw) = client.complete(&request, params) {
            if let Ok(v) = parse_verdict(&raw) {
                return Ok(v);
            }
        }
    }
    Ok(AnalysisVerdict::failed())
}
