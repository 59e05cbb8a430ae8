//! Prompt templates and a small placeholder renderer.
//!
//! Syntax: `{{name}}` substitutes a value; `{{#name}}...{{/name}}` keeps its
//! body only when `name` is non-empty. A section tag that sits alone on its
//! line takes its trailing newline with it, so omitted sections leave no
//! blank lines behind. Every name a template mentions must be present in the
//! context, even if empty.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::ComplexityCue;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateName {
    Draft,
    Improve,
    Debug,
    Analysis,
    Crossover,
}

impl TemplateName {
    pub const ALL: [TemplateName; 5] = [
        TemplateName::Draft,
        TemplateName::Improve,
        TemplateName::Debug,
        TemplateName::Analysis,
        TemplateName::Crossover,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateName::Draft => "draft",
            TemplateName::Improve => "improve",
            TemplateName::Debug => "debug",
            TemplateName::Analysis => "analysis",
            TemplateName::Crossover => "crossover",
        }
    }
}

const DRAFT: &str = include_str!("../../templates/draft.txt");
const IMPROVE: &str = include_str!("../../templates/improve.txt");
const DEBUG: &str = include_str!("../../templates/debug.txt");
const ANALYSIS: &str = include_str!("../../templates/analysis.txt");
const CROSSOVER: &str = include_str!("../../templates/crossover.txt");

const DRAFT_CUES: [&str; 3] = [
    include_str!("../../templates/draft_minimal.txt"),
    include_str!("../../templates/draft_moderate.txt"),
    include_str!("../../templates/draft_advanced.txt"),
];
const IMPROVE_CUES: [&str; 3] = [
    include_str!("../../templates/improve_minimal.txt"),
    include_str!("../../templates/improve_moderate.txt"),
    include_str!("../../templates/improve_advanced.txt"),
];

/// The complexity paragraph a template inserts for `cue`. Only Draft and
/// Improve carry one.
pub fn complexity_paragraph(name: TemplateName, cue: ComplexityCue) -> Option<&'static str> {
    let table = match name {
        TemplateName::Draft => &DRAFT_CUES,
        TemplateName::Improve => &IMPROVE_CUES,
        _ => return None,
    };
    Some(match cue {
        ComplexityCue::Minimal => table[0],
        ComplexityCue::Moderate => table[1],
        ComplexityCue::Advanced => table[2],
    })
}

pub type PromptContext = BTreeMap<String, String>;

#[derive(Clone, Debug, PartialEq)]
enum Piece {
    Text(String),
    Var(String),
    Section(String, Vec<Piece>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PromptTemplate {
    pub name: TemplateName,
    body: String,
    pieces: Vec<Piece>,
}

impl PromptTemplate {
    pub fn builtin(name: TemplateName) -> Self {
        let body = match name {
            TemplateName::Draft => DRAFT,
            TemplateName::Improve => IMPROVE,
            TemplateName::Debug => DEBUG,
            TemplateName::Analysis => ANALYSIS,
            TemplateName::Crossover => CROSSOVER,
        };
        PromptTemplate::parse(name, body).expect("built-in templates are well formed")
    }

    pub fn parse(name: TemplateName, body: &str) -> Result<Self> {
        let pieces = parse_pieces(body)?;
        Ok(PromptTemplate {
            name,
            body: body.to_string(),
            pieces,
        })
    }

    pub fn body(&self) -> &str {
        &self.body
    }

    /// Every name referenced by the template.
    pub fn placeholders(&self) -> BTreeSet<String> {
        fn walk(pieces: &[Piece], out: &mut BTreeSet<String>) {
            for p in pieces {
                match p {
                    Piece::Text(_) => {}
                    Piece::Var(n) => {
                        out.insert(n.clone());
                    }
                    Piece::Section(n, inner) => {
                        out.insert(n.clone());
                        walk(inner, out);
                    }
                }
            }
        }
        let mut out = BTreeSet::new();
        walk(&self.pieces, &mut out);
        out
    }

    pub fn render(&self, ctx: &PromptContext) -> Result<String> {
        let mut out = String::with_capacity(self.body.len() * 2);
        render_pieces(&self.pieces, ctx, &mut out)?;
        Ok(out)
    }
}

/// Renders `template` with `ctx`, failing on the first missing placeholder.
pub fn render_prompt(template: &PromptTemplate, ctx: &PromptContext) -> Result<String> {
    template.render(ctx)
}

fn lookup<'a>(ctx: &'a PromptContext, name: &str) -> Result<&'a str> {
    ctx.get(name)
        .map(String::as_str)
        .ok_or_else(|| Error::MissingPlaceholder(name.to_string()))
}

fn render_pieces(pieces: &[Piece], ctx: &PromptContext, out: &mut String) -> Result<()> {
    for p in pieces {
        match p {
            Piece::Text(t) => out.push_str(t),
            Piece::Var(n) => out.push_str(lookup(ctx, n)?),
            Piece::Section(n, inner) => {
                if !lookup(ctx, n)?.is_empty() {
                    render_pieces(inner, ctx, out)?;
                } else {
                    // still insist that the skipped body's names are supplied
                    let mut sink = String::new();
                    render_pieces(inner, ctx, &mut sink)?;
                }
            }
        }
    }
    Ok(())
}

fn parse_pieces(body: &str) -> Result<Vec<Piece>> {
    // stack of (section name, pieces collected so far)
    let mut stack: Vec<(Option<String>, Vec<Piece>)> = vec![(None, Vec::new())];
    let mut rest = body;
    let mut at_line_start = true;
    while let Some(open) = rest.find("{{") {
        let close = rest[open..].find("}}").map(|c| open + c).ok_or_else(|| {
            Error::Template(format!(
                "unclosed tag near `{}`",
                &rest[open..rest.len().min(open + 20)]
            ))
        })?;
        let text = &rest[..open];
        let tag = rest[open + 2..close].trim();
        let line_start = if text.is_empty() {
            at_line_start
        } else {
            text.ends_with('\n')
        };
        let mut after = &rest[close + 2..];
        if !text.is_empty() {
            stack
                .last_mut()
                .unwrap()
                .1
                .push(Piece::Text(text.to_string()));
        }
        let is_section = tag.starts_with('#') || tag.starts_with('/');
        if is_section && line_start && after.starts_with('\n') {
            after = &after[1..];
            at_line_start = true;
        } else {
            at_line_start = false;
        }
        if let Some(name) = tag.strip_prefix('#') {
            stack.push((Some(name.trim().to_string()), Vec::new()));
        } else if let Some(name) = tag.strip_prefix('/') {
            let (open_name, inner) = stack.pop().unwrap();
            match open_name {
                Some(n) if n == name.trim() => {
                    stack.last_mut().unwrap().1.push(Piece::Section(n, inner))
                }
                Some(n) => {
                    return Err(Error::Template(format!(
                        "`{{{{/{}}}}}` closes `{n}`",
                        name.trim()
                    )))
                }
                None => {
                    return Err(Error::Template(format!(
                        "unmatched `{{{{/{}}}}}`",
                        name.trim()
                    )))
                }
            }
        } else if tag.is_empty() || !tag.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(Error::Template(format!("bad placeholder name `{tag}`")));
        } else {
            stack
                .last_mut()
                .unwrap()
                .1
                .push(Piece::Var(tag.to_string()));
        }
        rest = after;
    }
    if !rest.is_empty() {
        stack
            .last_mut()
            .unwrap()
            .1
            .push(Piece::Text(rest.to_string()));
    }
    if stack.len() != 1 {
        return Err(Error::Template(format!(
            "unclosed section `{}`",
            stack.last().unwrap().0.clone().unwrap_or_default()
        )));
    }
    Ok(stack.pop().unwrap().1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(pairs: &[(&str, &str)]) -> PromptContext {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }

    #[test]
    fn substitution_and_sections() {
        let t = PromptTemplate::parse(
            TemplateName::Debug,
            "a {{x}} b\n{{#m}}\nmem: {{m}}\n{{/m}}\nend",
        )
        .unwrap();
        assert_eq!(
            t.render(&ctx(&[("x", "1"), ("m", "hi")])).unwrap(),
            "a 1 b\nmem: hi\nend"
        );
        assert_eq!(
            t.render(&ctx(&[("x", "1"), ("m", "")])).unwrap(),
            "a 1 b\nend"
        );
        assert!(
            matches!(t.render(&ctx(&[("x", "1")])), Err(Error::MissingPlaceholder(n)) if n == "m")
        );
    }

    #[test]
    fn inline_sections_keep_newlines() {
        let t = PromptTemplate::parse(TemplateName::Draft, "[{{#a}}yes{{/a}}]\n").unwrap();
        assert_eq!(t.render(&ctx(&[("a", "1")])).unwrap(), "[yes]\n");
        assert_eq!(t.render(&ctx(&[("a", "")])).unwrap(), "[]\n");
    }

    #[test]
    fn malformed_templates() {
        for bad in [
            "{{x",
            "{{#a}}open",
            "{{/a}}",
            "{{#a}}{{/b}}",
            "{{bad name}}",
            "{{}}",
        ] {
            assert!(
                PromptTemplate::parse(TemplateName::Draft, bad).is_err(),
                "{bad}"
            );
        }
    }

    #[test]
    fn builtin_placeholders() {
        let names = PromptTemplate::builtin(TemplateName::Draft).placeholders();
        for n in [
            "task_desc",
            "memory",
            "data_overview",
            "execution_timeout",
            "packages",
            "complexity_block",
            "gpus",
            "cpus",
        ] {
            assert!(names.contains(n), "{n}");
        }
        let debug = PromptTemplate::builtin(TemplateName::Debug).placeholders();
        assert!(debug.contains("prev_buggy_code") && debug.contains("execution_output"));
        let analysis = PromptTemplate::builtin(TemplateName::Analysis).placeholders();
        assert_eq!(
            analysis.into_iter().collect::<Vec<_>>(),
            vec!["code", "execution_output", "task_desc"]
        );
    }

    #[test]
    fn cue_paragraphs() {
        let p = complexity_paragraph(TemplateName::Draft, ComplexityCue::Minimal).unwrap();
        assert!(p.contains("SIMPLE YET EFFECTIVE BASELINE"));
        assert!(complexity_paragraph(TemplateName::Debug, ComplexityCue::Minimal).is_none());
        for cue in [
            ComplexityCue::Minimal,
            ComplexityCue::Moderate,
            ComplexityCue::Advanced,
        ] {
            assert_ne!(
                complexity_paragraph(TemplateName::Improve, cue),
                complexity_paragraph(TemplateName::Draft, cue)
            );
        }
    }
}
