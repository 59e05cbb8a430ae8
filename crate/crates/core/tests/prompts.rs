//! Rendered prompts are compared byte for byte with the files in
//! `tests/golden/`. Set `UPDATE_GOLDEN=1` to rewrite them after an intended
//! template change, then review the diff.

use std::path::PathBuf;

mod common;

use agent_search::llm::{complexity_paragraph, PromptTemplate, TemplateName};
use agent_search::operators::ComplexityCue;
use common::{fixed_context, golden_path};
use sha2::{Digest, Sha256};

#[test]
fn rendered_prompts_match_golden_files() {
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    for name in TemplateName::ALL {
        let rendered = PromptTemplate::builtin(name)
            .render(&fixed_context(name))
            .unwrap();
        let path = golden_path(name);
        if update {
            std::fs::write(&path, &rendered).unwrap();
        }
        let golden =
            std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(
            rendered,
            golden,
            "{} drifted from its golden file",
            name.as_str()
        );
    }
}

fn sha256(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn asset(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("templates")
        .join(name);
    std::fs::read_to_string(&path).unwrap()
}

/// Re-inserts the literal hardware line and cue paragraphs that the
/// templates turned into placeholders, recovering the reference prompt text.
fn reference_text(name: &str) -> String {
    let hardware = |s: String| {
        s.replace("{{gpus}}", "1 NVIDIA H200")
            .replace("{{cpus}}", "24")
    };
    match name {
        "draft" | "improve" => {
            let block = format!(
                "{{\n{}\n{{\n{}\n{{\n{}\n{{",
                asset(&format!("{name}_minimal.txt")),
                asset(&format!("{name}_moderate.txt")),
                asset(&format!("{name}_advanced.txt"))
            );
            hardware(asset(&format!("{name}.txt")).replace("{{complexity_block}}", &block))
        }
        "debug" => hardware(
            asset("debug.txt")
                .replace("{{#memory}}\n", "{\n")
                .replace("{{/memory}}\n", "{\n"),
        ),
        other => asset(&format!("{other}.txt")),
    }
}

#[test]
fn template_assets_match_reference_checksums() {
    let expected = [
        (
            "draft",
            "bb0fd40ee1e3ac8f820bc84556001d4beda56a210382ebfe9ab7ff7e098f066e",
        ),
        (
            "improve",
            "9bc059c6e692b48db34ca4d00a5b221d9675b56ab0111765da6ce014594c24ed",
        ),
        (
            "analysis",
            "67d1007db781ee6296187273a18f0bdc6293dcfc074815ae82f53fa46341fc79",
        ),
        (
            "debug",
            "ef10d9f4a7848f2a2f2223f5b9df5660053fa9890126020e482611563189eca4",
        ),
    ];
    for (name, digest) in expected {
        assert_eq!(sha256(&reference_text(name)), digest, "{name}");
    }
}

#[test]
fn aide_prompts_have_no_cue_paragraph() {
    let mut ctx = fixed_context(TemplateName::Draft);
    ctx.insert("complexity_block".into(), String::new());
    let text = PromptTemplate::builtin(TemplateName::Draft)
        .render(&ctx)
        .unwrap();
    for cue in [
        ComplexityCue::Minimal,
        ComplexityCue::Moderate,
        ComplexityCue::Advanced,
    ] {
        assert!(!text.contains(complexity_paragraph(TemplateName::Draft, cue).unwrap()));
    }
}

#[test]
fn every_placeholder_is_required() {
    for name in TemplateName::ALL {
        let template = PromptTemplate::builtin(name);
        for key in template.placeholders() {
            let mut ctx = fixed_context(name);
            ctx.remove(&key);
            assert!(
                template.render(&ctx).is_err(),
                "{} rendered without `{key}`",
                name.as_str()
            );
        }
    }
}
