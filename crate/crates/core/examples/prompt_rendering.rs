use agent_search::llm::{complexity_paragraph, PromptTemplate, TaskBinding, TemplateName};
use agent_search::operators::{complexity_cue, ComplexityCue};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let binding = TaskBinding {
        task_desc: "Forecast daily store sales.".into(),
        data_overview: "train.csv, stores.csv, holidays.csv".into(),
        ..TaskBinding::default()
    };
    let mut ctx = binding.base_context();
    ctx.insert(
        "memory".into(),
        "- node 2 (draft, fitness 0.41): seasonal naive baseline".into(),
    );

    // a node with three children gets the Moderate cue
    let cue = complexity_cue(3);
    assert_eq!(cue, ComplexityCue::Moderate);
    ctx.insert(
        "complexity_block".into(),
        complexity_paragraph(TemplateName::Draft, cue)
            .unwrap_or("")
            .into(),
    );

    let template = PromptTemplate::builtin(TemplateName::Draft);
    println!("placeholders: {:?}", template.placeholders());
    let prompt = template.render(&ctx)?;
    println!("{}", prompt.lines().take(12).collect::<Vec<_>>().join("\n"));
    println!("... {} lines in total", prompt.lines().count());

    ctx.remove("data_overview");
    let err = template.render(&ctx).unwrap_err();
    println!("without data_overview: {err}");
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
