//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use std::path::PathBuf;

use agent_search::llm::{complexity_paragraph, PromptContext, TaskBinding, TemplateName};
use agent_search::operators::ComplexityCue;

/// Context used to render the golden prompt files.
pub fn fixed_context(name: TemplateName) -> PromptContext {
    let binding = TaskBinding {
        task_desc:
            "Predict whether a passenger survived the voyage.\nSubmissions are scored by accuracy."
                .into(),
        data_overview: "train.csv (891 rows, 12 columns)\ntest.csv (418 rows, 11 columns)".into(),
        packages: "numpy, pandas, scikit-learn, lightgbm".into(),
        gpus: "1 NVIDIA H200".into(),
        cpus: "24".into(),
        execution_timeout_secs: 4 * 3600,
    };
    let mut ctx = binding.base_context();
    let mut put = |k: &str, v: &str| {
        ctx.insert(k.to_string(), v.to_string());
    };
    put(
        "memory",
        "- node 3 (draft, fitness 0.612): gradient-boosted trees on engineered features",
    );
    match name {
        TemplateName::Draft => put(
            "complexity_block",
            complexity_paragraph(name, ComplexityCue::Moderate).unwrap(),
        ),
        TemplateName::Improve => {
            put(
                "complexity_block",
                complexity_paragraph(name, ComplexityCue::Advanced).unwrap(),
            );
            put(
                "prev_code",
                "```python\nscore = 0.612\nprint(f\"5-fold CV score: {score}\")\n```",
            );
            put("prev_terminal_output", "5-fold CV score: 0.612\n");
        }
        TemplateName::Debug => {
            put(
                "prev_buggy_code",
                "```python\nimport pandas as pd\ndf = pd.read_csv('trian.csv')\n```",
            );
            put(
                "execution_output",
                "FileNotFoundError: [Errno 2] No such file or directory: 'trian.csv'\n",
            );
        }
        TemplateName::Analysis => {
            put("code", "score = 0.7\nprint(f\"5-fold CV score: {score}\")");
            put("execution_output", "5-fold CV score: 0.7\n");
        }
        TemplateName::Crossover => {
            put("prev_code", "```python\nscore = 0.61\n```");
            put("prev_terminal_output", "5-fold CV score: 0.61\n");
            put("second_code", "```python\nscore = 0.64\n```");
            put("second_terminal_output", "5-fold CV score: 0.64\n");
        }
    }
    ctx
}

pub fn golden_path(name: TemplateName) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(format!("tests/golden/{}.txt", name.as_str()))
}
