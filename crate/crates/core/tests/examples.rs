//! Every example doubles as a test.

macro_rules! example {
    ($module:ident, $file:literal) => {
        #[path = $file]
        mod $module;

        #[test]
        fn $module() {
            $module::run_example().expect(concat!($file, " should run"));
        }
    };
}

example!(greedy_search, "../examples/greedy_search.rs");
example!(mcts_search, "../examples/mcts_search.rs");
example!(evolutionary_search, "../examples/evolutionary_search.rs");
example!(generalization_gap, "../examples/generalization_gap.rs");
example!(topk_selection, "../examples/topk_selection.rs");
example!(checkpoint_resume, "../examples/checkpoint_resume.rs");
example!(prompt_rendering, "../examples/prompt_rendering.rs");
example!(mock_llm_search, "../examples/mock_llm_search.rs");
example!(experiment_report, "../examples/experiment_report.rs");
example!(export_tree, "../examples/export_tree.rs");
example!(bootstrap_ci, "../examples/bootstrap_ci.rs");
example!(oracle_check, "../examples/oracle_check.rs");
