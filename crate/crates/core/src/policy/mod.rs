//! Selection policies: greedy with buggy-node revisits, UCT descent with
//! incremental backup, and fitness-proportional evolutionary selection.

mod evo;
mod greedy;
mod mcts;

pub use evo::{evo_replace, evo_select_pair, evo_select_parent, EvoConfig, Member, Population};
pub use greedy::{greedy_select, GreedyConfig};
pub use mcts::{mcts_backup, mcts_select, uct_score, MctsConfig};
