//! Multiple-choice evaluation: answer-letter extraction, per-category
//! accuracy, the analytic random baseline and text-only bias probes.

mod answer;
mod extract;
mod report;
mod score;

pub use answer::{
    bias_probe, category_counts, run_answerer, AnswerInput, Answerer, BlindProbe, Capabilities, ChoicesOnlyProbe,
    GeometricOracle, RandomProbe,
};
pub use extract::{clean_output, extract_choice, letter};
pub use report::{comparison_table, to_csv, to_svg, to_text};
pub use score::{frame_sample, random_baseline, score, CategoryScore, Prediction, ScoreReport};
