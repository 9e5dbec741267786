//! Parallel, order-preserving batch drivers over clips.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{QaError, SynthError};
use crate::qa::{generate_clip_items, QaConfig, QaItem, RephraseMode, TaskCategory};
use crate::resolve::{referent_ids, resolve_referents, ResolverConfig};
use crate::synth::{forge_clip, ClipRecord, GenConfig};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ForgeStats {
    pub accepted: usize,
    pub attempts: usize,
    /// Rejected attempts per filter reason.
    pub rejections: BTreeMap<String, usize>,
}

impl ForgeStats {
    pub fn acceptance_rate(&self) -> f64 {
        if self.attempts == 0 {
            0.0
        } else {
            self.accepted as f64 / self.attempts as f64
        }
    }
}

pub fn clip_id(index: u64) -> String {
    format!("clip-{index:05}")
}

/// Forges `n` accepted clips; output order and content depend only on `(seed, config)`.
pub fn forge_batch(seed: u64, n: usize, config: &GenConfig) -> Result<(Vec<ClipRecord>, ForgeStats), SynthError> {
    config.validate()?;
    let outcomes: Vec<_> =
        (0..n as u64).into_par_iter().map(|i| forge_clip(seed, i, &clip_id(i), config)).collect::<Result<_, _>>()?;
    let mut stats = ForgeStats::default();
    let mut clips = Vec::with_capacity(n);
    for o in outcomes {
        stats.accepted += 1;
        stats.attempts += 1 + o.rejections.len();
        for reasons in &o.rejections {
            for r in reasons {
                *stats.rejections.entry(r.clone()).or_insert(0) += 1;
            }
        }
        clips.push(o.clip);
    }
    Ok((clips, stats))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QaSummary {
    pub clips: usize,
    /// Clips skipped because the resolved referents disagree with the clip's gestures.
    pub resolver_mismatches: Vec<String>,
    pub per_category: BTreeMap<TaskCategory, usize>,
    pub infeasible: BTreeMap<TaskCategory, usize>,
    pub dropped: BTreeMap<String, usize>,
}

impl QaSummary {
    pub fn validation_failures(&self) -> usize {
        self.dropped.values().sum()
    }
}

/// resolve → facts → questions → negatives → rephrase → validate, per clip.
pub fn qa_batch(
    clips: &[ClipRecord],
    resolver: &ResolverConfig,
    config: &QaConfig,
    seed: u64,
    mode: &RephraseMode,
) -> Result<(Vec<QaItem>, QaSummary), QaError> {
    let per_clip: Vec<_> = clips
        .par_iter()
        .map(|clip| {
            let referents = referent_ids(&resolve_referents(clip, resolver));
            let truth: Vec<String> = clip.target_sequence().iter().map(|s| s.to_string()).collect();
            if referents != truth {
                return Ok(None);
            }
            generate_clip_items(clip, &referents, config, seed, mode).map(Some)
        })
        .collect::<Result<_, QaError>>()?;

    let mut items = Vec::new();
    let mut summary = QaSummary { clips: clips.len(), ..QaSummary::default() };
    for (clip, qa) in clips.iter().zip(per_clip) {
        let Some(qa) = qa else {
            summary.resolver_mismatches.push(clip.clip_id.clone());
            continue;
        };
        for (c, n) in qa.infeasible {
            *summary.infeasible.entry(c).or_insert(0) += n;
        }
        for d in qa.dropped {
            let reason = d.split(':').take(2).collect::<Vec<_>>().join(":");
            *summary.dropped.entry(reason).or_insert(0) += 1;
        }
        for item in qa.items {
            *summary.per_category.entry(item.category).or_insert(0) += 1;
            items.push(item);
        }
    }
    Ok((items, summary))
}
