//! The robustness-variant grid, built from a versioned assets file.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::LlmError;
use crate::engine::Task;

const BUILTIN: &str = include_str!("../../assets/variants.v1.json");

/// Affine map applied to every number of points shown to the model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreTransform {
    pub scale: f64,
    pub offset: f64,
}

impl ScoreTransform {
    pub const IDENTITY: ScoreTransform = ScoreTransform { scale: 1.0, offset: 0.0 };

    pub fn apply(&self, points: f64) -> f64 {
        self.scale * points + self.offset
    }

    /// Rendered value: whole numbers without a decimal point, otherwise up to two decimals.
    pub fn display(&self, points: i64) -> String {
        format_points(self.apply(points as f64))
    }
}

impl Default for ScoreTransform {
    fn default() -> Self {
        Self::IDENTITY
    }
}

pub fn format_points(v: f64) -> String {
    let r = (v * 100.0).round() / 100.0;
    if r.fract() == 0.0 {
        format!("{}", r as i64)
    } else {
        let s = format!("{r:.2}");
        s.trim_end_matches('0').to_string()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContextKind {
    Baseline,
    Economic,
    Medical,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Persona {
    pub id: String,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariantSpec {
    pub id: String,
    pub temperature: f64,
    pub score_transform: ScoreTransform,
    pub context: ContextKind,
    /// Framing paragraph placed before the task instructions.
    pub context_text: Option<String>,
    pub persona: Option<Persona>,
}

impl VariantSpec {
    pub fn baseline() -> Self {
        VariantSpec {
            id: "baseline".into(),
            temperature: VariantAssets::builtin().baseline_temperature,
            score_transform: ScoreTransform::IDENTITY,
            context: ContextKind::Baseline,
            context_text: None,
            persona: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct NamedTransform {
    id: String,
    scale: f64,
    offset: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VariantAssets {
    pub version: u32,
    pub baseline_temperature: f64,
    temperatures: Vec<f64>,
    score_transforms: BTreeMap<String, Vec<NamedTransform>>,
    contexts: BTreeMap<String, BTreeMap<String, String>>,
    personas: Vec<Persona>,
}

impl VariantAssets {
    pub fn builtin() -> &'static VariantAssets {
        static ASSETS: OnceLock<VariantAssets> = OnceLock::new();
        ASSETS.get_or_init(|| Self::from_json(BUILTIN).expect("bundled variant assets parse"))
    }

    pub fn from_json(text: &str) -> Result<Self, LlmError> {
        serde_json::from_str(text).map_err(|e| LlmError::Config(format!("variant assets: {e}")))
    }

    /// Every non-baseline variant for `task`, in a fixed order.
    pub fn variants(&self, task: Task) -> Vec<VariantSpec> {
        let base = VariantSpec { temperature: self.baseline_temperature, ..VariantSpec::baseline() };
        let mut out = Vec::new();
        for t in &self.temperatures {
            out.push(VariantSpec { id: format!("temp_{t}"), temperature: *t, ..base.clone() });
        }
        for t in self.score_transforms.get(task.as_str()).into_iter().flatten() {
            out.push(VariantSpec {
                id: format!("score_{}", t.id),
                score_transform: ScoreTransform { scale: t.scale, offset: t.offset },
                ..base.clone()
            });
        }
        for (kind, name) in [(ContextKind::Economic, "economic"), (ContextKind::Medical, "medical")] {
            if let Some(text) = self.contexts.get(name).and_then(|m| m.get(task.as_str())) {
                out.push(VariantSpec {
                    id: format!("context_{name}"),
                    context: kind,
                    context_text: Some(text.clone()),
                    ..base.clone()
                });
            }
        }
        for p in &self.personas {
            out.push(VariantSpec { id: format!("persona_{}", p.id), persona: Some(p.clone()), ..base.clone() });
        }
        out
    }
}

/// The bundled variant grid for `task` (baseline excluded).
pub fn generate_variants(task: Task) -> Vec<VariantSpec> {
    VariantAssets::builtin().variants(task)
}

/// Looks up `baseline` or any grid member by id.
pub fn find_variant(task: Task, id: &str) -> Option<VariantSpec> {
    if id == "baseline" {
        return Some(VariantSpec::baseline());
    }
    generate_variants(task).into_iter().find(|v| v.id == id)
}
