use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::GenError;

pub const REPHRASE: &str = "rephrase";
pub const PROOF: &str = "proof";
pub const MASK_COMPLETION: &str = "mask_completion";
pub const AUGMENT_WORDING: &str = "augment_wording";
pub const AUGMENT_TRANSLATE: &str = "augment_translate";
pub const VERIFIER_RUBRIC: &str = "verifier_rubric";
pub const FLUENCY_JUDGE: &str = "fluency_judge";

const BUILTIN: [(&str, &str); 7] = [
    (REPHRASE, include_str!("../../templates/rephrase.txt")),
    (PROOF, include_str!("../../templates/proof.txt")),
    (
        MASK_COMPLETION,
        include_str!("../../templates/mask_completion.txt"),
    ),
    (
        AUGMENT_WORDING,
        include_str!("../../templates/augment_wording.txt"),
    ),
    (
        AUGMENT_TRANSLATE,
        include_str!("../../templates/augment_translate.txt"),
    ),
    (
        VERIFIER_RUBRIC,
        include_str!("../../templates/verifier_rubric.txt"),
    ),
    (
        FLUENCY_JUDGE,
        include_str!("../../templates/fluency_judge.txt"),
    ),
];

const BUILTIN_VERSION: &str = include_str!("../../templates/VERSION");

/// A versioned set of prompt templates.
///
/// Templates use `{{name}}` placeholders. Substitution is single-pass, so a
/// value that itself contains `{{...}}` is inserted literally.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    version: String,
    templates: BTreeMap<String, String>,
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self::builtin()
    }
}

impl TemplateSet {
    pub fn builtin() -> Self {
        TemplateSet {
            version: BUILTIN_VERSION.trim().to_owned(),
            templates: BUILTIN
                .iter()
                .map(|(name, text)| (name.to_string(), text.to_string()))
                .collect(),
        }
    }

    /// Loads `<name>.txt` files and a `VERSION` file from `dir`. Templates
    /// missing from the directory fall back to the builtin text.
    pub fn load_dir(dir: &Path) -> Result<Self, GenError> {
        let mut set = Self::builtin();
        let version_path = dir.join("VERSION");
        let version = fs::read_to_string(&version_path)
            .map_err(|e| GenError::Template(format!("{}: {e}", version_path.display())))?;
        set.version = version.trim().to_owned();
        for (name, _) in BUILTIN {
            let path = dir.join(format!("{name}.txt"));
            if path.exists() {
                let text = fs::read_to_string(&path)
                    .map_err(|e| GenError::Template(format!("{}: {e}", path.display())))?;
                set.templates.insert(name.to_owned(), text);
            }
        }
        Ok(set)
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.templates.get(name).map(String::as_str)
    }

    pub fn render(&self, name: &str, vars: &[(&str, &str)]) -> Result<String, GenError> {
        let template = self
            .get(name)
            .ok_or_else(|| GenError::Template(format!("unknown template {name}")))?;
        render(template, vars)
    }
}

pub fn render(template: &str, vars: &[(&str, &str)]) -> Result<String, GenError> {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(start) = rest.find("{{") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let end = after
            .find("}}")
            .ok_or_else(|| GenError::Template("unterminated placeholder".into()))?;
        let name = after[..end].trim();
        let value = vars
            .iter()
            .find(|(k, _)| *k == name)
            .map(|(_, v)| *v)
            .ok_or_else(|| GenError::Template(format!("no value for placeholder {name}")))?;
        out.push_str(value);
        rest = &after[end + 2..];
    }
    out.push_str(rest);
    Ok(out)
}
