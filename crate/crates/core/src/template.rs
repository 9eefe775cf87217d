//! Prompt templates: plain-text files with `{{name}}` placeholders.

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TemplateError {
    #[error("template {template}: no value for placeholder {{{{{name}}}}}")]
    MissingValue { template: String, name: String },
    #[error("template {template}: {message}")]
    Load { template: String, message: String },
}

/// Pipeline stages, each with a system and a user template.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Schema,
    Generate,
    Regenerate,
    PatternGist,
    EventGist,
    ActionGist,
    Audit,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Schema,
        Stage::Generate,
        Stage::Regenerate,
        Stage::PatternGist,
        Stage::EventGist,
        Stage::ActionGist,
        Stage::Audit,
    ];

    /// File stem and ledger tag of the stage.
    pub fn name(self) -> &'static str {
        match self {
            Stage::Schema => "schema",
            Stage::Generate => "generate",
            Stage::Regenerate => "regenerate",
            Stage::PatternGist => "pattern_gist",
            Stage::EventGist => "event_gist",
            Stage::ActionGist => "action_gist",
            Stage::Audit => "audit",
        }
    }

    fn builtin(self) -> (&'static str, &'static str) {
        macro_rules! pair {
            ($stem:literal) => {
                (
                    include_str!(concat!("../templates/v1/", $stem, ".system.txt")),
                    include_str!(concat!("../templates/v1/", $stem, ".user.txt")),
                )
            };
        }
        match self {
            Stage::Schema => pair!("schema"),
            Stage::Generate => pair!("generate"),
            Stage::Regenerate => pair!("regenerate"),
            Stage::PatternGist => pair!("pattern_gist"),
            Stage::EventGist => pair!("event_gist"),
            Stage::ActionGist => pair!("action_gist"),
            Stage::Audit => pair!("audit"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptTemplate {
    pub name: String,
    pub text: String,
}

impl PromptTemplate {
    pub fn new(name: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            text: text.into(),
        }
    }

    /// Names of all placeholders, in order of first appearance.
    pub fn placeholders(&self) -> Vec<&str> {
        let mut out = Vec::new();
        let mut rest = self.text.as_str();
        while let Some((name, after)) = next_placeholder(rest) {
            if let Some(name) = name {
                if !out.contains(&name) {
                    out.push(name);
                }
            }
            rest = after;
        }
        out
    }

    /// Substitutes every placeholder in one pass; substituted values are
    /// never rescanned.
    pub fn render(&self, values: &[(&str, &str)]) -> Result<String, TemplateError> {
        let mut out = String::with_capacity(self.text.len());
        let mut rest = self.text.as_str();
        loop {
            let Some(open) = rest.find("{{") else {
                out.push_str(rest);
                return Ok(out);
            };
            out.push_str(&rest[..open]);
            let candidate = &rest[open + 2..];
            match placeholder_name(candidate) {
                Some(name) => {
                    let value = values.iter().find(|(k, _)| *k == name).map(|(_, v)| *v).ok_or_else(|| {
                        TemplateError::MissingValue {
                            template: self.name.clone(),
                            name: name.to_string(),
                        }
                    })?;
                    out.push_str(value);
                    rest = &candidate[name.len() + 2..];
                }
                None => {
                    out.push_str("{{");
                    rest = candidate;
                }
            }
        }
    }
}

fn placeholder_name(s: &str) -> Option<&str> {
    let end = s.find("}}")?;
    let name = &s[..end];
    let valid = !name.is_empty() && name.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_');
    valid.then_some(name)
}

fn next_placeholder(s: &str) -> Option<(Option<&str>, &str)> {
    let open = s.find("{{")?;
    let candidate = &s[open + 2..];
    match placeholder_name(candidate) {
        Some(name) => Some((Some(name), &candidate[name.len() + 2..])),
        None => Some((None, candidate)),
    }
}

/// System and user templates for every stage.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateSet {
    stages: BTreeMap<Stage, (PromptTemplate, PromptTemplate)>,
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self::builtin()
    }
}

impl TemplateSet {
    /// The templates shipped with the crate under `templates/v1`.
    pub fn builtin() -> Self {
        let stages = Stage::ALL
            .iter()
            .map(|&s| {
                let (sys, user) = s.builtin();
                (
                    s,
                    (
                        PromptTemplate::new(format!("{}.system", s.name()), sys),
                        PromptTemplate::new(format!("{}.user", s.name()), user),
                    ),
                )
            })
            .collect();
        Self { stages }
    }

    /// Loads `<stage>.system.txt` / `<stage>.user.txt` from `dir`, falling
    /// back to the built-in text for files that are absent.
    pub fn load_dir(dir: &Path) -> Result<Self, TemplateError> {
        if !dir.is_dir() {
            return Err(TemplateError::Load {
                template: dir.display().to_string(),
                message: "not a directory".into(),
            });
        }
        let mut set = Self::builtin();
        for (stage, (sys, user)) in set.stages.iter_mut() {
            for (part, tpl) in [("system", &mut *sys), ("user", &mut *user)] {
                let path = dir.join(format!("{}.{part}.txt", stage.name()));
                if path.exists() {
                    tpl.text = std::fs::read_to_string(&path).map_err(|e| TemplateError::Load {
                        template: path.display().to_string(),
                        message: e.to_string(),
                    })?;
                }
            }
        }
        Ok(set)
    }

    pub fn system(&self, stage: Stage) -> &PromptTemplate {
        &self.stages[&stage].0
    }

    pub fn user(&self, stage: Stage) -> &PromptTemplate {
        &self.stages[&stage].1
    }

    /// Renders both templates of `stage`.
    pub fn render(&self, stage: Stage, values: &[(&str, &str)]) -> Result<(String, String), TemplateError> {
        Ok((self.system(stage).render(values)?, self.user(stage).render(values)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_single_pass() {
        let t = PromptTemplate::new("t", "A {{x}} B {{y}} {{x}}");
        assert_eq!(t.render(&[("x", "{{y}}"), ("y", "2")]).unwrap(), "A {{y}} B 2 {{y}}");
        assert_eq!(t.placeholders(), vec!["x", "y"]);
    }

    #[test]
    fn leaves_non_placeholders_alone() {
        let t = PromptTemplate::new("t", r#"{"a": {"b": 1}} {{ not one }} {{"#);
        assert_eq!(t.render(&[]).unwrap(), t.text);
    }

    #[test]
    fn missing_value_is_an_error() {
        let t = PromptTemplate::new("t", "hello {{name}}");
        assert_eq!(
            t.render(&[]),
            Err(TemplateError::MissingValue { template: "t".into(), name: "name".into() })
        );
    }

    #[test]
    fn builtin_set_is_complete() {
        let set = TemplateSet::builtin();
        for stage in Stage::ALL {
            assert!(!set.system(stage).text.trim().is_empty(), "{stage:?}");
            assert!(!set.user(stage).text.trim().is_empty(), "{stage:?}");
        }
        assert!(set.user(Stage::PatternGist).placeholders().contains(&"long_term"));
        assert!(set.user(Stage::ActionGist).placeholders().contains(&"justification"));
    }

    #[test]
    fn directory_overrides() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("audit.user.txt"), "custom {{action_gist}}").unwrap();
        let set = TemplateSet::load_dir(dir.path()).unwrap();
        assert_eq!(set.user(Stage::Audit).text, "custom {{action_gist}}");
        assert_eq!(set.user(Stage::Generate), TemplateSet::builtin().user(Stage::Generate));
        assert!(TemplateSet::load_dir(&dir.path().join("missing")).is_err());
    }
}
