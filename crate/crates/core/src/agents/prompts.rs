//! Prompt templates with `{name}` placeholders, loadable from a directory
//! so wording can be swapped without rebuilding.

use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("cannot read template {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("template {file} lacks the {{{placeholder}}} placeholder")]
    MissingPlaceholder { file: String, placeholder: String },
}

const PREDICTOR_SYSTEM: &str = "\
You are an expert in heterogeneous information networks. You estimate how well a meta-structure \
will perform on a downstream task before it is trained. Structural similarity often implies \
functional similarity: compare each candidate with the evaluated records you are shown.";

const PREDICTOR_USER: &str = "\
Task: {task}

Each meta-structure is written as a sentence. A sub-logic such as \"User rates Business THAT \
belongs to Category\" is one meta-path; sub-logics joined by AND must all hold at once. Node \
words carrying the same #k marker denote the same node.

Previously evaluated meta-structures and their measured performance:
{records}

Candidates to estimate:
{candidates}

For every candidate, estimate its performance p in [0, 1] and your confidence c in [0, 1] in that \
estimate. Answer with one line per candidate, exactly in this format, inside a fenced block:
```
CANDIDATE <index>: p=<number>, c=<number>
```";

const SELECTOR_SYSTEM: &str = "\
You are an expert in heterogeneous information networks choosing which meta-structure to explore \
next in an evolutionary search.";

const SELECTOR_USER: &str = "\
Task: {task}

Choose exactly one candidate. Weigh four factors:
1. Semantics: does the sentence describe a plausible reason for the target relation?
2. Structural complexity: node and edge counts; simpler structures generalize and train faster.
3. Expected performance: the predicted value p.
4. Credibility of that expectation: the confidence c behind p.

Candidates:
{candidates}

Explain your reasoning briefly, then finish with a line of the form
CHOICE: <index>";

const EXPLAINER_SYSTEM: &str = "\
You are an expert in heterogeneous information networks explaining why some meta-structures \
perform better than others.";

const EXPLAINER_STEP1: &str = "\
Task: {task}

Below is a meta-structure under analysis (role=analyzed) and some of its one-step neighbors \
(role=neighbor), each written as a sentence.
{structures}

Step 1, structural comprehension: explain each structure by breaking down each of them into \
meaningful sub-structures, and say what relationship each sub-structure captures.";

const EXPLAINER_STEP2: &str = "\
Here are the measured performances of the same structures:
{metrics}

Step 2, performance attribution: using your analysis above, explain the performance differences \
through the presence/absence of beneficial/detrimental sub-structures. List each sub-structure you \
identify on its own line as
BENEFICIAL: <sub-structure>
or
DETRIMENTAL: <sub-structure>";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplates {
    pub predictor_system: String,
    pub predictor_user: String,
    pub selector_system: String,
    pub selector_user: String,
    pub explainer_system: String,
    pub explainer_step1: String,
    pub explainer_step2: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        Self {
            predictor_system: PREDICTOR_SYSTEM.into(),
            predictor_user: PREDICTOR_USER.into(),
            selector_system: SELECTOR_SYSTEM.into(),
            selector_user: SELECTOR_USER.into(),
            explainer_system: EXPLAINER_SYSTEM.into(),
            explainer_step1: EXPLAINER_STEP1.into(),
            explainer_step2: EXPLAINER_STEP2.into(),
        }
    }
}

/// (file name, required placeholders)
const FILES: [(&str, &[&str]); 7] = [
    ("predictor_system.txt", &[]),
    ("predictor_user.txt", &["candidates", "records"]),
    ("selector_system.txt", &[]),
    ("selector_user.txt", &["candidates"]),
    ("explainer_system.txt", &[]),
    ("explainer_step1.txt", &["structures"]),
    ("explainer_step2.txt", &["metrics"]),
];

impl PromptTemplates {
    fn slots(&mut self) -> [&mut String; 7] {
        [
            &mut self.predictor_system,
            &mut self.predictor_user,
            &mut self.selector_system,
            &mut self.selector_user,
            &mut self.explainer_system,
            &mut self.explainer_step1,
            &mut self.explainer_step2,
        ]
    }

    /// Reads whichever template files exist in `dir`; the rest keep their
    /// built-in text.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self, PromptError> {
        let dir = dir.as_ref();
        let mut templates = Self::default();
        for ((file, required), slot) in FILES.iter().zip(templates.slots()) {
            let path = dir.join(file);
            if !path.exists() {
                continue;
            }
            let text = std::fs::read_to_string(&path).map_err(|source| PromptError::Io {
                path: path.display().to_string(),
                source,
            })?;
            for p in *required {
                if !text.contains(&format!("{{{p}}}")) {
                    return Err(PromptError::MissingPlaceholder {
                        file: file.to_string(),
                        placeholder: p.to_string(),
                    });
                }
            }
            log::info!("using prompt template {}", path.display());
            *slot = text;
        }
        Ok(templates)
    }

    /// Writes the current templates into `dir`, one file each.
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> std::io::Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let mut copy = self.clone();
        for ((file, _), text) in FILES.iter().zip(copy.slots()) {
            std::fs::write(dir.join(file), text.as_bytes())?;
        }
        Ok(())
    }
}

/// Substitutes `{name}` placeholders. Unknown placeholders stay as written.
pub fn render(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (name, value) in vars {
        out = out.replace(&format!("{{{name}}}"), value);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_fills_named_slots() {
        assert_eq!(render("a {x} b {y} {z}", &[("x", "1"), ("y", "2")]), "a 1 b 2 {z}");
    }

    #[test]
    fn directory_overrides_single_files() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("selector_user.txt"), "Pick one of:\n{candidates}\nCHOICE: <i>").unwrap();
        let t = PromptTemplates::load_dir(dir.path()).unwrap();
        assert!(t.selector_user.starts_with("Pick one of:"));
        assert_eq!(t.predictor_user, PromptTemplates::default().predictor_user);
    }

    #[test]
    fn missing_placeholder_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("predictor_user.txt"), "no slots").unwrap();
        assert!(matches!(
            PromptTemplates::load_dir(dir.path()),
            Err(PromptError::MissingPlaceholder { .. })
        ));
    }

    #[test]
    fn written_templates_load_back() {
        let dir = tempfile::tempdir().unwrap();
        PromptTemplates::default().write_dir(dir.path()).unwrap();
        assert_eq!(PromptTemplates::load_dir(dir.path()).unwrap(), PromptTemplates::default());
    }
}
