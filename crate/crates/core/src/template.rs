use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum TemplateError {
    #[error("template {name}: missing placeholder {{{placeholder}}}")]
    MissingPlaceholder { name: String, placeholder: String },
    #[error("template {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
}

/// Plain-text prompt template with `{name}` placeholders.
///
/// Rendering is single pass, so placeholder syntax inside substituted
/// values is never expanded. Braces around unknown names are left as is.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    name: String,
    text: String,
    placeholders: Vec<&'static str>,
}

impl PromptTemplate {
    pub fn new(
        name: impl Into<String>,
        text: impl Into<String>,
        placeholders: &[&'static str],
    ) -> Result<Self, TemplateError> {
        let name = name.into();
        let text = text.into();
        for p in placeholders {
            if !text.contains(&format!("{{{p}}}")) {
                return Err(TemplateError::MissingPlaceholder {
                    name,
                    placeholder: (*p).to_owned(),
                });
            }
        }
        Ok(Self {
            name,
            text,
            placeholders: placeholders.to_vec(),
        })
    }

    pub fn load(path: &Path, placeholders: &[&'static str]) -> Result<Self, TemplateError> {
        let text = std::fs::read_to_string(path).map_err(|source| TemplateError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Self::new(path.display().to_string(), text, placeholders)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Substitutes `values`; placeholders without a value render empty.
    pub fn render(&self, values: &[(&str, &str)]) -> String {
        let mut out = String::with_capacity(self.text.len() * 2);
        let mut rest = self.text.as_str();
        while let Some(open) = rest.find('{') {
            out.push_str(&rest[..open]);
            let after = &rest[open + 1..];
            let key = after
                .find('}')
                .map(|close| &after[..close])
                .filter(|k| self.placeholders.contains(k));
            match key {
                Some(k) => {
                    let value = values.iter().find(|(n, _)| *n == k).map_or("", |(_, v)| v);
                    out.push_str(value);
                    rest = &after[k.len() + 1..];
                }
                None => {
                    out.push('{');
                    rest = after;
                }
            }
        }
        out.push_str(rest);
        out
    }
}
