//! Prompt dataset ingestion.
//!
//! Prompts keep their source order and their id is the 0-based line index.
//! A bad line aborts the load: skipping it would shift every later id.

use std::fs::File;
use std::io::{self, BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetFormat {
    /// One JSON object per line; the `ctx` field is the prompt.
    #[default]
    #[serde(alias = "hellaswag")]
    HellaSwagJsonl,
    /// One prompt per line.
    PlainLines,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Prompt {
    pub id: usize,
    pub text: String,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("dataset file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("reading dataset: {0}")]
    Io(#[from] io::Error),
    #[error("malformed record on line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("prompt limit must be positive")]
    InvalidLimit,
}

#[derive(Deserialize)]
struct HellaSwagRecord {
    ctx: Option<String>,
}

/// Loads prompts in file order, keeping at most `limit` of them.
pub fn load_prompts(
    path: &Path,
    format: DatasetFormat,
    limit: Option<usize>,
) -> Result<Vec<Prompt>, DatasetError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == io::ErrorKind::NotFound => {
            return Err(DatasetError::FileNotFound(path.to_path_buf()))
        }
        Err(e) => return Err(e.into()),
    };
    parse_prompts(BufReader::new(file), format, limit)
}

/// Same as [`load_prompts`] over any buffered reader.
pub fn parse_prompts(
    reader: impl BufRead,
    format: DatasetFormat,
    limit: Option<usize>,
) -> Result<Vec<Prompt>, DatasetError> {
    if limit == Some(0) {
        return Err(DatasetError::InvalidLimit);
    }
    let cap = limit.unwrap_or(usize::MAX);
    let mut prompts = Vec::new();
    for (id, line) in reader.lines().enumerate() {
        if prompts.len() >= cap {
            break;
        }
        let line = line?;
        let lineno = id + 1;
        let text = match format {
            DatasetFormat::HellaSwagJsonl => parse_hellaswag_line(&line, lineno)?,
            DatasetFormat::PlainLines => line,
        };
        if text.trim().is_empty() {
            return Err(DatasetError::MalformedRecord {
                line: lineno,
                reason: "empty prompt".into(),
            });
        }
        prompts.push(Prompt { id, text });
    }
    if prompts.is_empty() {
        return Err(DatasetError::EmptyDataset);
    }
    Ok(prompts)
}

fn parse_hellaswag_line(line: &str, lineno: usize) -> Result<String, DatasetError> {
    let rec: HellaSwagRecord =
        serde_json::from_str(line).map_err(|e| DatasetError::MalformedRecord {
            line: lineno,
            reason: e.to_string(),
        })?;
    rec.ctx.ok_or_else(|| DatasetError::MalformedRecord {
        line: lineno,
        reason: "missing `ctx` field".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    const HS: &str = concat!(
        r#"{"ind": 4, "ctx": "A man is sitting on a roof. he", "label": 3}"#,
        "\n",
        r#"{"ind": 7, "ctx": "A woman is outside with a bucket and a dog.", "label": 0}"#,
        "\n",
        r#"{"ind": 9, "ctx": "Kids are playing in a yard and", "label": 1}"#,
        "\n",
    );

    fn hs(limit: Option<usize>) -> Result<Vec<Prompt>, DatasetError> {
        parse_prompts(Cursor::new(HS), DatasetFormat::HellaSwagJsonl, limit)
    }

    #[test]
    fn keeps_file_order() {
        let p = hs(None).unwrap();
        assert_eq!(p.iter().map(|p| p.id).collect::<Vec<_>>(), vec![0, 1, 2]);
        assert_eq!(p[0].text, "A man is sitting on a roof. he");
        assert_eq!(p[2].text, "Kids are playing in a yard and");
    }

    #[test]
    fn limit_takes_prefix() {
        let p = hs(Some(2)).unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p[1].id, 1);
    }

    #[test]
    fn zero_limit_rejected() {
        assert!(matches!(hs(Some(0)), Err(DatasetError::InvalidLimit)));
    }

    #[test]
    fn missing_ctx_reports_line() {
        let text = "{\"ctx\": \"ok\"}\n{\"label\": 1}\n";
        let err =
            parse_prompts(Cursor::new(text), DatasetFormat::HellaSwagJsonl, None).unwrap_err();
        assert!(matches!(err, DatasetError::MalformedRecord { line: 2, .. }));
    }

    #[test]
    fn invalid_json_reports_line() {
        let text = "{\"ctx\": \"ok\"}\n{\"ctx\": \"a\"}\nnot json\n";
        let err =
            parse_prompts(Cursor::new(text), DatasetFormat::HellaSwagJsonl, None).unwrap_err();
        assert!(matches!(err, DatasetError::MalformedRecord { line: 3, .. }));
    }

    #[test]
    fn blank_plain_line_is_an_error() {
        let err =
            parse_prompts(Cursor::new("a\n\nb\n"), DatasetFormat::PlainLines, None).unwrap_err();
        assert!(matches!(err, DatasetError::MalformedRecord { line: 2, .. }));
    }

    #[test]
    fn empty_file() {
        let err = parse_prompts(Cursor::new(""), DatasetFormat::PlainLines, None).unwrap_err();
        assert!(matches!(err, DatasetError::EmptyDataset));
    }

    #[test]
    fn missing_file() {
        let err = load_prompts(
            Path::new("/no/such/file.jsonl"),
            DatasetFormat::HellaSwagJsonl,
            None,
        )
        .unwrap_err();
        assert!(matches!(err, DatasetError::FileNotFound(_)));
    }

    #[test]
    fn load_twice_identical() {
        let f = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(f.path(), HS).unwrap();
        let a = load_prompts(f.path(), DatasetFormat::HellaSwagJsonl, None).unwrap();
        let b = load_prompts(f.path(), DatasetFormat::HellaSwagJsonl, None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn plain_lines() {
        let p = parse_prompts(Cursor::new("one\ntwo"), DatasetFormat::PlainLines, None).unwrap();
        assert_eq!(
            p[1],
            Prompt {
                id: 1,
                text: "two".into()
            }
        );
    }
}
