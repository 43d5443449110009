//! Flat `key = value` configuration text.
//!
//! Blank lines and lines starting with `#` are comments. A value may carry a
//! trailing ` # comment`. The original text is kept line by line so that
//! [`Config::to_text`] reproduces the input exactly.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}: `{key}`: {message}")]
    Value {
        key: String,
        line: usize,
        message: String,
    },
    #[error("`{key}`: {message}")]
    Invalid { key: String, message: String },
}

#[derive(Debug, Clone, PartialEq)]
enum Line {
    Raw(String),
    Entry {
        raw: String,
        key: String,
        value: String,
    },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Config {
    lines: Vec<Line>,
    trailing_newline: bool,
}

fn is_key_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.'
}

fn parse_line(raw: &str, number: usize) -> Result<Line, ConfigError> {
    let trimmed = raw.trim_start();
    if trimmed.is_empty() || trimmed.starts_with('#') {
        return Ok(Line::Raw(raw.to_string()));
    }
    let indent = raw.len() - trimmed.len();
    let err = |column: usize, message: &str| ConfigError::Parse {
        line: number,
        column,
        message: message.to_string(),
    };
    let Some(eq) = raw.find('=') else {
        return Err(err(indent + 1, "expected `key = value`"));
    };
    let key = raw[..eq].trim();
    if key.is_empty() {
        return Err(err(eq + 1, "missing key before `=`"));
    }
    if let Some((i, c)) = raw[indent..eq]
        .trim_end()
        .char_indices()
        .find(|&(_, c)| !is_key_char(c))
    {
        return Err(err(indent + i + 1, &format!("unexpected character `{c}` in key")));
    }
    let rest = &raw[eq + 1..];
    let value = match rest.find(" #").or_else(|| rest.find("\t#")) {
        Some(i) => &rest[..i],
        None => rest,
    };
    Ok(Line::Entry {
        raw: raw.to_string(),
        key: key.to_string(),
        value: value.trim().to_string(),
    })
}

impl FromStr for Config {
    type Err = ConfigError;

    fn from_str(text: &str) -> Result<Self, ConfigError> {
        let mut lines = Vec::new();
        let mut seen: Vec<(String, usize)> = Vec::new();
        for (i, raw) in text.split('\n').enumerate() {
            let raw = raw.strip_suffix('\r').unwrap_or(raw);
            let line = parse_line(raw, i + 1)?;
            if let Line::Entry { key, .. } = &line {
                if let Some((_, first)) = seen.iter().find(|(k, _)| k == key) {
                    return Err(ConfigError::Parse {
                        line: i + 1,
                        column: raw.len() - raw.trim_start().len() + 1,
                        message: format!("duplicate key `{key}` (first on line {first})"),
                    });
                }
                seen.push((key.clone(), i + 1));
            }
            lines.push(line);
        }
        let trailing_newline = text.ends_with('\n');
        if trailing_newline {
            lines.pop();
        }
        Ok(Config {
            lines,
            trailing_newline,
        })
    }
}

impl fmt::Display for Config {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        text.parse()
    }

    /// The text this configuration was parsed from, with any [`Config::set`]
    /// edits applied.
    pub fn to_text(&self) -> String {
        let mut out = self
            .lines
            .iter()
            .map(|l| match l {
                Line::Raw(r) | Line::Entry { raw: r, .. } => r.as_str(),
            })
            .collect::<Vec<_>>()
            .join("\n");
        if self.trailing_newline {
            out.push('\n');
        }
        out
    }

    fn find(&self, key: &str) -> Option<(usize, &str)> {
        self.lines.iter().enumerate().find_map(|(i, l)| match l {
            Line::Entry { key: k, value, .. } if k == key => Some((i + 1, value.as_str())),
            _ => None,
        })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.find(key).map(|(_, v)| v)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.lines.iter().filter_map(|l| match l {
            Line::Entry { key, .. } => Some(key.as_str()),
            _ => None,
        })
    }

    /// Replaces the value of `key`, or appends a new entry.
    pub fn set(&mut self, key: &str, value: &str) {
        let raw = format!("{key} = {value}");
        for l in &mut self.lines {
            if let Line::Entry { key: k, .. } = l {
                if k == key {
                    *l = Line::Entry {
                        raw,
                        key: key.to_string(),
                        value: value.to_string(),
                    };
                    return;
                }
            }
        }
        self.lines.push(Line::Entry {
            raw,
            key: key.to_string(),
            value: value.to_string(),
        });
        self.trailing_newline = true;
    }

    /// Parses `key` with `FromStr`, falling back to `default` when absent.
    pub fn parse_or<T: FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        match self.find(key) {
            None => Ok(default),
            Some((line, v)) => v.parse().map_err(|e: T::Err| ConfigError::Value {
                key: key.to_string(),
                line,
                message: format!("cannot parse `{v}`: {e}"),
            }),
        }
    }

    /// A list of numbers: comma separated values or `start:stop:step`.
    pub fn list_or(&self, key: &str, default: Vec<f64>) -> Result<Vec<f64>, ConfigError> {
        match self.find(key) {
            None => Ok(default),
            Some((line, v)) => parse_list(v).map_err(|message| ConfigError::Value {
                key: key.to_string(),
                line,
                message,
            }),
        }
    }

    /// Points as `t,z; t,z; ...`.
    pub fn points_or(&self, key: &str, default: Vec<(f64, f64)>) -> Result<Vec<(f64, f64)>, ConfigError> {
        match self.find(key) {
            None => Ok(default),
            Some((line, v)) => parse_points(v).map_err(|message| ConfigError::Value {
                key: key.to_string(),
                line,
                message,
            }),
        }
    }

    pub fn line_of(&self, key: &str) -> Option<usize> {
        self.find(key).map(|(l, _)| l)
    }
}

pub fn parse_list(v: &str) -> Result<Vec<f64>, String> {
    let v = v.trim();
    if v.is_empty() {
        return Ok(Vec::new());
    }
    if v.contains(':') {
        let parts: Vec<&str> = v.split(':').map(str::trim).collect();
        let [a, b, s] = parts[..] else {
            return Err(format!("range `{v}` must be start:stop:step"));
        };
        let num = |x: &str| x.parse::<f64>().map_err(|e| format!("`{x}`: {e}"));
        let (a, b, s) = (num(a)?, num(b)?, num(s)?);
        if !(s > 0.0) || b < a {
            return Err(format!("range `{v}` needs step > 0 and stop >= start"));
        }
        let count = ((b - a) / s + 1e-9).floor() as usize;
        // round to the step's decimals so 0.1:0.3:0.1 prints as 0.1, 0.2, 0.3
        return Ok((0..=count)
            .map(|i| {
                let x = a + i as f64 * s;
                (x * 1e12).round() / 1e12
            })
            .collect());
    }
    v.split(',')
        .map(|x| {
            let x = x.trim();
            x.parse::<f64>().map_err(|e| format!("`{x}`: {e}"))
        })
        .collect()
}

pub fn parse_points(v: &str) -> Result<Vec<(f64, f64)>, String> {
    let v = v.trim();
    if v.is_empty() {
        return Ok(Vec::new());
    }
    v.split(';')
        .map(|p| match parse_list(p)?[..] {
            [t, z] => Ok((t, z)),
            _ => Err(format!("point `{}` must be `t, z`", p.trim())),
        })
        .collect()
}
