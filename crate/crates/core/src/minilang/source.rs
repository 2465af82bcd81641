use serde::{Deserialize, Serialize};

/// One physical line of a program, numbered from 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Line<'a> {
    pub number: u32,
    pub text: &'a str,
}

/// Program text as emitted by a generator or read from a corpus.
///
/// A single trailing newline is dropped on construction so that the text
/// and its line list round-trip exactly.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SourceProgram {
    text: String,
}

impl SourceProgram {
    pub fn new(text: impl Into<String>) -> Self {
        let mut text = text.into();
        if text.ends_with('\n') {
            text.pop();
        }
        Self { text }
    }

    pub fn from_lines<'a>(lines: impl IntoIterator<Item = &'a str>) -> Self {
        Self { text: lines.into_iter().collect::<Vec<_>>().join("\n") }
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn lines(&self) -> Vec<Line<'_>> {
        if self.text.is_empty() {
            return Vec::new();
        }
        self.text.split('\n').enumerate().map(|(i, text)| Line { number: i as u32 + 1, text }).collect()
    }

    pub fn line_count(&self) -> u32 {
        if self.text.is_empty() {
            0
        } else {
            self.text.split('\n').count() as u32
        }
    }

    pub fn line(&self, number: u32) -> Option<&str> {
        if number == 0 {
            return None;
        }
        self.text.split('\n').nth(number as usize - 1)
    }
}

impl From<&str> for SourceProgram {
    fn from(text: &str) -> Self {
        Self::new(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn numbering_is_one_based() {
        let p = SourceProgram::new("x = 1\nreturn x\n");
        let lines = p.lines();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0].number, 1);
        assert_eq!(lines[1].text, "return x");
        assert_eq!(p.line(2), Some("return x"));
        assert_eq!(p.line(0), None);
        assert!(SourceProgram::new("").lines().is_empty());
    }

    proptest! {
        #[test]
        fn text_round_trips_through_lines(text in "[a-z =+\n]{0,40}") {
            let p = SourceProgram::new(text);
            let lines = p.lines();
            for (i, l) in lines.iter().enumerate() {
                prop_assert_eq!(l.number as usize, i + 1);
            }
            let back = SourceProgram::from_lines(lines.iter().map(|l| l.text));
            prop_assert_eq!(back, p);
        }
    }
}
