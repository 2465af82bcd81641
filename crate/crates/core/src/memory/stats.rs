use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::minilang::{ErrorEvent, ErrorType};

/// Error counts by type, over all history or over the most recent `window`
/// recorded entries.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ErrorStats {
    pub counts: BTreeMap<ErrorType, u64>,
    pub total: u64,
    window: Option<usize>,
    recent: VecDeque<Vec<ErrorType>>,
}

impl ErrorStats {
    pub fn new(window: Option<usize>) -> Self {
        Self { window, ..Self::default() }
    }

    pub fn window(&self) -> Option<usize> {
        self.window
    }

    /// Records the error events of one entry.
    pub fn record(&mut self, events: &[ErrorEvent]) {
        let types: Vec<ErrorType> = events.iter().map(|e| e.error_type).collect();
        for &t in &types {
            *self.counts.entry(t).or_insert(0) += 1;
            self.total += 1;
        }
        if let Some(w) = self.window {
            self.recent.push_back(types);
            while self.recent.len() > w {
                for t in self.recent.pop_front().unwrap_or_default() {
                    let c = self.counts.get_mut(&t).expect("counted on record");
                    *c -= 1;
                    if *c == 0 {
                        self.counts.remove(&t);
                    }
                    self.total -= 1;
                }
            }
        }
    }

    /// Counts normalized by the total; empty when nothing is recorded.
    pub fn proportions(&self) -> BTreeMap<ErrorType, f64> {
        if self.total == 0 {
            return BTreeMap::new();
        }
        self.counts.iter().map(|(&t, &n)| (t, n as f64 / self.total as f64)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minilang::OutcomeKind;

    fn ev(t: ErrorType) -> ErrorEvent {
        ErrorEvent { error_type: t, line: 1, kind: OutcomeKind::RuntimeError }
    }

    #[test]
    fn proportions_normalize() {
        let mut s = ErrorStats::new(None);
        assert!(s.proportions().is_empty());
        s.record(&[ev(ErrorType::DivisionByZero)]);
        s.record(&[ev(ErrorType::TypeMismatch); 3]);
        let p = s.proportions();
        assert_eq!(p[&ErrorType::DivisionByZero], 0.25);
        assert_eq!(p[&ErrorType::TypeMismatch], 0.75);
        s.record(&[]);
        assert_eq!(s.total, 4);
    }

    #[test]
    fn window_forgets_old_entries() {
        let mut s = ErrorStats::new(Some(2));
        s.record(&[ev(ErrorType::DivisionByZero); 2]);
        s.record(&[ev(ErrorType::TypeMismatch)]);
        s.record(&[]);
        assert_eq!(s.total, 1);
        assert_eq!(s.counts.get(&ErrorType::DivisionByZero), None);
        s.record(&[]);
        assert_eq!(s.total, 0);
        assert!(s.proportions().is_empty());
    }
}
