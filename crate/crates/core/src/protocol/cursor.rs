//! Reveal-one-sample-at-a-time access to a series.
//!
//! The cursor is the only path the engine has to the data, and its surface
//! makes future reads impossible by construction: `revealed` returns the
//! prefix of already-revealed samples and nothing else, and `advance` moves
//! the reveal point forward by exactly one. There is no accessor for
//! unrevealed values.

use crate::scalar::Scalar;
use crate::series::SohSeries;

/// Sample-at-a-time stream over a SoH trajectory.
///
/// Implementors must uphold the prefix discipline: `revealed()` never
/// exposes a sample that `advance()` has not yet returned.
pub trait SohStream<F: Scalar> {
    /// Total number of samples the stream will eventually yield. Count
    /// metadata only; values stay hidden until revealed.
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// How many samples have been revealed so far.
    fn revealed_count(&self) -> usize;

    /// The revealed prefix, oldest first.
    fn revealed(&self) -> &[F];

    /// Reveals the next sample, or `None` when the stream is exhausted.
    /// Exhaustion is a signal, not an error.
    fn advance(&mut self) -> Option<F>;
}

/// Stream over an in-memory series.
#[derive(Debug)]
pub struct StreamCursor<'a, F: Scalar> {
    values: &'a [F],
    revealed: usize,
}

impl<'a, F: Scalar> StreamCursor<'a, F> {
    pub fn new(series: &'a SohSeries<F>) -> Self {
        Self {
            values: series.values(),
            revealed: 0,
        }
    }

    /// Stream over a raw value slice (test and tooling convenience).
    pub fn from_values(values: &'a [F]) -> Self {
        Self { values, revealed: 0 }
    }
}

impl<'a, F: Scalar> SohStream<F> for StreamCursor<'a, F> {
    fn len(&self) -> usize {
        self.values.len()
    }

    fn revealed_count(&self) -> usize {
        self.revealed
    }

    fn revealed(&self) -> &[F] {
        &self.values[..self.revealed]
    }

    fn advance(&mut self) -> Option<F> {
        if self.revealed == self.values.len() {
            return None;
        }
        let value = self.values[self.revealed];
        self.revealed += 1;
        Some(value)
    }
}
