use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// A packet arrival. The packet itself is materialised when the event is
/// popped: a worker's run depends only on its dispatched parameter and its
/// own gradient stream, so computing it late changes nothing.
#[derive(Debug, Clone, Copy)]
pub struct Event {
    pub timestamp: f64,
    pub worker: usize,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    /// Reversed `(timestamp, worker)` so the max-heap pops the earliest event.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .timestamp
            .total_cmp(&self.timestamp)
            .then_with(|| other.worker.cmp(&self.worker))
    }
}

/// Min-queue of events ordered lexicographically by `(timestamp, worker)`.
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Event>,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, event: Event) {
        debug_assert!(event.timestamp.is_finite());
        self.heap.push(event);
    }

    pub fn pop(&mut self) -> Option<Event> {
        self.heap.pop()
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Remaining events in pop order.
    pub fn drain_ordered(&mut self) -> Vec<Event> {
        let mut out = Vec::with_capacity(self.heap.len());
        while let Some(e) = self.heap.pop() {
            out.push(e);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pops_by_time_then_worker() {
        let mut q = EventQueue::new();
        for (t, w) in [(2.0, 0), (1.0, 3), (1.0, 1), (0.5, 9), (2.0, 0usize.wrapping_add(5))] {
            q.push(Event {
                timestamp: t,
                worker: w,
            });
        }
        let order: Vec<_> = q.drain_ordered().iter().map(|e| (e.timestamp, e.worker)).collect();
        assert_eq!(order, vec![(0.5, 9), (1.0, 1), (1.0, 3), (2.0, 0), (2.0, 5)]);
    }
}
