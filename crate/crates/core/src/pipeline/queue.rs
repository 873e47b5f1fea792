use std::collections::VecDeque;
use std::sync::{Condvar, Mutex, MutexGuard};

use serde::{Deserialize, Serialize};

/// What a full queue does with a new message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DropPolicy {
    /// The producer waits for space; nothing is ever dropped.
    #[default]
    Block,
    /// The oldest queued message is evicted to admit the new one.
    DropOldest,
}

impl std::str::FromStr for DropPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "block" => Ok(DropPolicy::Block),
            "drop-oldest" => Ok(DropPolicy::DropOldest),
            other => Err(format!("unknown drop policy {other:?} (expected block or drop-oldest)")),
        }
    }
}

/// Per-edge counters. After the consumer has drained a closed queue,
/// `produced == delivered + dropped`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeStats {
    pub name: String,
    pub produced: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub peak_queued: usize,
    pub capacity: usize,
}

struct State<T> {
    buf: VecDeque<T>,
    closed: bool,
    stats: EdgeStats,
}

/// Multi-producer multi-consumer FIFO with a hard capacity.
pub struct BoundedQueue<T> {
    state: Mutex<State<T>>,
    not_empty: Condvar,
    not_full: Condvar,
    capacity: usize,
    policy: DropPolicy,
}

impl<T> BoundedQueue<T> {
    /// `capacity` is raised to 1 if zero.
    pub fn new(name: impl Into<String>, capacity: usize, policy: DropPolicy) -> Self {
        let capacity = capacity.max(1);
        Self {
            state: Mutex::new(State {
                buf: VecDeque::with_capacity(capacity),
                closed: false,
                stats: EdgeStats {
                    name: name.into(),
                    capacity,
                    ..Default::default()
                },
            }),
            not_empty: Condvar::new(),
            not_full: Condvar::new(),
            capacity,
            policy,
        }
    }

    fn lock(&self) -> MutexGuard<'_, State<T>> {
        // critical sections never panic midway
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Enqueues `item`, or hands it back if the queue is closed.
    pub fn push(&self, item: T) -> Result<(), T> {
        let mut st = self.lock();
        loop {
            if st.closed {
                return Err(item);
            }
            if st.buf.len() < self.capacity {
                break;
            }
            match self.policy {
                DropPolicy::Block => {
                    st = self.not_full.wait(st).unwrap_or_else(|e| e.into_inner());
                }
                DropPolicy::DropOldest => {
                    st.buf.pop_front();
                    st.stats.dropped += 1;
                }
            }
        }
        st.buf.push_back(item);
        st.stats.produced += 1;
        st.stats.peak_queued = st.stats.peak_queued.max(st.buf.len());
        drop(st);
        self.not_empty.notify_one();
        Ok(())
    }

    /// Next message; `None` once the queue is closed and empty.
    pub fn pop(&self) -> Option<T> {
        let mut st = self.lock();
        loop {
            if let Some(item) = st.buf.pop_front() {
                st.stats.delivered += 1;
                drop(st);
                self.not_full.notify_one();
                return Some(item);
            }
            if st.closed {
                return None;
            }
            st = self.not_empty.wait(st).unwrap_or_else(|e| e.into_inner());
        }
    }

    /// No further pushes; queued messages remain poppable.
    pub fn close(&self) {
        self.lock().closed = true;
        self.not_empty.notify_all();
        self.not_full.notify_all();
    }

    /// Closes and discards queued messages, counting them as dropped.
    pub fn abort(&self) {
        let mut st = self.lock();
        st.closed = true;
        let n = st.buf.len() as u64;
        st.buf.clear();
        st.stats.dropped += n;
        drop(st);
        self.not_empty.notify_all();
        self.not_full.notify_all();
    }

    pub fn is_closed(&self) -> bool {
        self.lock().closed
    }

    pub fn len(&self) -> usize {
        self.lock().buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn stats(&self) -> EdgeStats {
        self.lock().stats.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;
    use std::thread;
    use std::time::Duration;

    #[test]
    fn drop_oldest_keeps_newest() {
        let q = BoundedQueue::new("e", 2, DropPolicy::DropOldest);
        for i in 0..5 {
            q.push(i).unwrap();
        }
        q.close();
        assert_eq!(q.pop(), Some(3));
        assert_eq!(q.pop(), Some(4));
        assert_eq!(q.pop(), None);
        let s = q.stats();
        assert_eq!((s.produced, s.delivered, s.dropped, s.peak_queued), (5, 2, 3, 2));
    }

    #[test]
    fn block_waits_for_consumer() {
        let q = Arc::new(BoundedQueue::new("e", 1, DropPolicy::Block));
        let c = {
            let q = q.clone();
            thread::spawn(move || {
                let mut got = Vec::new();
                while let Some(v) = q.pop() {
                    thread::sleep(Duration::from_millis(1));
                    got.push(v);
                }
                got
            })
        };
        for i in 0..20 {
            q.push(i).unwrap();
        }
        q.close();
        assert_eq!(c.join().unwrap(), (0..20).collect::<Vec<_>>());
        let s = q.stats();
        assert_eq!((s.produced, s.delivered, s.dropped), (20, 20, 0));
        assert!(s.peak_queued <= 1);
    }

    #[test]
    fn closed_queue_rejects_and_unblocks() {
        let q = Arc::new(BoundedQueue::new("e", 1, DropPolicy::Block));
        q.push(1).unwrap();
        let p = {
            let q = q.clone();
            thread::spawn(move || q.push(2))
        };
        thread::sleep(Duration::from_millis(20));
        q.abort();
        assert_eq!(p.join().unwrap(), Err(2));
        let s = q.stats();
        assert_eq!(s.produced, s.delivered + s.dropped);
    }

    #[test]
    fn policy_parse() {
        assert_eq!("block".parse::<DropPolicy>(), Ok(DropPolicy::Block));
        assert_eq!("drop-oldest".parse::<DropPolicy>(), Ok(DropPolicy::DropOldest));
        assert!("lifo".parse::<DropPolicy>().is_err());
    }
}
