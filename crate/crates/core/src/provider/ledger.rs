use std::collections::BTreeMap;
use std::sync::Mutex;
use std::time::Duration;

use serde::Serialize;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct TagUsage {
    /// Completed calls, repair re-asks included.
    pub calls: u64,
    /// Calls that were corrective re-asks.
    pub repairs: u64,
    pub input_tokens: u64,
    pub output_tokens: u64,
}

impl TagUsage {
    /// Calls excluding repair re-asks.
    pub fn logical_calls(&self) -> u64 {
        self.calls - self.repairs
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LedgerSnapshot {
    pub tags: BTreeMap<String, TagUsage>,
    pub total: TagUsage,
    pub wall_time_secs: f64,
}

impl LedgerSnapshot {
    pub fn calls(&self, tag: &str) -> u64 {
        self.tags.get(tag).map_or(0, |u| u.calls)
    }

    pub fn logical_calls(&self) -> u64 {
        self.total.logical_calls()
    }

    /// Usage accrued since `earlier`.
    pub fn since(&self, earlier: &LedgerSnapshot) -> LedgerSnapshot {
        let sub = |a: &TagUsage, b: &TagUsage| TagUsage {
            calls: a.calls - b.calls,
            repairs: a.repairs - b.repairs,
            input_tokens: a.input_tokens - b.input_tokens,
            output_tokens: a.output_tokens - b.output_tokens,
        };
        let tags = self
            .tags
            .iter()
            .map(|(k, v)| (k.clone(), sub(v, earlier.tags.get(k).unwrap_or(&TagUsage::default()))))
            .filter(|(_, v)| v.calls > 0)
            .collect();
        LedgerSnapshot {
            tags,
            total: sub(&self.total, &earlier.total),
            wall_time_secs: self.wall_time_secs - earlier.wall_time_secs,
        }
    }
}

#[derive(Debug, Default)]
struct Inner {
    tags: BTreeMap<String, TagUsage>,
    wall_time: Duration,
}

/// Thread-safe per-tag accounting of provider calls.
#[derive(Debug, Default)]
pub struct CallLedger {
    inner: Mutex<Inner>,
}

impl CallLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&self, tag: &str, repair: bool, input_tokens: u64, output_tokens: u64, latency: Duration) {
        let mut inner = self.inner.lock().expect("ledger lock");
        let usage = inner.tags.entry(tag.to_string()).or_default();
        usage.calls += 1;
        usage.repairs += u64::from(repair);
        usage.input_tokens += input_tokens;
        usage.output_tokens += output_tokens;
        inner.wall_time += latency;
    }

    pub fn snapshot(&self) -> LedgerSnapshot {
        let inner = self.inner.lock().expect("ledger lock");
        let total = inner.tags.values().fold(TagUsage::default(), |acc, u| TagUsage {
            calls: acc.calls + u.calls,
            repairs: acc.repairs + u.repairs,
            input_tokens: acc.input_tokens + u.input_tokens,
            output_tokens: acc.output_tokens + u.output_tokens,
        });
        LedgerSnapshot {
            tags: inner.tags.clone(),
            total,
            wall_time_secs: inner.wall_time.as_secs_f64(),
        }
    }
}
