use std::sync::Mutex;

use serde::{Deserialize, Serialize};

/// Spending limits for a run. `None` means unlimited.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub max_queries: Option<u64>,
    pub max_spend: Option<f64>,
}

impl Budget {
    pub fn unlimited() -> Self {
        Self::default()
    }

    pub fn is_unlimited(&self) -> bool {
        self.max_queries.is_none() && self.max_spend.is_none()
    }
}

#[derive(Debug, Default)]
struct Spent {
    queries: u64,
    spend: f64,
    exhausted: bool,
}

/// Pre-flight budget accounting shared by every request in a run.
#[derive(Debug)]
pub struct BudgetTracker {
    limits: Budget,
    spent: Mutex<Spent>,
}

impl BudgetTracker {
    pub fn new(limits: Budget) -> Self {
        Self {
            limits,
            spent: Mutex::new(Spent::default()),
        }
    }

    pub fn limits(&self) -> Budget {
        self.limits
    }

    /// Books one request of estimated `cost` if it fits. Once a request is
    /// refused, every later one is refused too.
    pub fn try_reserve(&self, cost: f64) -> bool {
        let mut s = self.spent.lock().expect("budget lock poisoned");
        if s.exhausted {
            return false;
        }
        let over_queries = self.limits.max_queries.is_some_and(|m| s.queries + 1 > m);
        // Small slack so a budget of exactly n·cost admits n requests.
        let over_spend = self
            .limits
            .max_spend
            .is_some_and(|m| s.spend + cost > m * (1.0 + 1e-12) + 1e-15);
        if over_queries || over_spend {
            s.exhausted = true;
            return false;
        }
        s.queries += 1;
        s.spend += cost;
        true
    }

    pub fn exhausted(&self) -> bool {
        self.spent.lock().expect("budget lock poisoned").exhausted
    }

    pub fn queries(&self) -> u64 {
        self.spent.lock().expect("budget lock poisoned").queries
    }

    pub fn spend(&self) -> f64 {
        self.spent.lock().expect("budget lock poisoned").spend
    }
}
