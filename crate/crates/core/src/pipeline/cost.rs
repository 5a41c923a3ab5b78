use serde::{Deserialize, Serialize};

use super::PipelineError;

/// Average prompt size of an eight-shot completion prompt, in tokens.
pub const DEFAULT_AVG_PROMPT_TOKENS: f64 = 174.0;
/// Share of queried subjects expected to survive thresholding.
pub const DEFAULT_RETENTION_RATE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub price_per_1k_tokens: f64,
    #[serde(default = "default_avg_prompt_tokens")]
    pub avg_prompt_tokens: f64,
    #[serde(default = "default_retention_rate")]
    pub retention_rate: f64,
}

fn default_avg_prompt_tokens() -> f64 {
    DEFAULT_AVG_PROMPT_TOKENS
}

fn default_retention_rate() -> f64 {
    DEFAULT_RETENTION_RATE
}

impl CostModel {
    pub fn new(price_per_1k_tokens: f64) -> Self {
        Self {
            price_per_1k_tokens,
            avg_prompt_tokens: DEFAULT_AVG_PROMPT_TOKENS,
            retention_rate: DEFAULT_RETENTION_RATE,
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if !(self.price_per_1k_tokens > 0.0 && self.price_per_1k_tokens.is_finite()) {
            return Err(PipelineError::Config("price_per_1k_tokens must be positive".into()));
        }
        if !(self.avg_prompt_tokens > 0.0 && self.avg_prompt_tokens.is_finite()) {
            return Err(PipelineError::Config("avg_prompt_tokens must be positive".into()));
        }
        if !(self.retention_rate > 0.0 && self.retention_rate <= 1.0) {
            return Err(PipelineError::Config("retention_rate must lie in (0, 1]".into()));
        }
        Ok(())
    }

    pub fn cost_per_query(&self) -> f64 {
        self.avg_prompt_tokens * self.price_per_1k_tokens / 1000.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostEstimate {
    pub queries: u64,
    pub total: f64,
    pub per_query: f64,
    pub per_retained: f64,
}

pub fn estimate_cost(num_queries: u64, model: &CostModel) -> CostEstimate {
    let per_query = model.cost_per_query();
    CostEstimate {
        queries: num_queries,
        total: num_queries as f64 * per_query,
        per_query,
        per_retained: per_query / model.retention_rate,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn headline_figures() {
        let est = estimate_cost(48_000_000, &CostModel::new(0.02));
        // 174 * 0.02 / 1000 = 0.00348 per query
        assert!((est.per_query - 0.00348).abs() < 1e-15);
        assert!((est.total - 167_040.0).abs() < 1e-6);
        assert!((est.per_retained - 0.00696).abs() < 1e-15);
    }

    #[test]
    fn zero_queries() {
        let est = estimate_cost(0, &CostModel::new(0.02));
        assert_eq!(est.total, 0.0);
        assert!(est.per_query > 0.0);
    }

    #[test]
    fn linear_in_price() {
        let a = estimate_cost(1000, &CostModel::new(0.02));
        let b = estimate_cost(1000, &CostModel::new(0.04));
        assert!((b.total - 2.0 * a.total).abs() < 1e-12);
    }

    #[test]
    fn validation() {
        assert!(CostModel::new(0.02).validate().is_ok());
        assert!(CostModel::new(0.0).validate().is_err());
        let mut m = CostModel::new(0.02);
        m.retention_rate = 1.5;
        assert!(m.validate().is_err());
    }
}
