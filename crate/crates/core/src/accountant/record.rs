use serde::{Deserialize, Serialize};

use super::compose::{compose_to_dp, PrivacySpend};
use super::config::AccountantConfig;
use super::rdp::{rdp_curve, OrderGrid, RdpCurve};
use crate::error::Result;

/// `{config, curve: [{alpha, eps}], spend: {eps, delta, alpha}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccountRecord {
    pub config: AccountantConfig,
    pub curve: RdpCurve,
    pub spend: PrivacySpend,
}

impl AccountRecord {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Curve plus spend for `config` at its own T and δ.
pub fn account(config: &AccountantConfig, grid: &OrderGrid) -> Result<AccountRecord> {
    let curve = rdp_curve(config, grid)?;
    let spend = compose_to_dp(&curve, config.iterations, config.delta)?;
    Ok(AccountRecord {
        config: *config,
        curve,
        spend,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_uses_fixed_field_names() {
        let cfg = AccountantConfig::baseline(0.01, 1.0, 1.0, 100, 1e-5);
        let rec = account(&cfg, &OrderGrid::new(vec![2.0, 8.0]).unwrap()).unwrap();
        let text = rec.to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert!(v["config"]["T"].is_u64());
        assert!(v["curve"][1]["alpha"].is_f64() && v["curve"][1]["eps"].is_f64());
        assert!(v["spend"]["eps"].is_f64() && v["spend"]["alpha"].is_f64());
        assert_eq!(AccountRecord::from_json(&text).unwrap(), rec);
    }
}
