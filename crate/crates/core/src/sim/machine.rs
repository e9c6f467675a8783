use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pipeline stages used for time and energy attribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase {
    #[serde(rename = "HBD")]
    Hbd,
    #[serde(rename = "QRDecomp")]
    QrDecomp,
    #[serde(rename = "SortTrunc")]
    SortTrunc,
    #[serde(rename = "UpdateSVDInput")]
    UpdateSvdInput,
    #[serde(rename = "ReshapeEtc")]
    ReshapeEtc,
}

impl Phase {
    pub const ALL: [Phase; 5] = [
        Phase::Hbd,
        Phase::QrDecomp,
        Phase::SortTrunc,
        Phase::UpdateSvdInput,
        Phase::ReshapeEtc,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Phase::Hbd => "HBD",
            Phase::QrDecomp => "QRDecomp",
            Phase::SortTrunc => "SortTrunc",
            Phase::UpdateSvdInput => "UpdateSVDInput",
            Phase::ReshapeEtc => "ReshapeEtc",
        }
    }
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Main core plus a blockwise GEMM accelerator.
    Baseline,
    /// Baseline plus the TTD engine (HBD accelerator, sorting/truncation
    /// units, shared FP-ALU).
    TtEdge,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::TtEdge => "tt_edge",
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Measured system power in milliwatts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerStates {
    pub baseline_total: f64,
    pub ttedge_active: f64,
    pub ttedge_gated: f64,
}

impl Default for PowerStates {
    fn default() -> Self {
        Self {
            baseline_total: 171.04,
            ttedge_active: 178.23,
            ttedge_gated: 169.96,
        }
    }
}

/// Per-event latencies in nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostModel {
    pub dma_word: f64,
    pub gemm_block_op: f64,
    pub core_flop: f64,
    pub config_msg: f64,
    pub fpalu_op: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self {
            dma_word: 25.0,
            gemm_block_op: 400.0,
            core_flop: 60.0,
            config_msg: 1500.0,
            fpalu_op: 12.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MachineConfig {
    pub variant: Variant,
    pub gemm_block: usize,
    pub spm_bytes: u64,
    pub power_mw: PowerStates,
    pub cost_ns: CostModel,
    pub gating_phases: BTreeSet<Phase>,
    /// Phases whose GEMMs the TTD engine configures over its direct link to
    /// the GEMM accelerator (one config message per product). `None` means
    /// every phase. Ignored by the baseline.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direct_gemm_phases: Option<BTreeSet<Phase>>,
}

/// Bytes per DMA word; the modeled datapath is 32-bit.
pub const WORD_BYTES: u64 = 4;

impl MachineConfig {
    pub fn baseline() -> Self {
        Self {
            variant: Variant::Baseline,
            gemm_block: 16,
            spm_bytes: 320 * 1024,
            power_mw: PowerStates::default(),
            cost_ns: CostModel::default(),
            gating_phases: BTreeSet::new(),
            direct_gemm_phases: None,
        }
    }

    pub fn tt_edge() -> Self {
        Self {
            variant: Variant::TtEdge,
            gating_phases: [Phase::Hbd, Phase::SortTrunc].into_iter().collect(),
            ..Self::baseline()
        }
    }

    pub fn for_variant(variant: Variant) -> Self {
        match variant {
            Variant::Baseline => Self::baseline(),
            Variant::TtEdge => Self::tt_edge(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.gemm_block == 0 {
            return Err(Error::Config("gemm_block must be >= 1".into()));
        }
        let c = &self.cost_ns;
        let costs = [c.dma_word, c.gemm_block_op, c.core_flop, c.config_msg, c.fpalu_op];
        if costs.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::Config("cost_ns entries must be finite and >= 0".into()));
        }
        let p = &self.power_mw;
        if [p.baseline_total, p.ttedge_active, p.ttedge_gated]
            .iter()
            .any(|x| !x.is_finite() || *x < 0.0)
        {
            return Err(Error::Config("power_mw entries must be finite and >= 0".into()));
        }
        if self.variant == Variant::Baseline && !self.gating_phases.is_empty() {
            return Err(Error::Config(
                "baseline core is never clock gated; gating_phases must be empty".into(),
            ));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: MachineConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn is_gated(&self, phase: Phase) -> bool {
        self.variant == Variant::TtEdge && self.gating_phases.contains(&phase)
    }

    /// Power drawn while `phase` runs, in mW.
    pub fn power_of(&self, phase: Phase) -> f64 {
        match self.variant {
            Variant::Baseline => self.power_mw.baseline_total,
            Variant::TtEdge if self.is_gated(phase) => self.power_mw.ttedge_gated,
            Variant::TtEdge => self.power_mw.ttedge_active,
        }
    }

    pub fn uses_direct_gemm(&self, phase: Phase) -> bool {
        self.variant == Variant::TtEdge && self.direct_gemm_phases.as_ref().is_none_or(|set| set.contains(&phase))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_roundtrip_and_field_names() {
        let cfg = MachineConfig::tt_edge();
        let text = cfg.to_json();
        for key in [
            "variant",
            "gemm_block",
            "spm_bytes",
            "power_mw",
            "baseline_total",
            "ttedge_active",
            "ttedge_gated",
            "cost_ns",
            "dma_word",
            "gemm_block_op",
            "core_flop",
            "config_msg",
            "fpalu_op",
            "gating_phases",
        ] {
            assert!(text.contains(&format!("\"{key}\"")), "missing {key}");
        }
        assert_eq!(MachineConfig::from_json(&text).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_rejected() {
        let mut v: serde_json::Value = serde_json::from_str(&MachineConfig::baseline().to_json()).unwrap();
        v["turbo"] = serde_json::json!(true);
        assert!(matches!(
            MachineConfig::from_json(&v.to_string()),
            Err(Error::Config(_))
        ));

        let mut v: serde_json::Value = serde_json::from_str(&MachineConfig::baseline().to_json()).unwrap();
        v["cost_ns"]["warp"] = serde_json::json!(1.0);
        assert!(MachineConfig::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn validation() {
        let mut cfg = MachineConfig::baseline();
        cfg.gating_phases.insert(Phase::Hbd);
        assert!(cfg.validate().is_err());

        let mut cfg = MachineConfig::tt_edge();
        cfg.gemm_block = 0;
        assert!(cfg.validate().is_err());

        let mut cfg = MachineConfig::tt_edge();
        cfg.cost_ns.dma_word = -1.0;
        assert!(cfg.validate().is_err());

        assert!(MachineConfig::baseline().validate().is_ok());
        assert!(MachineConfig::tt_edge().validate().is_ok());
    }

    #[test]
    fn power_selection() {
        let b = MachineConfig::baseline();
        let t = MachineConfig::tt_edge();
        assert_eq!(b.power_of(Phase::Hbd), 171.04);
        assert_eq!(t.power_of(Phase::Hbd), 169.96);
        assert_eq!(t.power_of(Phase::SortTrunc), 169.96);
        assert_eq!(t.power_of(Phase::QrDecomp), 178.23);
        assert!(!b.is_gated(Phase::Hbd));
    }
}
