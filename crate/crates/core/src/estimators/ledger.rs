//! Quantum-call accounting.
//!
//! Two levels are tracked. *Element* categories count matrix elements
//! requested from the device (the quantity tabulated by the cost formulas):
//! one call per distinct circuit configuration, each yielding a complex
//! number. *Circuit* categories count the sub-circuits an estimator runs to
//! produce that element, together with the shots spent on them.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    /// `C_n = <phi_o|U^n|phi_o>` for `n >= 1`.
    #[serde(rename = "overlap_C_n")]
    OverlapCn,
    /// Hamiltonian-weighted elements `<phi_o|P_i U^m|phi_o>`.
    #[serde(rename = "F_H_element")]
    FHElement,
    /// The extra `C_M` needed for the last band of the propagator matrix.
    #[serde(rename = "F_U_extra")]
    FUExtra,
    #[serde(rename = "fidelity_F1")]
    FidelityF1,
    #[serde(rename = "fidelity_F2")]
    FidelityF2,
    /// Sign-resolving fidelity with the reference branch rotated by `i`.
    #[serde(rename = "fidelity_F3")]
    FidelityF3,
    /// Stand-alone fidelity requests outside an element estimate.
    #[serde(rename = "fidelity")]
    Fidelity,
    #[serde(rename = "hadamard_call")]
    HadamardCall,
}

impl Category {
    pub const ALL: [Category; 8] = [
        Category::OverlapCn,
        Category::FHElement,
        Category::FUExtra,
        Category::FidelityF1,
        Category::FidelityF2,
        Category::FidelityF3,
        Category::Fidelity,
        Category::HadamardCall,
    ];

    pub fn is_element(self) -> bool {
        matches!(self, Category::OverlapCn | Category::FHElement | Category::FUExtra)
    }

    pub fn name(self) -> &'static str {
        match self {
            Category::OverlapCn => "overlap_C_n",
            Category::FHElement => "F_H_element",
            Category::FUExtra => "F_U_extra",
            Category::FidelityF1 => "fidelity_F1",
            Category::FidelityF2 => "fidelity_F2",
            Category::FidelityF3 => "fidelity_F3",
            Category::Fidelity => "fidelity",
            Category::HadamardCall => "hadamard_call",
        }
    }

    fn index(self) -> usize {
        Category::ALL.iter().position(|c| *c == self).unwrap()
    }

    /// Stable small integer mixed into RNG stream keys.
    pub(crate) fn tag(self) -> u64 {
        self.index() as u64
    }
}

/// Thread-safe, monotone call and shot counters.
#[derive(Debug, Default)]
pub struct CallLedger {
    calls: [AtomicU64; 8],
    shots: [AtomicU64; 8],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryCount {
    pub calls: u64,
    pub shots: u64,
}

/// Totals at one instant; cheap to copy into traces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LedgerSnapshot {
    pub calls: u64,
    pub shots: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerReport {
    pub categories: BTreeMap<String, CategoryCount>,
    pub total_calls: u64,
    pub total_shots: u64,
}

impl CallLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&self, cat: Category, calls: u64, shots: u64) {
        let i = cat.index();
        self.calls[i].fetch_add(calls, Ordering::Relaxed);
        self.shots[i].fetch_add(shots, Ordering::Relaxed);
    }

    pub fn calls(&self, cat: Category) -> u64 {
        self.calls[cat.index()].load(Ordering::Relaxed)
    }

    pub fn shots(&self, cat: Category) -> u64 {
        self.shots[cat.index()].load(Ordering::Relaxed)
    }

    /// Matrix-element calls (element categories only).
    pub fn total_calls(&self) -> u64 {
        Category::ALL.iter().filter(|c| c.is_element()).map(|c| self.calls(*c)).sum()
    }

    /// Shots over every circuit run.
    pub fn total_shots(&self) -> u64 {
        Category::ALL.iter().map(|c| self.shots(*c)).sum()
    }

    pub fn snapshot(&self) -> LedgerSnapshot {
        LedgerSnapshot { calls: self.total_calls(), shots: self.total_shots() }
    }

    pub fn report(&self) -> LedgerReport {
        let categories = Category::ALL
            .iter()
            .map(|c| (c.name().to_string(), CategoryCount { calls: self.calls(*c), shots: self.shots(*c) }))
            .collect();
        LedgerReport { categories, total_calls: self.total_calls(), total_shots: self.total_shots() }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.report()).expect("ledger report serializes")
    }
}
