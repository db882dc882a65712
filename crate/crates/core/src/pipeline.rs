//! Named beamformer designs and the dispatch from a kind to its analog stage.

use std::fmt;
use std::str::FromStr;

use crate::channel::Scenario;
use crate::constrained::{
    dft_beamformer, dynamic_subarray, fixed_subarray, interlaced_mask, ordered_mask, pe_am, phase_extraction, AmTrace,
    ConstrainedBeamformer, DynamicReport, PhaseInit, DEFAULT_CANDIDATES, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use crate::error::{Error, Result};
use crate::geb::UnconstrainedBeamformer;
use crate::numerics::CMat;
use crate::statistics::GroupStatistics;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BeamformerKind {
    Geb,
    Dft,
    Pe,
    PeAm,
    FixedOrdered,
    FixedInterlaced,
    Dynamic,
}

impl BeamformerKind {
    pub const ALL: [BeamformerKind; 7] = [
        BeamformerKind::Geb,
        BeamformerKind::Dft,
        BeamformerKind::Pe,
        BeamformerKind::PeAm,
        BeamformerKind::FixedOrdered,
        BeamformerKind::FixedInterlaced,
        BeamformerKind::Dynamic,
    ];

    pub fn label(self) -> &'static str {
        match self {
            BeamformerKind::Geb => "geb",
            BeamformerKind::Dft => "dft",
            BeamformerKind::Pe => "pe",
            BeamformerKind::PeAm => "pe-am",
            BeamformerKind::FixedOrdered => "fixed-ordered",
            BeamformerKind::FixedInterlaced => "fixed-interlaced",
            BeamformerKind::Dynamic => "dynamic",
        }
    }
}

impl fmt::Display for BeamformerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for BeamformerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BeamformerKind::ALL
            .into_iter()
            .find(|k| k.label() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown beamformer '{s}'")))
    }
}

/// Knobs of the iterative designs.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSettings {
    pub tol: f64,
    pub max_iter: usize,
    /// Dynamic-subarray candidate count.
    pub n_iter: usize,
    /// Seed of the random initializations.
    pub seed: u64,
}

impl Default for DesignSettings {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL, max_iter: DEFAULT_MAX_ITER, n_iter: DEFAULT_CANDIDATES, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignedBeamformer {
    pub kind: BeamformerKind,
    /// Overall `M x D` analog stage (`S_c S_cm` for constrained designs).
    pub analog: CMat,
    /// Constrained factors; `None` for the unconstrained design.
    pub constrained: Option<ConstrainedBeamformer>,
    pub trace: Option<AmTrace>,
    pub dynamic: Option<DynamicReport>,
}

/// Designs beamformer `kind` for group `g` from its statistics and GEB.
pub fn design_beamformer(
    kind: BeamformerKind,
    scn: &Scenario,
    g: usize,
    stats: &GroupStatistics,
    geb: &UnconstrainedBeamformer,
    settings: &DesignSettings,
) -> Result<DesignedBeamformer> {
    let d = geb.rf_chains();
    let m = geb.antennas();
    let s = &geb.s;
    let (constrained, trace, dynamic) = match kind {
        BeamformerKind::Geb => {
            return Ok(DesignedBeamformer { kind, analog: s.clone(), constrained: None, trace: None, dynamic: None })
        }
        BeamformerKind::Dft => (dft_beamformer(scn, g, d)?, None, None),
        BeamformerKind::Pe => (phase_extraction(s), None, None),
        BeamformerKind::PeAm => {
            let (bf, tr) = pe_am(s, settings.tol, settings.max_iter)?;
            (bf, Some(tr), None)
        }
        BeamformerKind::FixedOrdered | BeamformerKind::FixedInterlaced => {
            let conn = if kind == BeamformerKind::FixedOrdered { ordered_mask(m, d)? } else { interlaced_mask(m, d)? };
            let (bf, tr) = fixed_subarray(s, &conn, PhaseInit::Random(settings.seed), settings.tol, settings.max_iter)?;
            (bf, Some(tr), None)
        }
        BeamformerKind::Dynamic => {
            let (bf, rep) =
                dynamic_subarray(s, stats, settings.n_iter, settings.seed, settings.tol, settings.max_iter)?;
            let tr = rep.refinement.clone();
            (bf, Some(tr), Some(rep))
        }
    };
    Ok(DesignedBeamformer { kind, analog: constrained.effective(), constrained: Some(constrained), trace, dynamic })
}
