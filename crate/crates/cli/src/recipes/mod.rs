//! Figure-reproduction recipes. Each one pins its own parameters, so
//! `reproduce <id>` needs no config file.

use std::sync::Arc;

use qdsaw_core::spectroscopy::SpectrumData;
use qdsaw_core::units::to_ns;
use qdsaw_core::{SystemParams, Trajectory};

use crate::error::CliResult;
use crate::output::{Artifact, Check, Table};
use crate::registry::Registry;

mod fig1;
mod fig3;
mod fig4;
mod spectra;

/// Files and checks produced by one recipe.
#[derive(Debug, Default)]
pub struct RecipeOutput {
    pub artifacts: Vec<Artifact>,
    pub checks: Vec<Check>,
}

impl RecipeOutput {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub trait Recipe: Send + Sync {
    fn id(&self) -> &'static str;
    fn description(&self) -> &'static str;
    fn run(&self) -> CliResult<RecipeOutput>;
}

pub fn recipes() -> Registry<dyn Recipe> {
    let mut r: Registry<dyn Recipe> = Registry::new("figure");
    let all: Vec<Arc<dyn Recipe>> = vec![
        Arc::new(fig1::Fig1c),
        Arc::new(fig1::Fig1d),
        Arc::new(fig3::Fig3c),
        Arc::new(fig3::Fig3d),
        Arc::new(fig3::FigS1),
        Arc::new(fig3::FigS5),
        Arc::new(fig3::FigS6),
        Arc::new(spectra::Fig2dSim),
        Arc::new(fig4::Fig4Sim),
    ];
    for x in all {
        r.register(x.id(), x);
    }
    r
}

/// Columns `time_ns, occupancy, sx, sy, sz`.
pub fn trajectory_table(tr: &Trajectory) -> Table {
    Table::new()
        .column("time_ns", tr.times().into_iter().map(to_ns).collect())
        .column("occupancy", tr.occupancy.clone())
        .column("sx", tr.bloch.iter().map(|b| b.sx).collect())
        .column("sy", tr.bloch.iter().map(|b| b.sy).collect())
        .column("sz", tr.bloch.iter().map(|b| b.sz).collect())
}

/// Columns `detuning_GHz, intensity` and, when present, `coherent, incoherent`.
pub fn spectrum_table(s: &SpectrumData) -> Table {
    let mut t = Table::new()
        .column(
            "detuning_GHz",
            s.detuning_axis.iter().map(|d| qdsaw_core::units::to_ghz(*d)).collect(),
        )
        .column("intensity", s.intensity.clone());
    if let (Some(c), Some(i)) = (&s.coherent, &s.incoherent) {
        t = t.column("coherent", c.clone()).column("incoherent", i.clone());
    }
    t
}

/// `g` label used in file and column names, e.g. `g1.55`.
fn g_label(g_ghz: f64) -> String {
    format!("g{g_ghz}")
}

fn with_g(p: &SystemParams, g_ghz: f64) -> SystemParams {
    SystemParams {
        g: qdsaw_core::units::ghz(g_ghz),
        ..*p
    }
}
