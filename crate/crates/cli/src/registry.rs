//! Name-keyed registries of runtime-selectable strategies: pulse shapes,
//! calibration models and figure recipes all go through [`Registry`].

use std::collections::BTreeMap;
use std::sync::Arc;

use qdsaw_core::calibration::{
    BesselIndexCalibrator, Calibrator, OccupancyReadout, OccupancyScaleCalibrator, SqrtPowerCalibrator,
};
use qdsaw_core::pulses::{
    parse_envelope_file, CwShape, EtalonShape, MeasuredShape, PowerCalibration, PulseFamily, PulseShape, SquareShape,
};
use qdsaw_core::units::{ghz, ns};

use crate::config::{PulseConfig, RunConfig};
use crate::error::{CliError, CliResult};

/// Ordered map from name to a shared strategy object.
pub struct Registry<T: ?Sized> {
    kind: &'static str,
    entries: BTreeMap<&'static str, Arc<T>>,
}

impl<T: ?Sized> Registry<T> {
    pub fn new(kind: &'static str) -> Self {
        Self {
            kind,
            entries: BTreeMap::new(),
        }
    }

    /// Panics on duplicate names: registrations are static.
    pub fn register(&mut self, name: &'static str, item: Arc<T>) {
        let prev = self.entries.insert(name, item);
        assert!(prev.is_none(), "duplicate {} `{name}`", self.kind);
    }

    pub fn get(&self, name: &str) -> CliResult<Arc<T>> {
        self.entries.get(name).cloned().ok_or_else(|| {
            CliError::Config(format!(
                "unknown {} `{name}`; available: {}",
                self.kind,
                self.names().join(", ")
            ))
        })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }
}

/// Turns the `[pulse]` table into a concrete shape.
pub trait ShapeFactory: Send + Sync {
    fn build(&self, cfg: &PulseConfig) -> CliResult<Box<dyn PulseShape>>;
    /// The same shape with a free duration, when the shape has one.
    fn family(&self, _cfg: &PulseConfig) -> CliResult<Option<Box<dyn PulseFamily>>> {
        Ok(None)
    }
}

pub(crate) fn square_from(cfg: &PulseConfig) -> CliResult<SquareShape> {
    let duration = cfg
        .duration_ns
        .ok_or_else(|| CliError::Config("at `pulse.duration_ns`: required for this shape".into()))?;
    Ok(SquareShape {
        start: ns(cfg.start_ns),
        duration: ns(duration),
        rise: ns(cfg.rise_ns),
        fall: ns(cfg.fall_ns),
        peak: ghz(cfg.peak_rabi_ghz),
    })
}

fn etalon_from(cfg: &PulseConfig) -> CliResult<EtalonShape> {
    let bw = cfg
        .etalon_bandwidth_ghz
        .ok_or_else(|| CliError::Config("at `pulse.etalon_bandwidth_ghz`: required for this shape".into()))?;
    Ok(EtalonShape {
        drive: square_from(cfg)?,
        bandwidth: bw * 1e9,
    })
}

struct SquareFactory;

impl ShapeFactory for SquareFactory {
    fn build(&self, cfg: &PulseConfig) -> CliResult<Box<dyn PulseShape>> {
        Ok(Box::new(square_from(cfg)?))
    }
    fn family(&self, cfg: &PulseConfig) -> CliResult<Option<Box<dyn PulseFamily>>> {
        Ok(Some(Box::new(square_from(cfg)?)))
    }
}

struct EtalonFactory;

impl ShapeFactory for EtalonFactory {
    fn build(&self, cfg: &PulseConfig) -> CliResult<Box<dyn PulseShape>> {
        Ok(Box::new(etalon_from(cfg)?))
    }
    fn family(&self, cfg: &PulseConfig) -> CliResult<Option<Box<dyn PulseFamily>>> {
        Ok(Some(Box::new(etalon_from(cfg)?)))
    }
}

struct CwFactory;

impl ShapeFactory for CwFactory {
    fn build(&self, cfg: &PulseConfig) -> CliResult<Box<dyn PulseShape>> {
        Ok(Box::new(CwShape {
            start: ns(cfg.start_ns),
            rise: ns(cfg.rise_ns),
            peak: ghz(cfg.peak_rabi_ghz),
        }))
    }
}

struct MeasuredFactory;

impl ShapeFactory for MeasuredFactory {
    fn build(&self, cfg: &PulseConfig) -> CliResult<Box<dyn PulseShape>> {
        let path = cfg
            .file
            .as_ref()
            .ok_or_else(|| CliError::Config("at `pulse.file`: required for this shape".into()))?;
        let text = std::fs::read_to_string(path)?;
        Ok(Box::new(MeasuredShape {
            samples: parse_envelope_file(&text)?,
            peak: ghz(cfg.peak_rabi_ghz),
        }))
    }
}

pub fn pulse_shapes() -> Registry<dyn ShapeFactory> {
    let mut r: Registry<dyn ShapeFactory> = Registry::new("pulse shape");
    r.register("square", Arc::new(SquareFactory));
    r.register("etalon", Arc::new(EtalonFactory));
    r.register("cw", Arc::new(CwFactory));
    r.register("measured", Arc::new(MeasuredFactory));
    r
}

/// Builds a calibration model from the full run configuration.
pub trait CalibratorFactory: Send + Sync {
    fn build(&self, cfg: &RunConfig) -> CliResult<Box<dyn Calibrator>>;
}

struct SqrtPowerFactory;

impl CalibratorFactory for SqrtPowerFactory {
    fn build(&self, _cfg: &RunConfig) -> CliResult<Box<dyn Calibrator>> {
        Ok(Box::new(SqrtPowerCalibrator))
    }
}

struct BesselIndexFactory;

impl CalibratorFactory for BesselIndexFactory {
    fn build(&self, cfg: &RunConfig) -> CliResult<Box<dyn Calibrator>> {
        Ok(Box::new(BesselIndexCalibrator {
            omega_saw: ghz(cfg.system.omega_saw_ghz),
        }))
    }
}

struct OccupancyScaleFactory;

impl CalibratorFactory for OccupancyScaleFactory {
    fn build(&self, cfg: &RunConfig) -> CliResult<Box<dyn Calibrator>> {
        let cal = cfg
            .calibration
            .as_ref()
            .ok_or_else(|| CliError::Config("missing `[calibration]` table".into()))?;
        let (Some(pw), Some(rabi)) = (cal.reference_power_w, cal.reference_rabi_ghz) else {
            return Err(CliError::Config(
                "at `calibration.reference_power_w`: the occupancy model needs a reference power and Rabi rate".into(),
            ));
        };
        Ok(Box::new(OccupancyScaleCalibrator {
            params: cfg.system.to_params()?,
            power_cal: PowerCalibration::from_reference(pw, ghz(rabi))?,
            readout: OccupancyReadout {
                pulse: square_from(&cfg.pulse)?,
                readout: ns(cal.readout_ns),
                bin: ns(cal.bin_ns),
            },
            grid: cfg.grid.to_grid()?,
            solver: cfg.solver.to_solver()?,
        }))
    }
}

pub fn calibration_models() -> Registry<dyn CalibratorFactory> {
    let mut r: Registry<dyn CalibratorFactory> = Registry::new("calibration model");
    r.register("sqrt_power", Arc::new(SqrtPowerFactory));
    r.register("bessel_index", Arc::new(BesselIndexFactory));
    r.register("occupancy_scale", Arc::new(OccupancyScaleFactory));
    r
}
