//! Run configuration, read from a single TOML file. Every key has a default;
//! unknown keys are rejected. Relative paths resolve against the directory
//! holding the config file.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use earthtruth::astrometry::SolveConfig;
use earthtruth::earth::UtcInstant;
use earthtruth::geometry::UnitQuaternion;
use earthtruth::simulator::{CameraModel, SimConfig};
use earthtruth::tracker::TrackerConfig;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    pub camera: CameraConfig,
    pub scenario: Scenario,
    pub sim: SimConfig,
    pub tracker: TrackerConfig,
    pub solver: SolveConfig,
    pub index: IndexConfig,
    pub groundtruth: GroundTruthConfig,
    pub evaluate: EvaluateConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Star catalog CSV (`id,ra_deg,dec_deg,mag`).
    pub catalog: PathBuf,
    /// IERS finals2000A file, or an EOP CSV if the name ends in `.csv`.
    pub eop: PathBuf,
    /// Directory for every artifact of the run.
    pub output_dir: PathBuf,
    /// Inputs for `track`/`solve`; default to the simulator outputs.
    pub events: Option<PathBuf>,
    pub pps_trigger: Option<PathBuf>,
    pub pps_utc: Option<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            catalog: "catalog.csv".into(),
            eop: "finals2000A.all".into(),
            output_dir: "out".into(),
            events: None,
            pps_trigger: None,
            pps_utc: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraConfig {
    /// Meters.
    pub focal_length: f64,
    /// Meters.
    pub pixel_pitch: f64,
    pub width: u32,
    pub height: u32,
    /// Principal point; sensor centre when absent.
    pub cx: Option<f64>,
    pub cy: Option<f64>,
}

impl Default for CameraConfig {
    fn default() -> Self {
        let c = CameraModel::desk_telescope();
        Self {
            focal_length: c.focal_length,
            pixel_pitch: c.pixel_pitch,
            width: c.width,
            height: c.height,
            cx: None,
            cy: None,
        }
    }
}

impl CameraConfig {
    pub fn model(&self) -> Result<CameraModel> {
        let cx = self.cx.unwrap_or(self.width as f64 / 2.0);
        let cy = self.cy.unwrap_or(self.height as f64 / 2.0);
        Ok(CameraModel::with_principal_point(
            self.focal_length,
            self.pixel_pitch,
            self.width,
            self.height,
            cx,
            cy,
        )?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    /// UTC start of the simulated recording.
    pub start_utc: String,
    pub duration_s: f64,
    /// Camera pointing at the start, degrees.
    pub ra_deg: f64,
    pub dec_deg: f64,
    pub roll_deg: f64,
    /// Catalog stars fainter than this are ignored.
    pub mag_limit: f64,
    /// The tracker starts this far off the start pointing, arcsec.
    pub initial_error_arcsec: f64,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            start_utc: "2024-11-02T03:00:00Z".into(),
            duration_s: 60.0,
            ra_deg: 60.0,
            dec_deg: 30.0,
            roll_deg: 0.0,
            mag_limit: 10.0,
            initial_error_arcsec: 0.0,
        }
    }
}

impl Scenario {
    pub fn start(&self) -> Result<UtcInstant> {
        UtcInstant::parse_iso8601(&self.start_utc).with_context(|| format!("scenario.start_utc {:?}", self.start_utc))
    }

    pub fn pointing(&self) -> Result<UnitQuaternion> {
        Ok(UnitQuaternion::from_pointing(self.ra_deg, self.dec_deg, self.roll_deg)?)
    }

    /// Initial tracker attitude: the pointing tilted by
    /// `initial_error_arcsec` about the camera x axis.
    pub fn tracker_start(&self) -> Result<UnitQuaternion> {
        let tilt = earthtruth::geometry::arcsec_to_rad(self.initial_error_arcsec);
        Ok(self.pointing()? * UnitQuaternion::from_rotation_vector(&earthtruth::geometry::Vec3::new(tilt, 0.0, 0.0)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IndexConfig {
    /// Triangle side quantization, arcsec.
    pub quantization_arcsec: f64,
    /// Only stars at least this bright form triangles.
    pub mag_limit: f64,
}

impl Default for IndexConfig {
    fn default() -> Self {
        Self {
            quantization_arcsec: 10.0,
            mag_limit: 10.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimateSource {
    Ekf,
    Astrometry,
}

impl EstimateSource {
    pub fn name(&self) -> &'static str {
        match self {
            EstimateSource::Ekf => "ekf",
            EstimateSource::Astrometry => "astrometry",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroundTruthConfig {
    /// Series whose estimate anchors the camera-to-Earth transform.
    pub anchor_source: EstimateSource,
    /// Index of the anchoring estimate; 0 is the first.
    pub anchor_index: usize,
}

impl Default for GroundTruthConfig {
    fn default() -> Self {
        Self {
            anchor_source: EstimateSource::Ekf,
            anchor_index: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    /// Series scored by `evaluate`; `pipeline` scores both.
    pub estimates: EstimateSource,
    /// Pairing tolerance, seconds.
    pub max_dt: f64,
    /// Optional UTC evaluation window.
    pub window_start_utc: Option<String>,
    pub window_end_utc: Option<String>,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        Self {
            estimates: EstimateSource::Ekf,
            max_dt: 0.05,
            window_start_utc: None,
            window_end_utc: None,
        }
    }
}

impl EvaluateConfig {
    pub fn window(&self) -> Result<Option<(UtcInstant, UtcInstant)>> {
        let parse = |s: &Option<String>, what: &str| -> Result<Option<UtcInstant>> {
            s.as_deref()
                .map(|v| UtcInstant::parse_iso8601(v).with_context(|| format!("evaluate.{what} {v:?}")))
                .transpose()
        };
        match (parse(&self.window_start_utc, "window_start_utc")?, parse(&self.window_end_utc, "window_end_utc")?) {
            (None, None) => Ok(None),
            (a, b) => {
                let a = a.unwrap_or(UtcInstant::new(0, 0.0)?);
                let b = b.unwrap_or(UtcInstant::new(1_000_000, 0.0)?);
                if b < a {
                    bail!("evaluation window ends before it starts");
                }
                Ok(Some((a, b)))
            }
        }
    }
}

/// A parsed config with its paths made absolute.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub path: PathBuf,
    /// Raw file bytes, hashed into the manifest.
    pub raw: Vec<u8>,
}

pub fn load(path: &Path) -> Result<LoadedConfig> {
    let raw = std::fs::read(path).with_context(|| format!("reading config {}", path.display()))?;
    let text = std::str::from_utf8(&raw).with_context(|| format!("{} is not UTF-8", path.display()))?;
    let mut config: RunConfig = toml::from_str(text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let resolve = |p: &mut PathBuf| {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    };
    let paths = &mut config.paths;
    resolve(&mut paths.catalog);
    resolve(&mut paths.eop);
    resolve(&mut paths.output_dir);
    for p in [&mut paths.events, &mut paths.pps_trigger, &mut paths.pps_utc].into_iter().flatten() {
        resolve(p);
    }
    config.sim.validate()?;
    config.tracker.validate()?;
    config.camera.model()?;
    config.scenario.start()?;
    config.evaluate.window()?;
    Ok(LoadedConfig {
        config,
        path: path.to_path_buf(),
        raw,
    })
}
