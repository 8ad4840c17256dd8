use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use earthtruth::astrometry::{read_failures_csv, solve_stream, write_failures_csv};
use earthtruth::attitude::{read_attitude_csv, write_attitude_csv, AttitudeEstimate};
use earthtruth::catalog::{load_catalog, Catalog, TriangleIndex};
use earthtruth::earth::{parse_eop_csv, parse_finals2000a, EopTable, UtcInstant};
use earthtruth::evaluate::{align_series, error_series, summarize, write_error_csv};
use earthtruth::groundtruth::{anchor_mount, gt_series};
use earthtruth::simulator::{read_events_csv, simulate_static_site, write_events_csv, Event};
use earthtruth::timesync::{
    pair_anchors, read_trigger_csv, read_utc_log_csv, write_trigger_csv, write_utc_log_csv, PpsAnchor, TimeMap,
};
use earthtruth::tracker::track_stream;
use log::{info, warn};

use crate::config::{EstimateSource, LoadedConfig, RunConfig};
use crate::output::{write_atomic, RunLog};

pub struct Run<'a> {
    pub cfg: &'a RunConfig,
    pub log: RunLog,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).with_context(|| format!("opening {}", path.display()))?,
    ))
}

impl<'a> Run<'a> {
    pub fn new(loaded: &'a LoadedConfig) -> Self {
        Self {
            cfg: &loaded.config,
            log: RunLog::default(),
        }
    }

    fn out(&self, name: &str) -> PathBuf {
        self.cfg.paths.output_dir.join(name)
    }

    fn events_path(&self) -> PathBuf {
        self.cfg.paths.events.clone().unwrap_or_else(|| self.out("events.csv"))
    }

    fn trigger_path(&self) -> PathBuf {
        self.cfg.paths.pps_trigger.clone().unwrap_or_else(|| self.out("pps_trigger.csv"))
    }

    fn utc_path(&self) -> PathBuf {
        self.cfg.paths.pps_utc.clone().unwrap_or_else(|| self.out("pps_utc.csv"))
    }

    fn estimates_path(&self, source: EstimateSource) -> PathBuf {
        self.out(&format!("{}.csv", source.name()))
    }

    fn catalog(&mut self) -> Result<Catalog> {
        let p = &self.cfg.paths.catalog;
        self.log.input(p);
        load_catalog(p, self.cfg.scenario.mag_limit).with_context(|| format!("catalog {}", p.display()))
    }

    fn eop(&mut self) -> Result<EopTable> {
        let p = self.cfg.paths.eop.clone();
        self.log.input(&p);
        let is_csv = p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
        let table = if is_csv {
            parse_eop_csv(&p)
        } else {
            parse_finals2000a(&p).map(|f| {
                if f.skipped > 0 {
                    info!("{}: skipped {} lines without UT1-UTC", p.display(), f.skipped);
                }
                f.table
            })
        };
        table.with_context(|| format!("EOP file {}", p.display()))
    }

    fn events(&mut self) -> Result<Vec<Event>> {
        let p = self.events_path();
        self.log.input(&p);
        read_events_csv(open(&p)?).with_context(|| format!("events {}", p.display()))
    }

    fn pps(&mut self) -> Result<Vec<PpsAnchor>> {
        let (tp, up) = (self.trigger_path(), self.utc_path());
        self.log.input(&tp);
        self.log.input(&up);
        let triggers = read_trigger_csv(open(&tp)?).with_context(|| format!("PPS triggers {}", tp.display()))?;
        let utc = read_utc_log_csv(open(&up)?).with_context(|| format!("UTC log {}", up.display()))?;
        Ok(pair_anchors(triggers, utc)?)
    }

    fn read_series(&mut self, p: &Path) -> Result<Vec<AttitudeEstimate>> {
        self.log.input(p);
        read_attitude_csv(open(p)?).with_context(|| format!("attitude series {}", p.display()))
    }

    fn write_series(&mut self, p: &Path, series: &[AttitudeEstimate]) -> Result<()> {
        write_atomic(p, |w| write_attitude_csv(series, w))?;
        self.log.output(p);
        Ok(())
    }

    pub fn simulate(&mut self) -> Result<()> {
        let cat = self.catalog()?;
        let eop = self.eop()?;
        let cfg = self.cfg;
        let cam = cfg.camera.model()?;
        let sc = &cfg.scenario;
        info!("simulating {} s from {}", sc.duration_s, sc.start_utc);
        let out = simulate_static_site(sc.pointing()?, sc.start()?, sc.duration_s, &eop, &cat, &cam, &cfg.sim)?;
        info!("{} events, {} PPS pulses", out.events.len(), out.pps.len());
        let (ep, tp, up, truth) = (self.out("events.csv"), self.out("pps_trigger.csv"), self.out("pps_utc.csv"), self.out("truth.csv"));
        write_atomic(&ep, |w| write_events_csv(&out.events, w))?;
        write_atomic(&tp, |w| write_trigger_csv(&out.pps, w))?;
        write_atomic(&up, |w| write_utc_log_csv(&out.pps, w))?;
        for p in [&ep, &tp, &up] {
            self.log.output(p);
        }
        self.write_series(&truth, &out.truth)
    }

    pub fn track(&mut self) -> Result<()> {
        let cat = self.catalog()?;
        let events = self.events()?;
        let pps = self.pps()?;
        let cfg = self.cfg;
        let cam = cfg.camera.model()?;
        let out = track_stream(&events, &pps, &cat, &cam, &cfg.tracker, cfg.scenario.tracker_start()?)?;
        let s = &out.stats;
        info!(
            "{} estimates; {} of {} events matched, {} updates, {} batches rejected",
            out.estimates.len(),
            s.matched,
            s.events,
            s.updates,
            s.rejected_batches
        );
        if s.psd_violations > 0 {
            warn!("covariance fell below the PSD tolerance {} times", s.psd_violations);
        }
        self.write_series(&self.estimates_path(EstimateSource::Ekf), &out.estimates)
    }

    pub fn solve(&mut self) -> Result<()> {
        let cat = self.catalog()?;
        let events = self.events()?;
        let pps = self.pps()?;
        let cfg = self.cfg;
        let cam = cfg.camera.model()?;
        let index = TriangleIndex::build_with_mag_limit(
            &cat,
            cam.diagonal_fov_deg(),
            cfg.index.quantization_arcsec,
            cfg.index.mag_limit,
        )?;
        info!("triangle index: {} entries", index.len());
        let out = solve_stream(&events, &pps, &index, &cat, &cam, &cfg.solver)?;
        info!("solved {} of {} frames", out.estimates.len(), out.frames);
        self.write_series(&self.estimates_path(EstimateSource::Astrometry), &out.estimates)?;
        let fp = self.out("astrometry_failures.csv");
        write_atomic(&fp, |w| write_failures_csv(&out.failures, w))?;
        self.log.output(&fp);
        Ok(())
    }

    /// Ground truth on a 20 Hz grid through the anchoring estimate, spanning
    /// the anchor series.
    pub fn groundtruth(&mut self) -> Result<()> {
        let eop = self.eop()?;
        let g = &self.cfg.groundtruth;
        let series = self.read_series(&self.estimates_path(g.anchor_source))?;
        let (mount, t_anchor) = anchor_mount(&eop, &series, g.anchor_index)?;
        let (first, last) = (series[0].t, series[series.len() - 1].t);
        let step = 0.05;
        let k0 = (first.seconds_since(&t_anchor) / step).floor() as i64;
        let k1 = (last.seconds_since(&t_anchor) / step).ceil() as i64;
        let times: Vec<UtcInstant> = (k0..=k1).map(|k| t_anchor.plus_seconds(k as f64 * step)).collect();
        let gt = gt_series(&eop, &mount, &times)?;
        info!("ground truth anchored at {} ({} samples)", t_anchor.to_iso8601(), gt.len());
        self.write_series(&self.out("groundtruth.csv"), &gt)
    }

    pub fn evaluate(&mut self, source: EstimateSource) -> Result<()> {
        let est = self.read_series(&self.estimates_path(source))?;
        let gt = self.read_series(&self.out("groundtruth.csv"))?;
        let cfg = self.cfg;
        let window = cfg.evaluate.window()?;
        if est.is_empty() {
            bail!("no {} estimates to evaluate", source.name());
        }
        let al = align_series(&est, &gt, cfg.evaluate.max_dt)?;
        if al.dropped > 0 {
            info!("{} estimates had no ground truth within {} s", al.dropped, cfg.evaluate.max_dt);
        }
        let samples = error_series(&est, &gt, &al)?;
        let mut report = summarize(&samples, window)?;
        if source == EstimateSource::Astrometry {
            report.solve_success_rate = Some(self.success_rate(&est, window)?);
        }
        let name = source.name();
        let (ep, kv, row) = (
            self.out(&format!("errors_{name}.csv")),
            self.out(&format!("report_{name}.txt")),
            self.out(&format!("report_{name}.csv")),
        );
        write_atomic(&ep, |w| write_error_csv(&samples, w))?;
        write_atomic(&kv, |w| report.write_key_value(w))?;
        write_atomic(&row, |w| report.write_csv_row(w))?;
        for p in [&ep, &kv, &row] {
            self.log.output(p);
        }
        info!(
            "{name}: across RMSE {:.3}\", about RMSE {:.3}\" over {} samples",
            report.rmse_across, report.rmse_about, report.samples
        );
        Ok(())
    }

    /// Solved frames over all frames, within the window if one is set.
    fn success_rate(&mut self, solved: &[AttitudeEstimate], window: Option<(UtcInstant, UtcInstant)>) -> Result<f64> {
        let fp = self.out("astrometry_failures.csv");
        self.log.input(&fp);
        let failed_starts: Vec<i64> = read_failures_csv(open(&fp)?)
            .with_context(|| format!("solve failures {}", fp.display()))?
            .into_iter()
            .map(|f| f.0)
            .collect();
        let (ok, failed) = match window {
            None => (solved.len(), failed_starts.len()),
            Some((a, b)) => {
                let map = TimeMap::new(self.pps()?)?;
                let inside = |t: &UtcInstant| *t >= a && *t <= b;
                (
                    solved.iter().filter(|e| inside(&e.t)).count(),
                    failed_starts.iter().filter(|&&t| inside(&map.to_utc(t))).count(),
                )
            }
        };
        Ok(if ok + failed == 0 { 0.0 } else { ok as f64 / (ok + failed) as f64 })
    }

    pub fn pipeline(&mut self) -> Result<()> {
        self.simulate()?;
        self.track()?;
        self.solve()?;
        self.groundtruth()?;
        self.evaluate(EstimateSource::Ekf)?;
        self.evaluate(EstimateSource::Astrometry)
    }
}
