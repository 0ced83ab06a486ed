//! The two-step strategy end to end: measure on the initial sensors,
//! reconstruct, place new sensors from the energy profile of the estimate,
//! measure again and reconstruct again.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{Config, PhantomSource, PlacementMode};
use crate::error::{Error, Result};
use crate::grid::RealField;
use crate::imaging::{build_sensor_mask, simulate_recording, time_reversal, Recording, SensorMask};
use crate::io;
use crate::placement::{
    a2_functional, centered_arc, compute_psi, place_ga, place_threshold, psi_sampling, BoundaryGeometry,
    BoundaryProfile, H1Norm, SensorSet,
};
use crate::tv::{reconstruct, support_disk, IterationRecord, ReconParams};
use crate::wave::{solve_forward, TimeGrid};

/// How far [`run_pipeline`] goes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    /// Render the phantom and record it on the initial sensors.
    Simulate,
    /// Also reconstruct from the first recording.
    Reconstruct,
    /// Also compute `ψ` and place new sensors.
    Place,
    /// Everything, including the reconstructions on the new sensors.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorTable {
    /// Relative `L²` error `‖(p − p₀) 1_K‖ / ‖p₀ 1_K‖` of the plain time-reversal image.
    pub time_reversal: Option<f64>,
    /// The same error after each reconstruction stage.
    pub stages: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct A2Entry {
    pub round: usize,
    /// `A₂` of the sensors that produced the estimate `ψ` was computed from.
    pub before: f64,
    /// `A₂` of the newly placed sensors under the same `ψ`.
    pub after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArcTable {
    pub initial: Vec<[f64; 2]>,
    pub placed: Vec<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageTrace {
    pub stage: usize,
    pub iterations: usize,
    pub j0: Vec<f64>,
}

/// Serialized as `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub errors: ErrorTable,
    pub a2: Vec<A2Entry>,
    /// Threshold `λ` per placement round (`null` in GA mode).
    pub lambda: Vec<Option<f64>>,
    pub arcs: ArcTable,
    pub iterations: Vec<StageTrace>,
}

impl Report {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub report: Report,
    pub truth: RealField,
    /// One estimate per reconstruction stage.
    pub estimates: Vec<RealField>,
    /// Sensor sets in use: the initial one, then one per placement round.
    pub sensors: Vec<SensorSet>,
    pub profiles: Vec<BoundaryProfile>,
}

/// Relative `L²` error of `p` against `truth`, restricted to the 0/1 `region`.
pub fn relative_error(p: &RealField, truth: &RealField, region: &RealField) -> Result<f64> {
    p.grid().ensure_same(truth.grid())?;
    p.grid().ensure_same(region.grid())?;
    let (mut num, mut den) = (0.0, 0.0);
    for ((a, b), k) in p.values().iter().zip(truth.values()).zip(region.values()) {
        num += k * (a - b) * (a - b);
        den += k * b * b;
    }
    if den == 0.0 {
        return Err(Error::InvalidParameter("reference field vanishes on the region".into()));
    }
    Ok((num / den).sqrt())
}

struct Ctx<'a> {
    cfg: &'a Config,
    out: Option<&'a Path>,
    geom: BoundaryGeometry,
    time: TimeGrid,
    truth: RealField,
    params: ReconParams,
    noise_rng: ChaCha8Rng,
}

impl Ctx<'_> {
    fn write(&self, name: &str, bytes: &[u8]) -> Result<()> {
        match self.out {
            Some(dir) => io::write_atomic(&dir.join(name), bytes),
            None => Ok(()),
        }
    }

    fn write_image(&self, stem: &str, field: &RealField) -> Result<()> {
        if let Some(dir) = self.out {
            io::write_field(&dir.join(format!("{stem}.tatf")), field)?;
            io::write_pgm(&dir.join(format!("{stem}.pgm")), field)?;
        }
        Ok(())
    }

    fn mask(&self, set: &SensorSet) -> Result<SensorMask> {
        let grid = *self.truth.grid();
        Ok(build_sensor_mask(&self.geom, set, self.cfg.geometry.eps, &grid)?.with_gain(self.cfg.sensors.gain))
    }

    fn measure(&mut self, mask: &SensorMask) -> Result<Recording> {
        let mut rec = simulate_recording(&self.truth, mask, &self.time)?;
        rec.add_noise(self.cfg.run.noise, &mut self.noise_rng);
        Ok(rec)
    }

    fn solve(
        &self,
        rec: &Recording,
        mask: &SensorMask,
        iters: usize,
        start: Option<&RealField>,
    ) -> Result<(RealField, Vec<IterationRecord>)> {
        let params = ReconParams {
            outer_iters: iters,
            ..self.params.clone()
        };
        let out = reconstruct(rec, mask, &params, &self.time, start)?;
        Ok((out.p0, out.log))
    }

    fn psi(&self, source: &RealField) -> Result<BoundaryProfile> {
        let mode = &self.cfg.placement.psi;
        let traj = solve_forward(source, &self.time, &psi_sampling(&self.geom, mode)?)?;
        compute_psi(&traj, &self.geom, mode)
    }
}

fn load_truth(cfg: &Config) -> Result<RealField> {
    let grid = cfg.grid()?;
    match &cfg.phantom {
        PhantomSource::Stock(p) => {
            let mut spec = p.spec();
            spec.k_radius = cfg.recon.k_radius;
            spec.render(grid)
        }
        PhantomSource::File(path) => {
            let f = io::read_field(path)?;
            f.grid().ensure_same(&grid)?;
            Ok(f)
        }
    }
}

/// Run the strategy up to `until`, writing artifacts to `out` when given.
pub fn run_pipeline(cfg: &Config, out: Option<&Path>, until: Stage) -> Result<PipelineResult> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let geom = BoundaryGeometry::circle(cfg.geometry.radius, cfg.geometry.boundary_samples)?;
    let truth = load_truth(cfg)?;
    let r = &cfg.recon;
    let params = ReconParams {
        gamma: r.gamma,
        eta: r.eta,
        outer_iters: r.stage1_iters,
        prox_iters: r.prox_iters,
        prox_tau: r.prox_tau,
        k_mask: support_disk(grid, r.k_radius),
        nonneg: r.nonneg,
        accelerate: r.accelerate,
        project: r.project,
    };
    let mut noise_rng = ChaCha8Rng::seed_from_u64(cfg.run.seed);
    noise_rng.set_stream(1);
    let mut ctx = Ctx {
        cfg,
        out,
        geom,
        time: cfg.time_grid()?,
        truth,
        params,
        noise_rng,
    };
    ctx.write("config.ini", cfg.to_ini_string().as_bytes())?;
    ctx.write_image("truth", &ctx.truth)?;

    let initial: SensorSet = centered_arc(
        &ctx.geom,
        cfg.sensors.initial_center,
        cfg.sensors.fraction * ctx.geom.perimeter(),
    )?
    .into();
    ctx.write("arcs_initial.csv", io::arcs_csv(&initial, &ctx.geom).as_bytes())?;
    let mask = ctx.mask(&initial)?;
    let rec = ctx.measure(&mask)?;
    ctx.write_image("sensors_initial", &mask.indicator_field())?;

    let k_mask = ctx.params.k_mask.clone();
    let mut report = Report {
        errors: ErrorTable {
            time_reversal: None,
            stages: vec![],
        },
        a2: vec![],
        lambda: vec![],
        arcs: ArcTable {
            initial: intervals(&initial, &ctx.geom),
            placed: vec![],
        },
        iterations: vec![],
    };
    let mut result = PipelineResult {
        report: report.clone(),
        truth: ctx.truth.clone(),
        estimates: vec![],
        sensors: vec![initial.clone()],
        profiles: vec![],
    };

    if until == Stage::Simulate {
        if let Some(dir) = out {
            io::export_recording(dir, "recording", &rec, (ctx.time.steps / 16).max(1))?;
        }
    } else {
        let tr = time_reversal(&rec, &mask, &ctx.time)?;
        ctx.write_image("time_reversal", &tr)?;
        report.errors.time_reversal = Some(relative_error(&tr, &ctx.truth, &k_mask)?);

        let (mut estimate, log) = ctx.solve(&rec, &mask, cfg.recon.stage1_iters, None)?;
        record_stage(&ctx, &mut report, &mut result, 1, &estimate, &log)?;

        let mut current = initial;
        let rounds = if until >= Stage::Place {
            1 + cfg.run.alternate
        } else {
            0
        };
        for round in 1..=rounds {
            let source = if cfg.placement.oracle_psi {
                &ctx.truth
            } else {
                &estimate
            };
            let psi = ctx.psi(source)?;
            ctx.write(
                &format!("psi_round{round}.csv"),
                io::psi_csv(&psi, &ctx.geom).as_bytes(),
            )?;
            let (placed, lambda): (SensorSet, Option<f64>) = match cfg.placement.mode {
                PlacementMode::Threshold => {
                    let t = place_threshold(&psi, cfg.sensors.fraction, &ctx.geom)?;
                    (t.indicator.into(), Some(t.lambda))
                }
                PlacementMode::Ga => {
                    let ell = cfg.arc_length(ctx.geom.perimeter());
                    let seed = cfg.run.seed.wrapping_add(round as u64);
                    let ga = place_ga(&psi, &ctx.geom, cfg.sensors.count, ell, &cfg.placement.ga, seed)?;
                    (ga.arcs.into(), None)
                }
            };
            let before = a2_functional(&psi, &ctx.geom, &current, source, H1Norm::Full)?;
            let after = a2_functional(&psi, &ctx.geom, &placed, source, H1Norm::Full)?;
            report.a2.push(A2Entry { round, before, after });
            report.lambda.push(lambda);
            report.arcs.placed.push(intervals(&placed, &ctx.geom));
            ctx.write(
                &format!("arcs_round{round}.csv"),
                io::arcs_csv(&placed, &ctx.geom).as_bytes(),
            )?;
            result.profiles.push(psi);
            result.sensors.push(placed.clone());
            current = placed;

            if until < Stage::Full {
                continue;
            }
            let mask = ctx.mask(&current)?;
            ctx.write_image(&format!("sensors_round{round}"), &mask.indicator_field())?;
            let rec = ctx.measure(&mask)?;
            let start = cfg.recon.warm_start.then_some(&estimate);
            let (next, log) = ctx.solve(&rec, &mask, cfg.recon.stage2_iters, start)?;
            estimate = next;
            record_stage(&ctx, &mut report, &mut result, round + 1, &estimate, &log)?;
        }
    }

    ctx.write("report.json", report.to_json()?.as_bytes())?;
    result.report = report;
    Ok(result)
}

fn intervals(set: &SensorSet, geom: &BoundaryGeometry) -> Vec<[f64; 2]> {
    set.intervals(geom).into_iter().map(|(a, b)| [a, b]).collect()
}

fn record_stage(
    ctx: &Ctx<'_>,
    report: &mut Report,
    result: &mut PipelineResult,
    stage: usize,
    estimate: &RealField,
    log: &[IterationRecord],
) -> Result<()> {
    ctx.write_image(&format!("estimate_stage{stage}"), estimate)?;
    ctx.write(&format!("trace_stage{stage}.csv"), io::trace_csv(log).as_bytes())?;
    report
        .errors
        .stages
        .push(relative_error(estimate, &ctx.truth, &ctx.params.k_mask)?);
    report.iterations.push(StageTrace {
        stage,
        iterations: log.len() - 1,
        j0: log.iter().map(|r| r.j0).collect(),
    });
    result.estimates.push(estimate.clone());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Config {
        let mut c = Config::default();
        c.grid.m = 32;
        c.time.steps = 64;
        c.recon.stage1_iters = 4;
        c.recon.stage2_iters = 3;
        c.geometry.boundary_samples = 256;
        c
    }

    #[test]
    fn writes_all_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let res = run_pipeline(&small(), Some(dir.path()), Stage::Full).unwrap();
        for f in [
            "config.ini",
            "truth.tatf",
            "truth.pgm",
            "time_reversal.tatf",
            "estimate_stage1.tatf",
            "estimate_stage2.pgm",
            "trace_stage1.csv",
            "trace_stage2.csv",
            "psi_round1.csv",
            "arcs_initial.csv",
            "arcs_round1.csv",
            "report.json",
        ] {
            assert!(dir.path().join(f).exists(), "{f} missing");
        }
        let json: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
        let keys: Vec<&String> = json.as_object().unwrap().keys().collect();
        assert_eq!(keys, ["a2", "arcs", "errors", "iterations", "lambda"]);
        assert_eq!(res.report.errors.stages.len(), 2);
        assert_eq!(res.report.iterations[0].j0.len(), 5);
        assert!(res.report.a2[0].after >= res.report.a2[0].before);
        let trace = std::fs::read_to_string(dir.path().join("trace_stage2.csv")).unwrap();
        assert_eq!(trace.lines().count(), 5);
    }

    #[test]
    fn stages_stop_early() {
        let r = run_pipeline(&small(), None, Stage::Simulate).unwrap();
        assert!(r.estimates.is_empty() && r.report.errors.time_reversal.is_none());
        let r = run_pipeline(&small(), None, Stage::Place).unwrap();
        assert_eq!(r.estimates.len(), 1);
        assert_eq!(r.sensors.len(), 2);
    }

    #[test]
    fn alternate_rounds_and_ga_mode() {
        let mut c = small();
        c.run.alternate = 1;
        c.placement.mode = PlacementMode::Ga;
        c.sensors.count = 3;
        c.placement.ga.generations = 10;
        let r = run_pipeline(&c, None, Stage::Full).unwrap();
        assert_eq!(r.report.errors.stages.len(), 3);
        assert_eq!(r.report.lambda, vec![None, None]);
        assert_eq!(r.report.arcs.placed[0].len(), 3);
    }

    #[test]
    fn noise_is_seeded() {
        let mut c = small();
        c.run.noise = 0.05;
        let a = run_pipeline(&c, None, Stage::Reconstruct).unwrap();
        let b = run_pipeline(&c, None, Stage::Reconstruct).unwrap();
        assert_eq!(a.report, b.report);
        c.run.seed = 1;
        let d = run_pipeline(&c, None, Stage::Reconstruct).unwrap();
        assert_ne!(a.report.errors, d.report.errors);
    }

    #[test]
    fn relative_error_on_region() {
        let grid = crate::grid::Grid2D::new(4.0, 16).unwrap();
        let k = support_disk(grid, 0.85);
        let t = RealField::from_fn(grid, |x, y| if x * x + y * y < 0.25 { 2.0 } else { 0.0 });
        assert_eq!(relative_error(&t, &t, &k).unwrap(), 0.0);
        assert!((relative_error(&t.scaled(1.5), &t, &k).unwrap() - 0.5).abs() < 1e-12);
        assert!(relative_error(&t, &RealField::zeros(grid), &k).is_err());
    }
}
