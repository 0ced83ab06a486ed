//! Run configuration read from INI files.
//!
//! ```ini
//! # every key is optional; the values shown are the defaults
//! [grid]
//! side = 4
//! m = 512
//! [time]
//! horizon = 2
//! steps = 1024          # or: dt = 0.001953125
//! [geometry]
//! radius = 1
//! eps = 0.03
//! boundary_samples = 1024
//! [phantom]
//! name = disk           # disk | ellipses | annulus
//! # file = truth.tatf   # a TATF1 field instead of a stock phantom
//! [sensors]
//! fraction = 0.3
//! initial_center = 3.141592653589793
//! count = 38
//! gain = calibrated     # calibrated | unit | <number>
//! [recon]
//! gamma = 0.01
//! eta = 0.5
//! stage1_iters = 30
//! stage2_iters = 20
//! prox_iters = 50
//! prox_tau = 0.125
//! k_radius = 0.85
//! nonneg = true
//! accelerate = true
//! project = true
//! warm_start = true
//! [placement]
//! mode = threshold      # threshold | ga
//! psi = boundary        # boundary | volumetric
//! psi_nodes = 5
//! oracle_psi = false
//! ga_population = 60
//! ga_generations = 200
//! ga_tournament = 3
//! ga_crossover = 0.8
//! ga_blend_alpha = 0.5
//! ga_mutation = 0.02
//! ga_mutation_decay = 0.99
//! ga_elitism = 2
//! ga_polish = 10
//! [run]
//! noise = 0
//! seed = 0
//! alternate = 0
//! output = out
//! ```

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::Ini;

use crate::error::{Error, Result};
use crate::grid::Grid2D;
use crate::imaging::SensorGain;
use crate::phantom::StockPhantom;
use crate::placement::{GaParams, PsiMode};
use crate::wave::TimeGrid;

#[derive(Debug, Clone, PartialEq)]
pub enum PhantomSource {
    Stock(StockPhantom),
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlacementMode {
    Threshold,
    Ga,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub side: f64,
    pub m: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeConfig {
    pub horizon: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeometryConfig {
    pub radius: f64,
    pub eps: f64,
    pub boundary_samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorConfig {
    /// Boundary measure budget `L` as a fraction of the perimeter.
    pub fraction: f64,
    /// Centre angle of the initial single arc.
    pub initial_center: f64,
    /// Number of equal arcs `N₀` in GA mode; `ℓ = L · perimeter / N₀`.
    pub count: usize,
    pub gain: SensorGain,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconConfig {
    pub gamma: f64,
    pub eta: f64,
    pub stage1_iters: usize,
    pub stage2_iters: usize,
    pub prox_iters: usize,
    pub prox_tau: f64,
    pub k_radius: f64,
    pub nonneg: bool,
    pub accelerate: bool,
    pub project: bool,
    /// Start each later stage from the previous estimate instead of zero.
    pub warm_start: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlacementConfig {
    pub mode: PlacementMode,
    pub psi: PsiMode,
    /// Compute `ψ` from the true phantom instead of the reconstruction.
    pub oracle_psi: bool,
    pub ga: GaParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Noise standard deviation relative to `max |p_obs|`.
    pub noise: f64,
    pub seed: u64,
    /// Extra place/measure/reconstruct rounds after the first.
    pub alternate: usize,
    pub output: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub grid: GridConfig,
    pub time: TimeConfig,
    pub geometry: GeometryConfig,
    pub phantom: PhantomSource,
    pub sensors: SensorConfig,
    pub recon: ReconConfig,
    pub placement: PlacementConfig,
    pub run: RunConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            grid: GridConfig { side: 4.0, m: 512 },
            time: TimeConfig {
                horizon: 2.0,
                steps: 1024,
            },
            geometry: GeometryConfig {
                radius: 1.0,
                eps: 0.03,
                boundary_samples: 1024,
            },
            phantom: PhantomSource::Stock(StockPhantom::Disk),
            sensors: SensorConfig {
                fraction: 0.3,
                initial_center: PI,
                count: 38,
                gain: SensorGain::Calibrated,
            },
            recon: ReconConfig {
                gamma: 0.01,
                eta: 0.5,
                stage1_iters: 30,
                stage2_iters: 20,
                prox_iters: crate::tv::DEFAULT_PROX_ITERS,
                prox_tau: crate::tv::DEFAULT_PROX_TAU,
                k_radius: crate::tv::DEFAULT_K_RADIUS,
                nonneg: true,
                accelerate: true,
                project: true,
                warm_start: true,
            },
            placement: PlacementConfig {
                mode: PlacementMode::Threshold,
                psi: PsiMode::Boundary,
                oracle_psi: false,
                ga: GaParams::default(),
            },
            run: RunConfig {
                noise: 0.0,
                seed: 0,
                alternate: 0,
                output: PathBuf::from("out"),
            },
        }
    }
}

const KEYS: &[(&str, &[&str])] = &[
    ("grid", &["side", "m"]),
    ("time", &["horizon", "steps", "dt"]),
    ("geometry", &["radius", "eps", "boundary_samples"]),
    ("phantom", &["name", "file"]),
    ("sensors", &["fraction", "initial_center", "count", "gain"]),
    (
        "recon",
        &[
            "gamma",
            "eta",
            "stage1_iters",
            "stage2_iters",
            "prox_iters",
            "prox_tau",
            "k_radius",
            "nonneg",
            "accelerate",
            "project",
            "warm_start",
        ],
    ),
    (
        "placement",
        &[
            "mode",
            "psi",
            "psi_nodes",
            "oracle_psi",
            "ga_population",
            "ga_generations",
            "ga_tournament",
            "ga_crossover",
            "ga_blend_alpha",
            "ga_mutation",
            "ga_mutation_decay",
            "ga_elitism",
            "ga_polish",
        ],
    ),
    ("run", &["noise", "seed", "alternate", "output"]),
];

struct Entries {
    origin: String,
    map: BTreeMap<(String, String), String>,
}

impl Entries {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Config {
            path: self.origin.clone(),
            msg: msg.into(),
        }
    }

    fn raw(&self, section: &str, key: &str) -> Option<&str> {
        self.map
            .get(&(section.to_string(), key.to_string()))
            .map(String::as_str)
    }

    fn parse<T: FromStr>(&self, section: &str, key: &str, slot: &mut T) -> Result<()> {
        if let Some(v) = self.raw(section, key) {
            *slot = v
                .parse()
                .map_err(|_| self.err(format!("[{section}] {key} = '{v}' is not a valid value")))?;
        }
        Ok(())
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_ini_str(&text, &path.display().to_string())?;
        // relative phantom files are resolved against the config location
        if let PhantomSource::File(f) = &mut cfg.phantom {
            if f.is_relative() {
                if let Some(dir) = path.parent() {
                    *f = dir.join(&*f);
                }
            }
        }
        Ok(cfg)
    }

    /// Parse INI text; `origin` names the source in error messages.
    pub fn from_ini_str(text: &str, origin: &str) -> Result<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| Error::Config {
            path: origin.to_string(),
            msg: e.to_string(),
        })?;
        let mut entries = Entries {
            origin: origin.to_string(),
            map: BTreeMap::new(),
        };
        for (section, props) in ini.iter() {
            let Some(section) = section else {
                if props.iter().next().is_some() {
                    return Err(entries.err("keys must appear inside a [section]"));
                }
                continue;
            };
            let Some((_, known)) = KEYS.iter().find(|(s, _)| *s == section) else {
                return Err(entries.err(format!("unknown section [{section}]")));
            };
            for (key, value) in props.iter() {
                if !known.contains(&key) {
                    return Err(entries.err(format!("unknown key '{key}' in [{section}]")));
                }
                let value = strip_comment(value);
                if entries
                    .map
                    .insert((section.to_string(), key.to_string()), value.to_string())
                    .is_some()
                {
                    return Err(entries.err(format!("duplicate key '{key}' in [{section}]")));
                }
            }
        }

        let mut c = Config::default();
        entries.parse("grid", "side", &mut c.grid.side)?;
        entries.parse("grid", "m", &mut c.grid.m)?;

        entries.parse("time", "horizon", &mut c.time.horizon)?;
        match (entries.raw("time", "steps"), entries.raw("time", "dt")) {
            (Some(_), Some(_)) => return Err(entries.err("[time] accepts either steps or dt, not both")),
            (Some(_), None) => entries.parse("time", "steps", &mut c.time.steps)?,
            (None, Some(_)) => {
                let mut dt = 0.0f64;
                entries.parse("time", "dt", &mut dt)?;
                let tg = TimeGrid::new(c.time.horizon, dt).map_err(|e| entries.err(e.to_string()))?;
                c.time.steps = tg.steps;
            }
            (None, None) => {}
        }

        entries.parse("geometry", "radius", &mut c.geometry.radius)?;
        entries.parse("geometry", "eps", &mut c.geometry.eps)?;
        entries.parse("geometry", "boundary_samples", &mut c.geometry.boundary_samples)?;

        match (entries.raw("phantom", "name"), entries.raw("phantom", "file")) {
            (Some(_), Some(_)) => return Err(entries.err("[phantom] accepts either name or file, not both")),
            (Some(n), None) => {
                c.phantom = PhantomSource::Stock(n.parse().map_err(|e: Error| entries.err(e.to_string()))?)
            }
            (None, Some(f)) => c.phantom = PhantomSource::File(PathBuf::from(f)),
            (None, None) => {}
        }

        entries.parse("sensors", "fraction", &mut c.sensors.fraction)?;
        entries.parse("sensors", "initial_center", &mut c.sensors.initial_center)?;
        entries.parse("sensors", "count", &mut c.sensors.count)?;
        if let Some(g) = entries.raw("sensors", "gain") {
            c.sensors.gain = match g {
                "calibrated" => SensorGain::Calibrated,
                "unit" => SensorGain::Unit,
                other => SensorGain::Fixed(other.parse().map_err(|_| {
                    entries.err(format!(
                        "[sensors] gain = '{other}' is not calibrated, unit or a number"
                    ))
                })?),
            };
        }

        let r = &mut c.recon;
        entries.parse("recon", "gamma", &mut r.gamma)?;
        entries.parse("recon", "eta", &mut r.eta)?;
        entries.parse("recon", "stage1_iters", &mut r.stage1_iters)?;
        entries.parse("recon", "stage2_iters", &mut r.stage2_iters)?;
        entries.parse("recon", "prox_iters", &mut r.prox_iters)?;
        entries.parse("recon", "prox_tau", &mut r.prox_tau)?;
        entries.parse("recon", "k_radius", &mut r.k_radius)?;
        entries.parse("recon", "nonneg", &mut r.nonneg)?;
        entries.parse("recon", "accelerate", &mut r.accelerate)?;
        entries.parse("recon", "project", &mut r.project)?;
        entries.parse("recon", "warm_start", &mut r.warm_start)?;

        let p = &mut c.placement;
        if let Some(mode) = entries.raw("placement", "mode") {
            p.mode = match mode {
                "threshold" => PlacementMode::Threshold,
                "ga" => PlacementMode::Ga,
                other => return Err(entries.err(format!("[placement] mode = '{other}' is not threshold or ga"))),
            };
        }
        let mut nodes = 5usize;
        entries.parse("placement", "psi_nodes", &mut nodes)?;
        if let Some(psi) = entries.raw("placement", "psi") {
            p.psi = match psi {
                "boundary" => PsiMode::Boundary,
                "volumetric" => PsiMode::Volumetric {
                    eps: c.geometry.eps,
                    nodes,
                },
                other => return Err(entries.err(format!("[placement] psi = '{other}' is not boundary or volumetric"))),
            };
        }
        entries.parse("placement", "oracle_psi", &mut p.oracle_psi)?;
        entries.parse("placement", "ga_population", &mut p.ga.population)?;
        entries.parse("placement", "ga_generations", &mut p.ga.generations)?;
        entries.parse("placement", "ga_tournament", &mut p.ga.tournament)?;
        entries.parse("placement", "ga_crossover", &mut p.ga.crossover_rate)?;
        entries.parse("placement", "ga_blend_alpha", &mut p.ga.blend_alpha)?;
        entries.parse("placement", "ga_mutation", &mut p.ga.mutation_fraction)?;
        entries.parse("placement", "ga_mutation_decay", &mut p.ga.mutation_decay)?;
        entries.parse("placement", "ga_elitism", &mut p.ga.elitism)?;
        entries.parse("placement", "ga_polish", &mut p.ga.polish_sweeps)?;

        entries.parse("run", "noise", &mut c.run.noise)?;
        entries.parse("run", "seed", &mut c.run.seed)?;
        entries.parse("run", "alternate", &mut c.run.alternate)?;
        if let Some(o) = entries.raw("run", "output") {
            c.run.output = PathBuf::from(o);
        }

        c.validate().map_err(|e| entries.err(e.to_string()))?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid()?;
        self.time_grid()?;
        let g = &self.geometry;
        if !(g.radius > 0.0) || !(g.eps > 0.0) || g.boundary_samples < 8 {
            return Err(Error::InvalidParameter(
                "geometry needs radius > 0, eps > 0 and at least 8 samples".into(),
            ));
        }
        if g.radius + g.eps >= 0.5 * self.grid.side {
            return Err(Error::InvalidParameter("sensor ring does not fit in the box".into()));
        }
        let s = &self.sensors;
        if !(s.fraction > 0.0 && s.fraction < 1.0) || s.count == 0 || !s.initial_center.is_finite() {
            return Err(Error::InvalidParameter(
                "sensors need 0 < fraction < 1 and count >= 1".into(),
            ));
        }
        if let SensorGain::Fixed(v) = s.gain {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "sensor gain must be positive, got {v}"
                )));
            }
        }
        let r = &self.recon;
        if !(r.gamma > 0.0) || !(r.eta > 0.0) || !(r.prox_tau > 0.0 && r.prox_tau <= 0.25) {
            return Err(Error::InvalidParameter(
                "recon needs gamma > 0, eta > 0, 0 < prox_tau <= 1/4".into(),
            ));
        }
        if r.stage1_iters == 0 || r.stage2_iters == 0 || r.prox_iters == 0 {
            return Err(Error::InvalidParameter("iteration counts must be at least 1".into()));
        }
        if !(r.k_radius > 0.0 && r.k_radius < g.radius) {
            return Err(Error::InvalidParameter("k_radius must lie in (0, radius)".into()));
        }
        if !(self.run.noise >= 0.0 && self.run.noise.is_finite()) {
            return Err(Error::InvalidParameter("noise level must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid2D> {
        Grid2D::new(self.grid.side, self.grid.m)
    }

    pub fn time_grid(&self) -> Result<TimeGrid> {
        TimeGrid::with_steps(self.time.horizon, self.time.steps)
    }

    /// Arc length of each of the `count` arcs used in GA mode.
    pub fn arc_length(&self, perimeter: f64) -> f64 {
        self.sensors.fraction * perimeter / self.sensors.count as f64
    }

    /// The effective configuration as INI text (round-trips through
    /// [`Config::from_ini_str`]).
    pub fn to_ini_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[grid]\nside = {}\nm = {}", self.grid.side, self.grid.m);
        let _ = writeln!(
            s,
            "\n[time]\nhorizon = {}\nsteps = {}",
            self.time.horizon, self.time.steps
        );
        let g = &self.geometry;
        let _ = writeln!(
            s,
            "\n[geometry]\nradius = {}\neps = {}\nboundary_samples = {}",
            g.radius, g.eps, g.boundary_samples
        );
        match &self.phantom {
            PhantomSource::Stock(p) => {
                let _ = writeln!(s, "\n[phantom]\nname = {}", p.name());
            }
            PhantomSource::File(f) => {
                let _ = writeln!(s, "\n[phantom]\nfile = {}", f.display());
            }
        }
        let gain = match self.sensors.gain {
            SensorGain::Calibrated => "calibrated".to_string(),
            SensorGain::Unit => "unit".to_string(),
            SensorGain::Fixed(v) => v.to_string(),
        };
        let _ = writeln!(
            s,
            "\n[sensors]\nfraction = {}\ninitial_center = {}\ncount = {}\ngain = {gain}",
            self.sensors.fraction, self.sensors.initial_center, self.sensors.count
        );
        let r = &self.recon;
        let _ = writeln!(
            s,
            "\n[recon]\ngamma = {}\neta = {}\nstage1_iters = {}\nstage2_iters = {}\nprox_iters = {}\nprox_tau = {}\nk_radius = {}\nnonneg = {}\naccelerate = {}\nproject = {}\nwarm_start = {}",
            r.gamma, r.eta, r.stage1_iters, r.stage2_iters, r.prox_iters, r.prox_tau, r.k_radius, r.nonneg, r.accelerate, r.project, r.warm_start
        );
        let p = &self.placement;
        let mode = match p.mode {
            PlacementMode::Threshold => "threshold",
            PlacementMode::Ga => "ga",
        };
        let (psi, nodes) = match p.psi {
            PsiMode::Boundary => ("boundary", 5),
            PsiMode::Volumetric { nodes, .. } => ("volumetric", nodes),
        };
        let ga = &p.ga;
        let _ = writeln!(
            s,
            "\n[placement]\nmode = {mode}\npsi = {psi}\npsi_nodes = {nodes}\noracle_psi = {}\nga_population = {}\nga_generations = {}\nga_tournament = {}\nga_crossover = {}\nga_blend_alpha = {}\nga_mutation = {}\nga_mutation_decay = {}\nga_elitism = {}\nga_polish = {}",
            p.oracle_psi, ga.population, ga.generations, ga.tournament, ga.crossover_rate, ga.blend_alpha, ga.mutation_fraction, ga.mutation_decay, ga.elitism, ga.polish_sweeps
        );
        let _ = writeln!(
            s,
            "\n[run]\nnoise = {}\nseed = {}\nalternate = {}\noutput = {}",
            self.run.noise,
            self.run.seed,
            self.run.alternate,
            self.run.output.display()
        );
        s
    }
}

/// Drop a trailing `# comment` from a value.
fn strip_comment(v: &str) -> &str {
    match v.find(" #") {
        Some(i) => v[..i].trim_end(),
        None => v.trim(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = Config::from_ini_str("", "t").unwrap();
        assert_eq!(c, Config::default());
        assert_eq!(c.grid.m, 512);
        assert_eq!(c.time_grid().unwrap().dt, 2.0 / 1024.0);
        assert_eq!(c.geometry.eps, 0.03);
        assert_eq!((c.recon.gamma, c.recon.eta), (0.01, 0.5));
        assert_eq!((c.recon.stage1_iters, c.recon.stage2_iters), (30, 20));
        assert_eq!(c.sensors.fraction, 0.3);
    }

    #[test]
    fn parses_sections_and_comments() {
        let text = "# desk scale\n[grid]\nm = 128\n\n[time]\ndt = 0.0078125  # T/256\n\n[placement]\nmode = ga\npsi = volumetric\npsi_nodes = 3\n\n[sensors]\ngain = 4.5\n";
        let c = Config::from_ini_str(text, "t").unwrap();
        assert_eq!(c.grid.m, 128);
        assert_eq!(c.time.steps, 256);
        assert_eq!(c.placement.mode, PlacementMode::Ga);
        assert_eq!(c.placement.psi, PsiMode::Volumetric { eps: 0.03, nodes: 3 });
        assert_eq!(c.sensors.gain, SensorGain::Fixed(4.5));
    }

    #[test]
    fn rejects_unknown_and_bad_entries() {
        for text in [
            "[grid]\nresolution = 3\n",
            "[mystery]\nx = 1\n",
            "m = 128\n",
            "[grid]\nm = many\n",
            "[grid]\nm = 127\n",
            "[time]\nsteps = 10\ndt = 0.2\n",
            "[time]\ndt = 0.3\n",
            "[recon]\nprox_tau = 0.5\n",
            "[placement]\nmode = annealing\n",
            "[phantom]\nname = blob\n",
            "[sensors]\nfraction = 1.2\n",
        ] {
            let e = Config::from_ini_str(text, "bad.ini").unwrap_err();
            assert!(matches!(e, Error::Config { .. }), "{text}: {e}");
        }
    }

    #[test]
    fn ini_round_trip() {
        let mut c = Config::default();
        c.grid.m = 64;
        c.placement.mode = PlacementMode::Ga;
        c.placement.psi = PsiMode::Volumetric { eps: 0.03, nodes: 4 };
        c.sensors.gain = SensorGain::Unit;
        c.phantom = PhantomSource::Stock(StockPhantom::Annulus);
        c.run.seed = 99;
        let back = Config::from_ini_str(&c.to_ini_string(), "rt").unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn arc_length_keeps_total_measure() {
        let c = Config::default();
        let p = 2.0 * PI;
        assert!((c.arc_length(p) * 38.0 - 0.3 * p).abs() < 1e-12);
    }
}
