//! Real-coded genetic search over the start angles of `N₀` equal arcs.
//!
//! Every child of generation `g` at slot `i` draws from its own ChaCha stream
//! `(seed, g * population + i)`, so a run is reproducible for any thread count.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::par;

use super::geometry::{BoundaryGeometry, SensorArcs};
use super::psi::{ArcIntegrator, BoundaryProfile};

#[derive(Debug, Clone, PartialEq)]
pub struct GaParams {
    pub population: usize,
    pub generations: usize,
    pub tournament: usize,
    pub crossover_rate: f64,
    /// Blend (BLX-α) extension factor.
    pub blend_alpha: f64,
    /// Initial mutation standard deviation as a fraction of the perimeter.
    pub mutation_fraction: f64,
    pub mutation_decay: f64,
    pub elitism: usize,
    /// Sweeps of per-arc golden-section refinement applied to the winner.
    pub polish_sweeps: usize,
}

impl Default for GaParams {
    fn default() -> Self {
        Self {
            population: 60,
            generations: 200,
            tournament: 3,
            crossover_rate: 0.8,
            blend_alpha: 0.5,
            mutation_fraction: 1.0 / 50.0,
            mutation_decay: 0.99,
            elitism: 2,
            polish_sweeps: 10,
        }
    }
}

impl GaParams {
    fn validate(&self) -> Result<()> {
        if self.population < 2
            || self.tournament == 0
            || self.elitism >= self.population
            || !(0.0..=1.0).contains(&self.crossover_rate)
            || !(self.mutation_fraction >= 0.0)
            || !(self.mutation_decay > 0.0)
        {
            return Err(Error::InvalidParameter(format!("invalid GA parameters: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GaResult {
    pub arcs: SensorArcs,
    /// `J(θ)` of the returned arcs.
    pub value: f64,
    /// Best objective after each generation (index 0 is the initial population).
    pub history: Vec<f64>,
}

#[derive(Clone)]
struct Individual {
    genes: Vec<f64>,
    fitness: f64,
}

struct Problem<'a> {
    geom: &'a BoundaryGeometry,
    integ: ArcIntegrator,
    ell: f64,
    n0: usize,
}

impl Problem<'_> {
    fn objective(&self, genes: &[f64]) -> f64 {
        genes
            .iter()
            .map(|&t| {
                let end = self.geom.arc_advance(t, self.ell).unwrap_or(t);
                self.integ.integral(t, end)
            })
            .sum()
    }

    /// Sort the angles and push arcs forward until every cyclic gap is `≥ ℓ`.
    fn repair(&self, genes: &mut [f64]) {
        for g in genes.iter_mut() {
            *g = g.rem_euclid(TAU);
        }
        genes.sort_by(f64::total_cmp);
        let n = genes.len();
        if n < 2 {
            return;
        }
        let geom = self.geom;
        let gap = |g: &[f64], k: usize| {
            let a = g[k];
            let b = if k + 1 < n { g[k + 1] } else { g[0] + TAU };
            geom.arc_length(a, b)
        };
        if (0..n).all(|k| gap(genes, k) >= self.ell) {
            return;
        }
        // start right after the largest gap and push greedily
        let widest = (0..n).max_by(|&a, &b| gap(genes, a).total_cmp(&gap(genes, b))).unwrap();
        let first = (widest + 1) % n;
        let mut chain: Vec<f64> = (0..n)
            .map(|k| {
                let i = (first + k) % n;
                if i < first {
                    genes[i] + TAU
                } else {
                    genes[i]
                }
            })
            .collect();
        for k in 1..n {
            if geom.arc_length(chain[k - 1], chain[k]) < self.ell {
                chain[k] = geom.arc_advance(chain[k - 1], self.ell).unwrap();
            }
        }
        let wrap = geom.arc_length(chain[n - 1], chain[0] + TAU);
        if wrap < self.ell {
            // spread the slack evenly behind the first arc
            let slack = (geom.perimeter() - n as f64 * self.ell) / n as f64;
            for k in 1..n {
                chain[k] = geom.arc_advance(chain[k - 1], self.ell + slack).unwrap();
            }
        }
        for (dst, src) in genes.iter_mut().zip(chain) {
            *dst = src.rem_euclid(TAU);
        }
        genes.sort_by(f64::total_cmp);
    }

    /// Start angle whose arc ends exactly at `theta`.
    fn retreat(&self, theta: f64) -> f64 {
        let target = self.geom.cumulative_length(theta) - self.ell;
        let (mut lo, mut hi) = (theta - TAU, theta);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if self.geom.cumulative_length(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn arc_value(&self, t: f64) -> f64 {
        let end = self.geom.arc_advance(t, self.ell).unwrap_or(t);
        self.integ.integral(t, end)
    }

    /// Coordinate ascent: maximize each arc in turn over a local window that
    /// keeps it clear of its neighbours.
    fn polish(&self, genes: &mut [f64], sweeps: usize, radius: f64) {
        let n = genes.len();
        let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..sweeps {
            for k in 0..n {
                let t = genes[k];
                let (mut lo, mut hi) = (t - radius, t + radius);
                if n > 1 {
                    // genes are sorted in [0, 2π); unwrap the neighbours around t
                    let prev = if k == 0 { genes[n - 1] - TAU } else { genes[k - 1] };
                    let next = if k + 1 == n { genes[0] + TAU } else { genes[k + 1] };
                    let prev_end = self.geom.arc_advance(prev, self.ell).unwrap();
                    lo = lo.max(prev_end.min(t));
                    hi = hi.min(self.retreat(next).max(t));
                }
                let (mut a, mut b) = (lo, hi);
                let mut c = b - inv_phi * (b - a);
                let mut d = a + inv_phi * (b - a);
                let (mut fc, mut fd) = (self.arc_value(c), self.arc_value(d));
                for _ in 0..80 {
                    if fc > fd {
                        b = d;
                        d = c;
                        fd = fc;
                        c = b - inv_phi * (b - a);
                        fc = self.arc_value(c);
                    } else {
                        a = c;
                        c = d;
                        fc = fd;
                        d = a + inv_phi * (b - a);
                        fd = self.arc_value(d);
                    }
                }
                let cand = 0.5 * (a + b);
                if self.arc_value(cand) > self.arc_value(t) {
                    genes[k] = cand;
                }
            }
            for g in genes.iter_mut() {
                *g = g.rem_euclid(TAU);
            }
            genes.sort_by(f64::total_cmp);
        }
    }

    fn random(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut g: Vec<f64> = (0..self.n0).map(|_| rng.random_range(0.0..TAU)).collect();
        self.repair(&mut g);
        g
    }
}

fn wrap_pi(d: f64) -> f64 {
    (d + PI).rem_euclid(TAU) - PI
}

fn tournament<'p>(pop: &'p [Individual], size: usize, rng: &mut ChaCha8Rng) -> &'p Individual {
    let mut best = &pop[rng.random_range(0..pop.len())];
    for _ in 1..size {
        let c = &pop[rng.random_range(0..pop.len())];
        if c.fitness > best.fitness {
            best = c;
        }
    }
    best
}

/// Maximize `J(θ₁..θ_N₀) = Σ ∫_{θₙ}^{θ̂ₙ} f √(ρ² + ρ'²) dθ` over feasible arcs.
pub fn place_ga(
    profile: &BoundaryProfile,
    geom: &BoundaryGeometry,
    n0: usize,
    ell: f64,
    params: &GaParams,
    seed: u64,
) -> Result<GaResult> {
    params.validate()?;
    let perimeter = geom.perimeter();
    if n0 == 0 || !(ell > 0.0) || n0 as f64 * ell >= perimeter {
        return Err(Error::Infeasible(format!(
            "{n0} arcs of length {ell} do not fit in perimeter {perimeter}"
        )));
    }
    let problem = Problem {
        geom,
        integ: profile.arc_integrator(geom)?,
        ell,
        n0,
    };
    let stream = |generation: usize, slot: usize| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream((generation * params.population + slot) as u64);
        rng
    };

    let mut pop: Vec<Individual> = par::map_range(params.population, |i| {
        let genes = problem.random(&mut stream(0, i));
        let fitness = problem.objective(&genes);
        Individual { genes, fitness }
    });
    let rank = |pop: &mut Vec<Individual>| pop.sort_by(|a, b| b.fitness.total_cmp(&a.fitness));
    rank(&mut pop);
    let mut history = vec![pop[0].fitness];

    let mut sigma =
        params.mutation_fraction * perimeter / geom.speed_samples().iter().sum::<f64>() * geom.samples() as f64;
    for generation in 1..=params.generations {
        let parents = &pop;
        let offspring: Vec<Individual> = par::map_range(params.population - params.elitism, |slot| {
            let mut rng = stream(generation, slot);
            let a = tournament(parents, params.tournament, &mut rng);
            let b = tournament(parents, params.tournament, &mut rng);
            let mut genes = a.genes.clone();
            if rng.random::<f64>() < params.crossover_rate {
                for (g, &other) in genes.iter_mut().zip(&b.genes) {
                    let u = rng.random_range(-params.blend_alpha..=1.0 + params.blend_alpha);
                    *g += u * wrap_pi(other - *g);
                }
            }
            if sigma > 0.0 {
                let normal = Normal::new(0.0, sigma).unwrap();
                let rate = 1.0 / n0 as f64;
                let mut mutated = false;
                for g in genes.iter_mut() {
                    if rng.random::<f64>() < rate {
                        *g += normal.sample(&mut rng);
                        mutated = true;
                    }
                }
                if !mutated {
                    let k = rng.random_range(0..n0);
                    genes[k] += normal.sample(&mut rng);
                }
            }
            problem.repair(&mut genes);
            let fitness = problem.objective(&genes);
            Individual { genes, fitness }
        });
        let mut next: Vec<Individual> = pop[..params.elitism].to_vec();
        next.extend(offspring);
        rank(&mut next);
        pop = next;
        history.push(pop[0].fitness);
        sigma *= params.mutation_decay;
    }

    let mut genes = pop[0].genes.clone();
    let mut value = pop[0].fitness;
    if params.polish_sweeps > 0 {
        let mut polished = genes.clone();
        problem.polish(&mut polished, params.polish_sweeps, (4.0 * sigma).max(1e-3));
        let v = problem.objective(&polished);
        if v > value && SensorArcs::new(geom, polished.clone(), ell).is_ok() {
            genes = polished;
            value = v;
        }
    }
    let arcs = SensorArcs::new(geom, genes, ell)?;
    Ok(GaResult { arcs, value, history })
}
