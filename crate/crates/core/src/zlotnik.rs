//! Zlotnik's comparison lemma: if `y' <= g(y) + b'(t)` on `[0, T]`,
//! `b(t2) - b(t1) <= N0 + N1 (t2 - t1)` and `g(z) <= -N1` for `z >= zeta_bar`,
//! then `y(t) <= max(y0, zeta_bar) + N0`.
//!
//! The oracle integrates the equality case with RK4, stepping exactly onto
//! every slope break and applying jumps exactly.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::random::seeded;

/// Right-hand sides used by the oracle and the fuzzer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum GFunction {
    /// `c0 - c1 y`
    Affine { c0: f64, c1: f64 },
    /// `-c y |y|^(k-1)`
    OddPower { c: f64, k: i32 },
    /// `r y (1 - y/K)` for `y >= 0`, `r y` below.
    LogisticDecay { r: f64, cap: f64 },
    /// Constant `c`.
    Constant { c: f64 },
    /// `sin y - y / 2`
    SineDrift,
}

impl GFunction {
    pub fn eval(&self, y: f64) -> f64 {
        match *self {
            Self::Affine { c0, c1 } => c0 - c1 * y,
            Self::OddPower { c, k } => -c * y * y.abs().powi(k - 1),
            Self::LogisticDecay { r, cap } => {
                if y >= 0.0 {
                    r * y * (1.0 - y / cap)
                } else {
                    r * y
                }
            }
            Self::Constant { c } => c,
            Self::SineDrift => y.sin() - 0.5 * y,
        }
    }
}

/// Piecewise-linear `b` with nonnegative jumps, `b(0) = 0`, right-continuous.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forcing {
    /// `0 = t_0 < t_1 < ... < t_n = T`
    pub knots: Vec<f64>,
    /// Slope on `[t_k, t_{k+1})`.
    pub slopes: Vec<f64>,
    /// `(time, size)` with `size >= 0`.
    pub jumps: Vec<(f64, f64)>,
}

impl Forcing {
    pub fn zero(horizon: f64) -> Self {
        Self { knots: vec![0.0, horizon], slopes: vec![0.0], jumps: Vec::new() }
    }

    pub fn linear(horizon: f64, slope: f64) -> Self {
        Self { knots: vec![0.0, horizon], slopes: vec![slope], jumps: Vec::new() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.knots.len() < 2 || self.slopes.len() + 1 != self.knots.len() {
            return Err(invalid("forcing", "need n + 1 knots for n slopes"));
        }
        if self.knots[0] != 0.0 || self.knots.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("forcing", "knots must start at 0 and increase"));
        }
        let horizon = self.horizon();
        if self.jumps.iter().any(|&(t, s)| !(t > 0.0 && t <= horizon && s >= 0.0)) {
            return Err(invalid("forcing", "jumps need a time in (0, T] and a nonnegative size"));
        }
        if self.slopes.iter().any(|s| !s.is_finite()) {
            return Err(invalid("forcing", "slopes must be finite"));
        }
        Ok(())
    }

    pub fn horizon(&self) -> f64 {
        *self.knots.last().expect("validated knots")
    }

    /// Total jump mass.
    pub fn n0(&self) -> f64 {
        self.jumps.iter().map(|j| j.1).sum()
    }

    /// Largest slope, floored at 0.
    pub fn n1(&self) -> f64 {
        self.slopes.iter().copied().fold(0.0, f64::max)
    }

    fn slope_at(&self, t: f64) -> f64 {
        let k = self.knots.partition_point(|&s| s <= t).saturating_sub(1);
        self.slopes[k.min(self.slopes.len() - 1)]
    }

    pub fn eval(&self, t: f64) -> f64 {
        let mut b = 0.0;
        for (k, &s) in self.slopes.iter().enumerate() {
            let (a, z) = (self.knots[k], self.knots[k + 1]);
            if t > a {
                b += s * (t.min(z) - a);
            }
        }
        b + self.jumps.iter().filter(|j| j.0 <= t).map(|j| j.1).sum::<f64>()
    }

    /// Largest `b(t2) - b(t1) - N0 - N1 (t2 - t1)` over pairs of `samples`
    /// uniform times; nonpositive when the certificate holds.
    pub fn certificate_defect(&self, samples: usize) -> f64 {
        let h = self.horizon();
        let ts: Vec<f64> = (0..=samples).map(|k| h * k as f64 / samples as f64).collect();
        let bs: Vec<f64> = ts.iter().map(|&t| self.eval(t)).collect();
        let (n0, n1) = (self.n0(), self.n1());
        let mut worst = f64::NEG_INFINITY;
        for a in 0..ts.len() {
            for b in a + 1..ts.len() {
                worst = worst.max(bs[b] - bs[a] - n0 - n1 * (ts[b] - ts[a]));
            }
        }
        worst
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZlotnikInstance {
    pub g: GFunction,
    pub y0: f64,
    pub b: Forcing,
    /// Constant subtracted from the right-hand side (a sub-solution when
    /// positive).
    #[serde(default)]
    pub slack: f64,
}

impl ZlotnikInstance {
    pub fn horizon(&self) -> f64 {
        self.b.horizon()
    }
}

/// Smallest `zeta` in `[lo, hi]` with `g <= -n1` on `[zeta, W]`, checked on
/// `scan` uniform points, `W = hi + 9 max(|hi|, 1)`. The final crossing is
/// bisected to `1e-10`.
pub fn find_zeta_bar(g: impl Fn(f64) -> f64, n1: f64, lo: f64, hi: f64, scan: usize) -> Result<f64> {
    if !(lo < hi) || scan < 2 {
        return Err(invalid("bracket", format!("[{lo}, {hi}] with {scan} scan points")));
    }
    if g(hi) > -n1 {
        return Err(Error::Zlotnik(format!("bracket invalid: g({hi}) = {} > {}", g(hi), -n1)));
    }
    let window = hi + 9.0 * hi.abs().max(1.0);
    let step = (window - lo) / scan as f64;
    let violates = |z: f64| g(z) > -n1;
    let mut last = None;
    for k in 0..=scan {
        let z = lo + k as f64 * step;
        if violates(z) {
            last = Some(z);
        }
    }
    let Some(bad) = last else { return Ok(lo) };
    if bad >= hi {
        return Err(Error::Zlotnik(format!("violation above the bracket at zeta = {bad}: g = {}", g(bad))));
    }
    let (mut a, mut b) = (bad, (bad + step).min(hi));
    while b - a > 1e-10 {
        let m = 0.5 * (a + b);
        if violates(m) {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(b)
}

/// `max(y0, zeta_bar) + N0`.
pub fn zlotnik_bound(y0: f64, zeta_bar: f64, n0: f64) -> f64 {
    y0.max(zeta_bar) + n0
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Series {
    pub t: Vec<f64>,
    pub y: Vec<f64>,
    pub dt: f64,
}

impl Series {
    pub fn max(&self) -> f64 {
        self.y.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn last(&self) -> f64 {
        *self.y.last().expect("series has the initial point")
    }

    /// Linear interpolation at `t`.
    pub fn at(&self, t: f64) -> f64 {
        let k = self.t.partition_point(|&s| s <= t);
        if k == 0 {
            return self.y[0];
        }
        if k >= self.t.len() {
            return self.last();
        }
        let (t0, t1) = (self.t[k - 1], self.t[k]);
        if t1 == t0 {
            return self.y[k];
        }
        let w = (t - t0) / (t1 - t0);
        (1.0 - w) * self.y[k - 1] + w * self.y[k]
    }
}

/// RK4 for `y' = g(y) + b'(t) - slack` with step at most `dt`.
pub fn integrate_fixed(inst: &ZlotnikInstance, dt: f64) -> Result<Series> {
    inst.b.validate()?;
    if !(dt > 0.0) {
        return Err(invalid("dt", format!("{dt} must be positive")));
    }
    let mut stops: Vec<f64> = inst.b.knots.iter().copied().chain(inst.b.jumps.iter().map(|j| j.0)).collect();
    stops.sort_by(f64::total_cmp);
    stops.dedup();
    let mut t = 0.0;
    let mut y = inst.y0;
    let mut out = Series { t: vec![t], y: vec![y], dt };
    let jump_at = |s: f64| inst.b.jumps.iter().filter(|j| j.0 == s).map(|j| j.1).sum::<f64>();
    for w in stops.windows(2) {
        let (a, z) = (w[0], w[1]);
        let slope = inst.b.slope_at(0.5 * (a + z));
        let f = |y: f64| inst.g.eval(y) + slope - inst.slack;
        let n = ((z - a) / dt).ceil().max(1.0) as usize;
        let h = (z - a) / n as f64;
        for k in 1..=n {
            let k1 = f(y);
            let k2 = f(y + 0.5 * h * k1);
            let k3 = f(y + 0.5 * h * k2);
            let k4 = f(y + h * k3);
            y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            t = if k == n { z } else { a + k as f64 * h };
            out.t.push(t);
            out.y.push(y);
        }
        let jump = jump_at(z);
        if jump != 0.0 {
            y += jump;
            out.t.push(t);
            out.y.push(y);
        }
        if !y.is_finite() {
            return Ok(out);
        }
    }
    Ok(out)
}

/// Refinement agreement required of the oracle.
pub const ORACLE_TOL: f64 = 1e-6;

/// Halves `dt` until the maximum and the final value of two successive
/// solutions agree to [`ORACLE_TOL`]; returns the finer one.
pub fn brute_force_ode(inst: &ZlotnikInstance, dt: f64) -> Result<Series> {
    let mut coarse = integrate_fixed(inst, dt)?;
    let mut h = dt;
    for _ in 0..20 {
        h *= 0.5;
        let fine = integrate_fixed(inst, h)?;
        let ok = fine.y.iter().all(|v| v.is_finite())
            && coarse.y.iter().all(|v| v.is_finite())
            && (fine.max() - coarse.max()).abs() <= ORACLE_TOL
            && (fine.last() - coarse.last()).abs() <= ORACLE_TOL;
        if ok {
            return Ok(fine);
        }
        coarse = fine;
    }
    Err(Error::Zlotnik(format!("oracle refinement did not converge down to dt = {h:e}")))
}

/// Bracket and scan used for every fuzz case.
pub const FUZZ_BRACKET: (f64, f64) = (-5.0, 20.0);
pub const FUZZ_SCAN: usize = 200_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub case: usize,
    pub instance: ZlotnikInstance,
    pub zeta_bar: f64,
    pub bound: f64,
    pub max_y: f64,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FuzzReport {
    pub seed: u64,
    pub cases: usize,
    pub violations: Vec<Witness>,
    /// Largest `max_t y - bound` over all runs; at most `1e-6` when every
    /// case holds.
    pub max_slack: f64,
    /// Interval on which `g <= -N1` was scanned.
    pub scan_window: (f64, f64),
}

fn random_instance(rng: &mut impl Rng) -> ZlotnikInstance {
    let horizon = rng.gen_range(1.0..5.0);
    let pieces = rng.gen_range(1..=4usize);
    let mut inner: Vec<f64> = (1..pieces).map(|_| rng.gen_range(0.05..0.95) * horizon).collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup();
    let mut knots = vec![0.0];
    knots.extend(inner);
    knots.push(horizon);
    let slopes = (0..knots.len() - 1).map(|_| rng.gen_range(-1.0..2.0)).collect();
    let jumps = (0..rng.gen_range(0..=3usize))
        .map(|_| (rng.gen_range(0.01..1.0) * horizon, rng.gen_range(0.0..1.0)))
        .collect();
    let g = match rng.gen_range(0..3u8) {
        0 => GFunction::Affine { c0: rng.gen_range(-1.0..1.0), c1: rng.gen_range(0.5..2.0) },
        1 => GFunction::OddPower { c: rng.gen_range(0.2..1.0), k: if rng.gen_bool(0.5) { 3 } else { 5 } },
        _ => GFunction::LogisticDecay { r: rng.gen_range(0.5..2.0), cap: rng.gen_range(0.5..3.0) },
    };
    ZlotnikInstance { g, y0: rng.gen_range(-2.0..3.0), b: Forcing { knots, slopes, jumps }, slack: 0.0 }
}

/// Seeded fuzz of the lemma: each case is run as stated and with a random
/// positive slack subtracted from the right-hand side.
pub fn fuzz_check(seed: u64, cases: usize) -> Result<FuzzReport> {
    let mut rng = seeded(seed);
    let (lo, hi) = FUZZ_BRACKET;
    let mut violations = Vec::new();
    let mut max_slack = f64::NEG_INFINITY;
    for case in 0..cases {
        let inst = random_instance(&mut rng);
        let slack = rng.gen_range(0.0..1.0);
        let zeta = find_zeta_bar(|y| inst.g.eval(y), inst.b.n1(), lo, hi, FUZZ_SCAN)?;
        let bound = zlotnik_bound(inst.y0, zeta, inst.b.n0());
        for run in [inst.clone(), ZlotnikInstance { slack, ..inst }] {
            let series = brute_force_ode(&run, 1e-3)?;
            let max_y = series.max();
            max_slack = max_slack.max(max_y - bound);
            if max_y > bound + ORACLE_TOL {
                violations.push(Witness { case, instance: run, zeta_bar: zeta, bound, max_y, dt: series.dt });
            }
        }
    }
    Ok(FuzzReport {
        seed,
        cases,
        violations,
        max_slack,
        scan_window: (lo, hi + 9.0 * hi.abs().max(1.0)),
    })
}
