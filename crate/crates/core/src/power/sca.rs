//! Sum-rate power control for interfering TBS links by successive convex
//! approximation.
//!
//! Each link rate splits into a concave part `B log2(S_k(p))` and the
//! subtracted concave part `B log2(I_k(p) + N0 B)`. The latter is replaced by
//! its first-order expansion at the current point, which upper-bounds it, so
//! the surrogate is a concave lower bound of the sum-rate that is tight at
//! the expansion point. The surrogate is maximized by projected gradient
//! ascent with Barzilai-Borwein steps and Armijo backtracking.

use std::f64::consts::LN_2;
use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};

/// Lower bound of `-B log2(sum_j h_j p_j + N0 B)` expanded at `p_r`:
/// `-B log2(psi) - sum_j B h_j (p_j - p_r_j) / (ln 2 psi)` with
/// `psi = sum_j h_j p_r_j + N0 B`.
pub fn taylor_bound(bandwidth: f64, noise_psd: f64, h: &[f64], p: &[f64], p_r: &[f64]) -> Result<f64> {
    let psi: f64 = h.iter().zip(p_r).map(|(h, p)| h * p).sum::<f64>() + noise_psd * bandwidth;
    if !(psi > 0.0) {
        return Err(Error::NonPositivePsi(psi));
    }
    let linear: f64 = h
        .iter()
        .zip(p.iter().zip(p_r))
        .map(|(h, (p, pr))| bandwidth * h * (p - pr) / (LN_2 * psi))
        .sum();
    Ok(-bandwidth * psi.log2() - linear)
}

/// Power-coupled TBS links: one entry per (TBS, user, RB) link.
#[derive(Debug, Clone, PartialEq)]
pub struct TbsProblem {
    tbs_of: Vec<usize>,
    direct: Vec<f64>,
    /// Co-channel interferers of each link: `(j, gain from j's TBS to k's user)`.
    co: Vec<Vec<(usize, f64)>>,
    per_tbs: Vec<Vec<usize>>,
    budget: f64,
    bandwidth: f64,
    noise: f64,
}

impl TbsProblem {
    /// `gain(j, k)` is the gain from link `j`'s transmitter to link `k`'s user
    /// on link `k`'s RB. Links on the same RB at different TBSs interfere.
    pub fn new(
        tbs_of: Vec<usize>,
        rb_of: Vec<usize>,
        gain: impl Fn(usize, usize) -> f64,
        budget: f64,
        bandwidth: f64,
        noise_psd: f64,
    ) -> Self {
        let n = tbs_of.len();
        let direct = (0..n).map(|k| gain(k, k)).collect();
        let co = (0..n)
            .map(|k| {
                (0..n)
                    .filter(|&j| j != k && rb_of[j] == rb_of[k] && tbs_of[j] != tbs_of[k])
                    .map(|j| (j, gain(j, k)))
                    .collect()
            })
            .collect();
        let stations = tbs_of.iter().copied().max().map_or(0, |m| m + 1);
        let mut per_tbs = vec![Vec::new(); stations];
        for (k, &m) in tbs_of.iter().enumerate() {
            per_tbs[m].push(k);
        }
        Self {
            tbs_of,
            direct,
            co,
            per_tbs,
            budget,
            bandwidth,
            noise: noise_psd * bandwidth,
        }
    }

    pub fn len(&self) -> usize {
        self.direct.len()
    }

    pub fn is_empty(&self) -> bool {
        self.direct.is_empty()
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn tbs_of(&self, k: usize) -> usize {
        self.tbs_of[k]
    }

    pub fn links_of(&self, tbs: usize) -> &[usize] {
        &self.per_tbs[tbs]
    }

    pub fn is_coupled(&self) -> bool {
        self.co.iter().any(|c| !c.is_empty())
    }

    fn interference(&self, k: usize, p: &[f64]) -> f64 {
        self.co[k].iter().map(|&(j, h)| p[j] * h).sum()
    }

    pub fn rate(&self, k: usize, p: &[f64]) -> f64 {
        let i = self.interference(k, p);
        self.bandwidth * (1.0 + p[k] * self.direct[k] / (i + self.noise)).log2()
    }

    /// True sum-rate.
    pub fn objective(&self, p: &[f64]) -> f64 {
        (0..self.len()).map(|k| self.rate(k, p)).sum()
    }

    /// Interference-plus-noise of every link at `p`.
    pub fn psi(&self, p: &[f64]) -> Vec<f64> {
        (0..self.len()).map(|k| self.interference(k, p) + self.noise).collect()
    }

    fn surrogate(&self, p: &[f64], p_r: &[f64], psi: &[f64]) -> f64 {
        (0..self.len())
            .map(|k| {
                let i = self.interference(k, p);
                let s = p[k] * self.direct[k] + i + self.noise;
                let lin: f64 = self.co[k].iter().map(|&(j, h)| h * (p[j] - p_r[j])).sum();
                self.bandwidth * (s.log2() - psi[k].log2() - lin / (LN_2 * psi[k]))
            })
            .sum()
    }

    fn surrogate_grad(&self, p: &[f64], psi: &[f64], g: &mut [f64]) {
        g.iter_mut().for_each(|x| *x = 0.0);
        let c = self.bandwidth / LN_2;
        for k in 0..self.len() {
            let s = p[k] * self.direct[k] + self.interference(k, p) + self.noise;
            g[k] += c * self.direct[k] / s;
            for &(j, h) in &self.co[k] {
                g[j] += c * h / s - c * h / psi[k];
            }
        }
    }

    /// Euclidean projection onto `{p >= 0, sum over each TBS <= budget}`.
    pub fn project(&self, p: &mut [f64]) {
        for links in &self.per_tbs {
            let mut v: Vec<f64> = links.iter().map(|&k| p[k].max(0.0)).collect();
            project_capped_simplex(&mut v, self.budget);
            for (&k, x) in links.iter().zip(v) {
                p[k] = x;
            }
        }
    }

    /// Uniform start: `budget / rb_count` on every link.
    pub fn uniform_start(&self, rb_count: usize) -> Vec<f64> {
        vec![self.budget / rb_count.max(1) as f64; self.len()]
    }

    /// Greedy start: on each RB only the link with the strongest direct gain
    /// transmits; each TBS waterfills over its surviving links.
    pub fn greedy_start(&self) -> Vec<f64> {
        let n = self.len();
        let mut on = vec![true; n];
        for k in 0..n {
            for &(j, _) in &self.co[k] {
                let stronger = self.direct[j] > self.direct[k] || (self.direct[j] == self.direct[k] && j < k);
                if stronger {
                    on[k] = false;
                }
            }
        }
        let mut p = vec![0.0; n];
        for links in &self.per_tbs {
            let active: Vec<usize> = links.iter().copied().filter(|&k| on[k]).collect();
            let a: Vec<f64> = active.iter().map(|&k| self.direct[k] / self.noise).collect();
            let q = super::waterfill::waterfill_uncapped(&a, self.budget);
            for (&k, x) in active.iter().zip(q) {
                p[k] = x;
            }
        }
        p
    }

    /// Exact optimum when no two links interfere: waterfilling per TBS.
    pub fn waterfill_uncoupled(&self) -> Vec<f64> {
        let mut p = vec![0.0; self.len()];
        for links in &self.per_tbs {
            let a: Vec<f64> = links.iter().map(|&k| self.direct[k] / self.noise).collect();
            let q = super::waterfill::waterfill_uncapped(&a, self.budget);
            for (&k, x) in links.iter().zip(q) {
                p[k] = x;
            }
        }
        p
    }
}

/// Projection onto `{x >= 0, sum x <= budget}` for a nonnegative vector.
pub fn project_capped_simplex(v: &mut [f64], budget: f64) {
    for x in v.iter_mut() {
        *x = x.max(0.0);
    }
    let total: f64 = v.iter().sum();
    if total <= budget {
        return;
    }
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        cum += x;
        let t = (cum - budget) / (i + 1) as f64;
        if i + 1 == sorted.len() || sorted[i + 1] <= t {
            theta = t;
            break;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
    // Guard against round-off pushing the sum above the budget.
    let s: f64 = v.iter().sum();
    if s > budget {
        let scale = budget / s;
        v.iter_mut().for_each(|x| *x *= scale);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScaRecord {
    pub iteration: usize,
    /// Surrogate value at the iterate (built at the previous point).
    pub surrogate: f64,
    /// True sum-rate at the iterate.
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaState {
    pub iteration: usize,
    /// Current expansion point.
    pub expansion: Vec<f64>,
    /// Interference-plus-noise at the expansion point.
    pub psi: Vec<f64>,
    pub history: Vec<ScaRecord>,
    pub converged: bool,
}

impl ScaState {
    pub fn objective(&self) -> f64 {
        self.history.last().map_or(0.0, |r| r.objective)
    }

    /// `iteration,surrogate,objective` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iteration", "surrogate", "objective"])?;
        for r in &self.history {
            w.write_record([
                r.iteration.to_string(),
                format!("{:e}", r.surrogate),
                format!("{:e}", r.objective),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub inner_max_steps: usize,
}

impl Default for ScaConfig {
    fn default() -> Self {
        Self { tol: 1e-6, max_iter: 50, inner_max_steps: 500 }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Maximizes the surrogate built at `p_r`, starting from `p_r`.
fn maximize_surrogate(problem: &TbsProblem, p_r: &[f64], psi: &[f64], max_steps: usize) -> (Vec<f64>, f64) {
    let n = problem.len();
    let mut p = p_r.to_vec();
    let mut f = problem.surrogate(&p, p_r, psi);
    let mut g = vec![0.0; n];
    problem.surrogate_grad(&p, psi, &mut g);
    let gmax = g.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    if gmax == 0.0 {
        return (p, f);
    }
    let mut step = problem.budget / gmax;
    let mut q = vec![0.0; n];
    let mut gq = vec![0.0; n];
    for _ in 0..max_steps {
        let mut accepted = false;
        for _ in 0..60 {
            for k in 0..n {
                q[k] = p[k] + step * g[k];
            }
            problem.project(&mut q);
            let fq = problem.surrogate(&q, p_r, psi);
            let d: Vec<f64> = q.iter().zip(&p).map(|(a, b)| a - b).collect();
            if fq >= f + 1e-4 * dot(&g, &d) && fq >= f {
                accepted = true;
                problem.surrogate_grad(&q, psi, &mut gq);
                let y: Vec<f64> = gq.iter().zip(&g).map(|(a, b)| a - b).collect();
                let sy = dot(&d, &y);
                let ss = dot(&d, &d);
                let rel = (fq - f).abs() / f.abs().max(1e-300);
                std::mem::swap(&mut p, &mut q);
                std::mem::swap(&mut g, &mut gq);
                f = fq;
                if ss == 0.0 || rel < 1e-13 {
                    return (p, f);
                }
                step = if sy < 0.0 { (ss / -sy).clamp(1e-30, 1e30) } else { step * 2.0 };
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (p, f)
}

/// Pushes further along `q - p` while the true objective keeps rising.
fn extrapolate(problem: &TbsProblem, p: &[f64], q: Vec<f64>) -> (Vec<f64>, f64) {
    let mut best_obj = problem.objective(&q);
    let mut best = q.clone();
    let mut c = vec![0.0; q.len()];
    let mut t = 2.0;
    while t <= 1048576.0 {
        for k in 0..q.len() {
            c[k] = p[k] + t * (q[k] - p[k]);
        }
        problem.project(&mut c);
        let obj = problem.objective(&c);
        if !(obj > best_obj) {
            break;
        }
        best_obj = obj;
        best.copy_from_slice(&c);
        t *= 2.0;
    }
    (best, best_obj)
}

/// One SCA run from `init` (projected onto the feasible set first).
pub fn sca_msu(problem: &TbsProblem, init: &[f64], cfg: &ScaConfig) -> ScaState {
    let mut p = init.to_vec();
    problem.project(&mut p);
    let mut obj = problem.objective(&p);
    let mut history = vec![ScaRecord { iteration: 0, surrogate: obj, objective: obj }];
    let mut converged = false;
    let mut iteration = 0;
    for r in 1..=cfg.max_iter {
        let psi = problem.psi(&p);
        let (q, surrogate) = maximize_surrogate(problem, &p, &psi, cfg.inner_max_steps);
        let (q, obj_q) = extrapolate(problem, &p, q);
        if !(obj_q >= obj) {
            converged = true;
            break;
        }
        let improvement = (obj_q - obj) / obj.abs().max(1e-300);
        p = q;
        obj = obj_q;
        iteration = r;
        history.push(ScaRecord { iteration: r, surrogate, objective: obj });
        if improvement < cfg.tol {
            converged = true;
            break;
        }
    }
    let psi = problem.psi(&p);
    ScaState { iteration, expansion: p, psi, history, converged }
}

/// Sum-rate power control of the TBS tier. Uncoupled problems are solved
/// exactly; coupled ones run SCA from the uniform and the greedy start and
/// keep the better result.
pub fn solve_tbs_msu(problem: &TbsProblem, rb_count: usize, cfg: &ScaConfig) -> (Vec<f64>, Option<ScaState>) {
    if problem.is_empty() {
        return (Vec::new(), None);
    }
    if !problem.is_coupled() {
        return (problem.waterfill_uncoupled(), None);
    }
    let a = sca_msu(problem, &problem.uniform_start(rb_count), cfg);
    let b = sca_msu(problem, &problem.greedy_start(), cfg);
    let best = if b.objective() > a.objective() { b } else { a };
    (best.expansion.clone(), Some(best))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    const N0: f64 = 4e-21;

    fn exact_neg_log(b: f64, h: &[f64], p: &[f64]) -> f64 {
        -b * (h.iter().zip(p).map(|(h, p)| h * p).sum::<f64>() + N0 * b).log2()
    }

    #[test]
    fn taylor_tight_at_expansion() {
        let h = [1e-12, 3e-13];
        let pr = [0.4, 0.1];
        let v = taylor_bound(1e6, N0, &h, &pr, &pr).unwrap();
        assert!((v - exact_neg_log(1e6, &h, &pr)).abs() < 1e-9 * v.abs());
    }

    #[test]
    fn taylor_constant_without_interferers() {
        let v = taylor_bound(1e6, N0, &[0.0, 0.0], &[3.0, 1.0], &[0.1, 0.2]).unwrap();
        assert_eq!(v, -1e6 * (N0 * 1e6).log2());
    }

    #[test]
    fn taylor_rejects_non_positive_psi() {
        assert!(matches!(taylor_bound(1e6, 0.0, &[0.0], &[1.0], &[1.0]), Err(Error::NonPositivePsi(_))));
    }

    #[test]
    fn taylor_is_global_lower_bound() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            let n = rng.random_range(1..5);
            let b = 10f64.powf(rng.random_range(3.0..7.0));
            let h: Vec<f64> = (0..n).map(|_| 10f64.powf(rng.random_range(-16.0..-9.0))).collect();
            let p: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..10.0)).collect();
            let pr: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..10.0)).collect();
            let bound = taylor_bound(b, N0, &h, &p, &pr).unwrap();
            let exact = exact_neg_log(b, &h, &p);
            assert!(bound <= exact + 1e-9 * exact.abs().max(1.0), "{bound} > {exact}");
        }
    }

    #[test]
    fn capped_simplex_projection() {
        let mut v = vec![3.0, 1.0, -1.0];
        project_capped_simplex(&mut v, 2.0);
        assert_eq!(v, vec![2.0, 0.0, 0.0]);
        let mut v = vec![0.5, 0.5];
        project_capped_simplex(&mut v, 2.0);
        assert_eq!(v, vec![0.5, 0.5]);
        let mut v = vec![2.0, 2.0];
        project_capped_simplex(&mut v, 2.0);
        assert_eq!(v, vec![1.0, 1.0]);
    }

    fn random_problem(rng: &mut impl Rng) -> TbsProblem {
        let tbs = rng.random_range(2..4);
        let rbs = rng.random_range(1..4);
        let mut tbs_of = Vec::new();
        let mut rb_of = Vec::new();
        for m in 0..tbs {
            for n in 0..rbs {
                if rng.random_bool(0.8) {
                    tbs_of.push(m);
                    rb_of.push(n);
                }
            }
        }
        let k = tbs_of.len();
        let g: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..k).map(|_| 10f64.powf(rng.random_range(-13.0..-10.0))).collect())
            .collect();
        TbsProblem::new(tbs_of, rb_of, |j, k| g[j][k], 1.0, 180e3, N0)
    }

    #[test]
    fn sca_history_is_monotone() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let p = random_problem(&mut rng);
            let s = sca_msu(&p, &p.uniform_start(3), &ScaConfig::default());
            for w in s.history.windows(2) {
                assert!(w[1].objective >= w[0].objective);
            }
        }
    }
}
