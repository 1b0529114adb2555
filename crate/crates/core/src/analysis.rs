//! Error norms, rate certificates, the gradient-equivalence and advantage-norm
//! checks, and metric records.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::BackupMode;
use crate::learners::DuelingLearnerState;
use crate::mdp::TabularMdp;
use crate::sampler::Transition;
use crate::tables::{AdvTable, PolicyTable, QTable};

fn l2_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Unweighted Euclidean norm of `a_hat − a_ref` over all entries.
pub fn adv_error(a_hat: &AdvTable, a_ref: &AdvTable) -> Result<f64> {
    if a_hat.shape() != a_ref.shape() {
        return Err(Error::dims(format!("{:?}", a_ref.shape()), format!("{:?}", a_hat.shape())));
    }
    Ok(l2_dist(a_hat.as_slice(), a_ref.as_slice()))
}

pub fn q_error(q_hat: &QTable, q_ref: &QTable) -> Result<f64> {
    if q_hat.shape() != q_ref.shape() {
        return Err(Error::dims(format!("{:?}", q_ref.shape()), format!("{:?}", q_hat.shape())));
    }
    Ok(l2_dist(q_hat.as_slice(), q_ref.as_slice()))
}

/// `Q − πQ`, the advantage estimate of a Q-function under `π`.
pub fn advantage_of(q: &QTable, pi: &PolicyTable) -> AdvTable {
    AdvTable::from_fn(q.num_states(), q.num_actions(), |x, a| q.get(x, a) - pi.expect(x, q.row(x)))
}

/// Discrepancy at state `x` between the μ-expected value gradient of `L_QL`
/// for a dueling learner and that of `L_VA` at the same `(V, A)`, with the
/// expectation taken exactly over `a ~ μ(·|x)` and `x' ~ P(·|x,a)`.
///
/// With `ν = μ` the two coincide.
pub fn value_gradient_check(mdp: &TabularMdp, state: &DuelingLearnerState, mu: &PolicyTable, mode: BackupMode<'_>, x: usize) -> Result<f64> {
    let (s, na) = (mdp.num_states(), mdp.num_actions());
    if state.f.shape() != (s, na) {
        return Err(Error::dims(format!("learner {s}x{na}"), format!("learner {}x{}", state.f.num_states(), state.f.num_actions())));
    }
    mu.check_shape(s, na)?;
    if x >= s {
        return Err(Error::param(format!("state {x} out of range")));
    }
    if !state.targets_equal_online() {
        return Err(Error::Precondition("target tables must equal the online tables".into()));
    }
    let adv = state.advantage();
    let q = state.implied_q();
    let gamma = mdp.gamma();
    let next_boot: Vec<f64> = (0..s).map(|y| mode.bootstrap(y, q.row(y))).collect();
    let next_mu_adv: Vec<f64> = (0..s).map(|y| mu.expect(y, adv.row(y))).collect();
    let (mut grad_ql, mut grad_va) = (0.0, 0.0);
    for a in 0..na {
        let w = mu.prob(x, a);
        if w == 0.0 {
            continue;
        }
        let p = mdp.next_state_probs(x, a);
        let boot: f64 = p.iter().zip(&next_boot).map(|(p, b)| p * b).sum();
        let mu_adv: f64 = p.iter().zip(&next_mu_adv).map(|(p, b)| p * b).sum();
        let r = mdp.reward(x, a);
        grad_ql += w * (q.get(x, a) - r - gamma * boot);
        grad_va += w * (state.v.get(x) - (r + gamma * boot - gamma * mu_adv));
    }
    Ok((grad_ql - grad_va).abs())
}

/// `Σ_a μ(a|x) (f(x,a) − f(x,ν))²`.
pub fn advantage_norm_objective(f: &QTable, nu: &PolicyTable, mu: &PolicyTable, x: usize) -> f64 {
    let row = f.row(x);
    let center = nu.expect(x, row);
    row.iter().zip(mu.row(x)).map(|(v, m)| m * (v - center) * (v - center)).sum()
}

/// `μ`-variance of `f(x,·)`.
pub fn weighted_variance(f: &QTable, mu: &PolicyTable, x: usize) -> f64 {
    advantage_norm_objective(f, mu, mu, x)
}

/// Mean of `A(x_i,a_i)²` over a transition set.
pub fn sample_advantage_norm<'a>(adv: &AdvTable, transitions: impl IntoIterator<Item = &'a Transition>) -> f64 {
    let (mut total, mut n) = (0.0, 0usize);
    for t in transitions {
        let v = adv.get(t.x, t.a);
        total += v * v;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        total / n as f64
    }
}

/// Outcome of checking a geometric error bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateCertificate {
    pub certified: bool,
    /// `max_t error_t / γ^t`.
    pub fitted_constant: f64,
    /// Smallest slack `C γ^t + 1e-9 − error_t` over the series.
    pub margin: f64,
}

/// Absolute slack allowed on top of the geometric bound.
pub const RATE_SLACK: f64 = 1e-9;

/// Checks `error_t ≤ C γ^t + 1e-9` for every `t`. With `constant = None` the
/// constant is fitted as `max_t error_t / γ^t`.
pub fn rate_certificate(series: &[f64], gamma: f64, constant: Option<f64>) -> Result<RateCertificate> {
    if series.is_empty() {
        return Err(Error::param("empty error series"));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::param(format!("gamma must lie in (0, 1), got {gamma}")));
    }
    let mut fitted: f64 = 0.0;
    let mut pow = 1.0;
    for &e in series {
        fitted = fitted.max(e / pow);
        pow *= gamma;
    }
    let c = constant.unwrap_or(fitted);
    let mut margin = f64::INFINITY;
    let mut pow = 1.0;
    for &e in series {
        margin = margin.min(c * pow + RATE_SLACK - e);
        pow *= gamma;
    }
    Ok(RateCertificate { certified: margin >= 0.0 && series.iter().all(|e| e.is_finite()), fitted_constant: fitted, margin })
}

/// Registered metric names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Mean over states of the value of the greedy policy.
    Performance,
    /// `‖Â − A^π‖₂`.
    AdvError,
    /// `‖Q̂ − Q^π‖₂`.
    QError,
    /// Sample mean of `(f(x,a) − f(x,ν))²` for a dueling learner.
    AdvNormNu,
    /// Sample mean of `(f(x,a) − f(x,μ̂))²` for a dueling learner.
    AdvNormMu,
}

impl Metric {
    pub const ALL: [Metric; 5] = [Metric::Performance, Metric::AdvError, Metric::QError, Metric::AdvNormNu, Metric::AdvNormMu];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Performance => "performance",
            Metric::AdvError => "adv_error",
            Metric::QError => "q_error",
            Metric::AdvNormNu => "adv_norm_nu",
            Metric::AdvNormMu => "adv_norm_mu",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == name)
            .ok_or_else(|| Error::param(format!("unknown metric {name:?}")))
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub run_id: String,
    pub seed: u64,
    pub algorithm: String,
    pub iteration: u64,
    pub metric: Metric,
    pub value: f64,
}

pub const METRIC_CSV_HEADER: [&str; 6] = ["run_id", "seed", "algorithm", "iteration", "metric", "value"];

/// Formats a float with 17 significant digits; non-finite values print as `NaN`, `inf`, `-inf`.
pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

/// Writes records in the given order under the metric CSV header.
pub fn write_metric_csv<W: Write>(records: &[MetricRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(METRIC_CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.run_id.as_str(),
            &r.seed.to_string(),
            r.algorithm.as_str(),
            &r.iteration.to_string(),
            r.metric.name(),
            &format_float(r.value),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a metric CSV, rejecting files without the expected header or with
/// unregistered metric names.
pub fn read_metric_csv<R: std::io::Read>(input: R) -> Result<Vec<MetricRecord>> {
    let mut rd = csv::Reader::from_reader(input);
    let header = rd.headers()?.clone();
    if header.iter().ne(METRIC_CSV_HEADER) {
        return Err(Error::param(format!("unexpected metric header {:?}", header.iter().collect::<Vec<_>>())));
    }
    let mut out = Vec::new();
    for row in rd.records() {
        let row = row?;
        let parse_err = |field: &str| Error::param(format!("bad {field} in row {:?}", row.iter().collect::<Vec<_>>()));
        out.push(MetricRecord {
            run_id: row[0].to_string(),
            seed: row[1].parse().map_err(|_| parse_err("seed"))?,
            algorithm: row[2].to_string(),
            iteration: row[3].parse().map_err(|_| parse_err("iteration"))?,
            metric: Metric::from_name(&row[4])?,
            value: row[5].parse().map_err(|_| parse_err("value"))?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{generate_random_mdp, RewardSpec};
    use crate::rng::Rng;
    use crate::tables::ValueTable;

    #[test]
    fn norms() {
        let a = AdvTable::zeros(2, 2);
        let b = AdvTable::filled(2, 2, 1.0);
        assert_eq!(adv_error(&a, &a).unwrap(), 0.0);
        assert_eq!(adv_error(&a, &b).unwrap(), 2.0);
        assert_eq!(q_error(&QTable::filled(2, 2, 1.0), &QTable::zeros(2, 2)).unwrap(), 2.0);
        assert!(adv_error(&a, &AdvTable::zeros(2, 3)).is_err());
        assert!(q_error(&QTable::zeros(3, 2), &QTable::zeros(2, 2)).is_err());
    }

    #[test]
    fn norms_match_loop() {
        let mut rng = Rng::new(1);
        let x = QTable::from_fn(4, 3, |_, _| rng.standard_normal());
        let y = QTable::from_fn(4, 3, |_, _| rng.standard_normal());
        let mut acc = 0.0;
        for s in 0..4 {
            for a in 0..3 {
                acc += (x.get(s, a) - y.get(s, a)).powi(2);
            }
        }
        assert!((q_error(&x, &y).unwrap() - acc.sqrt()).abs() < 1e-12);
        let (ax, ay) = (x.clone().into_adv(), y.clone().into_adv());
        assert!((adv_error(&ax, &ay).unwrap() - acc.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn advantage_of_is_zero_under_pi() {
        let mut rng = Rng::new(2);
        let q = QTable::from_fn(3, 4, |_, _| rng.uniform());
        let pi = PolicyTable::from_rows(&(0..3).map(|_| rng.dirichlet(1.0, 4).unwrap()).collect::<Vec<_>>()).unwrap();
        let adv = advantage_of(&q, &pi);
        for x in 0..3 {
            assert!(pi.expect(x, adv.row(x)).abs() < 1e-14);
        }
    }

    fn dueling_state(rng: &mut Rng, s: usize, a: usize, nu: PolicyTable) -> DuelingLearnerState {
        DuelingLearnerState::from_tables(
            ValueTable::from_fn(s, |_| rng.uniform_range(-2.0, 2.0)),
            QTable::from_fn(s, a, |_, _| rng.uniform_range(-2.0, 2.0)),
            nu,
        )
    }

    #[test]
    fn value_gradient_zero_advantage_and_behavior_dueling() {
        let mut rng = Rng::new(3);
        let mdp = generate_random_mdp(3, 3, 0.9, 0.5, RewardSpec::default(), &mut rng).unwrap();
        let mu = PolicyTable::from_rows(&(0..3).map(|_| rng.dirichlet(1.0, 3).unwrap()).collect::<Vec<_>>()).unwrap();
        let zero_f = DuelingLearnerState::from_tables(ValueTable::from_fn(3, |_| rng.uniform()), QTable::zeros(3, 3), mu.clone());
        for x in 0..3 {
            assert_eq!(value_gradient_check(&mdp, &zero_f, &mu, BackupMode::Control, x).unwrap(), 0.0);
        }
        for _ in 0..20 {
            let st = dueling_state(&mut rng, 3, 3, mu.clone());
            for x in 0..3 {
                assert!(value_gradient_check(&mdp, &st, &mu, BackupMode::Control, x).unwrap() <= 1e-10);
                assert!(value_gradient_check(&mdp, &st, &mu, BackupMode::Evaluation(&mu), x).unwrap() <= 1e-10);
            }
        }
    }

    #[test]
    fn value_gradient_detects_mismatched_centering() {
        let mut rng = Rng::new(4);
        let mdp = generate_random_mdp(3, 3, 0.9, 0.5, RewardSpec::default(), &mut rng).unwrap();
        let mu = PolicyTable::from_rows(&[vec![0.7, 0.2, 0.1], vec![0.1, 0.1, 0.8], vec![0.3, 0.3, 0.4]]).unwrap();
        let st = dueling_state(&mut rng, 3, 3, PolicyTable::uniform(3, 3));
        let worst = (0..3).map(|x| value_gradient_check(&mdp, &st, &mu, BackupMode::Control, x).unwrap()).fold(0.0, f64::max);
        assert!(worst > 1e-3, "{worst}");
    }

    #[test]
    fn value_gradient_requires_synced_targets() {
        let mut rng = Rng::new(5);
        let mdp = generate_random_mdp(3, 2, 0.9, 0.5, RewardSpec::default(), &mut rng).unwrap();
        let mu = PolicyTable::uniform(3, 2);
        let mut st = dueling_state(&mut rng, 3, 2, mu.clone());
        st.v.add(0, 1.0);
        assert!(matches!(value_gradient_check(&mdp, &st, &mu, BackupMode::Control, 0), Err(Error::Precondition(_))));
    }

    #[test]
    fn advantage_norm_objective_cases() {
        let mut rng = Rng::new(6);
        let constant = QTable::filled(2, 3, 4.0);
        let mu = PolicyTable::from_rows(&[vec![0.2, 0.3, 0.5], vec![0.6, 0.2, 0.2]]).unwrap();
        let nu = PolicyTable::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.1, 0.1, 0.8]]).unwrap();
        assert_eq!(advantage_norm_objective(&constant, &nu, &mu, 0), 0.0);
        let f = QTable::from_fn(2, 3, |_, _| rng.standard_normal());
        for x in 0..2 {
            let row = f.row(x);
            let m: f64 = row.iter().zip(mu.row(x)).map(|(v, p)| v * p).sum();
            let var: f64 = row.iter().zip(mu.row(x)).map(|(v, p)| p * (v - m).powi(2)).sum();
            assert!((weighted_variance(&f, &mu, x) - var).abs() < 1e-12);
            assert!(weighted_variance(&f, &mu, x) <= advantage_norm_objective(&f, &nu, &mu, x) + 1e-12);
        }
    }

    #[test]
    fn sample_norm() {
        let adv = AdvTable::from_rows(&[vec![1.0, -2.0], vec![0.5, 3.0]]).unwrap();
        let ts = [Transition { x: 0, a: 1, r: 0.0, x_next: 1 }, Transition { x: 1, a: 0, r: 0.0, x_next: 0 }];
        assert_eq!(sample_advantage_norm(&adv, &ts), (4.0 + 0.25) / 2.0);
        assert_eq!(sample_advantage_norm(&adv, &[]), 0.0);
    }

    #[test]
    fn rate_certificates() {
        let zero = rate_certificate(&[0.0; 10], 0.9, None).unwrap();
        assert!(zero.certified);
        assert_eq!(zero.fitted_constant, 0.0);
        let series: Vec<f64> = (0..50).map(|t| 3.0 * 0.9f64.powi(t)).collect();
        let c = rate_certificate(&series, 0.9, None).unwrap();
        assert!(c.certified);
        assert!((c.fitted_constant - 3.0).abs() < 1e-12);
        assert!(rate_certificate(&series, 0.9, Some(3.0)).unwrap().certified);
        assert!(!rate_certificate(&series, 0.9, Some(2.9)).unwrap().certified);
        assert!(!rate_certificate(&series, 0.8, Some(3.0)).unwrap().certified);
        assert!(rate_certificate(&[], 0.9, None).is_err());
        assert!(rate_certificate(&[1.0], 1.0, None).is_err());
    }

    #[test]
    fn metric_registry_round_trip() {
        for m in Metric::ALL {
            assert_eq!(Metric::from_name(m.name()).unwrap(), m);
        }
        assert!(Metric::from_name("reward").is_err());
    }

    #[test]
    fn metric_csv_round_trip() {
        let recs = vec![
            MetricRecord { run_id: "r".into(), seed: 3, algorithm: "va_learning".into(), iteration: 0, metric: Metric::AdvError, value: 0.1 },
            MetricRecord { run_id: "r".into(), seed: 3, algorithm: "q_learning".into(), iteration: 10, metric: Metric::Performance, value: f64::NAN },
        ];
        let mut buf = Vec::new();
        write_metric_csv(&recs, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("run_id,seed,algorithm,iteration,metric,value\n"));
        assert!(text.contains("r,3,va_learning,0,adv_error,1.0000000000000001e-1\n"));
        let back = read_metric_csv(buf.as_slice()).unwrap();
        assert_eq!(back[0], recs[0]);
        assert!(back[1].value.is_nan());
        assert!(read_metric_csv("a,b\n1,2\n".as_bytes()).is_err());
        assert!(read_metric_csv("run_id,seed,algorithm,iteration,metric,value\nr,1,q,0,bogus,1\n".as_bytes()).is_err());
    }
}
