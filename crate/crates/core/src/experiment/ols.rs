use std::collections::{BTreeMap, BTreeSet, HashMap};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::{ExperimentError, Outcome, RegressionSpec, SurveyResponse};

pub const INTERCEPT_TERM: &str = "(intercept)";
pub const TREATED_TERM: &str = "treated";
pub const NON_COLLEGE_TERM: &str = "non_college";
pub const INTERACTION_TERM: &str = "treated:non_college";

// Relative residual norm below which an equilibrated column counts as
// linearly dependent on the columns before it.
const RANK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermEstimate {
    pub term: String,
    pub coef: f64,
    pub se: f64,
    pub t: f64,
    pub p: f64,
}

impl TermEstimate {
    fn new(term: String, coef: f64, se: f64, df: usize) -> Self {
        let (t, p) = t_test(coef, se, df);
        TermEstimate { term, coef, se, t, p }
    }
}

fn t_test(coef: f64, se: f64, df: usize) -> (f64, f64) {
    if se > 0.0 && se.is_finite() {
        let t = coef / se;
        let dist = StudentsT::new(0.0, 1.0, df as f64).expect("df >= 1");
        (t, (2.0 * dist.sf(t.abs())).min(1.0))
    } else if coef == 0.0 {
        (f64::NAN, 1.0)
    } else {
        (f64::INFINITY.copysign(coef), 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub outcome: Outcome,
    /// Terms in design-matrix column order.
    pub terms: Vec<TermEstimate>,
    /// CR1 covariance, rows and columns in `terms` order.
    pub covariance: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub n_obs: usize,
    pub n_clusters: usize,
    pub n_params: usize,
    /// Degrees of freedom of the t reference distribution (clusters - 1).
    pub df: usize,
}

impl RegressionResult {
    /// Wraps a published coefficient/SE pair for the treatment term so it can
    /// be rendered with the same inference rules as a fitted model.
    pub fn from_published(
        outcome: Outcome,
        coef: f64,
        se: f64,
        n_obs: usize,
        n_clusters: usize,
    ) -> Self {
        let df = n_clusters.saturating_sub(1).max(1);
        RegressionResult {
            outcome,
            terms: vec![TermEstimate::new(TREATED_TERM.into(), coef, se, df)],
            covariance: vec![vec![se * se]],
            residuals: Vec::new(),
            n_obs,
            n_clusters,
            n_params: 1,
            df,
        }
    }

    pub fn term(&self, name: &str) -> Option<&TermEstimate> {
        self.terms.iter().find(|t| t.term == name)
    }

    pub fn coefficients(&self) -> BTreeMap<String, f64> {
        self.terms.iter().map(|t| (t.term.clone(), t.coef)).collect()
    }

    pub fn cluster_robust_se(&self) -> BTreeMap<String, f64> {
        self.terms.iter().map(|t| (t.term.clone(), t.se)).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serializes")
    }
}

/// Coefficients and SEs for the non-absorbed terms of a within-transformed fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WithinEstimate {
    pub terms: Vec<TermEstimate>,
    pub residuals: Vec<f64>,
    pub n_obs: usize,
    pub n_clusters: usize,
    /// Parameters counted for the CR1 factor, absorbed intercepts included.
    pub n_params: usize,
}

impl WithinEstimate {
    pub fn term(&self, name: &str) -> Option<&TermEstimate> {
        self.terms.iter().find(|t| t.term == name)
    }
}

struct Design {
    x: DMatrix<f64>,
    y: DVector<f64>,
    names: Vec<String>,
    clusters: Vec<usize>,
    n_clusters: usize,
}

fn cluster_ids(data: &[SurveyResponse], spec: &RegressionSpec) -> (Vec<usize>, usize) {
    let mut index: HashMap<&str, usize> = HashMap::new();
    let ids = data
        .iter()
        .map(|r| {
            let n = index.len();
            *index.entry(spec.cluster_by.key(r)).or_insert(n)
        })
        .collect();
    (ids, index.len())
}

/// Regressors other than intercepts: treated, then covariate and interaction.
fn slope_columns(data: &[SurveyResponse], spec: &RegressionSpec) -> Vec<(String, Vec<f64>)> {
    let treated: Vec<f64> = data.iter().map(|r| r.treated as f64).collect();
    let mut cols = vec![(TREATED_TERM.to_string(), treated.clone())];
    if let Some(cov) = spec.interaction_with {
        let c: Vec<f64> = data.iter().map(|r| cov.value(r)).collect();
        let inter = treated.iter().zip(&c).map(|(t, c)| t * c).collect();
        cols.push((cov.field().to_string(), c));
        cols.push((format!("{TREATED_TERM}:{}", cov.field()), inter));
    }
    cols
}

fn check_clusters(data: &[SurveyResponse], spec: &RegressionSpec) -> Result<(Vec<usize>, usize), ExperimentError> {
    let (clusters, g) = cluster_ids(data, spec);
    if g < 2 {
        return Err(ExperimentError::TooFewClusters(g));
    }
    Ok((clusters, g))
}

fn build_design(data: &[SurveyResponse], spec: &RegressionSpec) -> Result<Design, ExperimentError> {
    let (clusters, n_clusters) = check_clusters(data, spec)?;
    let n = data.len();
    let mut cols: Vec<(String, Vec<f64>)> = vec![(INTERCEPT_TERM.into(), vec![1.0; n])];
    cols.extend(slope_columns(data, spec));
    if spec.include_case_fixed_effects {
        let cases: BTreeSet<&str> = data.iter().map(|r| r.case_id.as_str()).collect();
        for case in cases.into_iter().skip(1) {
            let col = data.iter().map(|r| (r.case_id == case) as u8 as f64).collect();
            cols.push((format!("case[{case}]"), col));
        }
    }
    let k = cols.len();
    let x = DMatrix::from_fn(n, k, |i, j| cols[j].1[i]);
    let y = DVector::from_iterator(n, data.iter().map(|r| spec.outcome.value(r)));
    Ok(Design {
        x,
        y,
        names: cols.into_iter().map(|c| c.0).collect(),
        clusters,
        n_clusters,
    })
}

/// Divides each column by its Euclidean norm. Zero columns keep scale 1.
fn equilibrate(x: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let scales: Vec<f64> = x
        .column_iter()
        .map(|c| {
            let n = c.norm();
            if n > 0.0 {
                n
            } else {
                1.0
            }
        })
        .collect();
    let mut xs = x.clone();
    for (j, s) in scales.iter().enumerate() {
        xs.column_mut(j).unscale_mut(*s);
    }
    (xs, scales)
}

/// Names every column that is numerically a combination of earlier ones.
fn dependent_columns(xs: &DMatrix<f64>, names: &[String]) -> Vec<String> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut dependent = Vec::new();
    for (j, col) in xs.column_iter().enumerate() {
        let norm0 = col.norm();
        let mut v = col.clone_owned();
        // two passes of Gram-Schmidt for stability
        for _ in 0..2 {
            for q in &basis {
                let d = q.dot(&v);
                v.axpy(-d, q, 1.0);
            }
        }
        let r = v.norm();
        if norm0 == 0.0 || r <= RANK_TOL * norm0 {
            dependent.push(names[j].clone());
        } else {
            basis.push(v / r);
        }
    }
    dependent
}

struct Fit {
    beta: DVector<f64>,
    bread: DMatrix<f64>,
    residuals: DVector<f64>,
}

/// Least squares through a Householder QR of the column-equilibrated design.
fn qr_fit(x: &DMatrix<f64>, y: &DVector<f64>, names: &[String]) -> Result<Fit, ExperimentError> {
    let (xs, scales) = equilibrate(x);
    let dependent = dependent_columns(&xs, names);
    if !dependent.is_empty() {
        return Err(ExperimentError::RankDeficient(dependent));
    }
    let k = xs.ncols();
    let qr = xs.qr();
    let r = qr.r();
    let qty = qr.q().transpose() * y;
    let rank_err = || ExperimentError::RankDeficient(names.to_vec());
    let beta_s = r.solve_upper_triangular(&qty).ok_or_else(rank_err)?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or_else(rank_err)?;
    let d_inv = DVector::from_iterator(k, scales.iter().map(|s| 1.0 / s));
    let beta = beta_s.component_mul(&d_inv);
    // (X'X)^-1 = D^-1 R^-1 R^-T D^-1
    let mut bread = &r_inv * r_inv.transpose();
    for i in 0..k {
        for j in 0..k {
            bread[(i, j)] *= d_inv[i] * d_inv[j];
        }
    }
    let residuals = y - x * &beta;
    Ok(Fit {
        beta,
        bread,
        residuals,
    })
}

/// CR1 sandwich: c * B (sum_g X_g'u_g u_g'X_g) B with
/// c = G/(G-1) * (N-1)/(N-K).
fn cr1_covariance(
    x: &DMatrix<f64>,
    u: &DVector<f64>,
    bread: &DMatrix<f64>,
    clusters: &[usize],
    n_clusters: usize,
    n_params: usize,
) -> Result<DMatrix<f64>, ExperimentError> {
    let n = x.nrows();
    if n <= n_params {
        return Err(ExperimentError::InvalidParameter {
            name: "n_obs".into(),
            detail: format!("{n} observations cannot identify {n_params} parameters with residual variation"),
        });
    }
    let k = x.ncols();
    let mut scores = DMatrix::<f64>::zeros(n_clusters, k);
    for (i, &g) in clusters.iter().enumerate() {
        let ui = u[i];
        for j in 0..k {
            scores[(g, j)] += x[(i, j)] * ui;
        }
    }
    let meat = scores.transpose() * &scores;
    let g = n_clusters as f64;
    let c = g / (g - 1.0) * (n as f64 - 1.0) / (n as f64 - n_params as f64);
    let mut v = bread * meat * bread;
    v *= c;
    // symmetrize away rounding noise
    let vt = v.transpose();
    Ok((v + vt) * 0.5)
}

/// OLS of the outcome on treatment (plus covariate and interaction when the
/// spec asks for them) with case dummies and CR1 cluster-robust errors.
pub fn estimate_treatment_effect(
    data: &[SurveyResponse],
    spec: &RegressionSpec,
) -> Result<RegressionResult, ExperimentError> {
    let d = build_design(data, spec)?;
    let fit = qr_fit(&d.x, &d.y, &d.names)?;
    let k = d.names.len();
    let cov = cr1_covariance(&d.x, &fit.residuals, &fit.bread, &d.clusters, d.n_clusters, k)?;
    let df = d.n_clusters - 1;
    let terms = d
        .names
        .into_iter()
        .enumerate()
        .map(|(j, name)| TermEstimate::new(name, fit.beta[j], cov[(j, j)].max(0.0).sqrt(), df))
        .collect();
    Ok(RegressionResult {
        outcome: spec.outcome,
        terms,
        covariance: cov.row_iter().map(|r| r.iter().copied().collect()).collect(),
        residuals: fit.residuals.iter().copied().collect(),
        n_obs: data.len(),
        n_clusters: d.n_clusters,
        n_params: k,
        df,
    })
}

/// Treatment x non-college model. Uses the spec's covariate when set and
/// non-college otherwise.
pub fn estimate_interaction(
    data: &[SurveyResponse],
    spec: &RegressionSpec,
) -> Result<RegressionResult, ExperimentError> {
    let spec = RegressionSpec {
        interaction_with: Some(spec.interaction_with.unwrap_or(super::Covariate::NonCollege)),
        ..*spec
    };
    estimate_treatment_effect(data, &spec)
}

/// Demeans outcome and slope regressors within each case (or globally
/// without fixed effects) and fits OLS without intercepts.
pub fn within_transform_estimate(
    data: &[SurveyResponse],
    spec: &RegressionSpec,
) -> Result<WithinEstimate, ExperimentError> {
    let (clusters, n_clusters) = check_clusters(data, spec)?;
    let n = data.len();
    let mut groups: HashMap<&str, usize> = HashMap::new();
    let group: Vec<usize> = data
        .iter()
        .map(|r| {
            let key = if spec.include_case_fixed_effects {
                r.case_id.as_str()
            } else {
                ""
            };
            let next = groups.len();
            *groups.entry(key).or_insert(next)
        })
        .collect();
    let n_groups = groups.len();

    let demean = |v: &[f64]| -> Vec<f64> {
        let mut sum = vec![0.0; n_groups];
        let mut count = vec![0usize; n_groups];
        for (i, &g) in group.iter().enumerate() {
            sum[g] += v[i];
            count[g] += 1;
        }
        v.iter()
            .zip(&group)
            .map(|(x, &g)| x - sum[g] / count[g] as f64)
            .collect()
    };

    let slopes = slope_columns(data, spec);
    let names: Vec<String> = slopes.iter().map(|c| c.0.clone()).collect();
    let demeaned: Vec<Vec<f64>> = slopes.iter().map(|c| demean(&c.1)).collect();
    let k = names.len();
    let x = DMatrix::from_fn(n, k, |i, j| demeaned[j][i]);
    let y_raw: Vec<f64> = data.iter().map(|r| spec.outcome.value(r)).collect();
    let y = DVector::from_vec(demean(&y_raw));

    let (xs, _) = equilibrate(&x);
    let dependent = dependent_columns(&xs, &names);
    if !dependent.is_empty() {
        return Err(ExperimentError::RankDeficient(dependent));
    }
    let xtx = x.transpose() * &x;
    let chol = xtx
        .cholesky()
        .ok_or_else(|| ExperimentError::RankDeficient(names.clone()))?;
    let beta = chol.solve(&(x.transpose() * &y));
    let bread = chol.inverse();
    let residuals = &y - &x * &beta;
    let n_params = k + n_groups;
    let cov = cr1_covariance(&x, &residuals, &bread, &clusters, n_clusters, n_params)?;
    let df = n_clusters - 1;
    let terms = names
        .into_iter()
        .enumerate()
        .map(|(j, name)| TermEstimate::new(name, beta[j], cov[(j, j)].max(0.0).sqrt(), df))
        .collect();
    Ok(WithinEstimate {
        terms,
        residuals: residuals.iter().copied().collect(),
        n_obs: n,
        n_clusters,
        n_params,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::Covariate;

    fn obs(resp: &str, case: &str, treated: u8, y: f64) -> SurveyResponse {
        SurveyResponse {
            respondent_id: resp.into(),
            case_id: case.into(),
            treated,
            heard_of_case: 0,
            area_correct: 0,
            decision_correct: 0,
            detail_just_right: 0,
            clarity: y,
            share_with_friend: 0.0,
            non_college: 0,
        }
    }

    fn spec() -> RegressionSpec {
        RegressionSpec::main(Outcome::Clarity)
    }

    // Two cases, three rows each.
    // case a: (T=1, 4), (T=0, 2), (T=0, 3)
    // case b: (T=1, 6), (T=1, 5), (T=0, 4)
    // Within case a: T mean 1/3, y mean 3. Within case b: T mean 2/3, y mean 5.
    // Demeaned T: a: 2/3, -1/3, -1/3; b: 1/3, 1/3, -2/3
    // Demeaned y: a: 1, -1, 0;       b: 1, 0, -1
    // sum(Tt*yt) = 2/3 + 1/3 + 1/3 + 2/3 = 2
    // sum(Tt^2)  = 4/9 + 1/9 + 1/9 + 1/9 + 1/9 + 4/9 = 4/3
    // beta = 2 / (4/3) = 1.5
    fn six_rows() -> Vec<SurveyResponse> {
        vec![
            obs("r1", "a", 1, 4.0),
            obs("r2", "a", 0, 2.0),
            obs("r3", "a", 0, 3.0),
            obs("r1", "b", 1, 6.0),
            obs("r2", "b", 1, 5.0),
            obs("r3", "b", 0, 4.0),
        ]
    }

    #[test]
    fn hand_computed_six_rows() {
        let res = estimate_treatment_effect(&six_rows(), &spec()).unwrap();
        assert!((res.term(TREATED_TERM).unwrap().coef - 1.5).abs() < 1e-12);
        // intercept = mean_a(y) - beta * mean_a(T) = 3 - 0.5
        assert!((res.term(INTERCEPT_TERM).unwrap().coef - 2.5).abs() < 1e-12);
        // case b shift = (5 - 1.5*2/3) - 2.5 = 1.5
        assert!((res.term("case[b]").unwrap().coef - 1.5).abs() < 1e-12);
        assert_eq!(res.n_params, 3);
        assert_eq!(res.n_clusters, 3);
        assert_eq!(res.df, 2);
        let within = within_transform_estimate(&six_rows(), &spec()).unwrap();
        assert!((within.terms[0].coef - 1.5).abs() < 1e-12);
        assert!((within.terms[0].se - res.terms[1].se).abs() < 1e-12);
    }

    #[test]
    fn residuals_orthogonal_to_regressors() {
        let rows = six_rows();
        let res = estimate_treatment_effect(&rows, &spec()).unwrap();
        let d = build_design(&rows, &spec()).unwrap();
        let xu = d.x.transpose() * DVector::from_vec(res.residuals.clone());
        assert!(xu.amax() <= 1e-8 * rows.len() as f64);
    }

    #[test]
    fn identical_arm_means_give_zero_effect() {
        let rows = vec![
            obs("r1", "a", 1, 3.0),
            obs("r2", "a", 0, 3.0),
            obs("r3", "a", 1, 1.0),
            obs("r4", "a", 0, 1.0),
            obs("r1", "b", 0, 5.0),
            obs("r2", "b", 1, 5.0),
        ];
        let res = estimate_treatment_effect(&rows, &spec()).unwrap();
        assert!(res.terms[1].coef.abs() < 1e-12);
    }

    #[test]
    fn noiseless_effect_recovered() {
        let mut rows = Vec::new();
        for (i, case) in ["a", "b", "c"].iter().enumerate() {
            for j in 0..6 {
                let t = (j % 2) as u8;
                let y = 2.0 + i as f64 * 0.7 + 0.25 * t as f64;
                rows.push(obs(&format!("r{j}"), case, t, y));
            }
        }
        let res = estimate_treatment_effect(&rows, &spec()).unwrap();
        assert!((res.terms[1].coef - 0.25).abs() < 1e-10);
    }

    #[test]
    fn constant_covariate_is_rank_deficient() {
        let err = estimate_interaction(&six_rows(), &spec()).unwrap_err();
        match err {
            ExperimentError::RankDeficient(cols) => {
                assert_eq!(cols, vec![NON_COLLEGE_TERM.to_string(), INTERACTION_TERM.to_string()])
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn single_cluster_rejected() {
        let rows: Vec<_> = six_rows().into_iter().map(|mut r| {
            r.respondent_id = "only".into();
            r
        }).collect();
        assert_eq!(
            estimate_treatment_effect(&rows, &spec()).unwrap_err(),
            ExperimentError::TooFewClusters(1)
        );
    }

    #[test]
    fn interaction_recovered() {
        let mut rows = Vec::new();
        for case in ["a", "b"] {
            for j in 0..8u8 {
                let t = j % 2;
                let nc = (j / 2) % 2;
                let effect = if nc == 1 { 0.5 } else { 0.2 };
                let mut r = obs(&format!("r{j}"), case, t, 3.0 + effect * t as f64);
                r.non_college = nc;
                rows.push(r);
            }
        }
        let res = estimate_interaction(&rows, &spec()).unwrap();
        assert!((res.term(TREATED_TERM).unwrap().coef - 0.2).abs() < 1e-10);
        assert!((res.term(INTERACTION_TERM).unwrap().coef - 0.3).abs() < 1e-10);
        assert_eq!(
            res.terms.iter().map(|t| t.term.as_str()).collect::<Vec<_>>(),
            [INTERCEPT_TERM, TREATED_TERM, NON_COLLEGE_TERM, INTERACTION_TERM, "case[b]"]
        );
        let spec = RegressionSpec::interaction(Outcome::Clarity);
        assert_eq!(spec.interaction_with, Some(Covariate::NonCollege));
    }

    #[test]
    fn published_pair_inference() {
        let r = RegressionResult::from_published(Outcome::Clarity, 0.107, 0.0354, 560, 120);
        let t = r.term(TREATED_TERM).unwrap();
        assert!((t.t - 3.0226).abs() < 1e-3);
        assert!(t.p > 0.001 && t.p < 0.01, "{}", t.p);
    }
}
