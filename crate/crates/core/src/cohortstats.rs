//! Cohort-level association tests.
//!
//! The cohort table holds one row per (case, wall region) with the
//! end-systolic displacement and candidate explanatory values (wall
//! thickness, epicardial adipose tissue volume, calibrated stiffness α).
//! Because the five regional rows of a case are repeated measures,
//! associations are tested with a random-intercept linear mixed-effects
//! model,
//! `Y_ij = β₀ + β₁·region_j + β₂·X_ij + u_i + ε_ij`,
//! fitted by maximum likelihood with the variance ratio profiled out, and
//! fixed effects assessed by Wald tests. Regional contrasts across the
//! cohort use paired t-tests with a Bonferroni correction.

use crate::geometry::Region;
use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};
use thiserror::Error;

/// Errors from table validation and the statistical tests.
#[derive(Debug, Error)]
pub enum StatsError {
    #[error("mixed modelling needs at least 2 cases, got {0}")]
    TooFewCases(usize),
    #[error("duplicate row for case {case_id!r}, region {region}")]
    DuplicateRow { case_id: String, region: Region },
    #[error("row for case {case_id!r} has a non-finite value")]
    NonFinite { case_id: String },
    #[error("cohort rows must use wall regions, got {0}")]
    NotAWallRegion(Region),
    #[error("design matrix is singular; is the covariate constant?")]
    SingularDesign,
    #[error("degenerate test: {0}")]
    DegenerateTest(String),
    #[error("no coefficient named {0:?} in the fit")]
    UnknownCoefficient(String),
    #[error("column index {index} out of range for {columns} columns")]
    BadColumn { index: usize, columns: usize },
    #[error("matrix rows must all have the same length")]
    RaggedMatrix,
    #[error("csv line {line}: {message}")]
    Csv { line: usize, message: String },
}

/// One observation: a case's wall region with its response and covariates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CohortRow {
    pub case_id: String,
    pub region: Region,
    pub d_es_mm: f64,
    pub thickness_mm: f64,
    pub eat_ml: f64,
    pub alpha: f64,
}

/// Selects a numeric column of the cohort table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CohortColumn {
    DisplacementMm,
    ThicknessMm,
    EatMl,
    Alpha,
}

impl CohortColumn {
    /// Column name as it appears in `cohort.csv`.
    pub fn name(self) -> &'static str {
        match self {
            CohortColumn::DisplacementMm => "d_es_mm",
            CohortColumn::ThicknessMm => "thickness_mm",
            CohortColumn::EatMl => "eat_ml",
            CohortColumn::Alpha => "alpha",
        }
    }

    fn value(self, row: &CohortRow) -> f64 {
        match self {
            CohortColumn::DisplacementMm => row.d_es_mm,
            CohortColumn::ThicknessMm => row.thickness_mm,
            CohortColumn::EatMl => row.eat_ml,
            CohortColumn::Alpha => row.alpha,
        }
    }
}

const CSV_HEADER: &str = "case_id,region,d_es_mm,thickness_mm,eat_ml,alpha";

/// Validated cohort data, stored in canonical (case, region) order so every
/// statistic is independent of input row order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CohortTable {
    rows: Vec<CohortRow>,
}

impl CohortTable {
    pub fn new(mut rows: Vec<CohortRow>) -> Result<Self, StatsError> {
        for row in &rows {
            if row.region == Region::Rim {
                return Err(StatsError::NotAWallRegion(row.region));
            }
            if ![row.d_es_mm, row.thickness_mm, row.eat_ml, row.alpha]
                .iter()
                .all(|v| v.is_finite())
            {
                return Err(StatsError::NonFinite {
                    case_id: row.case_id.clone(),
                });
            }
        }
        rows.sort_by(|a, b| {
            a.case_id
                .cmp(&b.case_id)
                .then(a.region.index().cmp(&b.region.index()))
        });
        for pair in rows.windows(2) {
            if pair[0].case_id == pair[1].case_id && pair[0].region == pair[1].region {
                return Err(StatsError::DuplicateRow {
                    case_id: pair[0].case_id.clone(),
                    region: pair[0].region,
                });
            }
        }
        let table = CohortTable { rows };
        let n = table.n_cases();
        if n < 2 {
            return Err(StatsError::TooFewCases(n));
        }
        Ok(table)
    }

    pub fn rows(&self) -> &[CohortRow] {
        &self.rows
    }

    /// Distinct case identifiers in canonical order.
    pub fn case_ids(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = Vec::new();
        for row in &self.rows {
            if ids.last() != Some(&row.case_id.as_str()) {
                ids.push(&row.case_id);
            }
        }
        ids
    }

    pub fn n_cases(&self) -> usize {
        self.case_ids().len()
    }

    /// Cases × wall-regions matrix of one column, for the paired tests.
    /// Requires every case to provide all five wall regions.
    pub fn region_matrix(&self, column: CohortColumn) -> Result<Vec<Vec<f64>>, StatsError> {
        let ids = self.case_ids();
        let mut matrix = Vec::with_capacity(ids.len());
        for id in ids {
            let case_rows: Vec<&CohortRow> =
                self.rows.iter().filter(|r| r.case_id == id).collect();
            if case_rows.len() != Region::WALL.len() {
                return Err(StatsError::DegenerateTest(format!(
                    "case {id:?} has {} of {} wall regions",
                    case_rows.len(),
                    Region::WALL.len()
                )));
            }
            matrix.push(case_rows.iter().map(|r| column.value(r)).collect());
        }
        Ok(matrix)
    }

    /// Parses the canonical `cohort.csv` layout.
    pub fn from_csv(text: &str) -> Result<Self, StatsError> {
        let mut rows = Vec::new();
        let mut saw_header = false;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if !saw_header {
                if line != CSV_HEADER {
                    return Err(StatsError::Csv {
                        line: i + 1,
                        message: format!("expected header {CSV_HEADER:?}"),
                    });
                }
                saw_header = true;
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 6 {
                return Err(StatsError::Csv {
                    line: i + 1,
                    message: format!("expected 6 fields, got {}", fields.len()),
                });
            }
            let region = Region::from_name(fields[1]).ok_or_else(|| StatsError::Csv {
                line: i + 1,
                message: format!("unknown region {:?}", fields[1]),
            })?;
            let num = |s: &str| -> Result<f64, StatsError> {
                s.parse().map_err(|_| StatsError::Csv {
                    line: i + 1,
                    message: format!("bad number {s:?}"),
                })
            };
            rows.push(CohortRow {
                case_id: fields[0].to_string(),
                region,
                d_es_mm: num(fields[2])?,
                thickness_mm: num(fields[3])?,
                eat_ml: num(fields[4])?,
                alpha: num(fields[5])?,
            });
        }
        if !saw_header {
            return Err(StatsError::Csv {
                line: 1,
                message: "missing header".into(),
            });
        }
        CohortTable::new(rows)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.case_id, r.region, r.d_es_mm, r.thickness_mm, r.eat_ml, r.alpha
            ));
        }
        out
    }
}

/// Mixed-model fitting options.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LmmOptions {
    /// Restricted maximum likelihood instead of plain maximum likelihood.
    pub reml: bool,
    /// Reference level for the region treatment contrasts.
    pub reference: Region,
}

impl Default for LmmOptions {
    fn default() -> Self {
        LmmOptions {
            reml: false,
            reference: Region::Anterior,
        }
    }
}

/// One fixed effect with its Wald statistics.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LmmCoefficient {
    pub name: String,
    pub estimate: f64,
    pub se: f64,
    pub z: f64,
    pub p: f64,
}

/// A fitted random-intercept mixed model.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LmmFit {
    /// Intercept, region contrasts, then the covariate slope.
    pub coefficients: Vec<LmmCoefficient>,
    /// Random-intercept variance σ_u².
    pub random_intercept_var: f64,
    /// Residual variance σ².
    pub residual_var: f64,
    /// Maximized log-likelihood of the fitted criterion (ML or REML).
    pub log_likelihood: f64,
    pub converged: bool,
    pub n_obs: usize,
    pub n_groups: usize,
    pub reference: Region,
}

impl LmmFit {
    pub fn coefficient(&self, name: &str) -> Option<&LmmCoefficient> {
        self.coefficients.iter().find(|c| c.name == name)
    }

    /// The covariate slope β₂ (always the last coefficient).
    pub fn slope(&self) -> &LmmCoefficient {
        self.coefficients.last().unwrap()
    }
}

/// Per-group slices of the stacked design, cached for the profile search.
struct GroupData {
    x: DMatrix<f64>,
    y: DVector<f64>,
    /// Column sums of `x`.
    sx: DVector<f64>,
    /// Sum of `y`.
    sy: f64,
}

struct ProfileEval {
    beta: DVector<f64>,
    sigma2: f64,
    /// −2 · log-likelihood of the chosen criterion.
    deviance: f64,
    /// Cholesky factor of XᵀΛ⁻¹X for the covariance of β̂.
    chol: Cholesky<f64, nalgebra::Dyn>,
}

/// Evaluates the profiled criterion at variance ratio `lambda = σ_u²/σ²`.
///
/// With per-group marginal correlation `Λ_j = I + λ J`, the inverse is
/// `I − (λ/(1+λm_j)) J`, so all sums reduce to per-group totals; β and σ²
/// then maximize the likelihood in closed form given λ.
fn profile(groups: &[GroupData], lambda: f64, reml: bool) -> Result<ProfileEval, StatsError> {
    let p = groups[0].x.ncols();
    let n: usize = groups.iter().map(|g| g.y.len()).sum();
    let mut a = DMatrix::<f64>::zeros(p, p);
    let mut b = DVector::<f64>::zeros(p);
    let mut log_det_lambda = 0.0;
    for g in groups {
        let m = g.y.len() as f64;
        let c = lambda / (1.0 + lambda * m);
        a.gemm_tr(1.0, &g.x, &g.x, 1.0);
        a.ger(-c, &g.sx, &g.sx, 1.0);
        b.gemv_tr(1.0, &g.x, &g.y, 1.0);
        b.axpy(-c * g.sy, &g.sx, 1.0);
        log_det_lambda += (1.0 + lambda * m).ln();
    }
    let chol = Cholesky::new(a).ok_or(StatsError::SingularDesign)?;
    let beta = chol.solve(&b);

    let mut rwr = 0.0;
    for g in groups {
        let m = g.y.len() as f64;
        let c = lambda / (1.0 + lambda * m);
        let r = &g.y - &g.x * &beta;
        rwr += r.dot(&r) - c * r.sum() * r.sum();
    }
    rwr = rwr.max(0.0);

    let two_pi = 2.0 * std::f64::consts::PI;
    let (dof, extra) = if reml {
        // REML integrates out the fixed effects, which contributes the
        // log-determinant of the profiled information matrix.
        let log_det_a = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        ((n - p) as f64, log_det_a)
    } else {
        (n as f64, 0.0)
    };
    let sigma2 = (rwr / dof).max(f64::MIN_POSITIVE);
    let deviance = dof * (two_pi * sigma2).ln() + dof + log_det_lambda + extra;
    Ok(ProfileEval {
        beta,
        sigma2,
        deviance,
        chol,
    })
}

/// Golden-section minimum of `f` on `[lo, hi]` (assumes unimodality).
fn golden_section(f: &mut dyn FnMut(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..120 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

/// Two-sided standard-normal p-value for a Wald statistic.
pub fn wald_p(z: f64) -> f64 {
    let normal = Normal::new(0.0, 1.0).unwrap();
    (2.0 * (1.0 - normal.cdf(z.abs()))).clamp(0.0, 1.0)
}

/// Builds the fixed-effects design for `table` and returns per-group data
/// plus coefficient names.
fn build_design(
    table: &CohortTable,
    response: CohortColumn,
    covariate: CohortColumn,
    reference: Region,
) -> (Vec<GroupData>, Vec<String>) {
    let mut present: Vec<Region> = Region::WALL
        .iter()
        .copied()
        .filter(|r| table.rows.iter().any(|row| row.region == *r))
        .collect();
    // Reference level first, remaining regions keep wall order.
    let reference = if present.contains(&reference) {
        reference
    } else {
        present[0]
    };
    present.retain(|r| *r != reference);

    let mut names = vec!["intercept".to_string()];
    names.extend(present.iter().map(|r| format!("region[{r}]")));
    names.push(covariate.name().to_string());
    let p = names.len();

    let ids = table.case_ids();
    let groups = ids
        .iter()
        .map(|id| {
            let rows: Vec<&CohortRow> =
                table.rows.iter().filter(|r| r.case_id == *id).collect();
            let m = rows.len();
            let mut x = DMatrix::<f64>::zeros(m, p);
            let mut y = DVector::<f64>::zeros(m);
            for (i, row) in rows.iter().enumerate() {
                x[(i, 0)] = 1.0;
                if let Some(k) = present.iter().position(|r| *r == row.region) {
                    x[(i, 1 + k)] = 1.0;
                }
                x[(i, p - 1)] = covariate.value(row);
                y[i] = response.value(row);
            }
            let sx = x.row_sum_tr();
            let sy = y.sum();
            GroupData { x, y, sx, sy }
        })
        .collect();
    (groups, names)
}

/// Fits the random-intercept mixed model of `response` on region contrasts
/// and `covariate`, maximizing the (restricted) likelihood by a grid search
/// plus golden-section refinement over the variance ratio λ = σ_u²/σ².
pub fn fit_lmm(
    table: &CohortTable,
    response: CohortColumn,
    covariate: CohortColumn,
    opts: &LmmOptions,
) -> Result<LmmFit, StatsError> {
    let (groups, names) = build_design(table, response, covariate, opts.reference);
    let n_obs: usize = groups.iter().map(|g| g.y.len()).sum();

    // A singular design is singular at every λ, so check once up front.
    profile(&groups, 0.0, opts.reml)?;

    // Coarse log-spaced scan for a bracket, then golden-section refinement;
    // the profiled deviance is unimodal in λ.
    let mut grid = vec![0.0];
    let mut k = -8.0;
    while k <= 6.0 + 1e-9 {
        grid.push(10f64.powf(k));
        k += 0.25;
    }
    let mut eval = |lambda: f64| -> f64 {
        profile(&groups, lambda, opts.reml)
            .map(|e| e.deviance)
            .unwrap_or(f64::INFINITY)
    };
    let mut best = 0;
    let mut best_dev = eval(grid[0]);
    for (i, &lambda) in grid.iter().enumerate().skip(1) {
        let dev = eval(lambda);
        if dev < best_dev {
            best_dev = dev;
            best = i;
        }
    }
    let lo = if best == 0 { 0.0 } else { grid[best - 1] };
    let hi = if best + 1 < grid.len() {
        grid[best + 1]
    } else {
        grid[best]
    };
    let mut lambda = golden_section(&mut eval, lo, hi);
    if eval(lambda) > best_dev {
        lambda = grid[best];
    }
    let converged = best + 1 < grid.len();

    let fit = profile(&groups, lambda, opts.reml)?;
    let cov = fit.chol.inverse() * fit.sigma2;
    let coefficients = names
        .into_iter()
        .enumerate()
        .map(|(i, name)| {
            let estimate = fit.beta[i];
            let se = cov[(i, i)].max(0.0).sqrt();
            let z = if se > 0.0 { estimate / se } else { f64::INFINITY };
            LmmCoefficient {
                name,
                estimate,
                se,
                z,
                p: wald_p(z),
            }
        })
        .collect();
    Ok(LmmFit {
        coefficients,
        random_intercept_var: lambda * fit.sigma2,
        residual_var: fit.sigma2,
        log_likelihood: -0.5 * fit.deviance,
        converged,
        n_obs,
        n_groups: groups.len(),
        reference: opts.reference,
    })
}

/// Two-sided Wald p-value of one fitted coefficient.
pub fn wald_test(fit: &LmmFit, coefficient: &str) -> Result<f64, StatsError> {
    let c = fit
        .coefficient(coefficient)
        .ok_or_else(|| StatsError::UnknownCoefficient(coefficient.to_string()))?;
    if c.se == 0.0 {
        return Err(StatsError::DegenerateTest(format!(
            "zero standard error for {coefficient:?}"
        )));
    }
    Ok(wald_p(c.estimate / c.se))
}

/// One paired comparison between two columns of the cases × regions matrix.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PairedTest {
    /// Column indices compared (first minus second).
    pub pair: (usize, usize),
    pub t: f64,
    pub df: f64,
    pub p: f64,
    /// Bonferroni-adjusted p: `min(1, p · comparisons)`.
    pub p_adjusted: f64,
}

/// Paired t-tests on case-wise differences for each requested column pair,
/// Bonferroni-corrected by the number of comparisons.
///
/// Identical columns give `t = 0` and adjusted `p = 1`; a constant nonzero
/// difference (zero variance, nonzero mean) is a degenerate test.
pub fn paired_ttest_bonferroni(
    matrix: &[Vec<f64>],
    comparisons: &[(usize, usize)],
) -> Result<Vec<PairedTest>, StatsError> {
    let n = matrix.len();
    if n < 2 {
        return Err(StatsError::TooFewCases(n));
    }
    let columns = matrix[0].len();
    if matrix.iter().any(|row| row.len() != columns) {
        return Err(StatsError::RaggedMatrix);
    }
    let k = comparisons.len();
    comparisons
        .iter()
        .map(|&(i, j)| {
            for index in [i, j] {
                if index >= columns {
                    return Err(StatsError::BadColumn { index, columns });
                }
            }
            let diffs: Vec<f64> = matrix.iter().map(|row| row[i] - row[j]).collect();
            let mean = diffs.iter().sum::<f64>() / n as f64;
            let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>()
                / (n as f64 - 1.0);
            let df = n as f64 - 1.0;
            let t = if var == 0.0 {
                if mean == 0.0 {
                    0.0
                } else {
                    return Err(StatsError::DegenerateTest(format!(
                        "constant nonzero difference for pair ({i}, {j})"
                    )));
                }
            } else {
                mean / (var / n as f64).sqrt()
            };
            let dist = StudentsT::new(0.0, 1.0, df).expect("df >= 1");
            let p = (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0);
            Ok(PairedTest {
                pair: (i, j),
                t,
                df,
                p,
                p_adjusted: (p * k as f64).min(1.0),
            })
        })
        .collect()
}

/// All unordered column pairs, in lexicographic order.
pub fn all_pairs(columns: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for i in 0..columns {
        for j in i + 1..columns {
            pairs.push((i, j));
        }
    }
    pairs
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn make_row(case: &str, region: Region, d: f64, x: f64) -> CohortRow {
        CohortRow {
            case_id: case.to_string(),
            region,
            d_es_mm: d,
            thickness_mm: x,
            eat_ml: 0.5 * x + 1.0,
            alpha: 2.0,
        }
    }

    /// Synthetic cohort: n_cases × 5 regions with chosen effects.
    /// Residuals are optionally centred within each case, which pins the
    /// profiled random-intercept variance to zero.
    fn synthetic_table(
        n_cases: usize,
        beta2: f64,
        sigma_u: f64,
        sigma: f64,
        centre_groups: bool,
        seed: u64,
    ) -> CohortTable {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let region_effect = [0.0, 0.4, -0.3, 0.2, 0.5];
        let mut rows = Vec::new();
        for case in 0..n_cases {
            let u: f64 = sigma_u * StandardNormal.sample(&mut rng);
            let mut eps: Vec<f64> = (0..Region::WALL.len())
                .map(|_| sigma * StandardNormal.sample(&mut rng))
                .collect();
            if centre_groups {
                let mean = eps.iter().sum::<f64>() / eps.len() as f64;
                for e in &mut eps {
                    *e -= mean;
                }
            }
            for (k, region) in Region::WALL.iter().enumerate() {
                let x: f64 = rng.gen_range(0.5..4.5);
                let y = 1.5 + region_effect[k] + beta2 * x + u + eps[k];
                rows.push(make_row(&format!("case{case:02}"), *region, y, x));
            }
        }
        CohortTable::new(rows).unwrap()
    }

    #[test]
    fn table_validation_and_canonical_order() {
        let rows = vec![
            make_row("b", Region::Roof, 1.0, 2.0),
            make_row("a", Region::Posterior, 1.0, 2.0),
            make_row("a", Region::Anterior, 1.0, 2.0),
        ];
        let table = CohortTable::new(rows).unwrap();
        let order: Vec<(String, Region)> = table
            .rows()
            .iter()
            .map(|r| (r.case_id.clone(), r.region))
            .collect();
        assert_eq!(
            order,
            vec![
                ("a".to_string(), Region::Anterior),
                ("a".to_string(), Region::Posterior),
                ("b".to_string(), Region::Roof),
            ]
        );
        assert_eq!(table.n_cases(), 2);

        let dup = vec![
            make_row("a", Region::Roof, 1.0, 2.0),
            make_row("a", Region::Roof, 2.0, 2.0),
            make_row("b", Region::Roof, 1.0, 2.0),
        ];
        assert!(matches!(
            CohortTable::new(dup),
            Err(StatsError::DuplicateRow { .. })
        ));

        let one_case = vec![make_row("a", Region::Roof, 1.0, 2.0)];
        assert!(matches!(
            CohortTable::new(one_case),
            Err(StatsError::TooFewCases(1))
        ));

        let rim = vec![
            make_row("a", Region::Rim, 1.0, 2.0),
            make_row("b", Region::Roof, 1.0, 2.0),
        ];
        assert!(matches!(
            CohortTable::new(rim),
            Err(StatsError::NotAWallRegion(Region::Rim))
        ));
    }

    #[test]
    fn csv_round_trip() {
        let table = synthetic_table(3, 1.0, 0.5, 0.2, false, 1);
        let text = table.to_csv();
        let back = CohortTable::from_csv(&text).unwrap();
        assert_eq!(back, table);
        assert!(CohortTable::from_csv("nonsense\n").is_err());
        assert!(CohortTable::from_csv("").is_err());
    }

    #[test]
    fn zero_random_variance_matches_ols() {
        // Group-centred residuals leave no between-case variance to absorb,
        // so the profiled optimum sits at λ = 0 and the fit is exactly OLS.
        let table = synthetic_table(10, 2.0, 0.0, 0.5, true, 7);
        let fit = fit_lmm(
            &table,
            CohortColumn::DisplacementMm,
            CohortColumn::ThicknessMm,
            &LmmOptions::default(),
        )
        .unwrap();
        assert!(fit.converged);
        assert!(fit.random_intercept_var < 1e-8);

        // Independent OLS oracle via the normal equations on the same design.
        let (groups, _) = build_design(
            &table,
            CohortColumn::DisplacementMm,
            CohortColumn::ThicknessMm,
            Region::Anterior,
        );
        let p = groups[0].x.ncols();
        let mut xtx = DMatrix::<f64>::zeros(p, p);
        let mut xty = DVector::<f64>::zeros(p);
        for g in &groups {
            xtx.gemm_tr(1.0, &g.x, &g.x, 1.0);
            xty.gemv_tr(1.0, &g.x, &g.y, 1.0);
        }
        let ols = Cholesky::new(xtx).unwrap().solve(&xty);
        for (coef, ols_k) in fit.coefficients.iter().zip(ols.iter()) {
            assert_relative_eq!(coef.estimate, *ols_k, max_relative = 1e-6);
        }
    }

    #[test]
    fn monte_carlo_slope_coverage() {
        // β₂ = 2, σ_u = 1, σ = 0.5, 10 cases × 5 regions; the slope should
        // land within 3 standard errors in at least 95% of replications.
        let mut covered = 0;
        let reps = 200;
        for seed in 0..reps {
            let table = synthetic_table(10, 2.0, 1.0, 0.5, false, 1000 + seed);
            let fit = fit_lmm(
                &table,
                CohortColumn::DisplacementMm,
                CohortColumn::ThicknessMm,
                &LmmOptions::default(),
            )
            .unwrap();
            let slope = fit.slope();
            assert_eq!(slope.name, "thickness_mm");
            if (slope.estimate - 2.0).abs() <= 3.0 * slope.se {
                covered += 1;
            }
        }
        assert!(
            covered as f64 >= 0.95 * reps as f64,
            "covered {covered}/{reps}"
        );
    }

    #[test]
    fn row_order_does_not_change_the_fit() {
        let table = synthetic_table(6, 1.2, 0.8, 0.4, false, 3);
        let mut rows = table.rows().to_vec();
        rows.reverse();
        rows.swap(4, 17);
        let permuted = CohortTable::new(rows).unwrap();
        let fit = |t: &CohortTable| {
            fit_lmm(
                t,
                CohortColumn::DisplacementMm,
                CohortColumn::EatMl,
                &LmmOptions::default(),
            )
            .unwrap()
        };
        let a = fit(&table);
        let b = fit(&permuted);
        for (ca, cb) in a.coefficients.iter().zip(&b.coefficients) {
            assert_eq!(ca.estimate, cb.estimate);
            assert_eq!(ca.se, cb.se);
        }
        assert_eq!(a.random_intercept_var, b.random_intercept_var);
    }

    #[test]
    fn optimum_beats_pinned_zero_variance() {
        // Strong case effects: the profiled optimum must dominate λ = 0.
        let table = synthetic_table(10, 1.0, 2.0, 0.3, false, 11);
        let (groups, _) = build_design(
            &table,
            CohortColumn::DisplacementMm,
            CohortColumn::ThicknessMm,
            Region::Anterior,
        );
        let fit = fit_lmm(
            &table,
            CohortColumn::DisplacementMm,
            CohortColumn::ThicknessMm,
            &LmmOptions::default(),
        )
        .unwrap();
        let at_zero = profile(&groups, 0.0, false).unwrap();
        assert!(fit.log_likelihood >= -0.5 * at_zero.deviance);
        assert!(fit.log_likelihood > -0.5 * at_zero.deviance + 1.0);
        assert!(fit.random_intercept_var > 0.5);
    }

    #[test]
    fn constant_covariate_is_singular() {
        let mut rows = Vec::new();
        for case in ["a", "b", "c"] {
            for region in Region::WALL {
                rows.push(make_row(case, region, 1.0 + case.len() as f64, 3.0));
            }
        }
        let table = CohortTable::new(rows).unwrap();
        let result = fit_lmm(
            &table,
            CohortColumn::DisplacementMm,
            CohortColumn::ThicknessMm,
            &LmmOptions::default(),
        );
        assert!(matches!(result, Err(StatsError::SingularDesign)));
    }

    #[test]
    fn wald_examples() {
        assert_eq!(wald_p(0.0), 1.0);
        assert!((wald_p(1.959964) - 0.05).abs() < 1e-6);
        assert!(wald_p(1.0) > wald_p(2.0));
        assert!(wald_p(2.0) > wald_p(3.0));

        let table = synthetic_table(8, 2.0, 1.0, 0.5, false, 5);
        let fit = fit_lmm(
            &table,
            CohortColumn::DisplacementMm,
            CohortColumn::ThicknessMm,
            &LmmOptions::default(),
        )
        .unwrap();
        let p = wald_test(&fit, "thickness_mm").unwrap();
        assert_relative_eq!(p, fit.slope().p, max_relative = 1e-12);
        assert!(matches!(
            wald_test(&fit, "nope"),
            Err(StatsError::UnknownCoefficient(_))
        ));
    }

    #[test]
    fn reference_recoding_leaves_slope_invariant() {
        let table = synthetic_table(9, 1.5, 0.7, 0.4, false, 9);
        let fit_with = |reference: Region| {
            fit_lmm(
                &table,
                CohortColumn::DisplacementMm,
                CohortColumn::ThicknessMm,
                &LmmOptions {
                    reference,
                    ..LmmOptions::default()
                },
            )
            .unwrap()
        };
        let a = fit_with(Region::Anterior);
        let b = fit_with(Region::Septum);
        assert_relative_eq!(
            a.slope().estimate,
            b.slope().estimate,
            max_relative = 1e-8
        );
        assert_relative_eq!(a.slope().se, b.slope().se, max_relative = 1e-8);
        assert_relative_eq!(a.slope().p, b.slope().p, epsilon = 1e-8);
    }

    #[test]
    fn reml_option_runs_and_inflates_variance() {
        let table = synthetic_table(6, 1.0, 1.0, 0.5, false, 13);
        let ml = fit_lmm(
            &table,
            CohortColumn::DisplacementMm,
            CohortColumn::ThicknessMm,
            &LmmOptions::default(),
        )
        .unwrap();
        let reml = fit_lmm(
            &table,
            CohortColumn::DisplacementMm,
            CohortColumn::ThicknessMm,
            &LmmOptions {
                reml: true,
                ..LmmOptions::default()
            },
        )
        .unwrap();
        // REML corrects the ML bias, so the residual variance grows.
        assert!(reml.residual_var > ml.residual_var);
    }

    #[test]
    fn paired_t_fixture_matches_hand_computation() {
        // Differences 0.5, 0.3, 0.3, −0.1, 0.6: mean 0.32, sd 0.26833,
        // se 0.12, so t = 0.32 / 0.12 = 8/3 with 4 degrees of freedom.
        let a = [3.1, 2.4, 3.8, 2.9, 3.3];
        let b = [2.6, 2.1, 3.5, 3.0, 2.7];
        let matrix: Vec<Vec<f64>> = a.iter().zip(&b).map(|(x, y)| vec![*x, *y]).collect();
        let tests = paired_ttest_bonferroni(&matrix, &[(0, 1)]).unwrap();
        assert_eq!(tests.len(), 1);
        assert_relative_eq!(tests[0].t, 8.0 / 3.0, epsilon = 1e-10);
        assert_eq!(tests[0].df, 4.0);
        assert_eq!(tests[0].p, tests[0].p_adjusted); // single comparison
        assert!(tests[0].p > 0.0 && tests[0].p < 1.0);
    }

    #[test]
    fn bonferroni_scales_and_caps() {
        let matrix = vec![
            vec![1.0, 2.0, 1.0],
            vec![2.0, 3.5, 2.0],
            vec![3.0, 4.2, 3.0],
            vec![4.0, 5.9, 4.0],
        ];
        let pairs = all_pairs(3);
        assert_eq!(pairs, vec![(0, 1), (0, 2), (1, 2)]);
        let tests = paired_ttest_bonferroni(&matrix, &pairs).unwrap();
        // Identical columns 0 and 2: t = 0, adjusted p = 1.
        assert_eq!(tests[1].t, 0.0);
        assert_eq!(tests[1].p, 1.0);
        assert_eq!(tests[1].p_adjusted, 1.0);
        // Adjustment is min(1, 3p) for the informative pairs.
        assert_relative_eq!(
            tests[0].p_adjusted,
            (3.0 * tests[0].p).min(1.0),
            max_relative = 1e-12
        );

        // Constant nonzero difference is degenerate.
        let shifted = vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]];
        assert!(matches!(
            paired_ttest_bonferroni(&shifted, &[(0, 1)]),
            Err(StatsError::DegenerateTest(_))
        ));

        assert!(matches!(
            paired_ttest_bonferroni(&matrix, &[(0, 9)]),
            Err(StatsError::BadColumn { .. })
        ));
    }

    #[test]
    fn region_matrix_requires_complete_cases() {
        let table = synthetic_table(4, 1.0, 0.5, 0.2, false, 2);
        let matrix = table.region_matrix(CohortColumn::DisplacementMm).unwrap();
        assert_eq!(matrix.len(), 4);
        assert_eq!(matrix[0].len(), Region::WALL.len());

        let mut rows = table.rows().to_vec();
        rows.remove(0);
        let partial = CohortTable::new(rows).unwrap();
        assert!(partial.region_matrix(CohortColumn::DisplacementMm).is_err());
    }
}
