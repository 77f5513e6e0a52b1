//! Two-sphere tables feeding the quadratic viscosity correction.
//!
//! For a pair of freely suspended spheres at dimensionless separation
//! ζ = r/ε in a pure straining flow, this module tabulates
//!   * J(ζ) — the scalar coefficient of the orientation-averaged stresslet
//!     excess of one sphere over its isolated value, normalized so that the
//!     pair contribution to the mean stress is (4/3 πε³)²·2μ·(15/2)∫ J q dζ,
//!   * A(ζ), B(ζ) — radial and transverse relative-mobility reductions of
//!     the pair in straining flow,
//!   * q(ζ) — the steady pair density maintained by pure convection, and
//!   * the coefficient integral (15/2)∫ J q dζ whose dilute limit fixes the
//!     second-order viscosity coefficient a₂ = 5/2 + ∫.
//!
//! Tables carry provenance (discretization, radius, solver version, grid
//! hash) and round-trip through CSV; [`PairTables::load_or_compute`] keeps a
//! cache keyed by that provenance.

mod qsolve;
mod response;
mod tables;

pub use qsolve::solve_q;
pub use response::{pair_response, PairResponse};
pub use tables::{compute_j_table, compute_mobility, compute_tables, default_grid, TableOptions};

use crate::util::fit_power_law;
use crate::{Error, Result};
use sha2::{Digest, Sha256};
use std::path::Path;

/// Identity of a table build: discretization, sphere radius, solver
/// version, and a digest of the separation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TableProvenance {
    pub l_max: u32,
    pub oversample: usize,
    pub eps: f64,
    pub solver: String,
    pub grid_hash: String,
}

impl TableProvenance {
    pub(crate) fn for_run(grid: &[f64], opts: &TableOptions) -> Self {
        Self {
            l_max: opts.l_max,
            oversample: opts.oversample,
            eps: opts.eps,
            solver: env!("CARGO_PKG_VERSION").to_string(),
            grid_hash: grid_digest(grid),
        }
    }
}

/// Digest of a separation grid: SHA-256 over the little-endian bit patterns,
/// truncated to 16 hex characters.
pub(crate) fn grid_digest(grid: &[f64]) -> String {
    let mut hasher = Sha256::new();
    for z in grid {
        hasher.update(z.to_le_bytes());
    }
    let digest = hasher.finalize();
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// Pair tables on a common ζ = r/ε grid. Columns that a builder did not
/// fill read back as `None`; every present column carries an error estimate.
#[derive(Debug, Clone)]
pub struct PairTables {
    pub(crate) provenance: TableProvenance,
    pub(crate) zeta: Vec<f64>,
    pub(crate) j: Vec<f64>,
    pub(crate) j_err: Vec<f64>,
    pub(crate) a: Vec<f64>,
    pub(crate) a_err: Vec<f64>,
    pub(crate) b: Vec<f64>,
    pub(crate) b_err: Vec<f64>,
    pub(crate) q: Vec<f64>,
    pub(crate) q_err: Vec<f64>,
}

fn column(values: &[f64]) -> Option<&[f64]> {
    if values.iter().all(|v| v.is_finite()) {
        Some(values)
    } else {
        None
    }
}

impl PairTables {
    pub(crate) fn empty(provenance: TableProvenance, zeta: Vec<f64>) -> Self {
        let n = zeta.len();
        Self {
            provenance,
            zeta,
            j: vec![f64::NAN; n],
            j_err: vec![f64::NAN; n],
            a: vec![f64::NAN; n],
            a_err: vec![f64::NAN; n],
            b: vec![f64::NAN; n],
            b_err: vec![f64::NAN; n],
            q: vec![f64::NAN; n],
            q_err: vec![f64::NAN; n],
        }
    }

    pub fn provenance(&self) -> &TableProvenance {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.zeta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zeta.is_empty()
    }

    pub fn zeta(&self) -> &[f64] {
        &self.zeta
    }

    pub fn j(&self) -> Option<&[f64]> {
        column(&self.j)
    }

    pub fn j_error(&self) -> Option<&[f64]> {
        column(&self.j_err)
    }

    pub fn a(&self) -> Option<&[f64]> {
        column(&self.a)
    }

    pub fn a_error(&self) -> Option<&[f64]> {
        column(&self.a_err)
    }

    pub fn b(&self) -> Option<&[f64]> {
        column(&self.b)
    }

    pub fn b_error(&self) -> Option<&[f64]> {
        column(&self.b_err)
    }

    pub fn q(&self) -> Option<&[f64]> {
        column(&self.q)
    }

    pub fn q_error(&self) -> Option<&[f64]> {
        column(&self.q_err)
    }

    /// Check the structural table invariants: an ascending grid outside
    /// contact, decaying J and mobilities, and a positive pair density that
    /// approaches 1 when the grid reaches far enough out.
    pub fn validate(&self) -> Result<()> {
        if self.zeta.len() < 2 {
            return Err(Error::InvalidInput("pair tables need at least two grid points".into()));
        }
        if self.zeta[0] < 2.0 {
            return Err(Error::InvalidInput(format!(
                "separation grid starts at {:.4}, inside sphere contact ζ = 2",
                self.zeta[0]
            )));
        }
        if self.zeta.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("separation grid must be strictly ascending".into()));
        }
        let z_max = *self.zeta.last().expect("nonempty grid");
        if let Some(j) = self.j() {
            if z_max >= 10.0 {
                let (zs, js): (Vec<f64>, Vec<f64>) = self
                    .zeta
                    .iter()
                    .zip(j)
                    .filter(|(z, v)| **z >= z_max / 5.0 && **v > 0.0)
                    .map(|(z, v)| (*z, *v))
                    .unzip();
                if zs.len() >= 4 {
                    let fit = fit_power_law(&zs, &js)?;
                    if -fit.slope < 3.0 - 0.3 {
                        return Err(Error::InvalidInput(format!(
                            "stresslet-excess decay exponent {:.2} is shallower than 2.7",
                            -fit.slope
                        )));
                    }
                }
            }
        }
        if z_max >= 20.0 {
            for (name, col) in [("A", self.a()), ("B", self.b())] {
                if let Some(vals) = col {
                    let last = vals.last().expect("nonempty column").abs();
                    if last > 1e-3 {
                        return Err(Error::InvalidInput(format!(
                            "mobility column {name} does not decay: |{name}(ζ_max)| = {last:.2e}"
                        )));
                    }
                }
            }
        }
        if let Some(q) = self.q() {
            if q.iter().any(|&v| v <= 0.0) {
                return Err(Error::InvalidInput("pair density must stay positive".into()));
            }
            let q_last = *q.last().expect("nonempty column");
            if z_max >= 50.0 && (q_last - 1.0).abs() > 0.01 {
                return Err(Error::InvalidInput(format!(
                    "pair density at ζ = {z_max:.1} is {q_last:.4}, more than 1% from its far limit"
                )));
            }
        }
        Ok(())
    }

    /// Write the table as CSV: `# key=value` provenance lines, then a
    /// header, then one row per ζ (absent columns as NaN).
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut text = String::from("# pair-tables v1\n");
        let p = &self.provenance;
        text.push_str(&format!("# l_max={}\n", p.l_max));
        text.push_str(&format!("# oversample={}\n", p.oversample));
        text.push_str(&format!("# eps={}\n", p.eps));
        text.push_str(&format!("# solver={}\n", p.solver));
        text.push_str(&format!("# grid={}\n", p.grid_hash));
        text.push_str("zeta,j,j_err,a,a_err,b,b_err,q,q_err\n");
        for i in 0..self.zeta.len() {
            let row = [
                self.zeta[i],
                self.j[i],
                self.j_err[i],
                self.a[i],
                self.a_err[i],
                self.b[i],
                self.b_err[i],
                self.q[i],
                self.q_err[i],
            ];
            let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            text.push_str(&line.join(","));
            text.push('\n');
        }
        std::fs::write(path, text)?;
        Ok(())
    }

    /// Read a table written by [`PairTables::write_csv`], rejecting files
    /// with a different layout version or malformed rows.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines();
        match lines.next() {
            Some("# pair-tables v1") => {}
            other => {
                return Err(Error::Cache(format!(
                    "{} is not a v1 pair table (first line {:?})",
                    path.display(),
                    other
                )))
            }
        }
        let mut prov = TableProvenance {
            l_max: 0,
            oversample: 0,
            eps: f64::NAN,
            solver: String::new(),
            grid_hash: String::new(),
        };
        let mut header_seen = false;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for line in lines {
            if let Some(rest) = line.strip_prefix("# ") {
                let (key, value) = rest
                    .split_once('=')
                    .ok_or_else(|| Error::Cache(format!("bad provenance line {line:?}")))?;
                let parse = |what: &str| -> Result<f64> {
                    value
                        .parse::<f64>()
                        .map_err(|_| Error::Cache(format!("bad {what} value {value:?}")))
                };
                match key {
                    "l_max" => prov.l_max = parse("l_max")? as u32,
                    "oversample" => prov.oversample = parse("oversample")? as usize,
                    "eps" => prov.eps = parse("eps")?,
                    "solver" => prov.solver = value.to_string(),
                    "grid" => prov.grid_hash = value.to_string(),
                    other => return Err(Error::Cache(format!("unknown provenance key {other:?}"))),
                }
            } else if !header_seen {
                if line != "zeta,j,j_err,a,a_err,b,b_err,q,q_err" {
                    return Err(Error::Cache(format!("unexpected column header {line:?}")));
                }
                header_seen = true;
            } else {
                let vals: Vec<f64> = line
                    .split(',')
                    .map(|v| {
                        v.parse::<f64>()
                            .map_err(|_| Error::Cache(format!("bad numeric field {v:?}")))
                    })
                    .collect::<Result<_>>()?;
                if vals.len() != 9 {
                    return Err(Error::Cache(format!(
                        "row has {} fields, expected 9",
                        vals.len()
                    )));
                }
                rows.push(vals);
            }
        }
        if !header_seen || rows.is_empty() {
            return Err(Error::Cache(format!("{} carries no table rows", path.display())));
        }
        let col = |k: usize| rows.iter().map(|r| r[k]).collect::<Vec<f64>>();
        let table = Self {
            provenance: prov,
            zeta: col(0),
            j: col(1),
            j_err: col(2),
            a: col(3),
            a_err: col(4),
            b: col(5),
            b_err: col(6),
            q: col(7),
            q_err: col(8),
        };
        table.validate()?;
        Ok(table)
    }

    /// Full pipeline behind a provenance-keyed cache: load the matching
    /// table from `dir`, or build J, A, B, and q on `grid`, store the
    /// result, and return it. A cached file whose provenance does not match
    /// the requested build (including solver version) is rebuilt in place.
    pub fn load_or_compute(dir: &Path, grid: &[f64], opts: &TableOptions) -> Result<Self> {
        crate::io::ensure_dir(dir)?;
        let want = TableProvenance::for_run(grid, opts);
        let path = dir.join(format!(
            "pair-l{}-o{}-{}.csv",
            want.l_max, want.oversample, want.grid_hash
        ));
        if path.exists() {
            if let Ok(table) = Self::read_csv(&path) {
                if table.provenance == want && table.q().is_some() {
                    return Ok(table);
                }
            }
        }
        let table = solve_q(&compute_tables(grid, opts)?)?;
        table.write_csv(&path)?;
        Ok(table)
    }
}

/// The dilute pair-interaction integral (15/2)∫ J q dζ with its error
/// budget and tail diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct CoefficientIntegral {
    pub value: f64,
    /// Estimated error: grid quadrature + tail fit + the unsampled lip
    /// between contact and the first grid point.
    pub error: f64,
    /// Fitted decay exponent of J used for the tail beyond the grid.
    pub tail_exponent: f64,
    /// Fraction of `value` contributed by the extrapolated tail.
    pub tail_fraction: f64,
}

/// (15/2)∫ J(ζ) q(ζ) dζ over the table grid plus a fitted power-law tail.
pub fn coefficient_integral(tables: &PairTables) -> Result<CoefficientIntegral> {
    let q = tables
        .q()
        .ok_or_else(|| Error::InvalidInput("coefficient integral needs the q column".into()))?;
    integral_with_density(tables, q)
}

/// The same integral with the pair density frozen at its far value q ≡ 1;
/// isolates the hydrodynamic kernel J from the convective enhancement.
pub fn coefficient_integral_unit_q(tables: &PairTables) -> Result<CoefficientIntegral> {
    integral_with_density(tables, &vec![1.0; tables.len()])
}

fn integral_with_density(tables: &PairTables, q: &[f64]) -> Result<CoefficientIntegral> {
    let j = tables
        .j()
        .ok_or_else(|| Error::InvalidInput("coefficient integral needs the J column".into()))?;
    let zeta = tables.zeta();
    if zeta.len() < 8 {
        return Err(Error::InvalidInput("coefficient integral needs ≥ 8 grid points".into()));
    }
    let prefactor = 15.0 / 2.0;
    let jq: Vec<f64> = j.iter().zip(q).map(|(a, b)| a * b).collect();
    let main = prefactor * crate::quad::trapezoid(zeta, &jq);

    // Grid-quadrature error from coarsening to every other point.
    let coarse_z: Vec<f64> = zeta.iter().copied().step_by(2).collect();
    let coarse_jq: Vec<f64> = jq.iter().copied().step_by(2).collect();
    let quad_err = (main - prefactor * crate::quad::trapezoid(&coarse_z, &coarse_jq)).abs();

    // Tail beyond ζ_max from a power-law fit over the outer grid; the far
    // pair density is taken as its last tabulated value.
    let z_max = *zeta.last().expect("nonempty grid");
    let (zs, js): (Vec<f64>, Vec<f64>) = zeta
        .iter()
        .zip(j)
        .filter(|(z, v)| **z >= z_max / 5.0 && **v > 0.0)
        .map(|(z, v)| (*z, *v))
        .unzip();
    if zs.len() < 4 {
        return Err(Error::Fit("too few positive outer J values for a tail fit".into()));
    }
    let fit = fit_power_law(&zs, &js)?;
    if fit.r2 < 0.99 {
        return Err(Error::Fit(format!(
            "J tail fit has R² = {:.4} < 0.99; tail extrapolation unreliable",
            fit.r2
        )));
    }
    let p = -fit.slope;
    if p <= 1.5 {
        return Err(Error::Fit(format!(
            "J tail decays like ζ^{:.2}; integral tail would not converge safely",
            -p
        )));
    }
    let j_fit_end = (fit.intercept + fit.slope * z_max.ln()).exp();
    let q_end = *q.last().expect("nonempty q");
    let tail = prefactor * q_end * j_fit_end * z_max / (p - 1.0);
    let j_end = *j.last().expect("nonempty J");
    let fit_mismatch = if j_end > 0.0 {
        ((j_fit_end - j_end) / j_end).abs()
    } else {
        1.0
    };
    let tail_err = tail.abs() * (fit.slope_stderr / (p - 1.0) + fit_mismatch);

    // Unsampled lip between contact exclusion ζ = 2 and the first grid
    // point: estimated by a frozen integrand and charged to the error bar.
    let lip = prefactor * jq[0] * (zeta[0] - 2.0).max(0.0);

    let value = main + tail;
    Ok(CoefficientIntegral {
        value,
        error: quad_err + tail_err + lip.abs(),
        tail_exponent: p,
        tail_fraction: if value != 0.0 { tail / value } else { 0.0 },
    })
}

/// Viscosity-expansion coefficients: the exact dilute value a₁ = 5/2 and
/// the pair-level a₂ = 5/2 + (15/2)∫ J q dζ.
#[derive(Debug, Clone, Copy)]
pub struct ACoefficients {
    pub a1: f64,
    pub a2: f64,
    pub a2_error: f64,
}

/// Evaluate both expansion coefficients from finished pair tables.
pub fn a_coefficients(tables: &PairTables) -> Result<ACoefficients> {
    let integral = coefficient_integral(tables)?;
    Ok(ACoefficients {
        a1: 2.5,
        a2: 2.5 + integral.value,
        a2_error: integral.error,
    })
}
