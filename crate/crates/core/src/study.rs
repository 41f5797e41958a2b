//! Experiment drivers behind the command line: pillbox eigenfrequencies,
//! manufactured-solution source convergence, and the exactness suite.
//!
//! Every driver walks the `(degree, subdivision, mode)` cells one after the
//! other (the dense kernels inside a cell are parallel), collects flat
//! [`Row`]s and fits convergence rates once three or more levels exist.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use faer::{Mat, Par};
use serde::{Deserialize, Serialize};

use crate::assembly::{Assembler, Material, ModeSource, ModeSystem};
use crate::bessel::{oracle_frequencies, pillbox_frequency, CavityKind, CavityMode, PillboxSpec};
use crate::derham::{DeRhamComplex2D, Mode, Parity};
use crate::error::{Error, Result};
use crate::geometry::{BoundaryKind, BoundaryLabels, NurbsGeometry};
use crate::manufactured::Manufactured;
use crate::quadrature::default_points;
use crate::solve::{convergence_rate, solve_generalized_eig, solve_saddle_point, EigenResult};
use crate::sparse::{self, to_dense};

/// Below this share of electric energy in `E_z` a computed cavity mode is
/// classified as TE.
pub const TE_EZ_FRACTION: f64 = 0.02;
/// Tolerance of the exactness suite for `|CG|` and `|DC|`.
pub const EXACTNESS_TOL: f64 = 1e-12;
/// Acceptance bound for the discrete gauge residual.
pub const GAUGE_TOL: f64 = 1e-10;
/// Sample points of the finite-difference check of the manufactured solution.
pub const VALIDATION_POINTS: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StudyKind {
    Pillbox,
    Source,
    Exactness,
}

impl StudyKind {
    pub fn name(self) -> &'static str {
        match self {
            StudyKind::Pillbox => "pillbox",
            StudyKind::Source => "source",
            StudyKind::Exactness => "exactness",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Builtin {
    Rectangle,
    PillboxSection,
    QuarterAnnulus,
}

/// Either a built-in cross-section (with optional parameters) or a TOML
/// geometry file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<Builtin>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    /// Rectangle extent in `rho`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<[f64; 2]>,
    /// Rectangle extent in `z`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_in: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_out: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<BoundaryLabels>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PillboxDims {
    pub radius: f64,
    pub length: f64,
}

impl Default for PillboxDims {
    fn default() -> Self {
        Self { radius: 0.035, length: 0.1 }
    }
}

/// An extra cavity mode tracked through the refinement, e.g. `TE, n = 3, q = 4`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Target {
    pub kind: CavityKind,
    pub n: u32,
    pub q: u32,
}

fn default_eigs() -> usize {
    10
}
fn default_gamma() -> f64 {
    2.0
}
fn default_match_tol() -> f64 {
    1e-3
}

/// Study configuration; the TOML document mirrors the fields one to one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub study: StudyKind,
    #[serde(default)]
    pub geometry: GeometryConfig,
    pub degrees: Vec<usize>,
    pub subdivisions: Vec<usize>,
    /// Signed modes: `m > 0` symmetric, `m < 0` antisymmetric.
    pub modes: Vec<i64>,
    #[serde(default = "Material::vacuum")]
    pub material: Material,
    #[serde(default = "default_eigs")]
    pub eigs: usize,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub sequential: bool,
    #[serde(default)]
    pub pillbox: PillboxDims,
    #[serde(default)]
    pub targets: Vec<Target>,
    /// Relative distance within which a computed frequency matches an oracle one.
    #[serde(default = "default_match_tol")]
    pub match_tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

fn config_err(field: &str, message: impl Into<String>) -> Error {
    Error::Config { field: field.into(), message: message.into() }
}

impl StudyConfig {
    /// The default experiment of each kind.
    pub fn defaults(kind: StudyKind) -> Self {
        let (degrees, subdivisions, modes) = match kind {
            StudyKind::Pillbox => (vec![3], vec![8, 16, 32], vec![26]),
            StudyKind::Source => (vec![2, 3], vec![4, 8, 16, 32], vec![1, -1, 2, -2, 3, -3]),
            StudyKind::Exactness => (vec![1, 2, 3], vec![1, 2, 4], vec![1, 2, 26]),
        };
        Self {
            study: kind,
            geometry: GeometryConfig::default(),
            degrees,
            subdivisions,
            modes,
            material: Material::vacuum(),
            eigs: default_eigs(),
            gamma: default_gamma(),
            seed: 0,
            sequential: false,
            pillbox: PillboxDims::default(),
            targets: Vec::new(),
            match_tol: default_match_tol(),
            out: None,
        }
    }

    /// Parses a TOML document; errors name the offending field.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| config_err("<document>", e.to_string()))?;
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            config_err(if path.is_empty() || path == "." { "<document>" } else { &path }, e.inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.degrees.is_empty() {
            return Err(config_err("degrees", "must not be empty"));
        }
        if let Some(p) = self.degrees.iter().find(|&&p| p == 0 || p > 10) {
            return Err(config_err("degrees", format!("degree {p} outside 1..=10")));
        }
        if self.subdivisions.is_empty() {
            return Err(config_err("subdivisions", "must not be empty"));
        }
        if self.subdivisions.contains(&0) {
            return Err(config_err("subdivisions", "subdivisions must be >= 1"));
        }
        if self.modes.is_empty() {
            return Err(config_err("modes", "must not be empty"));
        }
        if self.modes.contains(&0) {
            return Err(config_err("modes", "mode 0 is not supported"));
        }
        if self.modes.iter().any(|m| m.unsigned_abs() > u32::MAX as u64) {
            return Err(config_err("modes", "mode out of range"));
        }
        if self.eigs == 0 {
            return Err(config_err("eigs", "must be >= 1"));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(config_err("gamma", format!("must be positive, got {}", self.gamma)));
        }
        if !(self.match_tol > 0.0 && self.match_tol < 1.0) {
            return Err(config_err("match_tol", format!("must lie in (0, 1), got {}", self.match_tol)));
        }
        Material::new(self.material.eps, self.material.mu).map_err(|e| config_err("material", e.to_string()))?;
        PillboxSpec::new(self.pillbox.radius, self.pillbox.length, self.material.eps, self.material.mu)
            .map_err(|e| config_err("pillbox", e.to_string()))?;
        let g = &self.geometry;
        if g.builtin.is_some() && g.file.is_some() {
            return Err(config_err("geometry", "give either `builtin` or `file`, not both"));
        }
        if self.study == StudyKind::Pillbox {
            if g.file.is_some() || !matches!(g.builtin, None | Some(Builtin::PillboxSection)) {
                return Err(config_err("geometry", "the pillbox study runs on the built-in pillbox-section"));
            }
            if self.modes.iter().any(|m| m.unsigned_abs() > crate::bessel::MAX_ORDER as u64) {
                return Err(config_err("modes", "pillbox oracle supports |m| <= 60"));
            }
        }
        for t in &self.targets {
            if t.n == 0 || (t.kind == CavityKind::Te && t.q == 0) {
                return Err(config_err("targets", format!("invalid cavity mode {t:?}")));
            }
        }
        Ok(())
    }

    fn signed_modes(&self) -> Result<Vec<Mode>> {
        self.modes.iter().map(|&m| Mode::from_signed(m)).collect()
    }

    fn pillbox_spec(&self) -> PillboxSpec {
        PillboxSpec {
            radius: self.pillbox.radius,
            length: self.pillbox.length,
            eps: self.material.eps,
            mu: self.material.mu,
        }
    }

    /// Builds the cross-section described by `geometry` (with per-study defaults).
    pub fn build_geometry(&self) -> Result<NurbsGeometry> {
        let g = &self.geometry;
        if let Some(path) = &g.file {
            return NurbsGeometry::load(path);
        }
        let builtin = g.builtin.unwrap_or(match self.study {
            StudyKind::Pillbox => Builtin::PillboxSection,
            _ => Builtin::Rectangle,
        });
        match builtin {
            Builtin::PillboxSection => NurbsGeometry::pillbox_section(self.pillbox.radius, self.pillbox.length),
            Builtin::Rectangle => {
                let rho = g.rho.unwrap_or([0.0, 1.0]);
                let z = g.z.unwrap_or(match self.study {
                    StudyKind::Source => [4.0, 5.0],
                    _ => [0.0, 1.0],
                });
                let labels = g.boundary.unwrap_or_else(|| {
                    let first = if rho[0] == 0.0 { BoundaryKind::Axis } else { BoundaryKind::Dirichlet };
                    match self.study {
                        // z = 5 is where the manufactured potential vanishes
                        StudyKind::Source => BoundaryLabels {
                            xi1_min: if rho[0] == 0.0 { BoundaryKind::Axis } else { BoundaryKind::Neumann },
                            xi1_max: BoundaryKind::Neumann,
                            xi2_min: BoundaryKind::Neumann,
                            xi2_max: BoundaryKind::Dirichlet,
                        },
                        _ => BoundaryLabels {
                            xi1_min: first,
                            xi1_max: BoundaryKind::Dirichlet,
                            xi2_min: BoundaryKind::Dirichlet,
                            xi2_max: BoundaryKind::Dirichlet,
                        },
                    }
                });
                NurbsGeometry::rectangle((rho[0], rho[1]), (z[0], z[1]), labels)
            }
            Builtin::QuarterAnnulus => {
                let labels = g.boundary.unwrap_or(BoundaryLabels {
                    xi1_min: BoundaryKind::Axis,
                    xi1_max: BoundaryKind::Dirichlet,
                    xi2_min: BoundaryKind::Dirichlet,
                    xi2_max: BoundaryKind::Dirichlet,
                });
                NurbsGeometry::quarter_annulus(g.r_in.unwrap_or(0.5), g.r_out.unwrap_or(1.0), labels)
            }
        }
    }
}

/// One measurement. `m = 0` with parity `all` marks a sum over modes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub study: String,
    pub p: usize,
    pub subdivisions: usize,
    pub m: i64,
    pub parity: String,
    pub dofs: usize,
    pub quantity: String,
    pub value: f64,
    pub reference: Option<f64>,
    pub rel_error: Option<f64>,
    pub seconds: Option<f64>,
}

/// Least-squares slope of `log(error)` against `log(h)`, `h = 1 / subdivisions`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub p: usize,
    pub m: i64,
    pub quantity: String,
    pub subdivisions: Vec<usize>,
    pub errors: Vec<f64>,
    pub rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub version: String,
    pub os: String,
    pub arch: String,
    pub threads: usize,
    pub sequential: bool,
}

impl Environment {
    pub fn current(sequential: bool) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").into(),
            os: std::env::consts::OS.into(),
            arch: std::env::consts::ARCH.into(),
            threads: if sequential { 1 } else { rayon::current_num_threads() },
            sequential,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub study: StudyKind,
    pub config: StudyConfig,
    pub environment: Environment,
    pub rows: Vec<Row>,
    pub rates: Vec<RateRow>,
    pub checks: Vec<Check>,
    /// Sum of the per-cell wall-clock times.
    pub cell_seconds: f64,
    pub total_seconds: f64,
}

impl StudyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn rows_where<'a>(&'a self, quantity: &'a str) -> impl Iterator<Item = &'a Row> + 'a {
        self.rows.iter().filter(move |r| r.quantity == quantity)
    }

    pub fn rate(&self, p: usize, m: i64, quantity: &str) -> Option<f64> {
        self.rates.iter().find(|r| r.p == p && r.m == m && r.quantity == quantity).map(|r| r.rate)
    }

    /// Writes `results.csv`, `summary.json` and `rates.txt` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let io = |source| Error::Io { path: dir.to_path_buf(), source };
        std::fs::create_dir_all(dir).map_err(io)?;
        let csv_path = dir.join("results.csv");
        let mut w = csv::Writer::from_path(&csv_path).map_err(|e| csv_error(&csv_path, e))?;
        for row in &self.rows {
            w.serialize(row).map_err(|e| csv_error(&csv_path, e))?;
        }
        w.flush().map_err(|source| Error::Io { path: csv_path.clone(), source })?;
        let json = serde_json::to_string_pretty(self).expect("report serializes");
        let json_path = dir.join("summary.json");
        std::fs::write(&json_path, json + "\n").map_err(|source| Error::Io { path: json_path, source })?;
        let rates_path = dir.join("rates.txt");
        std::fs::write(&rates_path, self.rate_table()).map_err(|source| Error::Io { path: rates_path, source })?;
        Ok(())
    }

    /// Plain-text rate table.
    pub fn rate_table(&self) -> String {
        let mut s = format!("{:<4} {:>5}  {:<28} {:>8}  levels\n", "p", "m", "quantity", "rate");
        for r in &self.rates {
            let levels: Vec<String> = r.subdivisions.iter().map(|n| n.to_string()).collect();
            s += &format!("{:<4} {:>5}  {:<28} {:>8.3}  {}\n", r.p, r.m, r.quantity, r.rate, levels.join(","));
        }
        s
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io { path: path.to_path_buf(), source },
        other => Error::Numerical(format!("CSV serialization failed: {other:?}")),
    }
}

fn parity_name(mode: Mode) -> &'static str {
    match mode.parity {
        Parity::Symmetric => "symmetric",
        Parity::Antisymmetric => "antisymmetric",
    }
}

struct Cell<'a> {
    study: &'a str,
    p: usize,
    subdivisions: usize,
    timed: bool,
}

impl Cell<'_> {
    #[allow(clippy::too_many_arguments)]
    fn row(&self, m: i64, parity: &str, dofs: usize, quantity: String, value: f64, reference: Option<f64>, seconds: f64) -> Row {
        let rel_error = reference.filter(|r| *r != 0.0).map(|r| (value - r).abs() / r.abs());
        Row {
            study: self.study.into(),
            p: self.p,
            subdivisions: self.subdivisions,
            m,
            parity: parity.into(),
            dofs,
            quantity,
            value,
            reference,
            rel_error,
            seconds: self.timed.then_some(seconds),
        }
    }
}

/// Runs the configured study, honouring the sequential flag.
pub fn run_study(config: &StudyConfig) -> Result<StudyReport> {
    config.validate()?;
    if config.sequential {
        faer::set_global_parallelism(Par::Seq);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .map_err(|e| Error::Numerical(format!("cannot build thread pool: {e}")))?;
        pool.install(|| dispatch(config))
    } else {
        faer::set_global_parallelism(Par::rayon(0));
        dispatch(config)
    }
}

fn dispatch(config: &StudyConfig) -> Result<StudyReport> {
    let start = Instant::now();
    let (mut rows, checks, cell_seconds) = match config.study {
        StudyKind::Pillbox => run_pillbox_study(config)?,
        StudyKind::Source => run_source_study(config)?,
        StudyKind::Exactness => run_exactness_suite(config)?,
    };
    rows.sort_by(|a, b| {
        (&a.study, a.p, a.subdivisions, a.m, &a.parity, &a.quantity).cmp(&(
            &b.study,
            b.p,
            b.subdivisions,
            b.m,
            &b.parity,
            &b.quantity,
        ))
    });
    let rates = fit_rates(config.study, &rows);
    let mut checks = checks;
    if config.study == StudyKind::Pillbox {
        checks.push(monotone_check(&rows));
    }
    Ok(StudyReport {
        study: config.study,
        config: config.clone(),
        environment: Environment::current(config.sequential),
        rows,
        rates,
        checks,
        cell_seconds,
        total_seconds: start.elapsed().as_secs_f64(),
    })
}

fn is_rate_quantity(study: StudyKind, q: &str) -> bool {
    match study {
        StudyKind::Pillbox => q.starts_with("omega_") || q.starts_with("target_"),
        StudyKind::Source => q == "b_error",
        StudyKind::Exactness => false,
    }
}

fn fit_rates(study: StudyKind, rows: &[Row]) -> Vec<RateRow> {
    // (p, m, quantity) -> [(subdivisions, error)]
    let mut groups: BTreeMap<(usize, i64, String), Vec<(usize, f64)>> = BTreeMap::new();
    for r in rows.iter().filter(|r| is_rate_quantity(study, &r.quantity)) {
        let err = match study {
            StudyKind::Pillbox => r.rel_error,
            _ => Some(r.value),
        };
        if let Some(e) = err {
            groups.entry((r.p, r.m, r.quantity.clone())).or_default().push((r.subdivisions, e));
        }
    }
    let mut out = Vec::new();
    for ((p, m, quantity), mut levels) in groups {
        levels.sort_by_key(|l| l.0);
        let hs: Vec<f64> = levels.iter().map(|l| 1.0 / l.0 as f64).collect();
        let es: Vec<f64> = levels.iter().map(|l| l.1).collect();
        if let Ok(rate) = convergence_rate(&hs, &es) {
            out.push(RateRow { p, m, quantity, subdivisions: levels.iter().map(|l| l.0).collect(), errors: es, rate });
        }
    }
    out
}

/// Relative frequency errors must not grow under refinement (min-max).
fn monotone_check(rows: &[Row]) -> Check {
    type Levels = Vec<(usize, f64)>;
    let mut groups: BTreeMap<(usize, i64, &str), Levels> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.quantity.starts_with("omega_") || r.quantity.starts_with("target_")) {
        if let Some(e) = r.rel_error {
            groups.entry((r.p, r.m, &r.quantity)).or_default().push((r.subdivisions, e));
        }
    }
    let mut bad = Vec::new();
    for ((p, m, q), mut v) in groups {
        v.sort_by_key(|l| l.0);
        // allow for the eigensolver's relative accuracy
        if v.windows(2).any(|w| w[1].1 > w[0].1 + 1e-9) {
            bad.push(format!("p = {p}, m = {m}, {q}"));
        }
    }
    Check {
        name: "monotone_errors".into(),
        passed: bad.is_empty(),
        detail: if bad.is_empty() { "errors decrease under refinement".into() } else { bad.join("; ") },
    }
}

fn build_complex(geometry: &NurbsGeometry, p: usize, n: usize) -> Result<DeRhamComplex2D> {
    DeRhamComplex2D::from_space(&geometry.analysis_space([p, p], [n, n])?)
}

/// Exactness report rows over `(p, mesh, m)`.
pub fn run_exactness_suite(config: &StudyConfig) -> Result<(Vec<Row>, Vec<Check>, f64)> {
    let geometry = config.build_geometry()?;
    let modes = config.signed_modes()?;
    let mut rows = Vec::new();
    let mut cell_secs = 0.0;
    let mut failures = Vec::new();
    for &p in &config.degrees {
        for &n in &config.subdivisions {
            let cell = Cell { study: "exactness", p, subdivisions: n, timed: !config.sequential };
            let complex = build_complex(&geometry, p, n)?;
            for &mode in &modes {
                let t = Instant::now();
                let rep = complex.exactness_report(mode)?;
                let secs = t.elapsed().as_secs_f64();
                let dofs: usize = rep.dims.iter().sum();
                let exact = rep.is_exact(EXACTNESS_TOL);
                if !exact {
                    failures.push(format!("p = {p}, {n}x{n}, m = {}", mode.signed()));
                }
                let (m, par) = (mode.signed(), parity_name(mode));
                let ints = [
                    ("rank_g", rep.rank_g),
                    ("dim_ker_g", rep.dim_ker_g),
                    ("rank_c", rep.rank_c),
                    ("dim_ker_c", rep.dim_ker_c),
                    ("rank_d", rep.rank_d),
                    ("dim_ker_d", rep.dim_ker_d),
                ];
                for (q, v) in ints {
                    rows.push(cell.row(m, par, dofs, q.into(), v as f64, None, secs));
                }
                rows.push(cell.row(m, par, dofs, "cg_max".into(), rep.cg_max, None, secs));
                rows.push(cell.row(m, par, dofs, "dc_max".into(), rep.dc_max, None, secs));
                let eq = rep.rank_equalities().iter().filter(|&&b| b).count();
                rows.push(cell.row(m, par, dofs, "rank_equalities".into(), eq as f64, Some(4.0), secs));
                rows.push(cell.row(m, par, dofs, "exact".into(), f64::from(u8::from(exact)), Some(1.0), secs));
                cell_secs += secs;
            }
        }
    }
    let check = Check {
        name: "exact".into(),
        passed: failures.is_empty(),
        detail: if failures.is_empty() { "all configurations exact".into() } else { failures.join("; ") },
    };
    Ok((rows, vec![check], cell_secs))
}

/// A computed cavity mode and its oracle assignment.
#[derive(Clone, Debug, PartialEq)]
pub struct MatchedMode {
    pub omega: f64,
    /// Share of the electric energy carried by `E_z`.
    pub ez_fraction: f64,
    pub kind: CavityKind,
    /// Index into the oracle list.
    pub oracle: Option<usize>,
    /// Assigned and within the matching tolerance.
    pub within_tol: bool,
}

/// Classifies computed modes as TE/TM and assigns each to the nearest
/// oracle mode of the same family, keeping only mutual nearest pairs;
/// `within_tol` marks assignments closer than `tol` (relative).
pub fn match_modes(omegas: &[f64], ez_fractions: &[f64], oracle: &[CavityMode], tol: f64) -> Result<Vec<MatchedMode>> {
    for (i, a) in oracle.iter().enumerate() {
        for b in &oracle[i + 1..] {
            if a.kind == b.kind && (a.omega - b.omega).abs() <= 1e-10 * a.omega {
                return Err(Error::AmbiguousMatch(format!(
                    "{} and {} coincide to solver tolerance",
                    a.label(),
                    b.label()
                )));
            }
        }
    }
    let kinds: Vec<CavityKind> = ez_fractions
        .iter()
        .map(|&f| if f < TE_EZ_FRACTION { CavityKind::Te } else { CavityKind::Tm })
        .collect();
    let rel = |w: f64, o: f64| (w - o).abs() / o;
    let nearest_oracle = |i: usize| {
        oracle
            .iter()
            .enumerate()
            .filter(|(_, o)| o.kind == kinds[i])
            .min_by(|a, b| rel(omegas[i], a.1.omega).total_cmp(&rel(omegas[i], b.1.omega)))
            .map(|(j, _)| j)
    };
    let nearest_computed = |j: usize| {
        (0..omegas.len())
            .filter(|&i| kinds[i] == oracle[j].kind)
            .min_by(|&a, &b| rel(omegas[a], oracle[j].omega).total_cmp(&rel(omegas[b], oracle[j].omega)))
    };
    Ok((0..omegas.len())
        .map(|i| {
            let assigned = nearest_oracle(i).filter(|&j| nearest_computed(j) == Some(i));
            let within_tol = assigned.is_some_and(|j| rel(omegas[i], oracle[j].omega) <= tol);
            MatchedMode { omega: omegas[i], ez_fraction: ez_fractions[i], kind: kinds[i], oracle: assigned, within_tol }
        })
        .collect())
}

fn ez_fractions(eig: &EigenResult, mz: &Mat<f64>) -> Vec<f64> {
    (0..eig.values.len())
        .map(|c| {
            let v = eig.vectors.col(c);
            let mv = mz * v;
            // columns are M-orthonormal
            (v.transpose() * mv).max(0.0)
        })
        .collect()
}

/// Pillbox eigenfrequencies against the Bessel oracle.
pub fn run_pillbox_study(config: &StudyConfig) -> Result<(Vec<Row>, Vec<Check>, f64)> {
    let geometry = config.build_geometry()?;
    let spec = config.pillbox_spec();
    let modes = config.signed_modes()?;
    let mut rows = Vec::new();
    let mut cell_secs = 0.0;
    let mut spurious_cells = Vec::new();
    let mut unmatched_cells = Vec::new();
    for &p in &config.degrees {
        for &n in &config.subdivisions {
            let cell = Cell { study: "pillbox", p, subdivisions: n, timed: !config.sequential };
            let complex = build_complex(&geometry, p, n)?;
            let asm = Assembler::new(&geometry, &complex, default_points(p))?;
            for &mode in &modes {
                let t = Instant::now();
                let order = mode.order;
                // oracle list: the first `eigs + 1` modes and everything up to the targets
                let targets: Vec<(Target, f64)> = config
                    .targets
                    .iter()
                    .map(|t| Ok((*t, pillbox_frequency(t.kind, order, t.n, t.q, &spec)?)))
                    .collect::<Result<_>>()?;
                let top = targets.iter().map(|t| t.1).fold(0.0, f64::max);
                let mut count = config.eigs + 1;
                let mut oracle = oracle_frequencies(order, count, &spec)?;
                while oracle.last().is_some_and(|o| o.omega <= top * (1.0 + 2.0 * config.match_tol)) {
                    count += 4;
                    oracle = oracle_frequencies(order, count, &spec)?;
                }
                let threshold = oracle[config.eigs].omega;
                let wanted = oracle
                    .iter()
                    .filter(|o| o.omega <= threshold.max(top) * (1.0 + 2.0 * config.match_tol))
                    .count()
                    + 4;

                let sys = ModeSystem::assemble(&asm, mode, config.material, None, false)?;
                let dofs = sys.bc.free_z1.len();
                let a = to_dense(&sys.a);
                let mm = to_dense(&sys.m);
                let mz_full = asm.mass_z1_components(mode, config.material.eps, [false, true, false]);
                let mz = to_dense(&sparse::select(&mz_full, &sys.bc.free_z1, &sys.bc.free_z1));
                let eig = match solve_generalized_eig(&a, &mm, wanted.min(dofs)) {
                    Err(Error::TooManyEigenpairs { available, .. }) if available > 0 => {
                        solve_generalized_eig(&a, &mm, available)?
                    }
                    other => other?,
                };
                let omegas: Vec<f64> = eig.values.iter().map(|l| l.sqrt()).collect();
                let fz = ez_fractions(&eig, &mz);
                let matched = match_modes(&omegas, &fz, &oracle, config.match_tol)?;
                let secs = t.elapsed().as_secs_f64();
                let (m, par) = (mode.signed(), parity_name(mode));

                let find = |j: usize| matched.iter().find(|c| c.oracle == Some(j));
                let mut unmatched = 0;
                for (j, o) in oracle.iter().take(config.eigs).enumerate() {
                    let q = format!("omega_{:02}_{}", j + 1, o.label());
                    match find(j) {
                        Some(c) => rows.push(cell.row(m, par, dofs, q, c.omega, Some(o.omega), secs)),
                        None => {
                            unmatched += 1;
                            rows.push(cell.row(m, par, dofs, q, f64::NAN, Some(o.omega), secs));
                        }
                    }
                }
                for (t, w) in &targets {
                    let j = oracle
                        .iter()
                        .position(|o| o.kind == t.kind && o.n == t.n && o.q == t.q)
                        .expect("oracle list covers the targets");
                    let q = format!("target_{}", oracle[j].label());
                    let value = find(j).map_or(f64::NAN, |c| c.omega);
                    if value.is_nan() {
                        unmatched += 1;
                    }
                    rows.push(cell.row(m, par, dofs, q, value, Some(*w), secs));
                }
                let spurious = matched.iter().filter(|c| c.omega < threshold && !c.within_tol).count();
                if spurious > 0 {
                    spurious_cells.push(format!("p = {p}, n = {n}, m = {m}: {spurious}"));
                }
                if unmatched > 0 {
                    unmatched_cells.push(format!("p = {p}, n = {n}, m = {m}: {unmatched}"));
                }
                let res_max = eig.residuals.iter().copied().fold(0.0, f64::max);
                rows.push(cell.row(m, par, dofs, "spurious_count".into(), spurious as f64, Some(0.0), secs));
                rows.push(cell.row(m, par, dofs, "unmatched_count".into(), unmatched as f64, Some(0.0), secs));
                rows.push(cell.row(m, par, dofs, "kernel_dim".into(), eig.kernel_dim as f64, Some(sys.bc.free_z0.len() as f64), secs));
                rows.push(cell.row(m, par, dofs, "residual_max".into(), res_max, None, secs));
                rows.push(cell.row(m, par, dofs, "gram_deviation".into(), eig.gram_deviation, None, secs));
                cell_secs += secs;
            }
        }
    }
    let checks = vec![
        Check {
            name: "no_spurious_modes".into(),
            passed: spurious_cells.is_empty(),
            detail: if spurious_cells.is_empty() { "none".into() } else { spurious_cells.join("; ") },
        },
        Check {
            name: "all_matched".into(),
            passed: unmatched_cells.is_empty(),
            detail: if unmatched_cells.is_empty() { "all oracle modes matched".into() } else { unmatched_cells.join("; ") },
        },
    ];
    Ok((rows, checks, cell_secs))
}

/// The manufactured solution as a load: `J` in the interior and `H x n` on
/// natural edges.
pub struct ManufacturedSource {
    pub solution: Manufactured,
}

impl ModeSource for ManufacturedSource {
    fn current(&self, mode: Mode, x: [f64; 2]) -> [f64; 3] {
        self.solution.current(mode, x[0], x[1])
    }

    fn surface(&self, mode: Mode, x: [f64; 2], n: [f64; 2]) -> [f64; 3] {
        let [hr, hz, ht] = self.solution.field_strength(mode, x[0], x[1]);
        [ht * n[1], -ht * n[0], hz * n[0] - hr * n[1]]
    }
}

/// Manufactured-solution convergence of the mixed magnetostatic problem.
pub fn run_source_study(config: &StudyConfig) -> Result<(Vec<Row>, Vec<Check>, f64)> {
    let solution = Manufactured::new(config.gamma, config.material.mu)?;
    solution.validate(config.seed, VALIDATION_POINTS)?;
    let source = ManufacturedSource { solution };
    let geometry = config.build_geometry()?;
    let modes = config.signed_modes()?;
    let mut rows = Vec::new();
    let mut cell_secs = 0.0;
    let mut gauge_worst: f64 = 0.0;
    for &p in &config.degrees {
        for &n in &config.subdivisions {
            let cell = Cell { study: "source", p, subdivisions: n, timed: !config.sequential };
            let complex = build_complex(&geometry, p, n)?;
            let asm = Assembler::new(&geometry, &complex, default_points(p))?;
            let err_asm = Assembler::new(&geometry, &complex, default_points(p) + 2)?;
            let mut total_sq = 0.0;
            let mut norm_sq = 0.0;
            let mut total_secs = 0.0;
            let mut total_dofs = 0;
            for &mode in &modes {
                let t = Instant::now();
                let sys = ModeSystem::assemble(&asm, mode, config.material, Some(&source), true)?;
                let dofs = sys.bc.free_z1.len() + sys.bc.free_z0.len();
                let f = sys.f.as_ref().expect("source supplied");
                let sol = solve_saddle_point(&to_dense(&sys.a), &to_dense(&sys.b), f)?;
                let u = sys.bc.expand_z1(complex.dims()[1], &sol.u);
                let b_h = sparse::matvec(&complex.curl, &u);
                let exact = |x: [f64; 2]| source.solution.induction(mode, x[0], x[1]);
                let err = err_asm.error_sq(2, mode, &b_h, &exact)?;
                let nrm = err_asm.norm_sq(&exact);
                if !err.is_finite() {
                    return Err(Error::Numerical(format!("non-finite error for mode {}", mode.signed())));
                }
                let secs = t.elapsed().as_secs_f64();
                total_sq += err;
                norm_sq += nrm;
                total_secs += secs;
                total_dofs += dofs;
                gauge_worst = gauge_worst.max(sol.gauge_raw);
                let (m, par) = (mode.signed(), parity_name(mode));
                let reference = (nrm > 0.0).then(|| nrm.sqrt());
                let mut row = cell.row(m, par, dofs, "b_error".into(), err.sqrt(), None, secs);
                row.reference = reference;
                row.rel_error = reference.map(|r| err.sqrt() / r);
                rows.push(row);
                rows.push(cell.row(m, par, dofs, "gauge_raw".into(), sol.gauge_raw, None, secs));
                rows.push(cell.row(m, par, dofs, "gauge_scaled".into(), sol.gauge, None, secs));
                rows.push(cell.row(m, par, dofs, "residual".into(), sol.residual_primal, None, secs));
                cell_secs += secs;
            }
            let mut row = cell.row(0, "all", total_dofs, "b_error".into(), total_sq.sqrt(), None, total_secs);
            row.reference = Some(norm_sq.sqrt());
            row.rel_error = (norm_sq > 0.0).then(|| (total_sq / norm_sq).sqrt());
            rows.push(row);
        }
    }
    let check = Check {
        name: "gauge".into(),
        passed: gauge_worst <= GAUGE_TOL,
        detail: format!("max |B^T u| / |u| = {gauge_worst:.3e}"),
    };
    Ok((rows, vec![check], cell_secs))
}
