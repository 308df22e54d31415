//! The `convert`, `validate` and `pdf` subcommands. Each returns the text
//! it prints on stdout.

use std::fmt::Write as _;
use std::path::Path;

use me2ph::pipeline::ConversionReport;
use me2ph::rep::moments;
use me2ph::spectral::{analyze_spectrum, check_c_conditions, check_dec, minimal_representation, SpectralData};
use me2ph::tail::Evaluator;
use me2ph::validate::{
    check_equivalence, check_markovian, check_markovian_ph, check_positive_density, monte_carlo_check,
    DensityModel, EquivalenceVerdict, MonteCarloReport,
};
use me2ph::{convert, ConvertOptions, MERep, PHRep, PaperBounds, ToleranceConfig};
use serde::Serialize;

use crate::io::{self, Model};
use crate::Failure;

/// PH models up to this order are also checked through their dense form.
const DENSE_CHECK_ORDER: usize = 400;

pub struct ConvertArgs<'a> {
    pub input: &'a Path,
    pub output: &'a Path,
    pub paper_bounds: bool,
    pub max_order: usize,
}

pub fn cmd_convert(args: &ConvertArgs) -> Result<String, Failure> {
    let file = io::read_me(args.input)?;
    let rep = file.to_rep()?;
    let opts = ConvertOptions {
        tol: file.tolerances(),
        paper_bounds: args.paper_bounds.then(PaperBounds::default),
        max_order: args.max_order,
    };
    let conv = convert(&rep, &opts)?;
    io::write_ph(args.output, &conv.ph)?;
    Ok(format_report(&conv.report))
}

fn join<T: ToString>(items: impl IntoIterator<Item = T>) -> String {
    items.into_iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

/// One `key=value` line per quantity, in pipeline order.
pub fn format_report(r: &ConversionReport) -> String {
    let mut s = String::new();
    let spectrum = |terms: &[(String, usize)]| join(terms.iter().map(|(z, m)| format!("{z}x{m}")));
    let _ = writeln!(s, "input_order={}", r.input_order);
    let _ = writeln!(s, "spectrum={}", spectrum(&r.spectrum));
    let _ = writeln!(s, "dropped={}", spectrum(&r.dropped));
    let _ = writeln!(s, "minimal_order={}", r.minimal_order);
    let _ = writeln!(s, "lambda1={}", r.lambda1);
    let _ = writeln!(s, "n1={}", r.n1);
    if let Some((k, v)) = r.first_derivative {
        let _ = writeln!(s, "first_nonzero_derivative={k}:{v}");
    }
    let _ = writeln!(s, "l={}", r.deconv.map_or(0, |d| d.l));
    if let Some(d) = r.deconv {
        let _ = writeln!(s, "mu={}", d.mu);
    }
    for b in &r.blocks {
        let _ = writeln!(s, "block=b:{},sigma:{},z:{}", b.b, b.sigma, b.z);
    }
    let _ = writeln!(s, "gamma={}", join(&r.gamma));
    if let Some(b) = &r.bounds {
        let _ = writeln!(s, "tau={}", b.tau);
        let _ = writeln!(s, "g={}", b.g);
        let _ = writeln!(s, "gamma_norm={}", b.gamma_norm);
        let _ = writeln!(s, "eps1={}", b.eps1);
        let _ = writeln!(s, "eps2={}", b.eps2);
        let _ = writeln!(s, "lambda_prime={}", b.lambda_prime);
        let _ = writeln!(s, "lambda_dprime={}", b.lambda_dprime);
        let _ = writeln!(s, "lambda={}", b.lambda);
        let _ = writeln!(s, "n={}", b.n);
    }
    let _ = writeln!(s, "final_order={}", r.final_order);
    s
}

/// Density of an ME file through its spectral expansion, which stays
/// accurate when the input carries unstable modes that do not contribute.
struct MEModel {
    spec: SpectralData,
    minimal: MERep,
}

impl MEModel {
    fn new(rep: &MERep, tol: &ToleranceConfig) -> Result<Self, Failure> {
        rep.check_valid(tol)?;
        let spec = analyze_spectrum(rep, tol)?;
        let minimal = minimal_representation(&spec)?;
        Ok(Self { spec, minimal })
    }
}

impl DensityModel for MEModel {
    fn pdf_many(&self, xs: &[f64]) -> me2ph::Result<Vec<f64>> {
        Ok(xs.iter().map(|&x| self.spec.pdf(x)).collect())
    }

    fn moments(&self, k_max: usize) -> me2ph::Result<Vec<f64>> {
        moments(&self.minimal, k_max)
    }
}

enum Loaded {
    ME { rep: MERep, model: MEModel, tol: ToleranceConfig },
    PH(PHRep),
}

impl Loaded {
    fn read(path: &Path) -> Result<Self, Failure> {
        Ok(match io::read_model(path)? {
            Model::ME(file) => {
                let tol = file.tolerances();
                let rep = file.to_rep()?;
                let model = MEModel::new(&rep, &tol)?;
                Loaded::ME { rep, model, tol }
            }
            Model::PH(ph) => Loaded::PH(ph),
        })
    }

    fn density(&self) -> &dyn DensityModel {
        match self {
            Loaded::ME { model, .. } => model,
            Loaded::PH(ph) => ph,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Verdict {
    pub model: &'static str,
    pub order: usize,
    pub markovian: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub violation: Option<String>,
    /// `None` for PH models too large to check densely.
    pub dec: Option<bool>,
    pub positive_density: Option<bool>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub equivalence: Option<EquivalenceVerdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub monte_carlo: Option<MonteCarloReport>,
    pub pass: bool,
}

pub struct ValidateArgs<'a> {
    pub input: &'a Path,
    pub against: Option<&'a Path>,
    pub grid: Vec<f64>,
    pub tol: f64,
    pub seed: u64,
    pub samples: usize,
}

fn spectral_checks(rep: &MERep, tol: &ToleranceConfig, diagnostics: &mut Vec<String>) -> Result<(bool, bool), Failure> {
    let spec = analyze_spectrum(rep, tol)?;
    let dec = check_dec(&spec);
    if !dec.holds {
        diagnostics.push(dec.to_string());
    }
    let minimal = minimal_representation(&spec)?;
    let cond = check_c_conditions(&minimal, &spec, tol);
    let pos = check_positive_density(&minimal, &spec, tol);
    let positive = cond.c4_nonnegative_start && pos.pass;
    if !positive {
        diagnostics.push(pos.describe());
    }
    Ok((dec.holds, positive))
}

pub fn cmd_validate(args: &ValidateArgs) -> Result<String, Failure> {
    let loaded = Loaded::read(args.input)?;
    let mut diagnostics = Vec::new();
    let mut v = match &loaded {
        Loaded::ME { rep, tol, .. } => {
            let m = check_markovian(rep, tol);
            let (dec, positive) = spectral_checks(rep, tol, &mut diagnostics)?;
            Verdict {
                model: "me",
                order: rep.order(),
                markovian: m.markovian,
                violation: m.violation,
                dec: Some(dec),
                positive_density: Some(positive),
                diagnostics: Vec::new(),
                equivalence: None,
                monte_carlo: None,
                pass: dec && positive,
            }
        }
        Loaded::PH(ph) => {
            let tol = ToleranceConfig::default();
            let m = check_markovian_ph(ph, &tol);
            let (dec, positive) = if ph.order() <= DENSE_CHECK_ORDER {
                let dense = ph.to_dense(DENSE_CHECK_ORDER)?;
                let (d, p) = spectral_checks(&dense, &tol, &mut diagnostics)?;
                (Some(d), Some(p))
            } else {
                (None, None)
            };
            let monte_carlo = if args.samples > 0 && m.markovian {
                Some(monte_carlo_check(ph, args.samples, args.seed, &tol)?)
            } else {
                None
            };
            Verdict {
                model: "ph",
                order: ph.order(),
                markovian: m.markovian,
                violation: m.violation,
                pass: m.markovian
                    && dec != Some(false)
                    && positive != Some(false)
                    && monte_carlo.as_ref().is_none_or(|r| r.pass),
                dec,
                positive_density: positive,
                diagnostics: Vec::new(),
                equivalence: None,
                monte_carlo,
            }
        }
    };
    if let Some(other) = args.against {
        let other = Loaded::read(other)?;
        let eq = check_equivalence(loaded.density(), other.density(), &args.grid, args.tol)?;
        v.pass &= eq.pass;
        v.equivalence = Some(eq);
    }
    v.diagnostics = diagnostics;
    Ok(serde_json::to_string_pretty(&v).expect("serializable") + "\n")
}

pub fn cmd_pdf(input: &Path, grid: &[f64]) -> Result<String, Failure> {
    let values = match Loaded::read(input)? {
        Loaded::ME { model, .. } => model.pdf_many(grid)?,
        Loaded::PH(ph) => {
            let x_max = grid.iter().copied().fold(0.0, f64::max);
            Evaluator::new(&ph, x_max)?.pdf_many(grid)?
        }
    };
    let mut s = String::from("x,pdf\n");
    for (x, f) in grid.iter().zip(values) {
        let _ = writeln!(s, "{x},{f}");
    }
    Ok(s)
}
