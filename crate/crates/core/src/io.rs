//! File formats: the problem JSON, triples and certificates, CSV tables and
//! the run manifest. Floats are written with 17 significant digits so that
//! every value round-trips exactly; output is byte-for-byte deterministic.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::approximation::{DiscreteTriple, Mesh, DEFAULT_ILM_EPSILON};
use crate::costs::{RunningCost, TerminalCost};
use crate::dynamics::{FieldKind, PerturbationField, ProblemSpec};
use crate::error::{Error, Result};
use crate::geometry::GeneratorSet;
use crate::optimality::{CertificateMeta, DualCertificate};
use crate::optimizer::StudyRow;
use crate::path::{ContinuousPath, PathLike};
use crate::{Matrix, Vector};

/// Formats a float with 17 significant digits.
pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

/// JSON formatter writing every float with 17 significant digits and
/// non-finite values as `null`.
#[derive(Debug, Default, Clone, Copy)]
pub struct PreciseFormatter;

impl serde_json::ser::Formatter for PreciseFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        if value.is_finite() {
            writer.write_all(format!("{value:.16e}").as_bytes())
        } else {
            writer.write_all(b"null")
        }
    }
}

/// Serializes to JSON with [`PreciseFormatter`] and a trailing newline.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, PreciseFormatter);
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, to_json_string(value)?)?;
    Ok(())
}

fn rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().cloned().collect()).collect()
}

fn vecs(v: &[Vector]) -> Vec<Vec<f64>> {
    v.iter().map(|e| e.as_slice().to_vec()).collect()
}

fn to_vectors(v: &[Vec<f64>]) -> Vec<Vector> {
    v.iter().map(|e| Vector::from_vec(e.clone())).collect()
}

fn matrix(field: &str, data: &[Vec<f64>], shape: (usize, usize)) -> Result<Matrix> {
    if data.len() != shape.0 || data.iter().any(|r| r.len() != shape.1) {
        return Err(Error::InvalidSpec { field: field.into(), reason: format!("expected a {}×{} matrix", shape.0, shape.1) });
    }
    Ok(Matrix::from_fn(shape.0, shape.1, |r, c| data[r][c]))
}

fn vector(field: &str, data: &[f64], len: usize) -> Result<Vector> {
    if data.len() != len {
        return Err(Error::InvalidSpec { field: field.into(), reason: format!("expected length {len}, got {}", data.len()) });
    }
    Ok(Vector::from_column_slice(data))
}

/// Affine perturbation `f(x, a) = A x + B a + c` with its constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationFile {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    pub c: Vec<f64>,
    pub lipschitz: f64,
    pub growth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TerminalFile {
    #[serde(rename = "Q")]
    pub q: Vec<Vec<f64>>,
    pub target: Vec<f64>,
}

/// Quadratic running cost, either diagonal or full.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RunningFile {
    Diagonal {
        diagonal: Vec<f64>,
    },
    Full {
        hessian: Vec<Vec<f64>>,
        linear: Vec<f64>,
        #[serde(default)]
        constant: f64,
    },
}

/// Nodes of a piecewise-linear reference trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceFile {
    pub times: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
    pub a: Vec<Vec<f64>>,
}

/// On-disk problem description; see `docs/schema.md`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    #[serde(default)]
    pub name: String,
    pub state_dim: usize,
    pub control_dim: usize,
    pub generators: Vec<Vec<f64>>,
    pub perturbation: PerturbationFile,
    pub x0: Vec<f64>,
    pub u0: Vec<f64>,
    pub r: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub tau: f64,
    pub terminal_cost: TerminalFile,
    pub running_cost: RunningFile,
    #[serde(default = "default_ilm_epsilon")]
    pub ilm_epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceFile>,
}

fn default_ilm_epsilon() -> f64 {
    DEFAULT_ILM_EPSILON
}

/// Parsed problem with its optional reference trajectory.
#[derive(Debug, Clone)]
pub struct LoadedProblem {
    pub name: String,
    pub spec: ProblemSpec,
    pub reference: Option<ContinuousPath>,
}

impl ProblemFile {
    pub fn to_problem(&self) -> Result<LoadedProblem> {
        let n = self.state_dim;
        let d = self.control_dim;
        if self.generators.is_empty() {
            return Err(Error::InvalidSpec { field: "generators".into(), reason: "at least one generator is required".into() });
        }
        for (i, g) in self.generators.iter().enumerate() {
            vector(&format!("generators[{i}]"), g, n)?;
        }
        let generators = GeneratorSet::new(self.generators.iter().map(|g| Vector::from_column_slice(g)).collect())?;
        let p = &self.perturbation;
        let field = PerturbationField::affine(
            matrix("perturbation.A", &p.a, (n, n))?,
            matrix("perturbation.B", &p.b, (n, d))?,
            vector("perturbation.c", &p.c, n)?,
            p.lipschitz,
            p.growth,
        )?;
        let terminal = TerminalCost::Quadratic {
            q: matrix("terminal_cost.Q", &self.terminal_cost.q, (n, n))?,
            target: vector("terminal_cost.target", &self.terminal_cost.target, n)?,
        };
        let len = 2 * (2 * n + d);
        let running = match &self.running_cost {
            RunningFile::Diagonal { diagonal } => {
                vector("running_cost.diagonal", diagonal, len)?;
                RunningCost::diagonal(diagonal)
            }
            RunningFile::Full { hessian, linear, constant } => RunningCost::Quadratic {
                hessian: matrix("running_cost.hessian", hessian, (len, len))?,
                linear: vector("running_cost.linear", linear, len)?,
                constant: *constant,
            },
        };
        let spec = ProblemSpec {
            generators,
            field,
            x0: vector("x0", &self.x0, n)?,
            u0: vector("u0", &self.u0, n)?,
            control_dim: d,
            radius: self.r,
            horizon: self.horizon,
            tau: self.tau,
            terminal,
            running,
            ilm_epsilon: self.ilm_epsilon,
        };
        spec.validate()?;
        let reference = match &self.reference {
            None => None,
            Some(r) => {
                let check = |name: &str, v: &[Vec<f64>], len: usize| -> Result<Vec<Vector>> {
                    v.iter().enumerate().map(|(i, e)| vector(&format!("reference.{name}[{i}]"), e, len)).collect()
                };
                let path = ContinuousPath::new(r.times.clone(), check("x", &r.x, n)?, check("u", &r.u, n)?, check("a", &r.a, d)?)?;
                if (path.horizon() - self.horizon).abs() > 1e-12 {
                    return Err(Error::InvalidSpec { field: "reference.times".into(), reason: "must end at T".into() });
                }
                Some(path)
            }
        };
        Ok(LoadedProblem { name: self.name.clone(), spec, reference })
    }

    /// File form of an affine-quadratic problem.
    pub fn from_problem(name: &str, spec: &ProblemSpec, reference: Option<&ContinuousPath>) -> Result<Self> {
        let FieldKind::Affine { a, b, c } = &spec.field.kind else {
            return Err(Error::Precondition("only affine perturbations can be written".into()));
        };
        let TerminalCost::Quadratic { q, target } = &spec.terminal else {
            return Err(Error::Precondition("only quadratic terminal costs can be written".into()));
        };
        let RunningCost::Quadratic { hessian, linear, constant } = &spec.running else {
            return Err(Error::Precondition("only quadratic running costs can be written".into()));
        };
        let is_diagonal = hessian.iter().enumerate().all(|(i, v)| *v == 0.0 || i % (hessian.nrows() + 1) == 0)
            && linear.iter().all(|v| *v == 0.0)
            && *constant == 0.0;
        let running_cost = if is_diagonal {
            RunningFile::Diagonal { diagonal: hessian.diagonal().iter().cloned().collect() }
        } else {
            RunningFile::Full { hessian: rows(hessian), linear: linear.as_slice().to_vec(), constant: *constant }
        };
        Ok(Self {
            name: name.into(),
            state_dim: spec.state_dim(),
            control_dim: spec.control_dim,
            generators: vecs(spec.generators.generators()),
            perturbation: PerturbationFile { a: rows(a), b: rows(b), c: c.as_slice().to_vec(), lipschitz: spec.field.lipschitz, growth: spec.field.growth },
            x0: spec.x0.as_slice().to_vec(),
            u0: spec.u0.as_slice().to_vec(),
            r: spec.radius,
            horizon: spec.horizon,
            tau: spec.tau,
            terminal_cost: TerminalFile { q: rows(q), target: target.as_slice().to_vec() },
            running_cost,
            ilm_epsilon: spec.ilm_epsilon,
            reference: reference.map(|p| ReferenceFile {
                times: p.times.clone(),
                x: vecs(p.nodes(crate::path::Component::State)),
                u: vecs(p.nodes(crate::path::Component::Shift)),
                a: vecs(p.nodes(crate::path::Component::Control)),
            }),
        })
    }
}

pub fn parse_problem(text: &str) -> Result<LoadedProblem> {
    let file: ProblemFile = serde_json::from_str(text)?;
    file.to_problem()
}

pub fn load_problem(path: &Path) -> Result<LoadedProblem> {
    parse_problem(&std::fs::read_to_string(path)?)
}

/// On-disk discrete triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TripleFile {
    pub k: usize,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub tau: f64,
    pub times: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
    pub a: Vec<Vec<f64>>,
}

impl From<&DiscreteTriple> for TripleFile {
    fn from(z: &DiscreteTriple) -> Self {
        Self { k: z.mesh.k, horizon: z.mesh.horizon, tau: z.mesh.tau, times: z.mesh.times(), x: vecs(&z.x), u: vecs(&z.u), a: vecs(&z.a) }
    }
}

impl TripleFile {
    pub fn to_triple(&self) -> Result<DiscreteTriple> {
        DiscreteTriple::new(Mesh::new(self.horizon, self.k, self.tau)?, to_vectors(&self.x), to_vectors(&self.u), to_vectors(&self.a))
    }
}

/// On-disk dual certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateFile {
    pub lambda: f64,
    pub eta: Vec<Vec<f64>>,
    pub xi: Vec<f64>,
    pub p_x: Vec<Vec<f64>>,
    pub p_u: Vec<Vec<f64>>,
    pub p_a: Vec<Vec<f64>>,
    pub gamma: Vec<Vec<f64>>,
    pub w_x: Vec<Vec<f64>>,
    pub w_u: Vec<Vec<f64>>,
    pub w_a: Vec<Vec<f64>>,
    pub v_x: Vec<Vec<f64>>,
    pub v_u: Vec<Vec<f64>>,
    pub v_a: Vec<Vec<f64>>,
    pub theta_x: Vec<Vec<f64>>,
    pub theta_u: Vec<Vec<f64>>,
    pub theta_a: Vec<Vec<f64>>,
    pub chi: Vec<Vec<f64>>,
    #[serde(default)]
    pub meta: CertificateMeta,
}

impl From<&DualCertificate> for CertificateFile {
    fn from(c: &DualCertificate) -> Self {
        Self {
            lambda: c.lambda,
            eta: vecs(&c.eta),
            xi: c.xi.clone(),
            p_x: vecs(&c.p_x),
            p_u: vecs(&c.p_u),
            p_a: vecs(&c.p_a),
            gamma: vecs(&c.gamma),
            w_x: vecs(&c.w_x),
            w_u: vecs(&c.w_u),
            w_a: vecs(&c.w_a),
            v_x: vecs(&c.v_x),
            v_u: vecs(&c.v_u),
            v_a: vecs(&c.v_a),
            theta_x: vecs(&c.theta_x),
            theta_u: vecs(&c.theta_u),
            theta_a: vecs(&c.theta_a),
            chi: vecs(&c.chi),
            meta: c.meta.clone(),
        }
    }
}

impl From<&CertificateFile> for DualCertificate {
    fn from(c: &CertificateFile) -> Self {
        Self {
            lambda: c.lambda,
            eta: to_vectors(&c.eta),
            xi: c.xi.clone(),
            p_x: to_vectors(&c.p_x),
            p_u: to_vectors(&c.p_u),
            p_a: to_vectors(&c.p_a),
            gamma: to_vectors(&c.gamma),
            w_x: to_vectors(&c.w_x),
            w_u: to_vectors(&c.w_u),
            w_a: to_vectors(&c.w_a),
            v_x: to_vectors(&c.v_x),
            v_u: to_vectors(&c.v_u),
            v_a: to_vectors(&c.v_a),
            theta_x: to_vectors(&c.theta_x),
            theta_u: to_vectors(&c.theta_u),
            theta_a: to_vectors(&c.theta_a),
            chi: to_vectors(&c.chi),
            meta: c.meta.clone(),
        }
    }
}

pub fn load_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

/// Writes `t, x_1.., u_1.., a_1..` per node.
pub fn write_trajectory_csv(path: &Path, times: &[f64], x: &[Vector], u: &[Vector], a: &[Vector]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["t".to_string()];
    for (name, v) in [("x", x), ("u", u), ("a", a)] {
        header.extend((1..=v.first().map_or(0, |e| e.len())).map(|i| format!("{name}_{i}")));
    }
    w.write_record(&header)?;
    for j in 0..times.len() {
        let mut row = vec![format_float(times[j])];
        for v in [x, u, a] {
            row.extend(v[j].iter().map(|e| format_float(*e)));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_triple_csv(path: &Path, z: &DiscreteTriple) -> Result<()> {
    write_trajectory_csv(path, &z.mesh.times(), &z.x, &z.u, &z.a)
}

pub fn write_path_csv(path: &Path, p: &ContinuousPath) -> Result<()> {
    use crate::path::Component;
    write_trajectory_csv(path, &p.times, p.nodes(Component::State), p.nodes(Component::Shift), p.nodes(Component::Control))
}

/// Convergence table with one row per `k`.
pub fn write_convergence_csv(path: &Path, rows: &[StudyRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["k", "J_k", "convergence_sum", "max_state_gap", "proximity", "converged"])?;
    for r in rows {
        w.write_record([
            r.k.to_string(),
            format_float(r.j_value),
            format_float(r.convergence_sum),
            format_float(r.max_state_gap),
            format_float(r.proximity),
            r.converged.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Record of one command-line run, written as `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub problem: Option<String>,
    pub parameters: serde_json::Map<String, serde_json::Value>,
    pub outputs: Vec<String>,
    pub status: String,
    pub exit_code: i32,
}

impl RunManifest {
    pub fn new(command: &str, problem: Option<&Path>) -> Self {
        Self {
            tool: "sweep".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            problem: problem.map(|p| p.display().to_string()),
            parameters: serde_json::Map::new(),
            outputs: Vec::new(),
            status: "ok".into(),
            exit_code: 0,
        }
    }

    pub fn param(&mut self, key: &str, value: impl Into<serde_json::Value>) {
        self.parameters.insert(key.into(), value.into());
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_json(&dir.join("manifest.json"), self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::example81::{continuous_minimizer, example81_solve, problem, Example81Mode};

    #[test]
    fn floats_keep_seventeen_digits() {
        let v = 0.1 + 0.2;
        let s = format_float(v);
        assert_eq!(s.parse::<f64>().unwrap(), v);
        assert_eq!(to_json_string(&vec![v]).unwrap().trim(), format!("[{s}]"));
    }

    #[test]
    fn problem_round_trip() {
        let file = ProblemFile::from_problem("worked example", &problem(), Some(&continuous_minimizer())).unwrap();
        let text = to_json_string(&file).unwrap();
        let back: ProblemFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back, file);
        let loaded = back.to_problem().unwrap();
        assert!(loaded.reference.is_some());
    }

    #[test]
    fn certificate_round_trip() {
        let sol = example81_solve(3, &Example81Mode::FixedPoint).unwrap();
        let file = CertificateFile::from(&sol.certificate);
        let back: CertificateFile = serde_json::from_str(&to_json_string(&file).unwrap()).unwrap();
        assert_eq!(DualCertificate::from(&back), sol.certificate);
        let triple = TripleFile::from(&sol.triple);
        let back: TripleFile = serde_json::from_str(&to_json_string(&triple).unwrap()).unwrap();
        assert_eq!(back.to_triple().unwrap(), sol.triple);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let mut value = serde_json::to_value(ProblemFile::from_problem("p", &problem(), None).unwrap()).unwrap();
        value["bogus"] = serde_json::json!(1);
        assert!(serde_json::from_value::<ProblemFile>(value).is_err());
    }
}
