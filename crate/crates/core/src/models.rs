//! The flood model of the case study and black-box model adapters.

use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{Error, ModelError, Result};
use crate::expr::Expr;

/// A scalar model `y = G(x)` of `dims` inputs.
pub trait Model: Send + Sync {
    fn dims(&self) -> usize;
    fn eval(&self, x: &[f64]) -> Result<f64, ModelError>;
}

/// Water height `H = (J / (300 Ks sqrt((Zm - Zv)/5000)))^{3/5}`.
pub fn hydraulic_height(j: f64, ks: f64, zv: f64, zm: f64) -> Result<f64, ModelError> {
    let input = [j, ks, zv, zm];
    if !(zm > zv) {
        return Err(ModelError::new("upstream level must exceed downstream level", &input));
    }
    if !(ks > 0.0) {
        return Err(ModelError::new("Strickler coefficient must be positive", &input));
    }
    if !(j >= 0.0) {
        return Err(ModelError::new("flow rate must be nonnegative", &input));
    }
    Ok((j / (300.0 * ks * ((zm - zv) / 5000.0).sqrt())).powf(0.6))
}

/// `J` needed to reach height `h`: the inverse of [`hydraulic_height`] in `J`.
pub fn flow_for_height(h: f64, ks: f64, zv: f64, zm: f64) -> f64 {
    300.0 * ks * ((zm - zv) / 5000.0).sqrt() * h.max(0.0).powf(5.0 / 3.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hydraulic {
    /// Output `H`.
    #[default]
    Height,
    /// Output `Zv + H`.
    Level,
}

impl Model for Hydraulic {
    fn dims(&self) -> usize {
        4
    }

    fn eval(&self, x: &[f64]) -> Result<f64, ModelError> {
        let h = hydraulic_height(x[0], x[1], x[2], x[3])?;
        Ok(match self {
            Self::Height => h,
            Self::Level => x[2] + h,
        })
    }
}

/// How `h` enters the conditional failure probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Threshold {
    /// `h` is a water level: the flow needed is `q(h - Zv)`.
    #[default]
    Level,
    /// `h` is a height: the flow needed is `q(h)`.
    Height,
}

/// Closed-form `P(output <= h | ρ, β, Ks, Zv, Zm)` with `J ~ Gumbel(ρ, β)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ConditionalFailure {
    pub threshold: Threshold,
    /// Use `exp(-exp(β(ρ - q)))`, with β multiplying, instead of the Gumbel CDF.
    #[serde(default)]
    pub printed_form: bool,
}

impl ConditionalFailure {
    pub fn eval(&self, rho: f64, beta: f64, ks: f64, zv: f64, zm: f64, h: f64) -> f64 {
        let height = match self.threshold {
            Threshold::Level => h - zv,
            Threshold::Height => h,
        };
        if height <= 0.0 {
            return 0.0;
        }
        let q = flow_for_height(height, ks, zv, zm);
        let t = if self.printed_form {
            beta * (rho - q)
        } else {
            -(q - rho) / beta
        };
        (-t.exp()).exp()
    }
}

/// `P(J <= q(h - Zv))` for `J ~ Gumbel(ρ, β)`: the level convention with the Gumbel CDF.
pub fn conditional_failure_prob(rho: f64, beta: f64, ks: f64, zv: f64, zm: f64, h: f64) -> f64 {
    ConditionalFailure::default().eval(rho, beta, ks, zv, zm, h)
}

/// A model given by an expression over named inputs.
#[derive(Debug, Clone)]
pub struct ExprModel {
    expr: Expr,
}

impl ExprModel {
    /// Variables are `x` (first input), `x1..xd` and the given input names.
    pub fn new(src: &str, names: &[String]) -> Result<Self> {
        let d = names.len();
        let mut vars: Vec<String> = (1..=d).map(|k| format!("x{k}")).collect();
        vars.push("x".into());
        vars.extend(names.iter().cloned());
        let refs: Vec<&str> = vars.iter().map(String::as_str).collect();
        Ok(Self {
            expr: Expr::parse(src, &refs)?,
        })
    }
}

impl Model for ExprModel {
    fn dims(&self) -> usize {
        (self.expr.arity() - 1) / 2
    }

    fn eval(&self, x: &[f64]) -> Result<f64, ModelError> {
        let mut args = Vec::with_capacity(2 * x.len() + 1);
        args.extend_from_slice(x);
        args.push(x[0]);
        args.extend_from_slice(x);
        let y = self.expr.eval(&args);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(ModelError::new(format!("expression `{}` is not finite", self.expr), x))
        }
    }
}

/// Nearest-neighbour lookup in a CSV table with header `x1,…,xd,y`.
#[derive(Debug, Clone)]
pub struct TableModel {
    dims: usize,
    rows: Vec<f64>,
}

impl TableModel {
    pub fn from_path(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)
            .map_err(|e| Error::Config(format!("cannot open table {}: {e}", path.display())))?;
        Self::from_reader(file)
    }

    pub fn from_reader(r: impl std::io::Read) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let headers = rdr
            .headers()
            .map_err(|e| Error::Config(format!("table header: {e}")))?
            .clone();
        let cols = headers.len();
        let ok = cols >= 2
            && headers.get(cols - 1) == Some("y")
            && (0..cols - 1).all(|k| headers.get(k) == Some(format!("x{}", k + 1).as_str()));
        if !ok {
            return Err(Error::Config("table header must be x1,...,xd,y".into()));
        }
        let mut rows = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Config(format!("table row {}: {e}", line + 1)))?;
            for field in rec.iter() {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("table row {}: bad number `{field}`", line + 1)))?;
                rows.push(v);
            }
        }
        if rows.is_empty() {
            return Err(Error::Config("table has no rows".into()));
        }
        Ok(Self { dims: cols - 1, rows })
    }
}

impl Model for TableModel {
    fn dims(&self) -> usize {
        self.dims
    }

    fn eval(&self, x: &[f64]) -> Result<f64, ModelError> {
        let stride = self.dims + 1;
        let mut best = (f64::INFINITY, 0.0);
        for row in self.rows.chunks_exact(stride) {
            let d: f64 = row[..self.dims].iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best.0 {
                best = (d, row[self.dims]);
            }
        }
        Ok(best.1)
    }
}

struct Session {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

impl Drop for Session {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// A subprocess speaking the line protocol: one whitespace-separated input row
/// per line in, one decimal number per line out.
pub struct CommandModel {
    program: PathBuf,
    args: Vec<String>,
    dims: usize,
    sessions: Vec<Mutex<Option<Session>>>,
}

impl std::fmt::Debug for CommandModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CommandModel")
            .field("program", &self.program)
            .field("args", &self.args)
            .field("dims", &self.dims)
            .field("pool", &self.sessions.len())
            .finish()
    }
}

impl CommandModel {
    pub fn new(program: impl Into<PathBuf>, args: Vec<String>, dims: usize, pool: usize) -> Self {
        Self {
            program: program.into(),
            args,
            dims,
            sessions: (0..pool.max(1)).map(|_| Mutex::new(None)).collect(),
        }
    }

    fn spawn(&self, x: &[f64]) -> Result<Session, ModelError> {
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| ModelError::new(format!("cannot start {}: {e}", self.program.display()), x))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(Session { child, stdin, stdout })
    }

    fn request(&self, slot: &mut Option<Session>, x: &[f64]) -> Result<f64, ModelError> {
        if slot.is_none() {
            *slot = Some(self.spawn(x)?);
        }
        let s = slot.as_mut().expect("session just created");
        let line: Vec<String> = x.iter().map(|v| v.to_string()).collect();
        let sent = writeln!(s.stdin, "{}", line.join(" ")).and_then(|_| s.stdin.flush());
        let mut reply = String::new();
        let read = sent.and_then(|_| s.stdout.read_line(&mut reply));
        let result = match read {
            Err(e) => Err(ModelError::new(format!("pipe error: {e}"), x)),
            Ok(0) => Err(ModelError::new("model process exited", x)),
            Ok(_) => match reply.trim().parse::<f64>() {
                Ok(y) if y.is_finite() => Ok(y),
                Ok(y) => Err(ModelError::new(format!("non-finite output {y}"), x)),
                Err(_) => Err(ModelError::new(format!("malformed response `{}`", reply.trim()), x)),
            },
        };
        if result.is_err() {
            *slot = None;
        }
        result
    }
}

impl Model for CommandModel {
    fn dims(&self) -> usize {
        self.dims
    }

    fn eval(&self, x: &[f64]) -> Result<f64, ModelError> {
        for m in &self.sessions {
            if let Ok(mut slot) = m.try_lock() {
                return self.request(&mut slot, x);
            }
        }
        let mut slot = self.sessions[0].lock().unwrap_or_else(|e| e.into_inner());
        self.request(&mut slot, x)
    }
}

/// Serializable description of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    HydraulicHeight,
    HydraulicLevel,
    ExternalTable {
        path: PathBuf,
    },
    ExternalCommand {
        program: PathBuf,
        #[serde(default)]
        args: Vec<String>,
        #[serde(default = "default_pool")]
        pool: usize,
    },
    Expr {
        expr: String,
    },
}

fn default_pool() -> usize {
    4
}

impl ModelSpec {
    /// Builds the model for inputs named `names`.
    pub fn build(&self, names: &[String]) -> Result<Arc<dyn Model>> {
        let d = names.len();
        let model: Arc<dyn Model> = match self {
            Self::HydraulicHeight => Arc::new(Hydraulic::Height),
            Self::HydraulicLevel => Arc::new(Hydraulic::Level),
            Self::ExternalTable { path } => Arc::new(TableModel::from_path(path)?),
            Self::ExternalCommand { program, args, pool } => {
                Arc::new(CommandModel::new(program, args.clone(), d, *pool))
            }
            Self::Expr { expr } => Arc::new(ExprModel::new(expr, names)?),
        };
        if model.dims() != d {
            return Err(Error::Config(format!(
                "model takes {} inputs but {d} are declared",
                model.dims()
            )));
        }
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hydraulic_point_value() {
        let h = hydraulic_height(736.0, 30.0, 50.0, 54.5).unwrap();
        assert!((h - 1.825_191_468_6).abs() < 1e-9, "{h}");
        assert_eq!(hydraulic_height(0.0, 30.0, 50.0, 54.5).unwrap(), 0.0);
        assert!(hydraulic_height(736.0, 30.0, 55.0, 54.5).is_err());
        let lvl = Hydraulic::Level.eval(&[736.0, 30.0, 50.0, 54.5]).unwrap();
        assert!((lvl - 50.0 - h).abs() < 1e-12);
    }

    #[test]
    fn hydraulic_monotonicity() {
        for j in [200.0, 700.0, 2000.0] {
            for ks in [15.0, 30.0, 45.0] {
                let h = hydraulic_height(j, ks, 50.0, 54.5).unwrap();
                assert!(hydraulic_height(j + 1.0, ks, 50.0, 54.5).unwrap() > h);
                assert!(hydraulic_height(j, ks + 0.1, 50.0, 54.5).unwrap() < h);
            }
        }
    }

    #[test]
    fn conditional_probability_at_location_is_exp_minus_one() {
        // choose h so that q(h - Zv) = ρ
        let (rho, beta, ks, zv, zm) = (626.14, 190.0, 30.0, 50.0, 54.5);
        let height = hydraulic_height(rho, ks, zv, zm).unwrap();
        let p = conditional_failure_prob(rho, beta, ks, zv, zm, zv + height);
        assert!((p - (-1.0f64).exp()).abs() < 1e-12);
        assert_eq!(conditional_failure_prob(rho, beta, ks, zv, zm, zv - 0.1), 0.0);
        let sharp = conditional_failure_prob(rho, 1e-6, ks, zv, zm, zv + height * 1.01);
        assert!((sharp - 1.0).abs() < 1e-12);
        let cf = ConditionalFailure {
            threshold: Threshold::Height,
            printed_form: false,
        };
        assert!((cf.eval(rho, beta, ks, zv, zm, height) - p).abs() < 1e-12);
    }

    #[test]
    fn conditional_probability_monotone() {
        let base = |rho: f64, ks: f64, h: f64| conditional_failure_prob(rho, 190.0, ks, 50.0, 54.5, h);
        let mut prev = 0.0;
        for k in 1..60 {
            let h = 50.0 + 0.1 * k as f64;
            let p = base(626.0, 30.0, h);
            assert!(p >= prev);
            assert!(base(626.0, 31.0, h) >= p);
            assert!(base(650.0, 30.0, h) <= p);
            prev = p;
        }
    }

    #[test]
    fn expression_model() {
        let names = vec!["a".to_string(), "b".to_string()];
        let m = ModelSpec::Expr {
            expr: "a * x2 + x".into(),
        }
        .build(&names)
        .unwrap();
        assert_eq!(m.dims(), 2);
        assert_eq!(m.eval(&[2.0, 5.0]).unwrap(), 12.0);
        let bad = ExprModel::new("log(x) ", &names).unwrap();
        assert!(bad.eval(&[-1.0, 0.0]).is_err());
    }

    #[test]
    fn command_echoing_first_input() {
        let sh = |script: &str| vec!["-c".to_string(), script.to_string()];
        let m = CommandModel::new("sh", sh("while read a b; do echo $a; done"), 2, 2);
        assert_eq!(m.eval(&[0.1, 9.0]).unwrap(), 0.1);
        assert_eq!(m.eval(&[-3.5e-7, 1.0]).unwrap(), -3.5e-7);
        let broken = CommandModel::new("sh", sh("while read a; do echo oops; done"), 1, 1);
        let err = broken.eval(&[1.5]).unwrap_err();
        assert_eq!(err.input, vec![1.5]);
        assert!(err.message.contains("malformed"));
        let dead = CommandModel::new("true", vec![], 1, 1);
        assert!(dead.eval(&[1.0]).is_err());
    }

    #[test]
    fn table_lookup() {
        let t = TableModel::from_reader("x1,x2,y\n0,0,1\n1,1,5\n".as_bytes()).unwrap();
        assert_eq!(t.eval(&[0.2, 0.1]).unwrap(), 1.0);
        assert_eq!(t.eval(&[0.9, 0.7]).unwrap(), 5.0);
        let single = TableModel::from_reader("x1,y\n3,7\n".as_bytes()).unwrap();
        assert_eq!(single.eval(&[-100.0]).unwrap(), 7.0);
        assert!(TableModel::from_reader("a,b\n1,2\n".as_bytes()).is_err());
    }
}
