//! Text formats accepted by the command-line tool.
//!
//! * Distribution specs: `uniform:K`, `dirac:K:i`, `weights:w1,w2,…`,
//!   `gaussian:mean=m1,m2,…;var=v1,v2,…`.
//! * Observation CSV for `bound`: one row per step, columns `loss_j` for each
//!   parameter `j` plus optional `mu_j`, `var_j`, `m2_j`, `logmgf_j` and the
//!   scalars `t`, `lambda`, `sigma`, `range`, `bernstein_c`, `kappa`, `p`.
//!   Empty cells mean "not supplied".
//! * Stream CSV for `cs`: columns `t` (optional) and `loss`.

use std::io::Read;

use crate::divergences::{DiagonalGaussian, Distribution, FiniteMixture};
use crate::error::{Error, Result};
use crate::forward::StepObservation;

/// Largest support a spec may request; keeps typos like `uniform:1e18`-style
/// counts from turning into giant allocations.
pub const MAX_SUPPORT: usize = 1 << 24;

fn spec_err(spec: &str, why: impl std::fmt::Display) -> Error {
    Error::Config(format!("bad distribution `{spec}`: {why}"))
}

fn parse_list(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',')
        .map(|x| {
            let x = x.trim();
            x.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("`{x}` is not a finite number"))
        })
        .collect()
}

/// Parses a distribution spec (see the module docs).
pub fn parse_distribution(spec: &str) -> Result<Distribution> {
    let (family, rest) = spec
        .split_once(':')
        .ok_or_else(|| spec_err(spec, "expected `family:parameters`"))?;
    let count = |s: &str| -> Result<usize> {
        s.trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n <= MAX_SUPPORT)
            .ok_or_else(|| spec_err(spec, format!("`{s}` is not a count up to {MAX_SUPPORT}")))
    };
    match family {
        "uniform" => Ok(FiniteMixture::uniform(count(rest)?)
            .map_err(|e| spec_err(spec, e))?
            .into()),
        "dirac" => {
            let (k, i) = rest
                .split_once(':')
                .ok_or_else(|| spec_err(spec, "expected `dirac:K:i`"))?;
            Ok(FiniteMixture::dirac(count(k)?, count(i)?)
                .map_err(|e| spec_err(spec, e))?
                .into())
        }
        "weights" => {
            let w = parse_list(rest).map_err(|e| spec_err(spec, e))?;
            Ok(FiniteMixture::new(w).map_err(|e| spec_err(spec, e))?.into())
        }
        "gaussian" => {
            let mut mean = None;
            let mut var = None;
            for part in rest.split(';') {
                let (key, values) = part.split_once('=').ok_or_else(|| {
                    spec_err(spec, format!("expected `key=values`, got `{part}`"))
                })?;
                let v = parse_list(values).map_err(|e| spec_err(spec, e))?;
                let slot = match key.trim() {
                    "mean" => &mut mean,
                    "var" => &mut var,
                    other => return Err(spec_err(spec, format!("unknown key `{other}`"))),
                };
                if slot.replace(v).is_some() {
                    return Err(spec_err(spec, format!("duplicate key `{}`", key.trim())));
                }
            }
            let mean = mean.ok_or_else(|| spec_err(spec, "missing `mean`"))?;
            let var = var.ok_or_else(|| spec_err(spec, "missing `var`"))?;
            Ok(DiagonalGaussian::new(mean, var)
                .map_err(|e| spec_err(spec, e))?
                .into())
        }
        other => Err(spec_err(spec, format!("unknown family `{other}`"))),
    }
}

/// One parsed row of an observation CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationRow {
    pub t: u64,
    pub lambda: Option<f64>,
    pub obs: StepObservation,
}

#[derive(Debug, Default)]
struct Columns {
    t: Option<usize>,
    lambda: Option<usize>,
    sigma: Option<usize>,
    range: Option<usize>,
    bernstein_c: Option<usize>,
    kappa: Option<usize>,
    p: Option<usize>,
    loss: Vec<Option<usize>>,
    mu: Vec<Option<usize>>,
    var: Vec<Option<usize>>,
    m2: Vec<Option<usize>>,
    logmgf: Vec<Option<usize>>,
}

fn indexed(name: &str) -> Option<(&str, usize)> {
    let (prefix, idx) = name.rsplit_once('_')?;
    if idx.is_empty()
        || !idx.bytes().all(|b| b.is_ascii_digit())
        || (idx.len() > 1 && idx.starts_with('0'))
    {
        return None;
    }
    Some((prefix, idx.parse().ok()?))
}

fn parse_header(header: &csv::StringRecord) -> Result<Columns> {
    let herr = |msg: String| Error::Parse { line: 1, msg };
    let mut c = Columns::default();
    let set = |slot: &mut Option<usize>, i: usize, name: &str| -> Result<()> {
        if slot.replace(i).is_some() {
            return Err(herr(format!("duplicate column `{name}`")));
        }
        Ok(())
    };
    for (i, raw) in header.iter().enumerate() {
        let name = raw.trim();
        match name {
            "t" => set(&mut c.t, i, name)?,
            "lambda" => set(&mut c.lambda, i, name)?,
            "sigma" => set(&mut c.sigma, i, name)?,
            "range" => set(&mut c.range, i, name)?,
            "bernstein_c" => set(&mut c.bernstein_c, i, name)?,
            "kappa" => set(&mut c.kappa, i, name)?,
            "p" => set(&mut c.p, i, name)?,
            _ => {
                let (prefix, j) =
                    indexed(name).ok_or_else(|| herr(format!("unknown column `{name}`")))?;
                let vec = match prefix {
                    "loss" => &mut c.loss,
                    "mu" => &mut c.mu,
                    "var" => &mut c.var,
                    "m2" => &mut c.m2,
                    "logmgf" => &mut c.logmgf,
                    _ => return Err(herr(format!("unknown column `{name}`"))),
                };
                // Guards against absurd indices allocating huge vectors.
                if j >= header.len() {
                    return Err(herr(format!(
                        "column index in `{name}` exceeds the column count"
                    )));
                }
                if vec.len() <= j {
                    vec.resize(j + 1, None);
                }
                set(&mut vec[j], i, name)?;
            }
        }
    }
    let k = c.loss.len();
    if k == 0 {
        return Err(herr("no `loss_j` columns".into()));
    }
    if let Some(j) = c.loss.iter().position(Option::is_none) {
        return Err(herr(format!("missing column `loss_{j}`")));
    }
    for (prefix, v) in [
        ("mu", &c.mu),
        ("var", &c.var),
        ("m2", &c.m2),
        ("logmgf", &c.logmgf),
    ] {
        if v.is_empty() {
            continue;
        }
        if v.len() != k || v.iter().any(Option::is_none) {
            return Err(herr(format!("`{prefix}_j` columns must cover j = 0..{k}")));
        }
    }
    Ok(c)
}

fn cell(
    record: &csv::StringRecord,
    idx: Option<usize>,
    name: &str,
    line: usize,
) -> Result<Option<f64>> {
    let Some(i) = idx else { return Ok(None) };
    let s = record.get(i).unwrap_or("").trim();
    if s.is_empty() {
        return Ok(None);
    }
    s.parse::<f64>().map(Some).map_err(|_| Error::Parse {
        line,
        msg: format!("`{s}` in column `{name}` is not a number"),
    })
}

fn csv_reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .comment(Some(b'#'))
        .from_reader(input)
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    let msg = e.to_string().replace('\n', " ");
    Error::Parse { line, msg }
}

fn row_t(
    record: &csv::StringRecord,
    idx: Option<usize>,
    line: usize,
    expected: u64,
) -> Result<u64> {
    let Some(v) = cell(record, idx, "t", line)? else {
        return Ok(expected);
    };
    if v != expected as f64 {
        return Err(Error::Parse {
            line,
            msg: format!("expected t = {expected}, found {v}"),
        });
    }
    Ok(expected)
}

/// Reads an observation CSV. Rows must be consecutive steps `t = 1, 2, …`.
pub fn parse_observations<R: Read>(input: R) -> Result<Vec<ObservationRow>> {
    let mut reader = csv_reader(input);
    let header = reader.headers().map_err(csv_error)?.clone();
    let cols = parse_header(&header)?;
    let k = cols.loss.len();
    let mut rows = Vec::new();
    for (n, record) in reader.records().enumerate() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(n + 2, |p| p.line() as usize);
        let t = row_t(&record, cols.t, line, n as u64 + 1)?;
        let scalar = |idx: Option<usize>, name: &str| cell(&record, idx, name, line);
        let vector = |v: &[Option<usize>], prefix: &str| -> Result<Option<Vec<f64>>> {
            if v.is_empty() {
                return Ok(None);
            }
            let mut out = Vec::with_capacity(k);
            for (j, idx) in v.iter().enumerate() {
                match cell(&record, *idx, &format!("{prefix}_{j}"), line)? {
                    Some(x) => out.push(x),
                    // A partially filled row is treated as absent for that quantity.
                    None => return Ok(None),
                }
            }
            Ok(Some(out))
        };
        let loss = vector(&cols.loss, "loss")?.ok_or_else(|| Error::Parse {
            line,
            msg: "every `loss_j` cell must be filled".into(),
        })?;
        let mean = vector(&cols.mu, "mu")?.unwrap_or_default();
        let obs = StepObservation {
            loss,
            mean,
            variance: vector(&cols.var, "var")?,
            second_moment: vector(&cols.m2, "m2")?,
            log_mgf: vector(&cols.logmgf, "logmgf")?,
            sigma: scalar(cols.sigma, "sigma")?,
            range: scalar(cols.range, "range")?,
            bernstein_c: scalar(cols.bernstein_c, "bernstein_c")?,
            kappa: scalar(cols.kappa, "kappa")?,
            p: scalar(cols.p, "p")?,
        };
        rows.push(ObservationRow {
            t,
            lambda: scalar(cols.lambda, "lambda")?,
            obs,
        });
    }
    Ok(rows)
}

/// Reads a `t,loss` stream; `t` is optional but must count `1, 2, …` when present.
pub fn parse_stream<R: Read>(input: R) -> Result<Vec<f64>> {
    let mut reader = csv_reader(input);
    let header = reader.headers().map_err(csv_error)?.clone();
    let mut t_col = None;
    let mut loss_col = None;
    for (i, name) in header.iter().enumerate() {
        let slot = match name.trim() {
            "t" => &mut t_col,
            "loss" => &mut loss_col,
            other => {
                return Err(Error::Parse {
                    line: 1,
                    msg: format!("unknown column `{other}`"),
                })
            }
        };
        if slot.replace(i).is_some() {
            return Err(Error::Parse {
                line: 1,
                msg: format!("duplicate column `{}`", name.trim()),
            });
        }
    }
    let loss_col = loss_col.ok_or(Error::Parse {
        line: 1,
        msg: "missing column `loss`".into(),
    })?;
    let mut out = Vec::new();
    for (n, record) in reader.records().enumerate() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(n + 2, |p| p.line() as usize);
        row_t(&record, t_col, line, n as u64 + 1)?;
        let loss = cell(&record, Some(loss_col), "loss", line)?
            .filter(|v| v.is_finite())
            .ok_or_else(|| Error::Parse {
                line,
                msg: "`loss` must be a finite number".into(),
            })?;
        out.push(loss);
    }
    Ok(out)
}
