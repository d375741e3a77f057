use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::point::Point;
use crate::schedules::csv_err;

/// Identifies the run a trace came from. Serialized as `# key=value` lines
/// ahead of the CSV header.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TraceMeta {
    pub solver: String,
    pub seed: u64,
    pub dim_primal: usize,
    pub experimental: bool,
    pub notes: Vec<String>,
}

/// One row per iteration `k`, describing `z^k` before step `k` is taken.
/// `var_half` is the oracle variance at `z^{k+1/2}`, known only once step
/// `k` has run, so it is absent on the final record.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub k: usize,
    pub grad_norm_sq: f64,
    pub lyapunov: Option<f64>,
    pub anchor: Point,
    pub anchor_dist: f64,
    pub alpha: f64,
    pub beta: f64,
    pub c: f64,
    pub gamma: f64,
    pub var_zk: Option<f64>,
    pub var_half: Option<f64>,
    pub eval_count: usize,
    pub mode: Option<String>,
}

impl TraceRecord {
    /// `A_k = alpha_k (k+1)(k+2) / 2`.
    pub fn a(&self) -> f64 {
        self.alpha * ((self.k + 1) * (self.k + 2)) as f64 / 2.0
    }

    /// `B_k = k + 1`.
    pub fn b(&self) -> f64 {
        (self.k + 1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub meta: TraceMeta,
    pub records: Vec<TraceRecord>,
}

const BASE_COLUMNS: [&str; 9] = [
    "k",
    "grad_norm_sq",
    "lyapunov",
    "anchor_dist_to_z0",
    "alpha_k",
    "c_k",
    "gamma_k",
    "var_zk",
    "var_half",
];
const TAIL_COLUMNS: [&str; 3] = ["beta_k", "eval_count", "anchor"];

/// Shortest round-trip form, switching to exponent notation for extreme
/// magnitudes.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn encode_point(p: &Point) -> String {
    let join = |s: &[f64]| s.iter().map(|&x| fmt_f64(x)).collect::<Vec<_>>().join(" ");
    format!("{};{}", join(p.primal()), join(p.dual()))
}

fn decode_point(s: &str) -> Result<Point> {
    let (x, y) = s
        .split_once(';')
        .ok_or_else(|| Error::Parse(format!("anchor field {s:?} lacks a block separator")))?;
    let parse = |b: &str| -> Result<Vec<f64>> {
        b.split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("{t:?}: {e}")))
            })
            .collect()
    };
    Point::from_blocks(&parse(x)?, &parse(y)?).map_err(|e| Error::Parse(e.to_string()))
}

impl Trace {
    pub fn new(meta: TraceMeta) -> Self {
        Trace {
            meta,
            records: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn grad_norms(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.grad_norm_sq).collect()
    }

    /// First `k` with `|G(z^k)|^2 <= tol`.
    pub fn iters_to_tol(&self, tol: f64) -> Option<usize> {
        self.records
            .iter()
            .find(|r| r.grad_norm_sq <= tol)
            .map(|r| r.k)
    }

    fn has_mode(&self) -> bool {
        self.records.iter().any(|r| r.mode.is_some())
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut head = String::new();
        writeln!(head, "# solver={}", self.meta.solver).unwrap();
        writeln!(head, "# seed={}", self.meta.seed).unwrap();
        writeln!(head, "# dim_primal={}", self.meta.dim_primal).unwrap();
        writeln!(head, "# experimental={}", self.meta.experimental).unwrap();
        for note in &self.meta.notes {
            writeln!(head, "# note={note}").unwrap();
        }
        out.write_all(head.as_bytes())?;

        let with_mode = self.has_mode();
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<&str> = BASE_COLUMNS.to_vec();
        if with_mode {
            header.push("mode");
        }
        header.extend(TAIL_COLUMNS);
        w.write_record(&header).map_err(csv_err)?;
        for r in &self.records {
            let mut row = vec![
                r.k.to_string(),
                fmt_f64(r.grad_norm_sq),
                opt(r.lyapunov),
                fmt_f64(r.anchor_dist),
                fmt_f64(r.alpha),
                fmt_f64(r.c),
                fmt_f64(r.gamma),
                opt(r.var_zk),
                opt(r.var_half),
            ];
            if with_mode {
                row.push(r.mode.clone().unwrap_or_default());
            }
            row.push(fmt_f64(r.beta));
            row.push(r.eval_count.to_string());
            row.push(encode_point(&r.anchor));
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut reader = BufReader::new(input);
        let mut meta = TraceMeta::default();
        let mut body = String::new();
        let mut line = String::new();
        loop {
            line.clear();
            if reader.read_line(&mut line)? == 0 {
                break;
            }
            let Some(rest) = line.strip_prefix("# ") else {
                body.push_str(&line);
                break;
            };
            let (key, value) = rest
                .trim_end_matches(['\n', '\r'])
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("bad metadata line {line:?}")))?;
            let bad = |e: String| Error::Parse(format!("metadata {key}: {e}"));
            match key {
                "solver" => meta.solver = value.to_string(),
                "seed" => meta.seed = value.parse().map_err(|e| bad(format!("{e}")))?,
                "dim_primal" => meta.dim_primal = value.parse().map_err(|e| bad(format!("{e}")))?,
                "experimental" => {
                    meta.experimental = value.parse().map_err(|e| bad(format!("{e}")))?
                }
                "note" => meta.notes.push(value.to_string()),
                _ => return Err(Error::Parse(format!("unknown metadata key {key:?}"))),
            }
        }
        reader.read_to_string(&mut body)?;

        let mut rdr = csv::Reader::from_reader(body.as_bytes());
        let header = rdr.headers().map_err(csv_err)?.clone();
        let with_mode = header.len() == BASE_COLUMNS.len() + TAIL_COLUMNS.len() + 1;
        let expected: Vec<&str> = BASE_COLUMNS
            .iter()
            .copied()
            .chain(with_mode.then_some("mode"))
            .chain(TAIL_COLUMNS)
            .collect();
        if header.iter().collect::<Vec<_>>() != expected {
            return Err(Error::Parse(format!("unexpected trace header {header:?}")));
        }

        let mut records = Vec::new();
        for (line_no, row) in rdr.records().enumerate() {
            let row = row.map_err(csv_err)?;
            let ctx = |col: &str, e: String| Error::Parse(format!("row {line_no}, {col}: {e}"));
            let float = |i: usize| -> Result<f64> {
                row[i]
                    .parse::<f64>()
                    .map_err(|e| ctx(expected[i], e.to_string()))
            };
            let opt_float = |i: usize| -> Result<Option<f64>> {
                if row[i].is_empty() {
                    Ok(None)
                } else {
                    float(i).map(Some)
                }
            };
            let int = |i: usize| -> Result<usize> {
                row[i]
                    .parse::<usize>()
                    .map_err(|e| ctx(expected[i], e.to_string()))
            };
            let t = if with_mode { 10 } else { 9 };
            let anchor = decode_point(&row[t + 2])?;
            if meta.dim_primal != 0 && anchor.dim_primal() != meta.dim_primal {
                return Err(ctx("anchor", "block sizes disagree with metadata".into()));
            }
            let grad_norm_sq = float(1)?;
            if grad_norm_sq.is_nan() || grad_norm_sq < 0.0 {
                return Err(ctx("grad_norm_sq", format!("{grad_norm_sq} is not >= 0")));
            }
            records.push(TraceRecord {
                k: int(0)?,
                grad_norm_sq,
                lyapunov: opt_float(2)?,
                anchor_dist: float(3)?,
                alpha: float(4)?,
                c: float(5)?,
                gamma: float(6)?,
                var_zk: opt_float(7)?,
                var_half: opt_float(8)?,
                mode: with_mode
                    .then(|| row[9].to_string())
                    .filter(|m| !m.is_empty()),
                beta: float(t)?,
                eval_count: int(t + 1)?,
                anchor,
            });
        }
        for (i, pair) in records.windows(2).enumerate() {
            if pair[1].k <= pair[0].k {
                return Err(Error::Parse(format!(
                    "iteration counter not increasing after row {i}"
                )));
            }
        }
        Ok(Trace { meta, records })
    }
}
