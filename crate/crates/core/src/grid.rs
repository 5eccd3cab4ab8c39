//! Uniform grids on the unit square and nodal fields living on them.

use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{check_len, Error, Result};

/// Interior nodes of a uniform `n × n` grid on `[0, 1]²`.
///
/// Node `(i, j)` with `1 ≤ i, j ≤ n` sits at `(i·h, j·h)` where
/// `h = 1 / (n + 1)`; the boundary nodes (`i` or `j` equal to `0` or `n + 1`)
/// are not unknowns. Nodes are numbered row-major in `y`:
/// `k = (j − 1)·n + (i − 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    n: usize,
}

impl Grid {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("grid needs at least one interior node per side"));
        }
        Ok(Self { n })
    }

    /// Interior nodes per side.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        1.0 / (self.n as f64 + 1.0)
    }

    /// Quadrature weight of one node (`h²`).
    pub fn cell_area(&self) -> f64 {
        let h = self.spacing();
        h * h
    }

    /// Flat index of interior node `(i, j)`, both 1-based.
    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!((1..=self.n).contains(&i) && (1..=self.n).contains(&j));
        (j - 1) * self.n + (i - 1)
    }

    /// 1-based `(i, j)` of flat index `k`.
    #[inline]
    pub fn node(&self, k: usize) -> (usize, usize) {
        (k % self.n + 1, k / self.n + 1)
    }

    #[inline]
    pub fn coords(&self, k: usize) -> (f64, f64) {
        let (i, j) = self.node(k);
        let h = self.spacing();
        (i as f64 * h, j as f64 * h)
    }

    /// Nearest interior node to `(x, y)`.
    pub fn nearest(&self, x: f64, y: f64) -> usize {
        let snap = |t: f64| -> usize {
            let i = (t / self.spacing()).round() as i64;
            i.clamp(1, self.n as i64) as usize
        };
        self.index(snap(x), snap(y))
    }

    /// Evaluates `f(x, y)` at every interior node.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        (0..self.len())
            .map(|k| {
                let (x, y) = self.coords(k);
                f(x, y)
            })
            .collect()
    }

    /// Mesh-weighted L² inner product.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.cell_area() * dot(a, b)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A discretized unknown: one value per interior node.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamField {
    grid: Grid,
    values: Vec<f64>,
}

impl ParamField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        check_len(grid.len(), values.len())?;
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("field value at node {k} is not finite")));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        Self { grid, values: vec![value; grid.len()] }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        Self { grid, values: grid.sample(f) }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn l2_norm(&self) -> f64 {
        self.grid.inner(&self.values, &self.values).sqrt()
    }

    /// Writes the field as a CSV grid: a `# nx=.. ny=.. h=..` line, then one
    /// row per `y` level, `x` increasing along each row.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        let n = self.grid.n();
        writeln!(out, "# nx={n} ny={n} h={:.16e}", self.grid.spacing())?;
        for row in self.values.chunks(n) {
            let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let bad = |reason: &str| Error::Format {
            path: path.display().to_string(),
            reason: reason.to_string(),
        };
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut lines = file.lines();
        let header = lines.next().ok_or_else(|| bad("empty file"))??;
        let n: usize = header
            .split_whitespace()
            .find_map(|tok| tok.strip_prefix("nx="))
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad("missing nx in header"))?;
        let mut values = Vec::with_capacity(n * n);
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            for tok in line.split(',') {
                values.push(tok.trim().parse::<f64>().map_err(|_| bad("non-numeric entry"))?);
            }
        }
        ParamField::new(Grid::new(n)?, values)
    }
}
