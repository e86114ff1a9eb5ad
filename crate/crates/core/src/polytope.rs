//! Small polytopes given by integral inequalities and points, and their
//! slack matrices `Sᵢⱼ = bᵢ − aᵢᵀxⱼ`.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest dimension for which `{0,1}ⁿ` is enumerated.
pub const MAX_ENUMERATION_DIM: usize = 24;

/// One inequality `aᵀx ≤ b`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Inequality {
    pub a: Vec<i64>,
    pub b: i64,
}

impl Inequality {
    pub fn new(a: Vec<i64>, b: i64) -> Self {
        Self { a, b }
    }

    /// `b − aᵀx` with overflow checks.
    pub fn slack(&self, x: &[i64]) -> Result<i64> {
        let mut dot: i64 = 0;
        for (ai, xi) in self.a.iter().zip(x) {
            let term = ai
                .checked_mul(*xi)
                .ok_or(Error::IntegerOverflow("inequality evaluation"))?;
            dot = dot
                .checked_add(term)
                .ok_or(Error::IntegerOverflow("inequality evaluation"))?;
        }
        self.b
            .checked_sub(dot)
            .ok_or(Error::IntegerOverflow("inequality evaluation"))
    }
}

/// `{x ∈ Rⁿ : aᵢᵀx ≤ bᵢ ∀i}` with integral data and no duplicate rows.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HPolytope {
    n: usize,
    rows: Vec<Inequality>,
}

impl HPolytope {
    pub fn new(n: usize, rows: Vec<Inequality>) -> Result<Self> {
        for row in &rows {
            if row.a.len() != n {
                return Err(Error::Dimension {
                    context: "inequality coefficients",
                    expected: n,
                    found: row.a.len(),
                });
            }
        }
        if let Some((i, j)) = duplicate_rows(&rows).first() {
            return Err(Error::Invalid(format!("duplicate inequality rows {i} and {j}")));
        }
        Ok(Self { n, rows })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn rows(&self) -> &[Inequality] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn contains(&self, x: &[i64]) -> Result<bool> {
        for row in &self.rows {
            if row.slack(x)? < 0 {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Pairs `(i, j)`, `i < j`, of identical rows. Redundancy beyond exact
/// duplication is not detected.
pub fn duplicate_rows(rows: &[Inequality]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..rows.len() {
        for j in (i + 1)..rows.len() {
            if rows[i] == rows[j] {
                out.push((i, j));
            }
        }
    }
    out
}

/// A finite set of distinct integral points.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VPolytope {
    n: usize,
    points: Vec<Vec<i64>>,
}

impl VPolytope {
    pub fn new(n: usize, points: Vec<Vec<i64>>) -> Result<Self> {
        let mut seen = HashSet::new();
        for p in &points {
            if p.len() != n {
                return Err(Error::Dimension {
                    context: "point coordinates",
                    expected: n,
                    found: p.len(),
                });
            }
            if !seen.insert(p.clone()) {
                return Err(Error::Invalid(format!("duplicate point {p:?}")));
            }
        }
        Ok(Self { n, points })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn points(&self) -> &[Vec<i64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Where a slack matrix came from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Provenance {
    pub h: HPolytope,
    pub v: VPolytope,
}

/// Nonnegative integral `I × J` matrix, optionally tied to the polytope
/// description that produced it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SlackMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<i64>,
    provenance: Option<Provenance>,
}

impl SlackMatrix {
    /// A bare nonnegative matrix without polytope provenance.
    pub fn from_entries(entries: Vec<Vec<i64>>) -> Result<Self> {
        let rows = entries.len();
        if rows == 0 {
            return Err(Error::Empty("slack matrix rows"));
        }
        let cols = entries[0].len();
        if cols == 0 {
            return Err(Error::Empty("slack matrix columns"));
        }
        let mut flat = Vec::with_capacity(rows * cols);
        for (i, row) in entries.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::Dimension {
                    context: "slack matrix row",
                    expected: cols,
                    found: row.len(),
                });
            }
            for (j, &s) in row.iter().enumerate() {
                if s < 0 {
                    return Err(Error::Invalid(format!("negative entry {s} at ({i}, {j})")));
                }
                flat.push(s);
            }
        }
        Ok(Self {
            rows,
            cols,
            entries: flat,
            provenance: None,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> i64 {
        self.entries[i * self.cols + j]
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.get(i, j) as f64
    }

    pub fn row(&self, i: usize) -> &[i64] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<i64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    /// Largest entry, `Δ_eff`.
    pub fn max_entry(&self) -> i64 {
        self.entries.iter().copied().max().unwrap_or(0)
    }

    pub fn delta_eff(&self) -> f64 {
        self.max_entry() as f64
    }

    pub fn provenance(&self) -> Option<&Provenance> {
        self.provenance.as_ref()
    }
}

/// `Sᵢⱼ = bᵢ − aᵢᵀxⱼ` in checked 64-bit arithmetic.
pub fn build_slack(h: &HPolytope, v: &VPolytope) -> Result<SlackMatrix> {
    if h.dim() != v.dim() {
        return Err(Error::Dimension {
            context: "polytope dimension",
            expected: h.dim(),
            found: v.dim(),
        });
    }
    if h.is_empty() {
        return Err(Error::Empty("inequality system"));
    }
    if v.is_empty() {
        return Err(Error::Empty("point set"));
    }
    let mut entries = Vec::with_capacity(h.len() * v.len());
    for (i, row) in h.rows().iter().enumerate() {
        for (j, x) in v.points().iter().enumerate() {
            let s = row.slack(x)?;
            if s < 0 {
                return Err(Error::PointOutside { row: i, col: j, slack: s });
            }
            entries.push(s);
        }
    }
    Ok(SlackMatrix {
        rows: h.len(),
        cols: v.len(),
        entries,
        provenance: Some(Provenance {
            h: h.clone(),
            v: v.clone(),
        }),
    })
}

/// All `x ∈ {0,1}ⁿ` with `aᵢᵀx ≤ bᵢ`, in lexicographic order.
pub fn enumerate_01_vertices(h: &HPolytope) -> Result<VPolytope> {
    let n = h.dim();
    if n > MAX_ENUMERATION_DIM {
        return Err(Error::TooLarge {
            what: "enumeration dimension",
            value: n,
            limit: MAX_ENUMERATION_DIM,
        });
    }
    let mut points = Vec::new();
    for x in cube_points(n) {
        if h.contains(&x)? {
            points.push(x);
        }
    }
    VPolytope::new(n, points)
}

/// `{0,1}ⁿ` in lexicographic order, first coordinate most significant.
pub fn cube_points(n: usize) -> impl Iterator<Item = Vec<i64>> {
    (0u64..(1u64 << n)).map(move |mask| {
        (0..n)
            .map(|k| ((mask >> (n - 1 - k)) & 1) as i64)
            .collect()
    })
}

/// Built-in test polytopes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Instance {
    /// `[0,1]ⁿ`.
    Cube,
    /// `conv{0, e₁, …, eₙ}`.
    Simplex,
    /// 0/1 points with `1 ≤ Σx ≤ n−1`; an octahedron for `n = 3`.
    Crosspoly01,
    /// `conv{0, e₁}` inside `Rⁿ`.
    Segment,
    /// The origin, cut out by `0 ≤ xₖ ≤ 0`.
    Point,
    /// `d` points `(z, z²)` with odd `z ∈ [2d]`; the parameter is `d`.
    MomentPolygon,
}

impl Instance {
    pub const ALL: [Instance; 6] = [
        Instance::Cube,
        Instance::Simplex,
        Instance::Crosspoly01,
        Instance::Segment,
        Instance::Point,
        Instance::MomentPolygon,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Instance::Cube => "cube",
            Instance::Simplex => "simplex",
            Instance::Crosspoly01 => "crosspoly_01",
            Instance::Segment => "segment",
            Instance::Point => "point",
            Instance::MomentPolygon => "moment_polygon",
        }
    }

    /// Whether the points lie in `{0,1}ⁿ`.
    pub fn is_01(self) -> bool {
        !matches!(self, Instance::MomentPolygon)
    }
}

impl fmt::Display for Instance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Instance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Instance::ALL
            .into_iter()
            .find(|i| i.name() == s)
            .ok_or_else(|| Error::UnknownInstance(s.to_string()))
    }
}

fn unit(n: usize, k: usize, value: i64) -> Vec<i64> {
    let mut v = vec![0; n];
    v[k] = value;
    v
}

fn box_rows(n: usize, upper: impl Fn(usize) -> i64) -> Vec<Inequality> {
    let mut rows = Vec::with_capacity(2 * n);
    for k in 0..n {
        rows.push(Inequality::new(unit(n, k, -1), 0));
        rows.push(Inequality::new(unit(n, k, 1), upper(k)));
    }
    rows
}

/// Hand-written H- and V-representations of a built-in polytope. For
/// `moment_polygon` the parameter is the vertex count `d`, otherwise it is
/// the ambient dimension.
pub fn builtin_instance(instance: Instance, param: usize) -> Result<(HPolytope, VPolytope)> {
    let limit_dim = |min: usize| -> Result<()> {
        if param < min {
            return Err(Error::Invalid(format!(
                "{instance} needs parameter >= {min}, got {param}"
            )));
        }
        if instance.is_01() && param > MAX_ENUMERATION_DIM {
            return Err(Error::TooLarge {
                what: "instance dimension",
                value: param,
                limit: MAX_ENUMERATION_DIM,
            });
        }
        Ok(())
    };
    let n = param;
    let (h, v) = match instance {
        Instance::Cube => {
            limit_dim(1)?;
            (box_rows(n, |_| 1), cube_points(n).collect())
        }
        Instance::Simplex => {
            limit_dim(1)?;
            let mut rows: Vec<Inequality> =
                (0..n).map(|k| Inequality::new(unit(n, k, -1), 0)).collect();
            rows.push(Inequality::new(vec![1; n], 1));
            let mut points = vec![vec![0; n]];
            points.extend((0..n).map(|k| unit(n, k, 1)));
            (rows, points)
        }
        Instance::Crosspoly01 => {
            limit_dim(3)?;
            let mut rows = box_rows(n, |_| 1);
            rows.push(Inequality::new(vec![-1; n], -1));
            rows.push(Inequality::new(vec![1; n], n as i64 - 1));
            let points = cube_points(n)
                .filter(|x| {
                    let s: i64 = x.iter().sum();
                    s >= 1 && s <= n as i64 - 1
                })
                .collect();
            (rows, points)
        }
        Instance::Segment => {
            limit_dim(1)?;
            (
                box_rows(n, |k| if k == 0 { 1 } else { 0 }),
                vec![vec![0; n], unit(n, 0, 1)],
            )
        }
        Instance::Point => {
            limit_dim(1)?;
            (box_rows(n, |_| 0), vec![vec![0; n]])
        }
        Instance::MomentPolygon => {
            let d = param;
            if d < 3 {
                return Err(Error::Invalid(format!("moment_polygon needs d >= 3, got {d}")));
            }
            let z: Vec<i64> = (0..d).map(|k| 2 * k as i64 + 1).collect();
            let points: Vec<Vec<i64>> = z.iter().map(|&t| vec![t, t * t]).collect();
            let mut rows = Vec::with_capacity(d);
            // lower chain: (z_k + z_{k+1}) x − y ≤ z_k z_{k+1}
            for w in z.windows(2) {
                rows.push(Inequality::new(vec![w[0] + w[1], -1], w[0] * w[1]));
            }
            // closing edge: −(z_1 + z_d) x + y ≤ −z_1 z_d
            let (first, last) = (z[0], z[d - 1]);
            rows.push(Inequality::new(vec![-(first + last), 1], -first * last));
            return Ok((HPolytope::new(2, rows)?, VPolytope::new(2, points)?));
        }
    };
    Ok((HPolytope::new(n, h)?, VPolytope::new(n, v)?))
}

/// On-disk polytope: `{"n": …, "rows": [{"a": […], "b": …}], "points": [[…]]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PolytopeFile {
    pub n: usize,
    pub rows: Vec<Inequality>,
    #[serde(default)]
    pub points: Vec<Vec<i64>>,
}

impl PolytopeFile {
    pub fn from_parts(h: &HPolytope, v: &VPolytope) -> Self {
        Self {
            n: h.dim(),
            rows: h.rows().to_vec(),
            points: v.points().to_vec(),
        }
    }

    /// Validates the file. An empty point list is filled by enumerating
    /// `{0,1}ⁿ`.
    pub fn into_parts(self) -> Result<(HPolytope, VPolytope)> {
        let h = HPolytope::new(self.n, self.rows)?;
        let v = if self.points.is_empty() {
            enumerate_01_vertices(&h)?
        } else {
            VPolytope::new(self.n, self.points)?
        };
        Ok((h, v))
    }
}

/// On-disk slack matrix. Carries the polytope fields when provenance is known.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SlackFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<Vec<Inequality>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<Vec<i64>>>,
    pub entries: Vec<Vec<i64>>,
    pub max_entry: i64,
}

impl From<&SlackMatrix> for SlackFile {
    fn from(s: &SlackMatrix) -> Self {
        let prov = s.provenance();
        Self {
            n: prov.map(|p| p.h.dim()),
            rows: prov.map(|p| p.h.rows().to_vec()),
            points: prov.map(|p| p.v.points().to_vec()),
            entries: s.to_rows(),
            max_entry: s.max_entry(),
        }
    }
}

impl TryFrom<SlackFile> for SlackMatrix {
    type Error = Error;

    fn try_from(file: SlackFile) -> Result<Self> {
        let slack = match (file.n, file.rows, file.points) {
            (Some(n), Some(rows), Some(points)) => {
                let h = HPolytope::new(n, rows)?;
                let v = VPolytope::new(n, points)?;
                let s = build_slack(&h, &v)?;
                if s.to_rows() != file.entries {
                    return Err(Error::Invalid(
                        "slack entries disagree with the stored polytope".into(),
                    ));
                }
                s
            }
            _ => SlackMatrix::from_entries(file.entries)?,
        };
        if slack.max_entry() != file.max_entry {
            return Err(Error::Invalid(format!(
                "max_entry {} does not match entries (max {})",
                file.max_entry,
                slack.max_entry()
            )));
        }
        Ok(slack)
    }
}
