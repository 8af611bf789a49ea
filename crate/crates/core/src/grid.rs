//! Uniform rectangular discretization of the domain Ω with indexed boundary Γ.
//!
//! Nodes are stored row-major: node `(i, j)` (column `i` along x, row `j`
//! along y) has flat index `j * nx + i`. The perimeter is indexed separately,
//! counterclockwise from the lower-left corner, with corners counted once.
//!
//! The module provides the symmetric Robin-Laplacian operator obtained by
//! ghost-node elimination of the boundary condition `∂y/∂ν + b y = v`,
//! mass-lumped trapezoidal quadrature on Ω and Γ, trace/extension maps, and a
//! delta-band surrogate for level-set measures.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::{Error, Result};

/// Uniform tensor grid on an axis-aligned rectangle.
#[derive(Debug, Clone)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub x0: f64,
    pub y0: f64,
    pub lx: f64,
    pub ly: f64,
    pub hx: f64,
    pub hy: f64,
    /// Flat node index of each perimeter node, counterclockwise from (0, 0).
    boundary_nodes: Vec<usize>,
    /// Perimeter position of each node, `usize::MAX` for interior nodes.
    node_to_boundary: Vec<usize>,
}

/// Build a grid with `nx` × `ny` nodes on the rectangle
/// `[x0, x0+lx] × [y0, y0+ly]`.
pub fn build_grid(nx: usize, ny: usize, rect: [f64; 4]) -> Result<Arc<Grid>> {
    Grid::new(nx, ny, rect).map(Arc::new)
}

impl Grid {
    pub fn new(nx: usize, ny: usize, rect: [f64; 4]) -> Result<Grid> {
        let [x0, y0, lx, ly] = rect;
        if nx < 3 || ny < 3 {
            return Err(Error::InvalidGrid(format!(
                "need at least 3 nodes per axis, got {nx} x {ny}"
            )));
        }
        if !(lx > 0.0) || !(ly > 0.0) || !lx.is_finite() || !ly.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "side lengths must be positive, got {lx} x {ly}"
            )));
        }
        let hx = lx / (nx - 1) as f64;
        let hy = ly / (ny - 1) as f64;

        // Perimeter ordering: bottom (left->right), right (bottom->top),
        // top (right->left), left (top->bottom). Corners appear once.
        let mut boundary_nodes = Vec::with_capacity(2 * nx + 2 * ny - 4);
        for i in 0..nx {
            boundary_nodes.push(i); // j = 0
        }
        for j in 1..ny {
            boundary_nodes.push(j * nx + (nx - 1));
        }
        for i in (0..nx - 1).rev() {
            boundary_nodes.push((ny - 1) * nx + i);
        }
        for j in (1..ny - 1).rev() {
            boundary_nodes.push(j * nx);
        }
        debug_assert_eq!(boundary_nodes.len(), 2 * nx + 2 * ny - 4);

        let mut node_to_boundary = vec![usize::MAX; nx * ny];
        for (k, &node) in boundary_nodes.iter().enumerate() {
            node_to_boundary[node] = k;
        }

        Ok(Grid {
            nx,
            ny,
            x0,
            y0,
            lx,
            ly,
            hx,
            hy,
            boundary_nodes,
            node_to_boundary,
        })
    }

    pub fn unit_square(n: usize) -> Result<Grid> {
        Grid::new(n, n, [0.0, 0.0, 1.0, 1.0])
    }

    #[inline]
    pub fn n_nodes(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn n_boundary(&self) -> usize {
        2 * self.nx + 2 * self.ny - 4
    }

    #[inline]
    pub fn n_interior(&self) -> usize {
        (self.nx - 2) * (self.ny - 2)
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.nx && j < self.ny);
        j * self.nx + i
    }

    #[inline]
    pub fn ij(&self, node: usize) -> (usize, usize) {
        (node % self.nx, node / self.nx)
    }

    #[inline]
    pub fn xy(&self, node: usize) -> (f64, f64) {
        let (i, j) = self.ij(node);
        (self.x0 + i as f64 * self.hx, self.y0 + j as f64 * self.hy)
    }

    #[inline]
    pub fn is_boundary(&self, node: usize) -> bool {
        self.node_to_boundary[node] != usize::MAX
    }

    #[inline]
    pub fn is_interior(&self, node: usize) -> bool {
        !self.is_boundary(node)
    }

    /// Perimeter position of `node`, or `None` for interior nodes.
    #[inline]
    pub fn boundary_position(&self, node: usize) -> Option<usize> {
        match self.node_to_boundary[node] {
            usize::MAX => None,
            k => Some(k),
        }
    }

    /// Flat node index of the `k`-th perimeter node.
    #[inline]
    pub fn boundary_node(&self, k: usize) -> usize {
        self.boundary_nodes[k]
    }

    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary_nodes
    }

    /// Position of the `k`-th perimeter node.
    pub fn boundary_xy(&self, k: usize) -> (f64, f64) {
        self.xy(self.boundary_nodes[k])
    }

    /// Mass-lumped trapezoidal quadrature weights on Ω (one per node):
    /// `hx*hy`, halved on edges, quartered at corners.
    pub fn weights_omega(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.n_nodes()];
        for j in 0..self.ny {
            let wy = if j == 0 || j == self.ny - 1 { 0.5 } else { 1.0 };
            for i in 0..self.nx {
                let wx = if i == 0 || i == self.nx - 1 { 0.5 } else { 1.0 };
                w[self.idx(i, j)] = self.hx * self.hy * wx * wy;
            }
        }
        w
    }

    /// Arc-length trapezoidal weights on Γ (one per perimeter node).
    /// A corner collects half a segment from each of its two edges.
    pub fn weights_gamma(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.n_boundary()];
        for (k, &node) in self.boundary_nodes.iter().enumerate() {
            let (i, j) = self.ij(node);
            let on_x_edge = j == 0 || j == self.ny - 1; // runs along x: segments hx
            let on_y_edge = i == 0 || i == self.nx - 1;
            w[k] = match (on_x_edge, on_y_edge) {
                (true, true) => 0.5 * (self.hx + self.hy), // corner
                (true, false) => self.hx,
                (false, true) => self.hy,
                (false, false) => unreachable!("boundary node off the perimeter"),
            };
        }
        w
    }

    fn same_layout(&self, other: &Grid) -> bool {
        self.nx == other.nx
            && self.ny == other.ny
            && self.x0 == other.x0
            && self.y0 == other.y0
            && self.lx == other.lx
            && self.ly == other.ly
    }
}

/// Real-valued grid function on all Ω nodes (row-major).
#[derive(Debug, Clone)]
pub struct Field {
    grid: Arc<Grid>,
    pub values: Vec<f64>,
}

/// Real-valued grid function on the Γ perimeter nodes.
#[derive(Debug, Clone)]
pub struct BoundaryField {
    grid: Arc<Grid>,
    pub values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Field> {
        if values.len() != grid.n_nodes() {
            return Err(Error::GridMismatch(format!(
                "field has {} values, grid has {} nodes",
                values.len(),
                grid.n_nodes()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("field contains non-finite entries".into()));
        }
        Ok(Field { grid, values })
    }

    pub fn constant(grid: Arc<Grid>, c: f64) -> Field {
        let n = grid.n_nodes();
        Field { grid, values: vec![c; n] }
    }

    pub fn zeros(grid: Arc<Grid>) -> Field {
        Field::constant(grid, 0.0)
    }

    /// Sample `f(x, y)` at every node.
    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(f64, f64) -> f64) -> Field {
        let values = (0..grid.n_nodes())
            .map(|n| {
                let (x, y) = grid.xy(n);
                f(x, y)
            })
            .collect();
        Field { grid, values }
    }

    #[inline]
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn norm_max(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn range(&self) -> f64 {
        self.max() - self.min()
    }

    /// `self + s * other`, elementwise.
    pub fn axpy(&self, s: f64, other: &Field) -> Field {
        debug_assert!(self.grid.same_layout(&other.grid));
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + s * b)
            .collect();
        Field { grid: self.grid.clone(), values }
    }

    pub fn scale(&self, s: f64) -> Field {
        let values = self.values.iter().map(|a| a * s).collect();
        Field { grid: self.grid.clone(), values }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        let values = self.values.iter().map(|&a| f(a)).collect();
        Field { grid: self.grid.clone(), values }
    }
}

impl BoundaryField {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<BoundaryField> {
        if values.len() != grid.n_boundary() {
            return Err(Error::GridMismatch(format!(
                "boundary field has {} values, grid has {} perimeter nodes",
                values.len(),
                grid.n_boundary()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData(
                "boundary field contains non-finite entries".into(),
            ));
        }
        Ok(BoundaryField { grid, values })
    }

    pub fn constant(grid: Arc<Grid>, c: f64) -> BoundaryField {
        let n = grid.n_boundary();
        BoundaryField { grid, values: vec![c; n] }
    }

    pub fn zeros(grid: Arc<Grid>) -> BoundaryField {
        BoundaryField::constant(grid, 0.0)
    }

    /// Sample `f(x, y)` at every perimeter node.
    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(f64, f64) -> f64) -> BoundaryField {
        let values = (0..grid.n_boundary())
            .map(|k| {
                let (x, y) = grid.boundary_xy(k);
                f(x, y)
            })
            .collect();
        BoundaryField { grid, values }
    }

    #[inline]
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn norm_max(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn axpy(&self, s: f64, other: &BoundaryField) -> BoundaryField {
        debug_assert!(self.grid.same_layout(&other.grid));
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + s * b)
            .collect();
        BoundaryField { grid: self.grid.clone(), values }
    }

    pub fn scale(&self, s: f64) -> BoundaryField {
        let values = self.values.iter().map(|a| a * s).collect();
        BoundaryField { grid: self.grid.clone(), values }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> BoundaryField {
        let values = self.values.iter().map(|&a| f(a)).collect();
        BoundaryField { grid: self.grid.clone(), values }
    }
}

fn check_same_grid(a: &Grid, b: &Grid) -> Result<()> {
    if a.same_layout(b) {
        Ok(())
    } else {
        Err(Error::GridMismatch(format!(
            "{}x{} vs {}x{}",
            a.nx, a.ny, b.nx, b.ny
        )))
    }
}

/// Quadrature inner product on Ω.
pub fn inner_omega(f: &Field, g: &Field) -> Result<f64> {
    check_same_grid(&f.grid, &g.grid)?;
    let w = f.grid.weights_omega();
    Ok(f.values
        .iter()
        .zip(&g.values)
        .zip(&w)
        .map(|((a, b), w)| w * a * b)
        .sum())
}

/// Quadrature inner product on Γ.
pub fn inner_gamma(f: &BoundaryField, g: &BoundaryField) -> Result<f64> {
    check_same_grid(&f.grid, &g.grid)?;
    let w = f.grid.weights_gamma();
    Ok(f.values
        .iter()
        .zip(&g.values)
        .zip(&w)
        .map(|((a, b), w)| w * a * b)
        .sum())
}

pub fn norm_omega(f: &Field) -> f64 {
    inner_omega(f, f).expect("same grid").sqrt()
}

pub fn norm_gamma(f: &BoundaryField) -> f64 {
    inner_gamma(f, f).expect("same grid").sqrt()
}

/// Discrete H¹ seminorm squared via forward differences, trapezoid in the
/// transverse direction.
fn h1_semi_sq(f: &Field) -> f64 {
    let g = &f.grid;
    let v = &f.values;
    let mut acc = 0.0;
    for j in 0..g.ny {
        let wt = if j == 0 || j == g.ny - 1 { 0.5 } else { 1.0 };
        for i in 0..g.nx - 1 {
            let d = (v[g.idx(i + 1, j)] - v[g.idx(i, j)]) / g.hx;
            acc += wt * g.hx * g.hy * d * d;
        }
    }
    for i in 0..g.nx {
        let wt = if i == 0 || i == g.nx - 1 { 0.5 } else { 1.0 };
        for j in 0..g.ny - 1 {
            let d = (v[g.idx(i, j + 1)] - v[g.idx(i, j)]) / g.hy;
            acc += wt * g.hx * g.hy * d * d;
        }
    }
    acc
}

/// Discrete H¹ norm: `(‖f‖²_Ω + ‖∇_h f‖²)^{1/2}`.
pub fn norm_h1(f: &Field) -> f64 {
    let l2sq = inner_omega(f, f).expect("same grid");
    (l2sq + h1_semi_sq(f)).sqrt()
}

/// Restrict a field to the perimeter, in perimeter order.
pub fn trace(f: &Field) -> BoundaryField {
    let values = f
        .grid
        .boundary_nodes
        .iter()
        .map(|&n| f.values[n])
        .collect();
    BoundaryField { grid: f.grid.clone(), values }
}

/// Place boundary values at perimeter nodes and zero inside.
pub fn extend_by_zero(g: &BoundaryField) -> Field {
    let mut values = vec![0.0; g.grid.n_nodes()];
    for (k, &node) in g.grid.boundary_nodes.iter().enumerate() {
        values[node] = g.values[k];
    }
    Field { grid: g.grid.clone(), values }
}

/// Quadrature measure of the delta-band `{|y - t| <= delta}`, a discrete
/// surrogate for the level-set measure.
pub fn level_set_measure(y: &Field, t: f64, delta: f64) -> f64 {
    debug_assert!(delta >= 0.0);
    let w = y.grid.weights_omega();
    y.values
        .iter()
        .zip(&w)
        .filter(|(v, _)| (**v - t).abs() <= delta)
        .map(|(_, w)| w)
        .sum()
}

/// Nodewise mask of the delta-band `{|y - t| <= delta}`.
pub fn level_set_mask(y: &Field, t: f64, delta: f64) -> Vec<bool> {
    y.values.iter().map(|v| (v - t).abs() <= delta).collect()
}

/// Five-point Laplacian `Δ_h y` at interior nodes (zero at boundary nodes).
pub fn interior_laplacian(y: &Field) -> Field {
    let g = &y.grid;
    let v = &y.values;
    let mut out = vec![0.0; g.n_nodes()];
    let (ihx2, ihy2) = (1.0 / (g.hx * g.hx), 1.0 / (g.hy * g.hy));
    for j in 1..g.ny - 1 {
        for i in 1..g.nx - 1 {
            let c = g.idx(i, j);
            out[c] = (v[c - 1] + v[c + 1] - 2.0 * v[c]) * ihx2
                + (v[c - g.nx] + v[c + g.nx] - 2.0 * v[c]) * ihy2;
        }
    }
    Field { grid: y.grid.clone(), values: out }
}

/// Compressed sparse row matrix (square, symmetric by construction here).
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub vals: Vec<f64>,
}

impl CsrMatrix {
    fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> CsrMatrix {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|(c, _)| *c);
            for (c, v) in row {
                col_idx.push(c);
                vals.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix { n, row_ptr, col_idx, vals }
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.col_idx[k]];
            }
            *o = acc;
        }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        for k in self.row_ptr[r]..self.row_ptr[r + 1] {
            if self.col_idx[k] == c {
                return self.vals[k];
            }
        }
        0.0
    }

    pub fn norm_max(&self) -> f64 {
        self.vals.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Largest |A_ij - A_ji| over the stored pattern.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.col_idx[k];
                worst = worst.max((self.vals[k] - self.get(c, r)).abs());
            }
        }
        worst
    }
}

/// Symmetric discretization of the bilinear form `∫ ∇y·∇w + ∫_Γ b y w`,
/// scaled so that the discrete state system reads
/// `A y + M_Ω d(y) = M_Ω u + M_Γ v` with lumped masses `M_Ω`, `M_Γ`.
///
/// The Robin condition is imposed by eliminating ghost nodes through the
/// centered normal difference; corner nodes apply the condition on both
/// incident faces. Scaling every row by its Ω quadrature weight restores
/// symmetry and makes the boundary data enter with exactly the Γ weights.
#[derive(Debug, Clone)]
pub struct RobinOperator {
    grid: Arc<Grid>,
    pub matrix: CsrMatrix,
    /// Samples of the Robin coefficient b, in perimeter order.
    pub b: BoundaryField,
}

/// Assemble the Robin-Laplacian for a coefficient `b >= b0 > 0` on Γ.
pub fn assemble_robin(grid: &Arc<Grid>, b: &BoundaryField) -> Result<RobinOperator> {
    check_same_grid(grid, &b.grid)?;
    if let Some((k, &bad)) = b.values.iter().enumerate().find(|(_, v)| **v <= 0.0) {
        return Err(Error::InvalidData(format!(
            "Robin coefficient must be strictly positive on the boundary, got {bad} at perimeter node {k}"
        )));
    }

    let g = grid.as_ref();
    let n = g.n_nodes();
    let w_omega = g.weights_omega();
    let w_gamma = g.weights_gamma();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::with_capacity(5); n];

    let ihx2 = 1.0 / (g.hx * g.hx);
    let ihy2 = 1.0 / (g.hy * g.hy);

    for j in 0..g.ny {
        for i in 0..g.nx {
            let c = g.idx(i, j);
            let w = w_omega[c];
            let mut diag = 0.0;

            // x-direction stencil; boundary columns use the ghost-eliminated
            // one-sided form (factor 2 toward the interior neighbor).
            if i > 0 && i < g.nx - 1 {
                diag += 2.0 * w * ihx2;
                rows[c].push((g.idx(i - 1, j), -w * ihx2));
                rows[c].push((g.idx(i + 1, j), -w * ihx2));
            } else if i == 0 {
                diag += 2.0 * w * ihx2;
                rows[c].push((g.idx(1, j), -2.0 * w * ihx2));
            } else {
                diag += 2.0 * w * ihx2;
                rows[c].push((g.idx(g.nx - 2, j), -2.0 * w * ihx2));
            }

            // y-direction stencil.
            if j > 0 && j < g.ny - 1 {
                diag += 2.0 * w * ihy2;
                rows[c].push((g.idx(i, j - 1), -w * ihy2));
                rows[c].push((g.idx(i, j + 1), -w * ihy2));
            } else if j == 0 {
                diag += 2.0 * w * ihy2;
                rows[c].push((g.idx(i, 1), -2.0 * w * ihy2));
            } else {
                diag += 2.0 * w * ihy2;
                rows[c].push((g.idx(i, g.ny - 2), -2.0 * w * ihy2));
            }

            // Robin mass: b times the arc-length weight of the node.
            if let Some(k) = g.boundary_position(c) {
                diag += b.values[k] * w_gamma[k];
            }

            rows[c].push((c, diag));
        }
    }

    Ok(RobinOperator {
        grid: grid.clone(),
        matrix: CsrMatrix::from_rows(rows),
        b: b.clone(),
    })
}

impl RobinOperator {
    #[inline]
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn apply(&self, y: &Field) -> Field {
        let mut out = vec![0.0; self.grid.n_nodes()];
        self.matrix.apply(&y.values, &mut out);
        Field { grid: self.grid.clone(), values: out }
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.matrix.n).map(|r| self.matrix.get(r, r)).collect()
    }
}

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

fn format_header(g: &Grid) -> String {
    format!(
        "# nx,ny,hx,hy,x0,y0\n# {},{},{:.17e},{:.17e},{:.17e},{:.17e}\n",
        g.nx, g.ny, g.hx, g.hy, g.x0, g.y0
    )
}

/// Serialize a field as CSV: grid header, then one value per line, row-major,
/// 17 significant digits.
pub fn field_to_csv(f: &Field) -> String {
    let mut s = format_header(&f.grid);
    for v in &f.values {
        let _ = writeln!(s, "{:.16e}", v);
    }
    s
}

/// Serialize a boundary field as CSV, in perimeter order.
pub fn boundary_field_to_csv(f: &BoundaryField) -> String {
    let mut s = format_header(&f.grid);
    for v in &f.values {
        let _ = writeln!(s, "{:.16e}", v);
    }
    s
}

fn parse_csv_values(text: &str) -> Result<Vec<f64>> {
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: f64 = line
            .parse()
            .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
        values.push(v);
    }
    Ok(values)
}

/// Parse a field CSV produced by [`field_to_csv`]; the values must match the
/// node count of `grid`.
pub fn field_from_csv(grid: Arc<Grid>, text: &str) -> Result<Field> {
    Field::new(grid, parse_csv_values(text)?)
}

pub fn boundary_field_from_csv(grid: Arc<Grid>, text: &str) -> Result<BoundaryField> {
    BoundaryField::new(grid, parse_csv_values(text)?)
}

/// Legacy-VTK STRUCTURED_POINTS text export for visualization.
pub fn field_to_vtk(f: &Field, name: &str) -> String {
    let g = &f.grid;
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\n");
    let _ = writeln!(s, "{name}");
    s.push_str("ASCII\nDATASET STRUCTURED_POINTS\n");
    let _ = writeln!(s, "DIMENSIONS {} {} 1", g.nx, g.ny);
    let _ = writeln!(s, "ORIGIN {} {} 0", g.x0, g.y0);
    let _ = writeln!(s, "SPACING {} {} 1", g.hx, g.hy);
    let _ = writeln!(s, "POINT_DATA {}", g.n_nodes());
    let _ = writeln!(s, "SCALARS {name} double 1");
    s.push_str("LOOKUP_TABLE default\n");
    for v in &f.values {
        let _ = writeln!(s, "{:.16e}", v);
    }
    s
}
