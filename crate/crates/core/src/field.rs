//! Spatial discretization and electromagnetic field state.
//!
//! The domain is a rectangular box carrying a uniform lattice with periodic
//! identification: on each axis the index runs `0..count` and node `count`
//! is the same point as node `0`. Point counts must be odd and at least 3
//! so that the implicit line systems built in [`crate::circulant`] remain
//! invertible.
//!
//! Storage is x-fastest: a line along x is contiguous, lines along y and z
//! are gathered and scattered with a fixed stride. Stage-1 sweeps of both
//! splitting methods run along x, so the hottest sweeps stay contiguous.

use crate::error::{Error, Result};

/// Smallest admissible number of lattice points per axis.
pub const MIN_POINTS: usize = 3;

/// Coordinate axis of the lattice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    #[inline]
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    pub fn label(self) -> char {
        match self {
            Axis::X => 'x',
            Axis::Y => 'y',
            Axis::Z => 'z',
        }
    }
}

/// One of the six scalar field components.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Component {
    E1,
    E2,
    E3,
    H1,
    H2,
    H3,
}

impl Component {
    pub const ALL: [Component; 6] = [
        Component::E1,
        Component::E2,
        Component::E3,
        Component::H1,
        Component::H2,
        Component::H3,
    ];

    #[inline]
    pub fn index(self) -> usize {
        match self {
            Component::E1 => 0,
            Component::E2 => 1,
            Component::E3 => 2,
            Component::H1 => 3,
            Component::H2 => 4,
            Component::H3 => 5,
        }
    }

    pub fn is_electric(self) -> bool {
        matches!(self, Component::E1 | Component::E2 | Component::E3)
    }

    pub fn label(self) -> &'static str {
        match self {
            Component::E1 => "E1",
            Component::E2 => "E2",
            Component::E3 => "E3",
            Component::H1 => "H1",
            Component::H2 => "H2",
            Component::H3 => "H3",
        }
    }
}

/// Periodic uniform lattice over a rectangular box, plus the time grid.
///
/// `h_axis = (hi - lo) / count`, and node `i` sits at `lo + i * h`. Index
/// `count` wraps around to index `0`; no duplicate boundary plane is stored.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    bounds: [(f64, f64); 3],
    counts: [usize; 3],
    steps: [f64; 3],
    tau: f64,
    n_steps: usize,
}

impl Grid {
    /// Builds the lattice. Counts must be odd and >= 3 on every axis; even
    /// counts are rejected because the averaging stencil behind the line
    /// solves is singular for them.
    pub fn new(
        bounds: [(f64, f64); 3],
        counts: [usize; 3],
        tau: f64,
        n_steps: usize,
    ) -> Result<Self> {
        for (axis, &(lo, hi)) in Axis::ALL.iter().zip(bounds.iter()) {
            if !lo.is_finite() || !hi.is_finite() || hi <= lo {
                return Err(Error::InvalidBounds {
                    axis: axis.label(),
                    lo,
                    hi,
                });
            }
        }
        for &count in &counts {
            if count < MIN_POINTS {
                return Err(Error::InvalidPointCount {
                    count,
                    reason: "too small",
                });
            }
            if count % 2 == 0 {
                return Err(Error::InvalidPointCount {
                    count,
                    reason: "even",
                });
            }
        }
        if !tau.is_finite() || tau <= 0.0 {
            return Err(Error::InvalidTimeStep { tau });
        }
        let mut steps = [0.0; 3];
        for a in 0..3 {
            steps[a] = (bounds[a].1 - bounds[a].0) / counts[a] as f64;
        }
        Ok(Grid {
            bounds,
            counts,
            steps,
            tau,
            n_steps,
        })
    }

    /// Cube helper: same bounds and count on all three axes.
    pub fn cube(lo: f64, hi: f64, count: usize, tau: f64, n_steps: usize) -> Result<Self> {
        Grid::new([(lo, hi); 3], [count; 3], tau, n_steps)
    }

    #[inline]
    pub fn count(&self, axis: Axis) -> usize {
        self.counts[axis.index()]
    }

    #[inline]
    pub fn counts(&self) -> [usize; 3] {
        self.counts
    }

    #[inline]
    pub fn step(&self, axis: Axis) -> f64 {
        self.steps[axis.index()]
    }

    pub fn bounds(&self, axis: Axis) -> (f64, f64) {
        self.bounds[axis.index()]
    }

    #[inline]
    pub fn tau(&self) -> f64 {
        self.tau
    }

    #[inline]
    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn t_end(&self) -> f64 {
        self.tau * self.n_steps as f64
    }

    /// Coordinate of node `index` on `axis` (no wrapping).
    #[inline]
    pub fn coord(&self, axis: Axis, index: usize) -> f64 {
        let a = axis.index();
        self.bounds[a].0 + index as f64 * self.steps[a]
    }

    /// Coordinates of node `(i, j, k)`.
    #[inline]
    pub fn node(&self, i: usize, j: usize, k: usize) -> (f64, f64, f64) {
        (
            self.coord(Axis::X, i),
            self.coord(Axis::Y, j),
            self.coord(Axis::Z, k),
        )
    }

    /// Volume weight `h_x * h_y * h_z` of one lattice cell.
    pub fn cell_volume(&self) -> f64 {
        self.steps[0] * self.steps[1] * self.steps[2]
    }
}

/// Material coefficients: permittivity, permeability and noise intensity.
///
/// `eps` and `mu` are positive scalar constants over the whole domain;
/// `lambda` is the (real, possibly zero) noise intensity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Medium {
    pub eps: f64,
    pub mu: f64,
    pub lambda: f64,
}

impl Medium {
    pub fn new(eps: f64, mu: f64, lambda: f64) -> Result<Self> {
        if !eps.is_finite() || eps <= 0.0 {
            return Err(Error::InvalidCoefficient {
                name: "eps",
                value: eps,
            });
        }
        if !mu.is_finite() || mu <= 0.0 {
            return Err(Error::InvalidCoefficient {
                name: "mu",
                value: mu,
            });
        }
        if !lambda.is_finite() {
            return Err(Error::InvalidCoefficient {
                name: "lambda",
                value: lambda,
            });
        }
        Ok(Medium { eps, mu, lambda })
    }

    /// eps = mu = 1 with the given noise intensity.
    pub fn vacuum(lambda: f64) -> Self {
        Medium {
            eps: 1.0,
            mu: 1.0,
            lambda,
        }
    }
}

/// Scalar lattice function of shape `I x J x K`, stored x-fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    counts: [usize; 3],
    data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(counts: [usize; 3]) -> Self {
        ScalarField {
            counts,
            data: vec![0.0; counts[0] * counts[1] * counts[2]],
        }
    }

    /// Evaluates `f(x, y, z)` at every node of `grid`.
    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64, f64) -> f64) -> Self {
        let counts = grid.counts();
        let mut field = ScalarField::zeros(counts);
        let mut idx = 0;
        for k in 0..counts[2] {
            for j in 0..counts[1] {
                for i in 0..counts[0] {
                    field.data[idx] = f(
                        grid.coord(Axis::X, i),
                        grid.coord(Axis::Y, j),
                        grid.coord(Axis::Z, k),
                    );
                    idx += 1;
                }
            }
        }
        field
    }

    #[inline]
    fn flat(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.counts[0] * (j + self.counts[1] * k)
    }

    #[inline]
    pub fn counts(&self) -> [usize; 3] {
        self.counts
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Wrap-around accessor: node `i` and node `i + count` are the same
    /// point on every axis, for arbitrarily signed indices.
    pub fn get_periodic(&self, i: isize, j: isize, k: isize) -> f64 {
        let wrap = |v: isize, n: usize| -> usize {
            let n = n as isize;
            (((v % n) + n) % n) as usize
        };
        self[(
            wrap(i, self.counts[0]),
            wrap(j, self.counts[1]),
            wrap(k, self.counts[2]),
        )]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Start offset, stride and length of the lattice line along `axis`
    /// with the given transverse indices (see [`line_view`] for the index
    /// convention).
    fn line_geometry(
        &self,
        axis: Axis,
        transverse: (usize, usize),
    ) -> Result<(usize, usize, usize)> {
        let [ci, cj, ck] = self.counts;
        let check = |axis: Axis, index: usize, count: usize| -> Result<()> {
            if index >= count {
                Err(Error::IndexOutOfRange {
                    axis: axis.label(),
                    index,
                    count,
                })
            } else {
                Ok(())
            }
        };
        match axis {
            Axis::X => {
                let (j, k) = transverse;
                check(Axis::Y, j, cj)?;
                check(Axis::Z, k, ck)?;
                Ok((self.flat(0, j, k), 1, ci))
            }
            Axis::Y => {
                let (i, k) = transverse;
                check(Axis::X, i, ci)?;
                check(Axis::Z, k, ck)?;
                Ok((self.flat(i, 0, k), ci, cj))
            }
            Axis::Z => {
                let (i, j) = transverse;
                check(Axis::X, i, ci)?;
                check(Axis::Y, j, cj)?;
                Ok((self.flat(i, j, 0), ci * cj, ck))
            }
        }
    }

    /// Gathers one lattice line into `out`.
    pub fn read_line(&self, axis: Axis, transverse: (usize, usize), out: &mut [f64]) -> Result<()> {
        let (start, stride, len) = self.line_geometry(axis, transverse)?;
        if out.len() != len {
            return Err(Error::LineLength {
                expected: len,
                actual: out.len(),
            });
        }
        let mut pos = start;
        for slot in out.iter_mut() {
            *slot = self.data[pos];
            pos += stride;
        }
        Ok(())
    }

    /// Scatters `values` back into one lattice line; all other entries are
    /// untouched.
    pub fn write_line(
        &mut self,
        axis: Axis,
        transverse: (usize, usize),
        values: &[f64],
    ) -> Result<()> {
        let (start, stride, len) = self.line_geometry(axis, transverse)?;
        if values.len() != len {
            return Err(Error::LineLength {
                expected: len,
                actual: values.len(),
            });
        }
        let mut pos = start;
        for &v in values {
            self.data[pos] = v;
            pos += stride;
        }
        Ok(())
    }
}

impl std::ops::Index<(usize, usize, usize)> for ScalarField {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j, k): (usize, usize, usize)) -> &f64 {
        &self.data[self.flat(i, j, k)]
    }
}

impl std::ops::IndexMut<(usize, usize, usize)> for ScalarField {
    #[inline]
    fn index_mut(&mut self, (i, j, k): (usize, usize, usize)) -> &mut f64 {
        let idx = self.flat(i, j, k);
        &mut self.data[idx]
    }
}

/// The six scalar lattice functions `E1..E3, H1..H3`.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldState {
    counts: [usize; 3],
    fields: [ScalarField; 6],
}

impl FieldState {
    pub fn zeros(counts: [usize; 3]) -> Self {
        FieldState {
            counts,
            fields: std::array::from_fn(|_| ScalarField::zeros(counts)),
        }
    }

    #[inline]
    pub fn counts(&self) -> [usize; 3] {
        self.counts
    }

    #[inline]
    pub fn component(&self, c: Component) -> &ScalarField {
        &self.fields[c.index()]
    }

    #[inline]
    pub fn component_mut(&mut self, c: Component) -> &mut ScalarField {
        &mut self.fields[c.index()]
    }

    /// Mutable access to two distinct components at once (one sweep updates
    /// an (E, H) pair in place).
    pub fn component_pair_mut(
        &mut self,
        a: Component,
        b: Component,
    ) -> (&mut ScalarField, &mut ScalarField) {
        let (ia, ib) = (a.index(), b.index());
        assert_ne!(ia, ib, "component pair must be distinct");
        if ia < ib {
            let (lo, hi) = self.fields.split_at_mut(ib);
            (&mut lo[ia], &mut hi[0])
        } else {
            let (lo, hi) = self.fields.split_at_mut(ia);
            (&mut hi[0], &mut lo[ib])
        }
    }

    /// Electric components in order `E1, E2, E3`.
    pub fn electric(&self) -> &[ScalarField] {
        &self.fields[0..3]
    }

    /// Magnetic components in order `H1, H2, H3`.
    pub fn magnetic(&self) -> &[ScalarField] {
        &self.fields[3..6]
    }

    pub fn is_finite(&self) -> bool {
        self.fields.iter().all(ScalarField::is_finite)
    }

    pub fn max_abs(&self) -> f64 {
        self.fields
            .iter()
            .flat_map(|f| f.as_slice().iter())
            .fold(0.0_f64, |m, &v| m.max(v.abs()))
    }
}

/// Built-in initial data selectors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitialCondition {
    /// Plane-wave profile `u = cos(4 pi (x + y + z))` with polarization
    /// `E = (u, -2u, u)` and `H = (sqrt(3) u, 0, -sqrt(3) u)`.
    PlaneWave,
    /// All six components identically zero.
    Zero,
    /// One component set to a constant, all others zero.
    Constant { component: Component, value: f64 },
}

/// Fills a state from a per-component closure over node coordinates.
pub fn init_fields_with(grid: &Grid, f: impl Fn(Component, f64, f64, f64) -> f64) -> FieldState {
    let mut state = FieldState::zeros(grid.counts());
    for c in Component::ALL {
        *state.component_mut(c) = ScalarField::from_fn(grid, |x, y, z| f(c, x, y, z));
    }
    state
}

/// Evaluates one of the built-in initial conditions at the grid nodes.
pub fn init_fields(grid: &Grid, init: &InitialCondition) -> FieldState {
    match *init {
        InitialCondition::Zero => FieldState::zeros(grid.counts()),
        InitialCondition::Constant { component, value } => {
            let mut state = FieldState::zeros(grid.counts());
            state.component_mut(component).as_mut_slice().fill(value);
            state
        }
        InitialCondition::PlaneWave => {
            let sqrt3 = 3.0_f64.sqrt();
            init_fields_with(grid, |c, x, y, z| {
                let u = (4.0 * std::f64::consts::PI * (x + y + z)).cos();
                match c {
                    Component::E1 => u,
                    Component::E2 => -2.0 * u,
                    Component::E3 => u,
                    Component::H1 => sqrt3 * u,
                    Component::H2 => 0.0,
                    Component::H3 => -sqrt3 * u,
                }
            })
        }
    }
}

/// One lattice line of a single component: contiguous copy of the values
/// along `axis` at fixed transverse indices.
///
/// Transverse index convention: axis x fixes `(j, k)`, axis y fixes
/// `(i, k)`, axis z fixes `(i, j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Line {
    pub component: Component,
    pub axis: Axis,
    pub transverse: (usize, usize),
    pub values: Vec<f64>,
}

/// Copies one lattice line out of the state.
pub fn line_view(
    state: &FieldState,
    component: Component,
    axis: Axis,
    transverse: (usize, usize),
) -> Result<Line> {
    let field = state.component(component);
    let len = field.counts()[axis.index()];
    let mut values = vec![0.0; len];
    field.read_line(axis, transverse, &mut values)?;
    Ok(Line {
        component,
        axis,
        transverse,
        values,
    })
}

/// Writes a line back; the round trip `line_view` -> `write_line` is the
/// identity and touches no other lattice entry.
pub fn write_line(state: &mut FieldState, line: &Line) -> Result<()> {
    state
        .component_mut(line.component)
        .write_line(line.axis, line.transverse, &line.values)
}
