//! Full time steps of the two splitting methods.
//!
//! Each step is a fixed sequence of deterministic stages followed by one
//! pointwise stochastic rotation. A stage is a short list of sweeps; a
//! sweep updates one (E, H) component pair along one axis, line by line,
//! through [`crate::circulant::LineSolver`]. Within a stage the sweeps
//! touch disjoint component sets, so they may run in any order (or in
//! parallel) with identical results.
//!
//! Stage tables:
//!
//! ```text
//! method I,  stage 1 (+): x:(E3,H2)  y:(E1,H3)  z:(E2,H1)
//! method I,  stage 2 (-): x:(E2,H3)  y:(E3,H1)  z:(E1,H2)
//! method II, stage 1 (x): (E2,H3) -  (E3,H2) +   E1,H1 frozen
//! method II, stage 2 (y): (E3,H1) -  (E1,H3) +   E2,H2 frozen
//! method II, stage 3 (z): (E1,H2) -  (E2,H1) +   E3,H3 frozen
//! ```
//!
//! Both methods close the step with the exact rotation generated by the
//! noise increment ([`crate::noise::apply_rotation`]).

use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;

use crate::circulant::{LineSolver, LineSystemParams, Sign};
use crate::error::{Error, Result};
use crate::field::{Axis, Component, FieldState, Grid, Medium};
use crate::noise::{self, NoiseIncrement, NoisePath};

/// Which splitting method a stepper runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    SplittingI,
    SplittingII,
}

impl Method {
    pub const ALL: [Method; 2] = [Method::SplittingI, Method::SplittingII];

    pub fn tag(self) -> &'static str {
        match self {
            Method::SplittingI => "I",
            Method::SplittingII => "II",
        }
    }

    /// The normative deterministic stage tables.
    pub fn stages(self) -> Vec<StageDescriptor> {
        use Component::*;
        let sweep = |axis, e, h, sign| Sweep {
            axis,
            electric: e,
            magnetic: h,
            sign,
        };
        let build = |sweeps: Vec<Sweep>| {
            StageDescriptor::new(sweeps).expect("normative stage tables are valid")
        };
        match self {
            Method::SplittingI => vec![
                build(vec![
                    sweep(Axis::X, E3, H2, Sign::Plus),
                    sweep(Axis::Y, E1, H3, Sign::Plus),
                    sweep(Axis::Z, E2, H1, Sign::Plus),
                ]),
                build(vec![
                    sweep(Axis::X, E2, H3, Sign::Minus),
                    sweep(Axis::Y, E3, H1, Sign::Minus),
                    sweep(Axis::Z, E1, H2, Sign::Minus),
                ]),
            ],
            Method::SplittingII => vec![
                build(vec![
                    sweep(Axis::X, E2, H3, Sign::Minus),
                    sweep(Axis::X, E3, H2, Sign::Plus),
                ]),
                build(vec![
                    sweep(Axis::Y, E3, H1, Sign::Minus),
                    sweep(Axis::Y, E1, H3, Sign::Plus),
                ]),
                build(vec![
                    sweep(Axis::Z, E1, H2, Sign::Minus),
                    sweep(Axis::Z, E2, H1, Sign::Plus),
                ]),
            ],
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "I" | "1" => Ok(Method::SplittingI),
            "II" | "2" => Ok(Method::SplittingII),
            other => Err(Error::InvalidConfig {
                field: "method".into(),
                reason: format!("unknown method `{other}`, expected I or II"),
            }),
        }
    }
}

/// One line sweep: update the (electric, magnetic) pair along `axis` with
/// orientation `sign`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Sweep {
    pub axis: Axis,
    pub electric: Component,
    pub magnetic: Component,
    pub sign: Sign,
}

/// An ordered list of sweeps forming one deterministic stage.
///
/// Construction enforces that every sweep pairs an electric with a
/// magnetic component and that no component appears in two sweeps, which
/// is what makes the sweeps independent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StageDescriptor {
    sweeps: Vec<Sweep>,
}

impl StageDescriptor {
    pub fn new(sweeps: Vec<Sweep>) -> Result<Self> {
        let mut seen = [false; 6];
        for sweep in &sweeps {
            if !sweep.electric.is_electric() || sweep.magnetic.is_electric() {
                return Err(Error::BadSweepPair {
                    electric: sweep.electric.label(),
                    magnetic: sweep.magnetic.label(),
                });
            }
            for c in [sweep.electric, sweep.magnetic] {
                if seen[c.index()] {
                    return Err(Error::DuplicateComponent {
                        component: c.label(),
                    });
                }
                seen[c.index()] = true;
            }
        }
        Ok(StageDescriptor { sweeps })
    }

    pub fn sweeps(&self) -> &[Sweep] {
        &self.sweeps
    }
}

/// A configured stepper: grid, medium, stage tables and cached line
/// solvers (one per distinct axis length, shared across sweeps).
pub struct SplitStepper {
    method: Method,
    grid: Grid,
    medium: Medium,
    stages: Vec<StageDescriptor>,
    solvers: [Arc<LineSolver>; 3],
}

impl SplitStepper {
    pub fn new(method: Method, grid: &Grid, medium: &Medium) -> Result<Self> {
        let mut by_len: HashMap<usize, Arc<LineSolver>> = HashMap::new();
        let mut solvers = Vec::with_capacity(3);
        for axis in Axis::ALL {
            let n = grid.count(axis);
            let solver = match by_len.get(&n) {
                Some(s) => Arc::clone(s),
                None => {
                    let s = Arc::new(LineSolver::new(n)?);
                    by_len.insert(n, Arc::clone(&s));
                    s
                }
            };
            solvers.push(solver);
        }
        let solvers: [Arc<LineSolver>; 3] = solvers.try_into().map_err(|_| Error::NonFinite {
            context: "solver table",
        })?;
        Ok(SplitStepper {
            method,
            grid: *grid,
            medium: *medium,
            stages: method.stages(),
            solvers,
        })
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn medium(&self) -> &Medium {
        &self.medium
    }

    pub fn stages(&self) -> &[StageDescriptor] {
        &self.stages
    }

    /// Applies one deterministic stage in place. Components not named by
    /// the stage's sweeps are left bitwise untouched.
    pub fn deterministic_stage(
        &self,
        state: &mut FieldState,
        stage: &StageDescriptor,
    ) -> Result<()> {
        if state.counts() != self.grid.counts() {
            return Err(Error::ShapeMismatch {
                expected: self.grid.counts(),
                actual: state.counts(),
            });
        }
        for sweep in stage.sweeps() {
            self.run_sweep(state, sweep)?;
        }
        Ok(())
    }

    fn run_sweep(&self, state: &mut FieldState, sweep: &Sweep) -> Result<()> {
        let axis = sweep.axis;
        let solver = &self.solvers[axis.index()];
        let n = solver.len();
        let params = LineSystemParams::new(
            sweep.sign,
            self.grid.tau() / (2.0 * self.grid.step(axis)),
            self.medium.eps,
            self.medium.mu,
        )?;

        let counts = self.grid.counts();
        let (t1, t2) = match axis {
            Axis::X => (counts[1], counts[2]),
            Axis::Y => (counts[0], counts[2]),
            Axis::Z => (counts[0], counts[1]),
        };
        let pairs: Vec<(usize, usize)> =
            (0..t2).flat_map(|b| (0..t1).map(move |a| (a, b))).collect();

        let (e_field, h_field) = state.component_pair_mut(sweep.electric, sweep.magnetic);
        let e_read: &crate::field::ScalarField = e_field;
        let h_read: &crate::field::ScalarField = h_field;

        // Lines have disjoint write sets; solve them in parallel and
        // scatter in a fixed order so results are schedule-independent.
        let solved: Result<Vec<(Vec<f64>, Vec<f64>)>> = pairs
            .par_iter()
            .map_init(
                || (solver.make_scratch(), vec![0.0; n], vec![0.0; n]),
                |(scratch, e_in, h_in), &t| {
                    e_read.read_line(axis, t, e_in)?;
                    h_read.read_line(axis, t, h_in)?;
                    let mut e_out = vec![0.0; n];
                    let mut h_out = vec![0.0; n];
                    solver.solve_pair(e_in, h_in, &mut e_out, &mut h_out, params, scratch)?;
                    Ok((e_out, h_out))
                },
            )
            .collect();
        let solved = solved?;

        for (&t, (e_new, h_new)) in pairs.iter().zip(&solved) {
            e_field.write_line(axis, t, e_new)?;
            h_field.write_line(axis, t, h_new)?;
        }
        Ok(())
    }

    /// One full step: all deterministic stages, then the exact rotation by
    /// the supplied noise increment.
    pub fn step(&self, state: &mut FieldState, increment: &NoiseIncrement) -> Result<()> {
        for stage in &self.stages {
            self.deterministic_stage(state, stage)?;
        }
        noise::apply_rotation(state, increment, &self.medium)
    }

    /// Runs `grid.n_steps()` steps, drawing increments from `noise_path`
    /// and invoking `hook(step, state)` at every step boundary including
    /// the initial state. Hook failures abort with the step index.
    pub fn evolve<F>(
        &self,
        mut state: FieldState,
        noise_path: &NoisePath<'_>,
        mut hook: F,
    ) -> Result<FieldState>
    where
        F: FnMut(usize, &FieldState) -> std::result::Result<(), String>,
    {
        hook(0, &state).map_err(|reason| Error::Hook { step: 0, reason })?;
        for n in 0..self.grid.n_steps() {
            let increment = noise_path.increment(n)?;
            self.step(&mut state, increment.as_ref())?;
            hook(n + 1, &state).map_err(|reason| Error::Hook {
                step: n + 1,
                reason,
            })?;
        }
        Ok(state)
    }
}
