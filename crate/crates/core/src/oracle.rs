//! Dense reference implementations for validating the fast spectral path.
//!
//! Everything here is deliberately slow and obvious: operators are
//! assembled entrywise from their stencils and solved by dense
//! factorization. The oracle exists for tests and the `oracle-check`
//! experiment, never for production runs, and is capped at line length 64
//! and 7^3 grids.

use nalgebra::{DMatrix, DVector};

use crate::circulant::LineSystemParams;
use crate::error::{Error, Result};
use crate::field::{line_view, write_line, FieldState, Grid, Medium};
use crate::stepper::StageDescriptor;

/// Largest line length the dense oracle accepts.
pub const MAX_DENSE_SIZE: usize = 64;

/// Largest per-axis point count for [`dense_deterministic_stage`].
pub const MAX_DENSE_GRID: usize = 7;

/// Smallest averaging-operator eigenvalue treated as nonsingular.
const SINGULAR_TOL: f64 = 1e-10;

/// Densely assembled operators of one line length.
pub struct DenseOperators {
    /// Averaging stencil `(1, 2, 1)/2` with periodic corners.
    pub mass: DMatrix<f64>,
    /// Centered difference `(-1, 0, +1)` with periodic corners.
    pub diff: DMatrix<f64>,
    /// Block diagonal `diag(mass, mass)` acting on an (E, H) pair.
    pub mass_block: DMatrix<f64>,
    /// Off-diagonal coupling `[[0, diff], [diff, 0]]`.
    pub diff_block: DMatrix<f64>,
    /// `mass_block^{-1} * diff_block`; `None` when the averaging operator
    /// is singular (even sizes).
    pub coupling: Option<DMatrix<f64>>,
    /// Smallest eigenvalue of `mass_block`.
    pub min_mass_eigenvalue: f64,
}

fn check_size(n: usize) -> Result<()> {
    if n < 3 {
        return Err(Error::InvalidPointCount {
            count: n,
            reason: "too small",
        });
    }
    if n > MAX_DENSE_SIZE {
        return Err(Error::OracleSizeCap {
            n,
            max: MAX_DENSE_SIZE,
        });
    }
    Ok(())
}

fn assemble_mass(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0
        } else if j == (i + 1) % n || j == (i + n - 1) % n {
            0.5
        } else {
            0.0
        }
    })
}

fn assemble_diff(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| {
        if j == (i + 1) % n {
            1.0
        } else if j == (i + n - 1) % n {
            -1.0
        } else {
            0.0
        }
    })
}

fn block_diag(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        if i < n && j < n {
            m[(i, j)]
        } else if i >= n && j >= n {
            m[(i - n, j - n)]
        } else {
            0.0
        }
    })
}

fn block_anti_diag(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        if i < n && j >= n {
            m[(i, j - n)]
        } else if i >= n && j < n {
            m[(i - n, j)]
        } else {
            0.0
        }
    })
}

/// Assembles the operators of size `n`. Even `n` is permitted so the
/// degeneracy can be demonstrated: the averaging operator then carries the
/// eigenvalue `1 + cos(pi) = 0` and `coupling` is reported as `None`
/// instead of crashing.
pub fn build_dense_operators(n: usize) -> Result<DenseOperators> {
    check_size(n)?;
    let mass = assemble_mass(n);
    let diff = assemble_diff(n);
    let mass_block = block_diag(&mass);
    let diff_block = block_anti_diag(&diff);

    let eigen = mass_block.clone().symmetric_eigen();
    let min_mass_eigenvalue = eigen
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);

    let coupling = if min_mass_eigenvalue > SINGULAR_TOL {
        mass_block.clone().lu().solve(&diff_block)
    } else {
        None
    };

    Ok(DenseOperators {
        mass,
        diff,
        mass_block,
        diff_block,
        coupling,
        min_mass_eigenvalue,
    })
}

/// Numeric witnesses for the structural properties the energy proofs rely
/// on: the block averaging operator is symmetric positive definite, the
/// coupling block is skew, and so is their product.
#[derive(Clone, Debug)]
pub struct MatrixPropertyReport {
    pub n: usize,
    /// `mass_block == mass_block^T`, compared exactly.
    pub mass_block_symmetric: bool,
    /// Smallest eigenvalue of the block averaging operator.
    pub min_eigenvalue: f64,
    pub positive_definite: bool,
    /// Max distance between the sorted dense eigenvalues and the sorted
    /// closed-form values `1 + cos(2 pi k / n)` (each with multiplicity 2).
    pub eigenvalue_formula_defect: f64,
    /// `diff_block == -diff_block^T`, compared exactly.
    pub diff_block_skew: bool,
    /// Max-norm of `coupling + coupling^T`; `None` when singular.
    pub coupling_skew_defect: Option<f64>,
}

impl MatrixPropertyReport {
    /// All four properties hold; expected to be true exactly for odd sizes.
    pub fn all_pass(&self) -> bool {
        self.mass_block_symmetric
            && self.positive_definite
            && self.eigenvalue_formula_defect <= 1e-12
            && self.diff_block_skew
            && self.coupling_skew_defect.is_some_and(|d| d <= 1e-12)
    }
}

pub fn matrix_property_report(n: usize) -> Result<MatrixPropertyReport> {
    let ops = build_dense_operators(n)?;
    let m = &ops.mass_block;
    let mass_block_symmetric = (0..2 * n).all(|i| (0..2 * n).all(|j| m[(i, j)] == m[(j, i)]));
    let d = &ops.diff_block;
    let diff_block_skew = (0..2 * n).all(|i| (0..2 * n).all(|j| d[(i, j)] == -d[(j, i)]));

    let mut dense_eigs: Vec<f64> = m
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .collect();
    dense_eigs.sort_by(f64::total_cmp);
    let mut formula: Vec<f64> = (0..n)
        .flat_map(|k| {
            let v = 1.0 + (2.0 * std::f64::consts::PI * k as f64 / n as f64).cos();
            [v, v]
        })
        .collect();
    formula.sort_by(f64::total_cmp);
    let eigenvalue_formula_defect = dense_eigs
        .iter()
        .zip(&formula)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0_f64, f64::max);

    let coupling_skew_defect = ops.coupling.as_ref().map(|c| {
        let mut defect = 0.0_f64;
        for i in 0..2 * n {
            for j in 0..2 * n {
                defect = defect.max((c[(i, j)] + c[(j, i)]).abs());
            }
        }
        defect
    });

    Ok(MatrixPropertyReport {
        n,
        mass_block_symmetric,
        min_eigenvalue: ops.min_mass_eigenvalue,
        positive_definite: ops.min_mass_eigenvalue > 0.0 && ops.coupling.is_some(),
        eigenvalue_formula_defect,
        diff_block_skew,
        coupling_skew_defect,
    })
}

/// Solves one coupled line system by assembling the full `2n x 2n` real
/// matrix and factoring it densely.
pub fn dense_solve_pair_line(
    e_line: &[f64],
    h_line: &[f64],
    params: LineSystemParams,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = e_line.len();
    if h_line.len() != n {
        return Err(Error::LineLength {
            expected: n,
            actual: h_line.len(),
        });
    }
    let ops = build_dense_operators(n)?;
    if ops.coupling.is_none() {
        return Err(Error::SingularOperator {
            n,
            min_eigenvalue: ops.min_mass_eigenvalue,
        });
    }
    if !e_line.iter().chain(h_line.iter()).all(|v| v.is_finite()) {
        return Err(Error::NonFinite {
            context: "dense line solve input",
        });
    }

    let sc = params.sign.value() * params.c;
    let two_n = 2 * n;
    let mut lhs = DMatrix::<f64>::zeros(two_n, two_n);
    let mut rhs_mat = DMatrix::<f64>::zeros(two_n, two_n);
    for i in 0..n {
        for j in 0..n {
            lhs[(i, j)] = params.eps * ops.mass[(i, j)];
            lhs[(n + i, n + j)] = params.mu * ops.mass[(i, j)];
            lhs[(i, n + j)] = -sc * ops.diff[(i, j)];
            lhs[(n + i, j)] = -sc * ops.diff[(i, j)];
            rhs_mat[(i, j)] = params.eps * ops.mass[(i, j)];
            rhs_mat[(n + i, n + j)] = params.mu * ops.mass[(i, j)];
            rhs_mat[(i, n + j)] = sc * ops.diff[(i, j)];
            rhs_mat[(n + i, j)] = sc * ops.diff[(i, j)];
        }
    }

    let mut input = DVector::<f64>::zeros(two_n);
    for k in 0..n {
        input[k] = e_line[k];
        input[n + k] = h_line[k];
    }
    let rhs = &rhs_mat * &input;
    let solution = lhs
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or(Error::SingularOperator {
            n,
            min_eigenvalue: ops.min_mass_eigenvalue,
        })?;

    let residual = (&lhs * &solution - &rhs).amax();
    let max_in = input.amax();
    debug_assert!(
        residual <= 1e-12 * (1.0 + max_in),
        "dense solve residual {residual:.3e}"
    );

    Ok((
        solution.as_slice()[..n].to_vec(),
        solution.as_slice()[n..].to_vec(),
    ))
}

/// Applies one full deterministic stage with the dense line solver; the
/// slow mirror of `SplitStepper::deterministic_stage` for small grids.
pub fn dense_deterministic_stage(
    state: &FieldState,
    stage: &StageDescriptor,
    grid: &Grid,
    medium: &Medium,
) -> Result<FieldState> {
    for &count in &grid.counts() {
        if count > MAX_DENSE_GRID {
            return Err(Error::OracleSizeCap {
                n: count,
                max: MAX_DENSE_GRID,
            });
        }
    }
    let mut out = state.clone();
    for sweep in stage.sweeps() {
        let axis = sweep.axis;
        let params = LineSystemParams::new(
            sweep.sign,
            grid.tau() / (2.0 * grid.step(axis)),
            medium.eps,
            medium.mu,
        )?;
        let counts = grid.counts();
        let (t1, t2) = match axis {
            crate::field::Axis::X => (counts[1], counts[2]),
            crate::field::Axis::Y => (counts[0], counts[2]),
            crate::field::Axis::Z => (counts[0], counts[1]),
        };
        for a in 0..t1 {
            for b in 0..t2 {
                let e_line = line_view(&out, sweep.electric, axis, (a, b))?;
                let h_line = line_view(&out, sweep.magnetic, axis, (a, b))?;
                let (e_new, h_new) = dense_solve_pair_line(&e_line.values, &h_line.values, params)?;
                write_line(
                    &mut out,
                    &crate::field::Line {
                        values: e_new,
                        ..e_line
                    },
                )?;
                write_line(
                    &mut out,
                    &crate::field::Line {
                        values: h_new,
                        ..h_line
                    },
                )?;
            }
        }
    }
    Ok(out)
}
