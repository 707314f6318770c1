//! Discrete energy, errors against a reference solution, and temporal
//! convergence orders.
//!
//! All lattice reductions run compensated (Neumaier) summation in a fixed
//! index order: the energy-conservation checks sit near 1e-10 relative
//! over ~1e5-term sums, which plain summation noise would eat into, and
//! the fixed order keeps parallel and serial runs bitwise identical.

use crate::error::{Error, Result};
use crate::field::{FieldState, Grid, Medium, ScalarField};

/// Compensated sum over `values` in iteration order.
fn neumaier_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut compensation = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            compensation += (sum - t) + v;
        } else {
            compensation += (v - t) + sum;
        }
        sum = t;
    }
    sum + compensation
}

/// Discrete squared l2 norm `h_x h_y h_z * sum U^2` of one component.
pub fn scalar_norm_sq(field: &ScalarField, grid: &Grid) -> f64 {
    grid.cell_volume() * neumaier_sum(field.as_slice().iter().map(|&v| v * v))
}

/// The discrete energy `eps ||E||^2 + mu ||H||^2`, where `||.||^2` sums
/// the squared l2 norms of the three components.
pub fn discrete_energy(state: &FieldState, grid: &Grid, medium: &Medium) -> f64 {
    let e: f64 = neumaier_sum(
        state
            .electric()
            .iter()
            .flat_map(|f| f.as_slice().iter().map(|&v| v * v)),
    );
    let h: f64 = neumaier_sum(
        state
            .magnetic()
            .iter()
            .flat_map(|f| f.as_slice().iter().map(|&v| v * v)),
    );
    grid.cell_volume() * (medium.eps * e + medium.mu * h)
}

/// Root of the volume-weighted squared difference over all six components:
///
/// ```text
/// sqrt( h_x h_y h_z * sum_{nodes} sum_{m=1..3} (E_m - E_m^ref)^2 + (H_m - H_m^ref)^2 )
/// ```
pub fn l2_error(state: &FieldState, reference: &FieldState, grid: &Grid) -> Result<f64> {
    if state.counts() != reference.counts() {
        return Err(Error::ShapeMismatch {
            expected: reference.counts(),
            actual: state.counts(),
        });
    }
    let sq = neumaier_sum(crate::field::Component::ALL.iter().flat_map(|&c| {
        state
            .component(c)
            .as_slice()
            .iter()
            .zip(reference.component(c).as_slice())
            .map(|(a, b)| (a - b) * (a - b))
    }));
    Ok((grid.cell_volume() * sq).sqrt())
}

/// Root-mean-square over per-path errors with the standard error of the
/// estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanSquareError {
    pub value: f64,
    /// Delta-method standard error of `value`; zero for a single sample.
    pub std_error: f64,
}

/// `sqrt(mean(errors^2))` over Monte Carlo paths.
pub fn mean_square_error(per_path_errors: &[f64]) -> Result<MeanSquareError> {
    if per_path_errors.is_empty() {
        return Err(Error::EmptySamples);
    }
    let n = per_path_errors.len() as f64;
    let squares: Vec<f64> = per_path_errors.iter().map(|e| e * e).collect();
    let mean_sq = neumaier_sum(squares.iter().copied()) / n;
    let value = mean_sq.sqrt();
    let std_error = if per_path_errors.len() < 2 || value == 0.0 {
        0.0
    } else {
        let var_of_sq =
            neumaier_sum(squares.iter().map(|s| (s - mean_sq) * (s - mean_sq))) / (n - 1.0);
        // Var(mean_sq) = var_of_sq / n; sqrt propagates as 1 / (2 sqrt).
        (var_of_sq / n).sqrt() / (2.0 * value)
    };
    Ok(MeanSquareError { value, std_error })
}

/// One row of a temporal convergence table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrderRow {
    pub tau: f64,
    pub error: f64,
    /// `log2(previous error / this error)`; `None` on the first row.
    pub order: Option<f64>,
}

/// Convergence table over a sequence of halved time steps.
#[derive(Clone, Debug, PartialEq)]
pub struct OrderTable {
    pub rows: Vec<OrderRow>,
}

/// Builds the order table from `(tau, error)` pairs. The taus must halve
/// from row to row and the errors must be positive.
pub fn convergence_orders(points: &[(f64, f64)]) -> Result<OrderTable> {
    if points.len() < 2 {
        return Err(Error::TooFewRows {
            needed: 2,
            got: points.len(),
        });
    }
    for window in points.windows(2) {
        let (prev, next) = (window[0].0, window[1].0);
        if !next.is_finite() || next <= 0.0 || (prev / next - 2.0).abs() > 1e-9 {
            return Err(Error::TauNotHalved { prev, next });
        }
    }
    let mut rows = Vec::with_capacity(points.len());
    for (idx, &(tau, error)) in points.iter().enumerate() {
        if !error.is_finite() || error <= 0.0 {
            return Err(Error::NonPositiveError { value: error });
        }
        let order = if idx == 0 {
            None
        } else {
            Some((points[idx - 1].1 / error).log2())
        };
        rows.push(OrderRow { tau, error, order });
    }
    Ok(OrderTable { rows })
}

/// Least-squares slope of `log2(error)` against `log2(tau)`, with a
/// confidence half-width of two standard errors (zero when only two
/// points leave no residual degrees of freedom).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FittedOrder {
    pub slope: f64,
    pub half_width: f64,
}

pub fn fit_order(points: &[(f64, f64)]) -> Result<FittedOrder> {
    if points.len() < 2 {
        return Err(Error::TooFewRows {
            needed: 2,
            got: points.len(),
        });
    }
    for &(tau, error) in points {
        if !tau.is_finite() || tau <= 0.0 {
            return Err(Error::InvalidTimeStep { tau });
        }
        if !error.is_finite() || error <= 0.0 {
            return Err(Error::NonPositiveError { value: error });
        }
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.log2()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.log2()).collect();
    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - x_mean) * (x - x_mean)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - x_mean) * (y - y_mean))
        .sum();
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let half_width = if points.len() > 2 {
        let ss_res: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| {
                let r = y - (intercept + slope * x);
                r * r
            })
            .sum();
        2.0 * (ss_res / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(FittedOrder { slope, half_width })
}

/// Energy per step boundary: `times[n] = n * tau`, `values[n] = H(Z^n)`.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyTrace {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl EnergyTrace {
    pub fn with_capacity(n_steps: usize) -> Self {
        EnergyTrace {
            times: Vec::with_capacity(n_steps + 1),
            values: Vec::with_capacity(n_steps + 1),
        }
    }

    pub fn push(&mut self, time: f64, energy: f64) {
        self.times.push(time);
        self.values.push(energy);
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `max_n |H(Z^n) - H(Z^0)| / H(Z^0)`.
    pub fn max_relative_drift(&self) -> f64 {
        let h0 = self.values[0];
        self.values
            .iter()
            .map(|h| (h - h0).abs())
            .fold(0.0_f64, f64::max)
            / h0
    }

    /// `max_n |H(Z^n) - H(Z^0)|`.
    pub fn max_absolute_drift(&self) -> f64 {
        let h0 = self.values[0];
        self.values
            .iter()
            .map(|h| (h - h0).abs())
            .fold(0.0_f64, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{init_fields, Component, InitialCondition};
    use approx::assert_abs_diff_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn constant_field_energy() {
        // E1 = 1 with eps = 2 over a volume of 1/8 gives 2 * 1/8 = 0.25.
        let grid = Grid::cube(0.0, 0.5, 25, 1.0 / 32.0, 1).unwrap();
        let medium = Medium::new(2.0, 1.0, 0.0).unwrap();
        let state = init_fields(
            &grid,
            &InitialCondition::Constant {
                component: Component::E1,
                value: 1.0,
            },
        );
        assert_abs_diff_eq!(
            discrete_energy(&state, &grid, &medium),
            0.25,
            epsilon = 1e-15
        );
    }

    #[test]
    fn zero_state_energy_is_zero() {
        let grid = Grid::cube(0.0, 1.0, 3, 0.1, 1).unwrap();
        let state = init_fields(&grid, &InitialCondition::Zero);
        assert_eq!(discrete_energy(&state, &grid, &Medium::vacuum(0.0)), 0.0);
    }

    #[test]
    fn plane_wave_energy_is_exactly_three_quarters() {
        // The lattice sum of 12 cos^2(4 pi (x+y+z)) is an exact Riemann
        // sum below the Nyquist frequency: energy = 12 * (1/2) * (1/8).
        let grid = Grid::cube(0.0, 0.5, 25, 1.0 / 32.0, 1).unwrap();
        let state = init_fields(&grid, &InitialCondition::PlaneWave);
        let energy = discrete_energy(&state, &grid, &Medium::vacuum(0.0));
        assert!((energy - 0.75).abs() <= 1e-13, "energy = {energy:.16}");
    }

    #[test]
    fn energy_is_symmetric_under_field_swap_when_coefficients_match() {
        let grid = Grid::cube(0.0, 1.0, 5, 0.1, 1).unwrap();
        let medium = Medium::vacuum(0.0);
        let mut rng = StdRng::seed_from_u64(3);
        let mut state = init_fields(&grid, &InitialCondition::Zero);
        for c in Component::ALL {
            for v in state.component_mut(c).as_mut_slice() {
                *v = rng.random_range(-1.0..1.0);
            }
        }
        let mut swapped = init_fields(&grid, &InitialCondition::Zero);
        for a in 0..3 {
            *swapped.component_mut(Component::ALL[a]) =
                state.component(Component::ALL[a + 3]).clone();
            *swapped.component_mut(Component::ALL[a + 3]) =
                state.component(Component::ALL[a]).clone();
        }
        assert_eq!(
            discrete_energy(&state, &grid, &medium),
            discrete_energy(&swapped, &grid, &medium)
        );
    }

    #[test]
    fn l2_error_reference_values() {
        let grid = Grid::cube(0.0, 0.5, 25, 1.0 / 32.0, 1).unwrap();
        let zero = init_fields(&grid, &InitialCondition::Zero);
        assert_eq!(l2_error(&zero, &zero, &grid).unwrap(), 0.0);

        let ones = init_fields(
            &grid,
            &InitialCondition::Constant {
                component: Component::E1,
                value: 1.0,
            },
        );
        assert_abs_diff_eq!(
            l2_error(&ones, &zero, &grid).unwrap(),
            0.125_f64.sqrt(),
            epsilon = 1e-15
        );

        // A single-node difference of delta in one component.
        let mut bumped = zero.clone();
        bumped.component_mut(Component::H2)[(3, 1, 4)] = -2.5;
        let h = grid.step(crate::field::Axis::X);
        assert_abs_diff_eq!(
            l2_error(&bumped, &zero, &grid).unwrap(),
            (h * h * h).sqrt() * 2.5,
            epsilon = 1e-15
        );
    }

    #[test]
    fn l2_error_rejects_shape_mismatch() {
        let a = init_fields(
            &Grid::cube(0.0, 1.0, 3, 0.1, 1).unwrap(),
            &InitialCondition::Zero,
        );
        let b = init_fields(
            &Grid::cube(0.0, 1.0, 5, 0.1, 1).unwrap(),
            &InitialCondition::Zero,
        );
        assert!(l2_error(&a, &b, &Grid::cube(0.0, 1.0, 3, 0.1, 1).unwrap()).is_err());
    }

    #[test]
    fn l2_error_satisfies_triangle_inequality() {
        let grid = Grid::cube(0.0, 1.0, 5, 0.1, 1).unwrap();
        let mut rng = StdRng::seed_from_u64(13);
        let mut random_state = || {
            let mut s = init_fields(&grid, &InitialCondition::Zero);
            for c in Component::ALL {
                for v in s.component_mut(c).as_mut_slice() {
                    *v = rng.random_range(-1.0..1.0);
                }
            }
            s
        };
        for _ in 0..25 {
            let a = random_state();
            let b = random_state();
            let c = random_state();
            let ab = l2_error(&a, &b, &grid).unwrap();
            let bc = l2_error(&b, &c, &grid).unwrap();
            let ac = l2_error(&a, &c, &grid).unwrap();
            assert!(ac <= ab + bc + 1e-12);
        }
    }

    #[test]
    fn mean_square_error_reference_values() {
        let single = mean_square_error(&[0.37]).unwrap();
        assert_eq!(single.value, 0.37);
        assert_eq!(single.std_error, 0.0);

        let pair = mean_square_error(&[3.0, 4.0]).unwrap();
        assert_abs_diff_eq!(pair.value, 12.5_f64.sqrt(), epsilon = 1e-15);
        assert!(pair.std_error > 0.0);

        let constant = mean_square_error(&[2.0; 8]).unwrap();
        assert_abs_diff_eq!(constant.value, 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(constant.std_error, 0.0, epsilon = 1e-15);

        assert!(mean_square_error(&[]).is_err());
    }

    #[test]
    fn convergence_orders_reference_values() {
        // Halved-step error pairs and their observed orders.
        let table = convergence_orders(&[(1.0 / 16.0, 4.72e-1), (1.0 / 32.0, 1.72e-1)]).unwrap();
        assert!(table.rows[0].order.is_none());
        assert_abs_diff_eq!(table.rows[1].order.unwrap(), 1.46, epsilon = 5e-3);

        let table = convergence_orders(&[(1.0 / 16.0, 6.64e-1), (1.0 / 32.0, 3.34e-1)]).unwrap();
        assert_abs_diff_eq!(table.rows[1].order.unwrap(), 0.99, epsilon = 5e-3);

        let table = convergence_orders(&[(0.5, 0.3), (0.25, 0.15)]).unwrap();
        assert_eq!(table.rows[1].order.unwrap(), 1.0);
    }

    #[test]
    fn convergence_orders_validate_input() {
        assert!(convergence_orders(&[(0.5, 1.0)]).is_err());
        assert!(convergence_orders(&[(0.5, 1.0), (0.3, 0.5)]).is_err());
        assert!(convergence_orders(&[(0.5, 1.0), (0.25, 0.0)]).is_err());
        assert!(convergence_orders(&[(0.5, 1.0), (0.25, -2.0)]).is_err());
    }

    #[test]
    fn orders_are_invariant_under_error_scaling() {
        let base = [(0.5, 0.41), (0.25, 0.2), (0.125, 0.11)];
        let scaled: Vec<(f64, f64)> = base.iter().map(|&(t, e)| (t, 77.3 * e)).collect();
        let a = convergence_orders(&base).unwrap();
        let b = convergence_orders(&scaled).unwrap();
        for (ra, rb) in a.rows.iter().zip(&b.rows).skip(1) {
            assert_abs_diff_eq!(ra.order.unwrap(), rb.order.unwrap(), epsilon = 1e-12);
        }
        let fa = fit_order(&base).unwrap();
        let fb = fit_order(&scaled).unwrap();
        assert_abs_diff_eq!(fa.slope, fb.slope, epsilon = 1e-12);
    }

    #[test]
    fn fit_order_recovers_exact_slope() {
        let points: Vec<(f64, f64)> = (0..5)
            .map(|k| {
                let tau = 0.25 / (1 << k) as f64;
                (tau, 3.0 * tau.powf(1.25))
            })
            .collect();
        let fit = fit_order(&points).unwrap();
        assert_abs_diff_eq!(fit.slope, 1.25, epsilon = 1e-12);
        assert!(fit.half_width <= 1e-12);
    }

    #[test]
    fn energy_trace_drift() {
        let mut trace = EnergyTrace::with_capacity(2);
        trace.push(0.0, 2.0);
        trace.push(0.1, 2.0 + 4e-12);
        trace.push(0.2, 2.0 - 2e-12);
        assert_abs_diff_eq!(trace.max_relative_drift(), 2e-12, epsilon = 1e-15);
        assert_abs_diff_eq!(trace.max_absolute_drift(), 4e-12, epsilon = 1e-15);
    }
}
