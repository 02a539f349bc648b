//! The four-regime benchmark setup: switching generator, the two published
//! parameter tables (an extinction scenario and a persistence scenario) and
//! their shared initial condition.

use crate::model::{EpidemicState, RegimeParameterTable, RegimeParameters};
use crate::regime_chain::Generator;

pub const GENERATOR: [[f64; 4]; 4] = [
    [-10.0, 3.0, 2.0, 5.0],
    [6.0, -9.0, 2.0, 1.0],
    [3.0, 3.0, -8.0, 2.0],
    [1.0, 5.0, 3.0, -9.0],
];

/// Published stationary law, four decimals.
pub const STATIONARY_PRINTED: [f64; 4] = [0.2622, 0.2879, 0.2227, 0.2272];

/// Published `exp(1e-4 Q)`, four decimals.
pub const TRANSITION_PRINTED: [[f64; 4]; 4] = [
    [0.9990, 0.0003, 0.0002, 0.0005],
    [0.0006, 0.9991, 0.0002, 0.0001],
    [0.0003, 0.0003, 0.9992, 0.0002],
    [0.0001, 0.0005, 0.0003, 0.9991],
];

pub const TRANSITION_PRINTED_DT: f64 = 1e-4;

/// Published headline thresholds (extinction R*, persistence R~*).
pub const PUBLISHED_RS_STAR: f64 = 0.1277;
pub const PUBLISHED_RTILDE_STAR: f64 = 2.5861;

/// Initial condition `(S, E, Q, I, R) = (20, 20, 15, 10, 0)`, regime 3 (index 2).
pub const INITIAL_STATE: EpidemicState = EpidemicState {
    s: 20.0,
    e: 20.0,
    q: 15.0,
    i: 10.0,
    r: 0.0,
};
pub const INITIAL_REGIME: usize = 2;

/// Column-wise parameter lists of the extinction scenario, in
/// [`RegimeParameters::FIELD_NAMES`] order.
pub const EXTINCTION_COLUMNS: [[f64; 4]; 15] = [
    [0.0008, 0.0005, 0.0070, 0.0010], // A
    [0.006, 0.018, 0.049, 0.08],      // beta
    [0.001, 0.005, 0.010, 0.009],     // rho1
    [0.001, 0.005, 0.007, 0.003],     // rho2
    [0.05, 0.06, 0.010, 0.08],        // b1
    [0.05, 0.04, 0.06, 0.07],         // b2
    [0.08, 0.07, 0.09, 0.10],         // c
    [0.011, 0.010, 0.019, 0.02],      // xi
    [0.05, 0.06, 0.04, 0.08],         // delta
    [0.016, 0.0015, 0.0017, 0.0019],  // alpha
    [0.003, 0.005, 0.006, 0.004],     // sigma
    [0.02, 0.018, 0.019, 0.0021],     // eta
    [0.001, 0.002, 0.003, 0.004],     // p
    [0.001, 0.002, 0.003, 0.004],     // M
    [0.008, 0.065, 0.007, 0.006],     // sigma0
];

/// The persistence scenario only changes `A` and `beta`.
pub const PERSISTENCE_A: [f64; 4] = [0.70, 0.245, 0.890, 0.41];
pub const PERSISTENCE_BETA: [f64; 4] = [0.016, 0.018, 0.019, 0.008];

pub fn generator() -> Generator {
    let rows: Vec<Vec<f64>> = GENERATOR.iter().map(|r| r.to_vec()).collect();
    Generator::new(&rows).expect("reference generator is valid")
}

fn rows_from_columns(columns: &[[f64; 4]; 15]) -> Vec<RegimeParameters> {
    (0..4)
        .map(|k| {
            let mut f = [0.0; 15];
            for (j, col) in columns.iter().enumerate() {
                f[j] = col[k];
            }
            RegimeParameters::from_fields(f)
        })
        .collect()
}

pub fn extinction_rows() -> Vec<RegimeParameters> {
    rows_from_columns(&EXTINCTION_COLUMNS)
}

pub fn persistence_rows() -> Vec<RegimeParameters> {
    let mut columns = EXTINCTION_COLUMNS;
    columns[0] = PERSISTENCE_A;
    columns[1] = PERSISTENCE_BETA;
    rows_from_columns(&columns)
}

pub fn extinction_table() -> RegimeParameterTable {
    RegimeParameterTable::new_strict(extinction_rows()).expect("valid table")
}

pub fn persistence_table() -> RegimeParameterTable {
    RegimeParameterTable::new_strict(persistence_rows()).expect("valid table")
}
