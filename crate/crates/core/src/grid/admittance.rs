use nalgebra::DMatrix;
use num_complex::Complex64;

use super::case::{BusKind, GridCase};
use super::GridError;

/// Series admittance `1 / (r + jx)` of a branch.
pub fn series_admittance(r: f64, x: f64) -> Complex64 {
    Complex64::new(r, x).inv()
}

/// Nodal admittance of the lines alone (series elements and line charging),
/// without any load shunts.
pub fn network_admittance(case: &GridCase) -> Result<DMatrix<Complex64>, GridError> {
    case.validate()?;
    let index = case.index_map();
    let n = case.buses.len();
    let mut y = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for br in &case.branches {
        let (f, t) = (index[&br.from], index[&br.to]);
        let ys = series_admittance(br.r, br.x);
        let half_b = Complex64::new(0.0, br.b / 2.0);
        let tap = br.ratio();
        y[(f, f)] += (ys + half_b) / (tap * tap);
        y[(t, t)] += ys + half_b;
        y[(f, t)] -= ys / tap;
        y[(t, f)] -= ys / tap;
    }
    Ok(y)
}

/// Shunt admittances (pu) representing the constant-impedance share of PQ-bus
/// demand, converted at the given nominal voltage magnitudes.
///
/// A constant-impedance load consuming `S` at `|V0|` draws `S |V|^2 / |V0|^2`,
/// which is the shunt `conj(S) / |V0|^2`.
pub fn zip_shunts(case: &GridCase, nominal_vm: &[f64]) -> Vec<Complex64> {
    let base = case.base_mva;
    case.buses
        .iter()
        .zip(nominal_vm)
        .map(|(bus, &vm)| {
            if bus.kind != BusKind::Pq || case.zip.z_fraction == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            let consumed = -Complex64::new(bus.p_inject, bus.q_inject) / base;
            (consumed * case.zip.z_fraction).conj() / (vm * vm)
        })
        .collect()
}

/// Constant-power share of every bus injection (pu). PV and slack buses keep
/// their full specified injection since their voltage magnitude is fixed.
pub fn constant_power_injection(case: &GridCase) -> Vec<Complex64> {
    let base = case.base_mva;
    case.buses
        .iter()
        .map(|bus| {
            let s = Complex64::new(bus.p_inject, bus.q_inject) / base;
            match bus.kind {
                BusKind::Pq => s * case.zip.p_fraction,
                _ => s,
            }
        })
        .collect()
}

/// Full nodal admittance with the constant-impedance load share folded into
/// diagonal shunts at flat (1.0 pu) nominal voltage.
pub fn build_admittance(case: &GridCase) -> Result<DMatrix<Complex64>, GridError> {
    build_admittance_with_nominal(case, &vec![1.0; case.buses.len()])
}

pub fn build_admittance_with_nominal(
    case: &GridCase,
    nominal_vm: &[f64],
) -> Result<DMatrix<Complex64>, GridError> {
    let mut y = network_admittance(case)?;
    for (k, s) in zip_shunts(case, nominal_vm).into_iter().enumerate() {
        y[(k, k)] += s;
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::builtin;
    use crate::grid::case::{BranchSpec, BusSpec, ZipNominal, ZipSplit};

    fn two_bus(r: f64, x: f64) -> GridCase {
        GridCase {
            name: "two-bus".into(),
            base_mva: 100.0,
            buses: vec![
                BusSpec {
                    id: 1,
                    kind: BusKind::Slack,
                    p_inject: 0.0,
                    q_inject: 0.0,
                    v_setpoint: Some(1.0),
                },
                BusSpec {
                    id: 2,
                    kind: BusKind::Pq,
                    p_inject: -50.0,
                    q_inject: -10.0,
                    v_setpoint: None,
                },
            ],
            branches: vec![BranchSpec::line(1, 2, r, x, 0.0)],
            zip: ZipSplit::CONSTANT_POWER,
            zip_nominal: ZipNominal::Flat,
        }
    }

    #[test]
    fn pure_reactance_line() {
        let y = build_admittance(&two_bus(0.0, 1.0)).unwrap();
        // series admittance of x = 1 is -j1; the nodal off-diagonal is its negative
        assert_eq!(series_admittance(0.0, 1.0), Complex64::new(0.0, -1.0));
        assert_eq!(y[(0, 1)], Complex64::new(0.0, 1.0));
        assert_eq!(y[(1, 0)], y[(0, 1)]);
        assert_eq!(y[(0, 0)], Complex64::new(0.0, -1.0));
    }

    #[test]
    fn case9mod1_branch_1_4_entry() {
        let case = builtin::case9mod1(ZipSplit::CONSTANT_POWER);
        let y = network_admittance(&case).unwrap();
        let (i1, i4) = (case.bus_index(1).unwrap(), case.bus_index(4).unwrap());
        let expected = -Complex64::new(1e-5, 0.0576).inv();
        assert!((y[(i1, i4)] - expected).norm() < 1e-12);
    }

    #[test]
    fn case9mod2_bus5_impedance_shunt() {
        // 30% of (90 MW, 50 MVar) consumed at 1.0 pu: conj(0.27 + j0.15) / 1
        let case = builtin::case9mod2(ZipSplit::new(0.3));
        let shunts = zip_shunts(&case, &vec![1.0; case.buses.len()]);
        let k = case.bus_index(5).unwrap();
        assert!((shunts[k] - Complex64::new(0.27, -0.15)).norm() < 1e-15);
        // and it lands on the diagonal of the full matrix
        let full = build_admittance(&case).unwrap();
        let net = network_admittance(&case).unwrap();
        assert!((full[(k, k)] - net[(k, k)] - shunts[k]).norm() < 1e-12);
    }

    #[test]
    fn disconnected_case_is_rejected() {
        let mut case = two_bus(0.01, 0.1);
        case.buses.push(BusSpec {
            id: 3,
            kind: BusKind::Pq,
            p_inject: 0.0,
            q_inject: 0.0,
            v_setpoint: None,
        });
        assert!(matches!(
            build_admittance(&case),
            Err(GridError::Disconnected)
        ));
    }

    #[test]
    fn row_sums_vanish_without_shunts() {
        let case = builtin::case9mod1(ZipSplit::CONSTANT_POWER).lossless();
        let mut c = case.clone();
        for br in c.branches.iter_mut() {
            br.b = 0.0;
        }
        let y = network_admittance(&c).unwrap();
        for i in 0..y.nrows() {
            let s: Complex64 = y.row(i).iter().sum();
            assert!(s.norm() < 1e-12);
        }
    }
}
