//! Embedded study cases: the two modified 9-bus systems and the New England
//! 39-bus system.

use super::case::{BranchSpec, BusKind, BusSpec, GridCase, ZipNominal, ZipSplit};
use super::model::{Adjustable, MetricSpec, ModelKind};
use super::{GridError, StudySpec};

pub const BUILTIN_NAMES: [&str; 4] = ["case9mod1-dynamic", "case9mod1-static", "case9mod2", "case39"];

fn pq(id: u32, p: f64, q: f64) -> BusSpec {
    BusSpec {
        id,
        kind: BusKind::Pq,
        p_inject: p,
        q_inject: q,
        v_setpoint: None,
    }
}

fn pv(id: u32, p: f64, v: f64) -> BusSpec {
    BusSpec {
        id,
        kind: BusKind::Pv,
        p_inject: p,
        q_inject: 0.0,
        v_setpoint: Some(v),
    }
}

fn slack(id: u32, p: f64, v: f64) -> BusSpec {
    BusSpec {
        id,
        kind: BusKind::Slack,
        p_inject: p,
        q_inject: 0.0,
        v_setpoint: Some(v),
    }
}

fn branches(rows: &[(u32, u32, f64, f64, f64)]) -> Vec<BranchSpec> {
    rows.iter()
        .map(|&(f, t, r, x, b)| BranchSpec::line(f, t, r, x, b))
        .collect()
}

/// Nine-bus network with the three machines moved behind internal buses 10-12.
pub fn case9mod1(zip: ZipSplit) -> GridCase {
    let buses = vec![
        pq(1, 0.0, 0.0),
        pq(2, 0.0, 0.0),
        pq(3, 0.0, 0.0),
        pq(4, 0.0, 0.0),
        pq(5, -90.0, -30.0),
        pq(6, 0.0, 0.0),
        pq(7, -100.0, -35.0),
        pq(8, 0.0, 0.0),
        pq(9, -125.0, -50.0),
        slack(10, 0.0, 1.0388),
        pv(11, 163.1587, 1.0264),
        pv(12, 85.0429, 1.0003),
    ];
    GridCase {
        name: "case9mod1".into(),
        base_mva: 100.0,
        buses,
        branches: branches(&[
            (1, 4, 1e-5, 0.0576, 0.0),
            (4, 5, 0.0170, 0.0920, 0.1580),
            (5, 6, 0.0390, 0.1700, 0.3580),
            (3, 6, 1e-5, 0.0586, 0.0),
            (6, 7, 0.0119, 0.1008, 0.2090),
            (7, 8, 0.0085, 0.0720, 0.1490),
            (8, 2, 1e-5, 0.0625, 0.0),
            (8, 9, 0.0320, 0.1610, 0.3060),
            (9, 4, 0.0100, 0.0850, 0.1760),
            (10, 1, 6.8670e-4, 0.1391, 0.0),
            (11, 2, 5.9259e-4, 0.0948, 0.0),
            (12, 3, 5.9259e-4, 0.0948, 0.0),
        ]),
        zip,
        zip_nominal: ZipNominal::Flat,
    }
}

/// Variant of the nine-bus system with heavier reactive demand and shorter lines.
pub fn case9mod2(zip: ZipSplit) -> GridCase {
    let buses = vec![
        pq(1, 0.0, 0.0),
        pq(2, 0.0, 0.0),
        pq(3, 0.0, 0.0),
        pq(4, 0.0, 0.0),
        pq(5, -90.0, -50.0),
        pq(6, 0.0, 0.0),
        pq(7, -100.0, -50.0),
        pq(8, 0.0, 0.0),
        pq(9, -125.0, -50.0),
        slack(10, 0.0, 1.0331),
        pv(11, 150.1369, 1.0340),
        pv(12, 150.1351, 1.0274),
    ];
    GridCase {
        name: "case9mod2".into(),
        base_mva: 100.0,
        buses,
        branches: branches(&[
            (1, 4, 0.0010, 0.0576, 0.0),
            (4, 5, 0.0170, 0.0920, 0.1580),
            (5, 6, 0.0190, 0.0600, 0.3580),
            (3, 6, 0.0010, 0.0586, 0.0),
            (6, 7, 0.0119, 0.0608, 0.2090),
            (7, 8, 0.0085, 0.0620, 0.1490),
            (8, 2, 0.0010, 0.0625, 0.0),
            (8, 9, 0.0120, 0.0610, 0.3060),
            (9, 4, 0.0100, 0.0850, 0.1760),
            (10, 1, 6.8670e-4, 0.1391, 0.0),
            (11, 2, 5.9259e-4, 0.0948, 0.0),
            (12, 3, 5.9259e-4, 0.0948, 0.0),
        ]),
        zip,
        zip_nominal: ZipNominal::Flat,
    }
}

/// New England 39-bus system. Generator buses carry net injection
/// (generation minus local demand); bus 31 is the slack.
pub fn case39(zip: ZipSplit) -> GridCase {
    let loads: [(u32, f64, f64); 29] = [
        (1, 97.6, 44.2),
        (2, 0.0, 0.0),
        (3, 322.0, 2.4),
        (4, 500.0, 184.0),
        (5, 0.0, 0.0),
        (6, 0.0, 0.0),
        (7, 233.8, 84.0),
        (8, 522.0, 176.6),
        (9, 6.5, -66.6),
        (10, 0.0, 0.0),
        (11, 0.0, 0.0),
        (12, 8.53, 88.0),
        (13, 0.0, 0.0),
        (14, 0.0, 0.0),
        (15, 320.0, 153.0),
        (16, 329.0, 32.3),
        (17, 0.0, 0.0),
        (18, 158.0, 30.0),
        (19, 0.0, 0.0),
        (20, 680.0, 103.0),
        (21, 274.0, 115.0),
        (22, 0.0, 0.0),
        (23, 247.5, 84.6),
        (24, 308.6, -92.2),
        (25, 224.0, 47.2),
        (26, 139.0, 17.0),
        (27, 281.0, 75.5),
        (28, 206.0, 27.6),
        (29, 283.5, 26.9),
    ];
    let mut buses: Vec<BusSpec> = loads.iter().map(|&(id, p, q)| pq(id, -p, -q)).collect();
    // (bus, generation MW, local demand MW, setpoint)
    let gens: [(u32, f64, f64, f64); 10] = [
        (30, 250.0, 0.0, 1.0499),
        (31, 677.871, 9.2, 0.982),
        (32, 650.0, 0.0, 0.9841),
        (33, 632.0, 0.0, 0.9972),
        (34, 508.0, 0.0, 1.0123),
        (35, 650.0, 0.0, 1.0494),
        (36, 560.0, 0.0, 1.0636),
        (37, 540.0, 0.0, 1.0275),
        (38, 830.0, 0.0, 1.0265),
        (39, 1000.0, 1104.0, 1.03),
    ];
    for &(id, pg, pd, v) in &gens {
        buses.push(if id == 31 {
            slack(id, pg - pd, v)
        } else {
            pv(id, pg - pd, v)
        });
    }
    let lines: [(u32, u32, f64, f64, f64, f64); 46] = [
        (1, 2, 0.0035, 0.0411, 0.6987, 1.0),
        (1, 39, 0.001, 0.025, 0.75, 1.0),
        (2, 3, 0.0013, 0.0151, 0.2572, 1.0),
        (2, 25, 0.007, 0.0086, 0.146, 1.0),
        (2, 30, 0.0, 0.0181, 0.0, 1.025),
        (3, 4, 0.0013, 0.0213, 0.2214, 1.0),
        (3, 18, 0.0011, 0.0133, 0.2138, 1.0),
        (4, 5, 0.0008, 0.0128, 0.1342, 1.0),
        (4, 14, 0.0008, 0.0129, 0.1382, 1.0),
        (5, 6, 0.0002, 0.0026, 0.0434, 1.0),
        (5, 8, 0.0008, 0.0112, 0.1476, 1.0),
        (6, 7, 0.0006, 0.0092, 0.113, 1.0),
        (6, 11, 0.0007, 0.0082, 0.1389, 1.0),
        (6, 31, 0.0, 0.025, 0.0, 1.07),
        (7, 8, 0.0004, 0.0046, 0.078, 1.0),
        (8, 9, 0.0023, 0.0363, 0.3804, 1.0),
        (9, 39, 0.001, 0.025, 1.2, 1.0),
        (10, 11, 0.0004, 0.0043, 0.0729, 1.0),
        (10, 13, 0.0004, 0.0043, 0.0729, 1.0),
        (10, 32, 0.0, 0.02, 0.0, 1.07),
        (12, 11, 0.0016, 0.0435, 0.0, 1.006),
        (12, 13, 0.0016, 0.0435, 0.0, 1.006),
        (13, 14, 0.0009, 0.0101, 0.1723, 1.0),
        (14, 15, 0.0018, 0.0217, 0.366, 1.0),
        (15, 16, 0.0009, 0.0094, 0.171, 1.0),
        (16, 17, 0.0007, 0.0089, 0.1342, 1.0),
        (16, 19, 0.0016, 0.0195, 0.304, 1.0),
        (16, 21, 0.0008, 0.0135, 0.2548, 1.0),
        (16, 24, 0.0003, 0.0059, 0.068, 1.0),
        (17, 18, 0.0007, 0.0082, 0.1319, 1.0),
        (17, 27, 0.0013, 0.0173, 0.3216, 1.0),
        (19, 20, 0.0007, 0.0138, 0.0, 1.06),
        (19, 33, 0.0007, 0.0142, 0.0, 1.07),
        (20, 34, 0.0009, 0.018, 0.0, 1.009),
        (21, 22, 0.0008, 0.014, 0.2565, 1.0),
        (22, 23, 0.0006, 0.0096, 0.1846, 1.0),
        (22, 35, 0.0, 0.0143, 0.0, 1.025),
        (23, 24, 0.0022, 0.035, 0.361, 1.0),
        (23, 36, 0.0005, 0.0272, 0.0, 1.0),
        (25, 26, 0.0032, 0.0323, 0.531, 1.0),
        (25, 37, 0.0006, 0.0232, 0.0, 1.025),
        (26, 27, 0.0014, 0.0147, 0.2396, 1.0),
        (26, 28, 0.0043, 0.0474, 0.7802, 1.0),
        (26, 29, 0.0057, 0.0625, 1.029, 1.0),
        (28, 29, 0.0014, 0.0151, 0.249, 1.0),
        (29, 38, 0.0008, 0.0156, 0.0, 1.025),
    ];
    let branches = lines
        .iter()
        .map(|&(f, t, r, x, b, tap)| BranchSpec {
            from: f,
            to: t,
            r,
            x,
            b,
            tap: (tap != 1.0).then_some(tap),
        })
        .collect();
    GridCase {
        name: "case39".into(),
        base_mva: 100.0,
        buses,
        branches,
        zip,
        zip_nominal: ZipNominal::BaseCase,
    }
}

pub fn case39_adjustables() -> Vec<Adjustable> {
    let mut v: Vec<Adjustable> = [30, 31, 33, 34, 37, 39]
        .iter()
        .map(|&b| Adjustable::p(b))
        .collect();
    for b in [3, 4, 7, 8, 20, 26] {
        v.push(Adjustable::p(b));
        v.push(Adjustable::q(b));
    }
    v
}

/// Case data and study layout of a builtin name.
pub fn builtin(name: &str) -> Result<(GridCase, StudySpec), GridError> {
    let gens9 = Some(vec![Adjustable::p(10), Adjustable::p(11), Adjustable::p(12)]);
    Ok(match name {
        "case9mod1-dynamic" => {
            let mut c = case9mod1(ZipSplit::new(0.4));
            c.name = name.into();
            (
                c,
                StudySpec {
                    kind: ModelKind::DynamicClassical,
                    adjustable_buses: None,
                    metric: MetricSpec::GeneratorP,
                },
            )
        }
        "case9mod1-static" => {
            let mut c = case9mod1(ZipSplit::CONSTANT_POWER);
            c.name = name.into();
            (
                c,
                StudySpec {
                    kind: ModelKind::StaticDispatch,
                    adjustable_buses: gens9,
                    metric: MetricSpec::Adjustable,
                },
            )
        }
        "case9mod2" => (
            case9mod2(ZipSplit::new(0.3)),
            StudySpec {
                kind: ModelKind::StaticDispatch,
                adjustable_buses: gens9,
                metric: MetricSpec::GeneratorQ,
            },
        ),
        "case39" => (
            case39(ZipSplit::new(0.4)),
            StudySpec {
                kind: ModelKind::StaticDispatch,
                adjustable_buses: Some(case39_adjustables()),
                metric: MetricSpec::Adjustable,
            },
        ),
        other => {
            return Err(GridError::Invalid(format!(
                "unknown builtin case '{other}' (known: {})",
                BUILTIN_NAMES.join(", ")
            )))
        }
    })
}
