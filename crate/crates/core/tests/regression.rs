//! Stored outputs that later changes must reproduce.

use mipt::bipartite::{count_admissible, dimer_system, homotopy_solve, HomotopyOptions};
use mipt::scan::linspace;

/// Admissible-root counts of the two-frequency dimer on a 21x26 grid over
/// `[0, 10] x [0, 25]`, default seed.
#[test]
fn two_frequency_phase_map() {
    let text = include_str!("fixtures/phase_count_n1.csv");
    let stored: Vec<(f64, f64, usize)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap(), f[2].parse().unwrap())
        })
        .collect();
    let cells = count_admissible(1, &linspace(0.0, 10.0, 21), &linspace(0.0, 25.0, 26), &HomotopyOptions::default()).unwrap();
    assert_eq!(cells.len(), stored.len());
    let mut mismatches = Vec::new();
    for (c, &(a, b, n)) in cells.iter().zip(&stored) {
        assert_eq!((c.a, c.b), (a, b));
        assert_eq!(c.failed_paths, 0, "failed paths at a={a}, b={b}");
        if c.count != n {
            mismatches.push((a, b, n, c.count));
        }
    }
    assert!(mismatches.is_empty(), "counts changed (a, b, stored, now): {mismatches:?}");
}

/// On `b = 3(1 + a/10)³` a root sits on the boundary at `(10/(10+a), 0)`;
/// crossing the curve moves it in or out of the square, so the count changes
/// by one. Fold lines run close to the curve near a = 5, hence the narrow band.
#[test]
fn separation_curve_moves_one_root() {
    let opts = HomotopyOptions::default();
    for a in [0.0, 1.0, 2.5, 5.0, 7.5, 10.0] {
        let b = 3.0 * (1.0 + a / 10.0f64).powi(3);
        let on = homotopy_solve(&dimer_system(1, a, b), &opts).unwrap();
        let x0 = 10.0 / (10.0 + a);
        assert!(
            on.boundary_roots.iter().any(|r| (r[0] - x0).abs() < 1e-8 && r[1].abs() < 1e-8),
            "a={a}: boundary roots {:?}",
            on.boundary_roots
        );
        let cells = count_admissible(1, &[a], &[b - 0.1, b + 0.1], &opts).unwrap();
        assert_eq!(cells[0].count.abs_diff(cells[1].count), 1, "a={a}: {cells:?}");
    }
}
