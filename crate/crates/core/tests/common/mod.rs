//! Shared oracles for integration tests.
#![allow(dead_code)]

/// Tests whether `target` lies in the convex hull of all permutations of
/// `source` (equal-area cells), independently of the majorization
/// machinery: a phase-I simplex feasibility solve over every
/// permutation column. Exponential in the cell count; intended for
/// n ≤ 8.
pub fn in_permutation_hull(target: &[f64], source: &[f64], tol: f64) -> bool {
    let n = target.len();
    assert_eq!(n, source.len());
    assert!(n <= 8, "hull oracle is factorial; keep instances tiny");

    let perms = permutations(n);
    let ncols = perms.len();
    let m = n + 1;

    // Constraint rows: each permutation column must combine to the
    // target, plus a convexity row of ones. Phase-I artificials form the
    // starting basis.
    let mut rows = vec![vec![0.0f64; ncols + m + 1]; m];
    for (j, perm) in perms.iter().enumerate() {
        for i in 0..n {
            rows[i][j] = source[perm[i]];
        }
        rows[n][j] = 1.0;
    }
    for (i, t) in target.iter().enumerate() {
        rows[i][ncols + m] = *t;
    }
    rows[n][ncols + m] = 1.0;

    for i in 0..m {
        if rows[i][ncols + m] < 0.0 {
            for v in rows[i].iter_mut() {
                *v = -*v;
            }
        }
        rows[i][ncols + i] = 1.0;
    }

    // Phase-I objective: minimize the sum of artificials. The cost row
    // starts as minus the sum of constraint rows over real columns.
    let mut cost = vec![0.0f64; ncols + m + 1];
    for j in (0..ncols).chain([ncols + m]) {
        cost[j] = -(0..m).map(|i| rows[i][j]).sum::<f64>();
    }
    let mut basis: Vec<usize> = (ncols..ncols + m).collect();

    let mut iterations = 0usize;
    loop {
        // A feasible point exists as soon as the artificials carry no
        // mass; no need to reach LP optimality for members.
        let infeasibility: f64 = basis
            .iter()
            .enumerate()
            .filter(|(_, &b)| b >= ncols)
            .map(|(i, _)| rows[i][ncols + m])
            .sum();
        if infeasibility <= tol * 0.5 {
            return true;
        }
        iterations += 1;
        assert!(iterations < 20_000, "simplex did not terminate");

        // Dantzig pricing for speed; Bland's rule after a while in case
        // of cycling.
        let entering = if iterations < 3_000 {
            let mut best = (-1e-9, None);
            for (j, &c) in cost.iter().take(ncols + m).enumerate() {
                if c < best.0 {
                    best = (c, Some(j));
                }
            }
            best.1
        } else {
            (0..ncols + m).find(|&j| cost[j] < -1e-9)
        };
        let Some(e) = entering else { break };

        let mut leave: Option<usize> = None;
        let mut best = f64::INFINITY;
        for i in 0..m {
            if rows[i][e] > 1e-12 {
                let ratio = rows[i][ncols + m] / rows[i][e];
                if ratio < best - 1e-12 || (ratio < best + 1e-12 && leave.is_none()) {
                    best = ratio;
                    leave = Some(i);
                }
            }
        }
        let Some(l) = leave else {
            // Unbounded phase-I cannot happen with artificials present.
            break;
        };

        let pivot = rows[l][e];
        for v in rows[l].iter_mut() {
            *v /= pivot;
        }
        for i in 0..m {
            if i != l && rows[i][e].abs() > 0.0 {
                let factor = rows[i][e];
                for j in 0..ncols + m + 1 {
                    rows[i][j] -= factor * rows[l][j];
                }
            }
        }
        let factor = cost[e];
        for j in 0..ncols + m + 1 {
            cost[j] -= factor * rows[l][j];
        }
        basis[l] = e;
    }

    let infeasibility: f64 = basis
        .iter()
        .enumerate()
        .filter(|(_, &b)| b >= ncols)
        .map(|(i, _)| rows[i][ncols + m])
        .sum();
    infeasibility <= tol
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut items: Vec<usize> = (0..n).collect();
    heap_permute(&mut items, n, &mut out);
    out
}

fn heap_permute(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k == 1 {
        out.push(items.clone());
        return;
    }
    for i in 0..k {
        heap_permute(items, k - 1, out);
        if k % 2 == 0 {
            items.swap(i, k - 1);
        } else {
            items.swap(0, k - 1);
        }
    }
}
