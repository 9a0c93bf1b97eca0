#![allow(dead_code)]

use std::io::Write;

use supergraph::hierarchy::edge_order;
use supergraph::numerics::DenseMat;

/// Kruskal over the same strict edge order; returns the chosen `(min, max)`
/// pairs sorted, plus their total weight.
pub fn kruskal(n: usize, edges: &[(usize, usize, f64)]) -> (Vec<(usize, usize)>, f64) {
    let mut sorted = edges.to_vec();
    sorted.sort_by(|a, b| edge_order(*a, *b));
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut chosen = Vec::new();
    let mut total = 0.0;
    for (a, b, w) in sorted {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra] = rb;
            chosen.push((a.min(b), a.max(b)));
            total += w;
        }
    }
    chosen.sort_unstable();
    (chosen, total)
}

/// Max absolute deviation over the larger magnitude of the two.
pub fn normwise(a: &DenseMat, b: &DenseMat) -> f64 {
    let scale = a.max_abs().max(b.max_abs()).max(f64::MIN_POSITIVE);
    a.sub(b).map(|m| m.max_abs() / scale).unwrap_or(f64::INFINITY)
}

pub fn inverse(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    inv
}

/// Writes straight to stderr so the line shows even under captured output.
pub fn verdict(id: &str, name: &str, ok: bool, detail: &str) {
    let line = format!(
        "criterion {id:<3} {}  {name}{}\n",
        if ok { "pass" } else { "FAIL" },
        if detail.is_empty() { String::new() } else { format!("  ({detail})") }
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
}

/// Runs `check`, prints the verdict line and fails the test on error.
pub fn criterion(id: &str, name: &str, check: impl FnOnce() -> Result<String, String>) {
    match check() {
        Ok(detail) => verdict(id, name, true, &detail),
        Err(e) => {
            verdict(id, name, false, &e);
            panic!("criterion {id} failed: {e}");
        }
    }
}

pub fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

pub fn e2s<T>(r: supergraph::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}
