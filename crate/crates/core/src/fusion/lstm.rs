use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::LevelTree;
use crate::error::{Error, Result};
use crate::numerics::{finite_diff_grad, glorot_uniform, sigmoid, DenseMat, Rng};

/// Gate order used by every per-gate array.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Gate {
    Input,
    Forget,
    Output,
    Update,
}

impl Gate {
    pub const ALL: [Gate; 4] = [Gate::Input, Gate::Forget, Gate::Output, Gate::Update];

    pub fn name(self) -> &'static str {
        match self {
            Gate::Input => "input",
            Gate::Forget => "forget",
            Gate::Output => "output",
            Gate::Update => "update",
        }
    }
}

/// Child-sum Tree-LSTM cell. `w[g]` is hidden × input, `u[g]` hidden ×
/// hidden, `b[g]` has `hidden` entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeLstmCell {
    pub w: [DenseMat; 4],
    pub u: [DenseMat; 4],
    pub b: [Vec<f64>; 4],
}

impl TreeLstmCell {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w: std::array::from_fn(|_| DenseMat::zeros(hidden, input)),
            u: std::array::from_fn(|_| DenseMat::zeros(hidden, hidden)),
            b: std::array::from_fn(|_| vec![0.0; hidden]),
        }
    }

    /// Fan-scaled uniform matrices, zero biases.
    pub fn glorot(input: usize, hidden: usize, rng: &mut Rng) -> Self {
        Self {
            w: std::array::from_fn(|_| glorot_uniform(hidden, input, rng)),
            u: std::array::from_fn(|_| glorot_uniform(hidden, hidden, rng)),
            b: std::array::from_fn(|_| vec![0.0; hidden]),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w[0].cols()
    }

    pub fn hidden(&self) -> usize {
        self.w[0].rows()
    }

    pub fn validate(&self) -> Result<()> {
        let (h, x) = (self.hidden(), self.input_dim());
        for g in 0..4 {
            if self.w[g].shape() != (h, x) || self.u[g].shape() != (h, h) || self.b[g].len() != h {
                return Err(Error::dim(format!("{} gate parameters have inconsistent shapes", Gate::ALL[g].name())));
            }
            if !self.w[g].is_finite() || !self.u[g].is_finite() || self.b[g].iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("{} gate parameters", Gate::ALL[g].name())));
            }
        }
        Ok(())
    }

    /// Parameter blocks with their names, in a fixed order.
    pub fn blocks(&self) -> Vec<(String, DenseMat)> {
        let mut out = Vec::with_capacity(12);
        for (g, gate) in Gate::ALL.iter().enumerate() {
            out.push((format!("{}.W", gate.name()), self.w[g].clone()));
            out.push((format!("{}.U", gate.name()), self.u[g].clone()));
            out.push((format!("{}.b", gate.name()), DenseMat::from_vec(1, self.b[g].len(), self.b[g].clone()).expect("finite")));
        }
        out
    }

    fn set_block(&mut self, index: usize, m: &DenseMat) {
        let g = index / 3;
        match index % 3 {
            0 => self.w[g] = m.clone(),
            1 => self.u[g] = m.clone(),
            _ => self.b[g] = m.as_slice().to_vec(),
        }
    }

    fn affine(&self, g: usize, x: &[f64], h: &[f64]) -> Vec<f64> {
        let wx = self.w[g].matvec(x).expect("checked dims");
        let uh = self.u[g].matvec(h).expect("checked dims");
        (0..self.hidden()).map(|k| wx[k] + uh[k] + self.b[g][k]).collect()
    }

    /// One node update from its input and its children's `(h, c)`, in
    /// child order.
    pub fn step(&self, x: &[f64], children: &[(&[f64], &[f64])]) -> NodeState {
        let hd = self.hidden();
        let mut h_sum = vec![0.0; hd];
        for (h, _) in children {
            for (a, v) in h_sum.iter_mut().zip(h.iter()) {
                *a += v;
            }
        }
        let i: Vec<f64> = self.affine(0, x, &h_sum).into_iter().map(sigmoid).collect();
        let o: Vec<f64> = self.affine(2, x, &h_sum).into_iter().map(sigmoid).collect();
        let u: Vec<f64> = self.affine(3, x, &h_sum).into_iter().map(f64::tanh).collect();
        let f: Vec<Vec<f64>> = children
            .iter()
            .map(|(h, _)| self.affine(1, x, h).into_iter().map(sigmoid).collect())
            .collect();
        let mut c: Vec<f64> = (0..hd).map(|k| i[k] * u[k]).collect();
        for (fk, (_, ck)) in f.iter().zip(children) {
            for k in 0..hd {
                c[k] += fk[k] * ck[k];
            }
        }
        let h = (0..hd).map(|k| o[k] * c[k].tanh()).collect();
        NodeState {
            h,
            c,
            i,
            o,
            u,
            f,
            h_sum,
        }
    }
}

/// Activations of one node, kept for the backward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
    pub i: Vec<f64>,
    pub o: Vec<f64>,
    pub u: Vec<f64>,
    /// One forget gate per child.
    pub f: Vec<Vec<f64>>,
    pub h_sum: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TreeStates {
    pub leaves: Vec<NodeState>,
    pub branches: Vec<NodeState>,
    pub root: NodeState,
}

impl TreeStates {
    pub fn leaf_hidden(&self) -> Vec<Vec<f64>> {
        self.leaves.iter().map(|s| s.h.clone()).collect()
    }

    pub fn branch_hidden(&self) -> Vec<Vec<f64>> {
        self.branches.iter().map(|s| s.h.clone()).collect()
    }
}

fn check(tree: &LevelTree, cell: &TreeLstmCell) -> Result<()> {
    cell.validate()?;
    if cell.input_dim() != tree.dim() {
        return Err(Error::dim(format!(
            "cell takes {} inputs, tree features have {}",
            cell.input_dim(),
            tree.dim()
        )));
    }
    Ok(())
}

/// Bottom-up pass: leaves with no children, branches over their leaves,
/// the root over all branches. Nodes of one level run in parallel.
pub fn tree_lstm_up(tree: &LevelTree, cell: &TreeLstmCell) -> Result<TreeStates> {
    check(tree, cell)?;
    let leaves: Vec<NodeState> = (0..tree.n_leaves())
        .into_par_iter()
        .map(|l| cell.step(tree.leaf_feats.row(l), &[]))
        .collect();
    let branches: Vec<NodeState> = (0..tree.n_branches())
        .into_par_iter()
        .map(|b| {
            let kids: Vec<_> = tree
                .children(b)
                .into_iter()
                .map(|l| (leaves[l].h.as_slice(), leaves[l].c.as_slice()))
                .collect();
            cell.step(tree.branch_feats.row(b), &kids)
        })
        .collect();
    let kids: Vec<_> = branches.iter().map(|s| (s.h.as_slice(), s.c.as_slice())).collect();
    let root = cell.step(&tree.root_feat, &kids);
    Ok(TreeStates { leaves, branches, root })
}

/// Parameter gradients in [`TreeLstmCell::blocks`] order.
#[derive(Clone, Debug, PartialEq)]
pub struct CellGrads {
    pub blocks: Vec<(String, DenseMat)>,
}

struct Acc {
    w: [DenseMat; 4],
    u: [DenseMat; 4],
    b: [Vec<f64>; 4],
}

impl Acc {
    fn outer(m: &mut DenseMat, a: &[f64], x: &[f64]) {
        for (r, &ar) in a.iter().enumerate() {
            for (v, &xc) in m.row_mut(r).iter_mut().zip(x) {
                *v += ar * xc;
            }
        }
    }

    fn add(&mut self, g: usize, a: &[f64], x: &[f64], h: &[f64]) {
        Self::outer(&mut self.w[g], a, x);
        Self::outer(&mut self.u[g], a, h);
        for (v, &ar) in self.b[g].iter_mut().zip(a) {
            *v += ar;
        }
    }
}

fn t_matvec(m: &DenseMat, v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; m.cols()];
    for (r, &vr) in v.iter().enumerate() {
        for (o, &x) in out.iter_mut().zip(m.row(r)) {
            *o += vr * x;
        }
    }
    out
}

/// Backward through one node. Returns `(dh, dc)` for each child.
#[allow(clippy::too_many_arguments)]
fn node_backward(
    cell: &TreeLstmCell,
    acc: &mut Acc,
    x: &[f64],
    s: &NodeState,
    children: &[(&[f64], &[f64])],
    dh: &[f64],
    dc_in: &[f64],
    forget_scale: f64,
) -> Vec<(Vec<f64>, Vec<f64>)> {
    let hd = cell.hidden();
    let mut dc = dc_in.to_vec();
    let mut a_o = vec![0.0; hd];
    for k in 0..hd {
        let t = s.c[k].tanh();
        a_o[k] = dh[k] * t * s.o[k] * (1.0 - s.o[k]);
        dc[k] += dh[k] * s.o[k] * (1.0 - t * t);
    }
    let a_i: Vec<f64> = (0..hd).map(|k| dc[k] * s.u[k] * s.i[k] * (1.0 - s.i[k])).collect();
    let a_u: Vec<f64> = (0..hd).map(|k| dc[k] * s.i[k] * (1.0 - s.u[k] * s.u[k])).collect();
    acc.add(0, &a_i, x, &s.h_sum);
    acc.add(2, &a_o, x, &s.h_sum);
    acc.add(3, &a_u, x, &s.h_sum);
    let mut dh_sum = t_matvec(&cell.u[0], &a_i);
    for (g, a) in [(2, &a_o), (3, &a_u)] {
        for (d, v) in dh_sum.iter_mut().zip(t_matvec(&cell.u[g], a)) {
            *d += v;
        }
    }
    children
        .iter()
        .zip(&s.f)
        .map(|((hk, ck), fk)| {
            let a_f: Vec<f64> = (0..hd)
                .map(|k| dc[k] * ck[k] * fk[k] * (1.0 - fk[k]))
                .collect();
            let scaled: Vec<f64> = a_f.iter().map(|v| forget_scale * v).collect();
            acc.add(1, &scaled, x, hk);
            let mut dhk = dh_sum.clone();
            for (d, v) in dhk.iter_mut().zip(t_matvec(&cell.u[1], &a_f)) {
                *d += v;
            }
            let dck = (0..hd).map(|k| dc[k] * fk[k]).collect();
            (dhk, dck)
        })
        .collect()
}

fn backward(tree: &LevelTree, cell: &TreeLstmCell, states: &TreeStates, upstream_root: &[f64], forget_scale: f64) -> Result<CellGrads> {
    let hd = cell.hidden();
    if upstream_root.len() != hd {
        return Err(Error::dim("upstream must match the hidden dim"));
    }
    let (x_dim, zero) = (cell.input_dim(), vec![0.0; hd]);
    let mut acc = Acc {
        w: std::array::from_fn(|_| DenseMat::zeros(hd, x_dim)),
        u: std::array::from_fn(|_| DenseMat::zeros(hd, hd)),
        b: std::array::from_fn(|_| vec![0.0; hd]),
    };
    let kids: Vec<_> = states.branches.iter().map(|s| (s.h.as_slice(), s.c.as_slice())).collect();
    let branch_d = node_backward(cell, &mut acc, &tree.root_feat, &states.root, &kids, upstream_root, &zero, forget_scale);
    for (b, (dh, dc)) in branch_d.iter().enumerate() {
        let leaves = tree.children(b);
        let kids: Vec<_> = leaves
            .iter()
            .map(|&l| (states.leaves[l].h.as_slice(), states.leaves[l].c.as_slice()))
            .collect();
        let leaf_d = node_backward(cell, &mut acc, tree.branch_feats.row(b), &states.branches[b], &kids, dh, dc, forget_scale);
        for (&l, (dhl, dcl)) in leaves.iter().zip(&leaf_d) {
            node_backward(cell, &mut acc, tree.leaf_feats.row(l), &states.leaves[l], &[], dhl, dcl, forget_scale);
        }
    }
    let mut blocks = Vec::with_capacity(12);
    for (g, gate) in Gate::ALL.iter().enumerate() {
        blocks.push((format!("{}.W", gate.name()), acc.w[g].clone()));
        blocks.push((format!("{}.U", gate.name()), acc.u[g].clone()));
        blocks.push((format!("{}.b", gate.name()), DenseMat::from_vec(1, hd, acc.b[g].clone())?));
    }
    Ok(CellGrads { blocks })
}

/// Gradients of `⟨upstream, h_root⟩` with respect to every cell parameter.
pub fn cell_gradients(tree: &LevelTree, cell: &TreeLstmCell, upstream_root: &[f64]) -> Result<CellGrads> {
    let states = tree_lstm_up(tree, cell)?;
    backward(tree, cell, &states, upstream_root, 1.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockCheck {
    pub name: String,
    pub max_rel_error: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradcheckReport {
    pub blocks: Vec<BlockCheck>,
    pub tolerance: f64,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.blocks.iter().all(|b| b.passed)
    }

    pub fn failing(&self) -> Vec<&str> {
        self.blocks.iter().filter(|b| !b.passed).map(|b| b.name.as_str()).collect()
    }
}

impl std::fmt::Display for GradcheckReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for b in &self.blocks {
            writeln!(f, "{:<10} {:>10.3e} {}", b.name, b.max_rel_error, if b.passed { "ok" } else { "FAIL" })?;
        }
        Ok(())
    }
}

/// Relative-error floor for gradient comparisons; entries whose magnitude
/// is below it are compared absolutely.
pub const GRAD_FLOOR: f64 = 1e-6;

/// Compares analytic gradients of `Σ h_root` with central differences.
pub fn cell_gradcheck(cell: &TreeLstmCell, tree: &LevelTree, tolerance: f64) -> Result<GradcheckReport> {
    gradcheck_impl(cell, tree, tolerance, 1.0)
}

/// Same as [`cell_gradcheck`] with the analytic forget-gate gradient scaled
/// by `forget_scale`, to exercise the failure path.
#[doc(hidden)]
pub fn cell_gradcheck_corrupted(cell: &TreeLstmCell, tree: &LevelTree, tolerance: f64, forget_scale: f64) -> Result<GradcheckReport> {
    gradcheck_impl(cell, tree, tolerance, forget_scale)
}

fn gradcheck_impl(cell: &TreeLstmCell, tree: &LevelTree, tolerance: f64, forget_scale: f64) -> Result<GradcheckReport> {
    let states = tree_lstm_up(tree, cell)?;
    let ones = vec![1.0; cell.hidden()];
    let analytic = backward(tree, cell, &states, &ones, forget_scale)?;
    let params = cell.blocks();
    let mut blocks = Vec::with_capacity(params.len());
    for (idx, (name, value)) in params.iter().enumerate() {
        let numeric = finite_diff_grad(
            |m| {
                let mut c = cell.clone();
                c.set_block(idx, m);
                tree_lstm_up(tree, &c).map(|s| s.root.h.iter().sum()).unwrap_or(f64::NAN)
            },
            value,
            crate::numerics::DEFAULT_EPS,
        )?;
        let err = analytic.blocks[idx].1.max_rel_diff(&numeric, GRAD_FLOOR);
        blocks.push(BlockCheck {
            name: name.clone(),
            max_rel_error: err,
            passed: err <= tolerance,
        });
    }
    Ok(GradcheckReport { blocks, tolerance })
}
