//! Primal-dual interior-point solver (Mehrotra predictor-corrector) for
//! the convex quadratic programs assembled in this module.
//!
//! Each Newton step reduces to the symmetric augmented system
//!
//! ```text
//! [ P + G'DG + dI    A' ] [dz]   [rhs_z]
//! [ A              -d'I ] [dy] = [rhs_y]
//! ```
//!
//! with `D = diag(lambda/w)`. The day problems have arrow structure: per
//! scenario a narrow-banded diagonal block, coupled only through a few
//! shared variables. Blocks are factored by banded LDL^T, the dense
//! Schur complement on the shared part is factored by LU, and two rounds
//! of iterative refinement against the unregularized system remove the
//! error introduced by the static regularization `d`, `d'`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

use super::{QuadraticProgram, Solution, SolveStatus};

/// Static primal/dual regularization, relative to the data scale.
const REG: f64 = 1e-8;
/// Fraction-to-boundary factor keeping iterates strictly interior.
const BOUNDARY: f64 = 0.995;
/// Iteration cap.
const MAX_ITERS: usize = 10_000;
/// Rounds of iterative refinement per linear solve.
const REFINE_ROUNDS: usize = 2;

/// Where an augmented-system index (variable or equality row) lives.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Slot {
    Shared(usize),
    Block { block: usize, pos: usize },
}

/// Symmetric banded matrix in lower storage with an LDL^T factorization
/// computed in place. Stable without pivoting here because the assembled
/// KKT matrix is quasidefinite (positive diagonal on variable indices,
/// negative on constraint indices).
struct BandMatrix {
    n: usize,
    bw: usize,
    /// `data[i * (bw + 1) + (bw - (i - j))]` holds entry (i, j), j <= i.
    data: Vec<f64>,
    d: Vec<f64>,
}

impl BandMatrix {
    fn new(n: usize, bw: usize) -> Self {
        Self { n, bw, data: vec![0.0; n * (bw + 1)], d: vec![0.0; n] }
    }

    fn clear(&mut self) {
        self.data.fill(0.0);
    }

    /// Adds to symmetric entry (i, j); requires |i - j| <= bw. Only the
    /// lower half is stored.
    fn add(&mut self, i: usize, j: usize, v: f64) {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        debug_assert!(r - c <= self.bw);
        self.data[r * (self.bw + 1) + (self.bw - (r - c))] += v;
    }

    fn factor(&mut self) {
        let w = self.bw;
        for j in 0..self.n {
            let lo = j.saturating_sub(w);
            let mut dj = self.data[j * (w + 1) + w];
            for k in lo..j {
                let ljk = self.data[j * (w + 1) + (w - (j - k))];
                dj -= ljk * ljk * self.d[k];
            }
            // quasidefinite diagonals stay away from zero; the guard only
            // protects against pathological cancellation
            if dj.abs() < 1e-300 {
                dj = 1e-300;
            }
            self.d[j] = dj;
            let hi = (j + w + 1).min(self.n);
            for i in (j + 1)..hi {
                let mut v = self.data[i * (w + 1) + (w - (i - j))];
                let lo_i = i.saturating_sub(w).max(lo);
                for k in lo_i..j {
                    v -= self.data[i * (w + 1) + (w - (i - k))]
                        * self.data[j * (w + 1) + (w - (j - k))]
                        * self.d[k];
                }
                self.data[i * (w + 1) + (w - (i - j))] = v / dj;
            }
        }
    }

    fn solve_in_place(&self, x: &mut [f64]) {
        let w = self.bw;
        for i in 0..self.n {
            let lo = i.saturating_sub(w);
            let mut v = x[i];
            for k in lo..i {
                v -= self.data[i * (w + 1) + (w - (i - k))] * x[k];
            }
            x[i] = v;
        }
        for i in 0..self.n {
            x[i] /= self.d[i];
        }
        for i in (0..self.n).rev() {
            let hi = (i + w + 1).min(self.n);
            let mut v = x[i];
            for k in (i + 1)..hi {
                v -= self.data[k * (w + 1) + (w - (k - i))] * x[k];
            }
            x[i] = v;
        }
    }
}

/// Factorization machinery for one problem; the sparsity structure is
/// analyzed once, values are refreshed every interior-point iteration.
struct KktSolver<'a> {
    qp: &'a QuadraticProgram,
    n_aug: usize,
    slot: Vec<Slot>,
    n_shared: usize,
    block_sizes: Vec<usize>,
    bands: Vec<BandMatrix>,
    couplings: Vec<DMatrix<f64>>,
    shared: DMatrix<f64>,
    shared_lu: Option<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
    delta_z: f64,
    delta_y: f64,
}

impl<'a> KktSolver<'a> {
    fn new(qp: &'a QuadraticProgram, delta_z: f64, delta_y: f64) -> Result<Self> {
        let n_aug = qp.n + qp.b.len();
        let mut slot = vec![Slot::Shared(usize::MAX); n_aug];
        let mut block_sizes = Vec::new();
        if let Some(bs) = &qp.blocks {
            for (bi, order) in bs.blocks.iter().enumerate() {
                for (pos, &aug) in order.iter().enumerate() {
                    if aug >= n_aug {
                        return Err(Error::InvalidSpec(format!(
                            "block entry {aug} out of range {n_aug}"
                        )));
                    }
                    if slot[aug] != Slot::Shared(usize::MAX) {
                        return Err(Error::InvalidSpec(format!(
                            "augmented index {aug} assigned to two blocks"
                        )));
                    }
                    slot[aug] = Slot::Block { block: bi, pos };
                }
                block_sizes.push(order.len());
            }
        }
        let mut n_shared = 0;
        for s in slot.iter_mut() {
            if matches!(s, Slot::Shared(_)) {
                *s = Slot::Shared(n_shared);
                n_shared += 1;
            }
        }

        // One structural pass determines block bandwidths and rejects
        // cross-block coupling, which the factorization cannot handle.
        let mut bws = vec![0usize; block_sizes.len()];
        {
            let mut touch = |i: usize, j: usize| -> Result<()> {
                if let (Slot::Block { block: a, pos: pa }, Slot::Block { block: b, pos: pb }) =
                    (slot[i], slot[j])
                {
                    if a != b {
                        return Err(Error::InvalidSpec(
                            "entries couple two different scenario blocks".into(),
                        ));
                    }
                    bws[a] = bws[a].max(pa.abs_diff(pb));
                }
                Ok(())
            };
            for &(i, j, _) in &qp.p_entries {
                touch(i, j)?;
            }
            for &(r, j, _) in &qp.a_entries {
                touch(qp.n + r, j)?;
            }
            for row in &qp.g_rows {
                for (a, &(ca, _)) in row.iter().enumerate() {
                    for &(cb, _) in row.iter().skip(a) {
                        touch(ca, cb)?;
                    }
                }
            }
        }

        let bands = block_sizes
            .iter()
            .zip(&bws)
            .map(|(&sz, &bw)| BandMatrix::new(sz, bw))
            .collect();
        let couplings =
            block_sizes.iter().map(|&sz| DMatrix::zeros(sz, n_shared)).collect();
        Ok(Self {
            qp,
            n_aug,
            slot,
            n_shared,
            block_sizes,
            bands,
            couplings,
            shared: DMatrix::zeros(n_shared, n_shared),
            shared_lu: None,
            delta_z,
            delta_y,
        })
    }

    /// Rebuilds and refactors the regularized augmented matrix for the
    /// current complementarity scaling `d = lambda / w`.
    fn factor(&mut self, d: &[f64]) {
        for b in &mut self.bands {
            b.clear();
        }
        for c in &mut self.couplings {
            c.fill(0.0);
        }
        self.shared.fill(0.0);

        {
            let slot = &self.slot;
            let bands = &mut self.bands;
            let couplings = &mut self.couplings;
            let shared = &mut self.shared;
            let mut add_sym = |i: usize, j: usize, v: f64| match (slot[i], slot[j]) {
                (Slot::Shared(a), Slot::Shared(b)) => {
                    shared[(a, b)] += v;
                    if a != b {
                        shared[(b, a)] += v;
                    }
                }
                (Slot::Block { block, pos }, Slot::Shared(s))
                | (Slot::Shared(s), Slot::Block { block, pos }) => {
                    couplings[block][(pos, s)] += v;
                }
                (Slot::Block { block: a, pos: pa }, Slot::Block { pos: pb, .. }) => {
                    bands[a].add(pa, pb, v);
                }
            };

            for &(i, j, v) in &self.qp.p_entries {
                add_sym(i, j, v);
            }
            for &(r, j, v) in &self.qp.a_entries {
                add_sym(self.qp.n + r, j, v);
            }
            for (row, &dr) in self.qp.g_rows.iter().zip(d) {
                for (a, &(ca, va)) in row.iter().enumerate() {
                    for &(cb, vb) in row.iter().skip(a) {
                        add_sym(ca, cb, dr * va * vb);
                    }
                }
            }
            for i in 0..self.qp.n {
                add_sym(i, i, self.delta_z);
            }
            for r in 0..self.qp.b.len() {
                add_sym(self.qp.n + r, self.qp.n + r, -self.delta_y);
            }
        }

        for b in &mut self.bands {
            b.factor();
        }
        // Schur complement on the shared part
        let mut s = self.shared.clone();
        if self.n_shared > 0 {
            let mut col = Vec::new();
            for (band, c) in self.bands.iter().zip(&self.couplings) {
                if c.nrows() == 0 {
                    continue;
                }
                let mut solved = c.clone();
                for j in 0..solved.ncols() {
                    col.clear();
                    col.extend(solved.column(j).iter());
                    band.solve_in_place(&mut col);
                    solved.column_mut(j).copy_from_slice(&col);
                }
                s -= c.transpose() * solved;
            }
        }
        self.shared_lu = Some(nalgebra::LU::new(s));
    }

    /// One backsolve of the factored regularized system.
    fn solve_factored(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let mut block_rhs: Vec<Vec<f64>> =
            self.block_sizes.iter().map(|&sz| vec![0.0; sz]).collect();
        let mut shared_rhs = DVector::zeros(self.n_shared);
        for (aug, &v) in rhs.iter().enumerate() {
            match self.slot[aug] {
                Slot::Shared(s) => shared_rhs[s] = v,
                Slot::Block { block, pos } => block_rhs[block][pos] = v,
            }
        }

        // forward: eliminate each block into the shared system
        for (bi, r) in block_rhs.iter_mut().enumerate() {
            self.bands[bi].solve_in_place(r);
            let c = &self.couplings[bi];
            for s in 0..self.n_shared {
                let mut acc = 0.0;
                for (pos, &tv) in r.iter().enumerate() {
                    acc += c[(pos, s)] * tv;
                }
                shared_rhs[s] -= acc;
            }
        }

        let shared_sol = match &self.shared_lu {
            Some(lu) if self.n_shared > 0 => {
                lu.solve(&shared_rhs).unwrap_or_else(|| DVector::zeros(self.n_shared))
            }
            _ => shared_rhs,
        };

        // back: correct each block for the shared solution
        let mut out = DVector::zeros(self.n_aug);
        if let Some(bs) = &self.qp.blocks {
            for (bi, half) in block_rhs.iter().enumerate() {
                let c = &self.couplings[bi];
                let mut corr = vec![0.0; half.len()];
                for (pos, cv) in corr.iter_mut().enumerate() {
                    for s in 0..self.n_shared {
                        *cv += c[(pos, s)] * shared_sol[s];
                    }
                }
                self.bands[bi].solve_in_place(&mut corr);
                for (pos, &aug) in bs.blocks[bi].iter().enumerate() {
                    out[aug] = half[pos] - corr[pos];
                }
            }
        }
        for (aug, s) in self.slot.iter().enumerate() {
            if let Slot::Shared(si) = s {
                out[aug] = shared_sol[*si];
            }
        }
        out
    }

    /// Matrix-vector product of the *unregularized* augmented system,
    /// the refinement target.
    fn true_mul(&self, d: &[f64], x: &DVector<f64>) -> DVector<f64> {
        let qp = self.qp;
        let mut out = DVector::zeros(self.n_aug);
        for &(i, j, v) in &qp.p_entries {
            out[i] += v * x[j];
            if i != j {
                out[j] += v * x[i];
            }
        }
        for &(r, j, v) in &qp.a_entries {
            out[j] += v * x[qp.n + r];
            out[qp.n + r] += v * x[j];
        }
        for (row, &dr) in qp.g_rows.iter().zip(d) {
            let t: f64 = row.iter().map(|&(c, v)| v * x[c]).sum();
            for &(c, v) in row {
                out[c] += dr * t * v;
            }
        }
        out
    }

    /// Solve with iterative refinement against the unregularized system.
    fn solve(&self, d: &[f64], rhs: &DVector<f64>) -> DVector<f64> {
        let mut x = self.solve_factored(rhs);
        for _ in 0..REFINE_ROUNDS {
            let r = rhs - self.true_mul(d, &x);
            x += self.solve_factored(&r);
        }
        x
    }
}

pub(super) fn solve_qp(qp: &QuadraticProgram, tol: f64) -> Result<Solution> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let n = qp.n;
    let me = qp.b.len();
    let mi = qp.h.len();

    let data_max = qp
        .p_entries
        .iter()
        .map(|&(_, _, v)| v.abs())
        .chain(qp.a_entries.iter().map(|&(_, _, v)| v.abs()))
        .chain(qp.g_rows.iter().flatten().map(|&(_, v)| v.abs()))
        .chain(qp.q.iter().map(|v| v.abs()))
        .fold(0.0f64, f64::max);
    let scale_d = 1.0 + data_max;
    let scale_p =
        1.0 + qp.b.iter().chain(qp.h.iter()).map(|v| v.abs()).fold(0.0f64, f64::max);

    let mut kkt = KktSolver::new(qp, REG * scale_d, REG * scale_p)?;

    let mut z = DVector::<f64>::zeros(n);
    let mut y = DVector::<f64>::zeros(me);
    // at z = 0 a slack of max(1, h) keeps well-separated rows inactive
    // from the first iterate onward
    let mut w = DVector::<f64>::from_fn(mi, |r, _| qp.h[r].max(1.0));
    let mut lam = DVector::<f64>::from_element(mi, 1.0);

    let g_mul = |z: &DVector<f64>| -> DVector<f64> {
        let mut out = DVector::zeros(mi);
        for (r, row) in qp.g_rows.iter().enumerate() {
            out[r] = row.iter().map(|&(c, v)| v * z[c]).sum();
        }
        out
    };
    let gt_mul = |lam: &DVector<f64>| -> DVector<f64> {
        let mut out = DVector::zeros(n);
        for (r, row) in qp.g_rows.iter().enumerate() {
            for &(c, v) in row {
                out[c] += v * lam[r];
            }
        }
        out
    };
    let a_mul = |z: &DVector<f64>| -> DVector<f64> {
        let mut out = DVector::zeros(me);
        for &(r, j, v) in &qp.a_entries {
            out[r] += v * z[j];
        }
        out
    };
    let at_mul = |y: &DVector<f64>| -> DVector<f64> {
        let mut out = DVector::zeros(n);
        for &(r, j, v) in &qp.a_entries {
            out[j] += v * y[r];
        }
        out
    };
    let p_mul = |z: &DVector<f64>| -> DVector<f64> {
        let mut out = DVector::zeros(n);
        for &(i, j, v) in &qp.p_entries {
            out[i] += v * z[j];
            if i != j {
                out[j] += v * z[i];
            }
        }
        out
    };
    let q_vec = DVector::from_column_slice(&qp.q);
    let b_vec = DVector::from_column_slice(&qp.b);
    let h_vec = DVector::from_column_slice(&qp.h);

    let objective = |z: &DVector<f64>| 0.5 * p_mul(z).dot(z) + q_vec.dot(z);

    let status;
    let mut iterations = 0;
    let mut tiny_steps = 0;
    let (mut res_stat, mut res_prim, mut res_comp);

    loop {
        let gz = g_mul(&z);
        let r_d = p_mul(&z) + &q_vec + at_mul(&y) + gt_mul(&lam);
        let r_p = a_mul(&z) - &b_vec;
        let r_g = &gz + &w - &h_vec;
        let obj = objective(&z);

        res_stat = r_d.amax() / scale_d;
        let viol_ineq = (0..mi).map(|r| (gz[r] - h_vec[r]).max(0.0)).fold(0.0f64, f64::max);
        res_prim = (if me > 0 { r_p.amax() } else { 0.0 })
            .max(if mi > 0 { r_g.amax() } else { 0.0 })
            .max(viol_ineq)
            / scale_p;
        res_comp = if mi > 0 {
            (0..mi).map(|r| (w[r] * lam[r]).abs()).fold(0.0f64, f64::max) / (1.0 + obj.abs())
        } else {
            0.0
        };

        if res_stat <= tol && res_prim <= tol && res_comp <= tol {
            status = SolveStatus::Optimal;
            break;
        }
        if !(res_stat.is_finite() && res_prim.is_finite() && res_comp.is_finite()) {
            status = SolveStatus::NumericalBreakdown;
            break;
        }
        if iterations >= MAX_ITERS {
            status = SolveStatus::MaxIterations;
            break;
        }
        // diverging duals with a stubborn primal residual are the
        // practical certificate of infeasibility for this problem family
        let dual_scale = (if me > 0 { y.amax() } else { 0.0 })
            .max(if mi > 0 { lam.amax() } else { 0.0 });
        if dual_scale > 1e9 * scale_d && res_prim > tol.sqrt() {
            status = SolveStatus::Infeasible;
            break;
        }
        if tiny_steps >= 5 {
            status = if res_prim > tol.sqrt() {
                SolveStatus::Infeasible
            } else {
                SolveStatus::MaxIterations
            };
            break;
        }

        // keep the complementarity ratios inside a range the banded
        // factorization can absorb; beyond either end the row is
        // numerically active or inactive anyway
        let d: Vec<f64> = (0..mi).map(|r| (lam[r] / w[r]).clamp(1e-10, 1e10)).collect();
        kkt.factor(&d);

        let mu = if mi > 0 { w.dot(&lam) / mi as f64 } else { 0.0 };

        // shared solve routine for a given complementarity residual
        let newton = |rc: &DVector<f64>| -> (DVector<f64>, DVector<f64>, DVector<f64>, DVector<f64>) {
            let wl = DVector::from_fn(mi, |r, _| (lam[r] * r_g[r] - rc[r]) / w[r]);
            let mut rhs = DVector::zeros(n + me);
            rhs.rows_mut(0, n).copy_from(&(-&r_d - gt_mul(&wl)));
            rhs.rows_mut(n, me).copy_from(&(-&r_p));
            let sol = kkt.solve(&d, &rhs);
            let dz = sol.rows(0, n).into_owned();
            let dy = sol.rows(n, me).into_owned();
            let gdz = g_mul(&dz);
            let dw = -&r_g - &gdz;
            let dl = DVector::from_fn(mi, |r, _| wl[r] + d[r] * gdz[r]);
            (dz, dy, dw, dl)
        };

        let step = |v: &DVector<f64>, dv: &DVector<f64>| -> f64 {
            let mut a: f64 = 1.0;
            for i in 0..v.len() {
                if dv[i] < 0.0 {
                    a = a.min(-v[i] / dv[i]);
                }
            }
            a
        };

        // predictor: pure affine scaling direction
        let rc_aff = DVector::from_fn(mi, |r, _| w[r] * lam[r]);
        let (_, _, dw_a, dl_a) = newton(&rc_aff);

        // centering weight from the affine step's achievable progress
        let rc = if mi > 0 {
            let ap = step(&w, &dw_a);
            let ad = step(&lam, &dl_a);
            let mu_aff = (0..mi)
                .map(|r| (w[r] + ap * dw_a[r]) * (lam[r] + ad * dl_a[r]))
                .sum::<f64>()
                / mi as f64;
            let sigma = if mu > 0.0 { (mu_aff / mu).powi(3).clamp(0.0, 1.0) } else { 0.0 };
            DVector::from_fn(mi, |r, _| w[r] * lam[r] + dw_a[r] * dl_a[r] - sigma * mu)
        } else {
            DVector::zeros(0)
        };

        let (dz, dy, dw, dl) = newton(&rc);
        let finite = |v: &DVector<f64>| v.iter().all(|x| x.is_finite());
        if !(finite(&dz) && finite(&dy) && finite(&dw) && finite(&dl)) {
            status = SolveStatus::NumericalBreakdown;
            break;
        }

        let (ap, ad) = if mi > 0 {
            ((BOUNDARY * step(&w, &dw)).min(1.0), (BOUNDARY * step(&lam, &dl)).min(1.0))
        } else {
            (1.0, 1.0)
        };
        if ap < 1e-10 && ad < 1e-10 {
            tiny_steps += 1;
        } else {
            tiny_steps = 0;
        }

        z += ap * &dz;
        y += ad * &dy;
        if mi > 0 {
            w += ap * &dw;
            lam += ad * &dl;
        }
        iterations += 1;
    }

    Ok(Solution {
        values: z.iter().cloned().collect(),
        objective: objective(&z),
        stationarity: res_stat,
        primal: res_prim,
        complementarity: res_comp,
        status,
        iterations,
    })
}
