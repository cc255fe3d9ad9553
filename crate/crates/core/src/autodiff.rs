//! Vector-valued reverse-mode automatic differentiation.
//!
//! Every node on a [`Tape`] holds a flat vector. Operations append nodes and
//! record their inputs; [`Tape::backward`] walks the tape in reverse and
//! accumulates adjoints. The op set is exactly what the predictor, the attack
//! objectives and the training losses need: dense and 1-D convolutional
//! layers, pointwise nonlinearities, reductions and a few 2-D waypoint helpers
//! (waypoint sequences are stored interleaved as `[x0, y0, x1, y1, ...]`).
//!
//! ```
//! use ssat::autodiff::Tape;
//!
//! let mut tape = Tape::<f64>::new();
//! let x = tape.leaf(vec![1.0, 2.0]);
//! let sq = tape.square(x);
//! let y = tape.sum(sq);
//! let grads = tape.backward(y);
//! assert_eq!(grads.wrt(x), vec![2.0, 4.0]);
//! ```

use crate::scalar::Real;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op<T> {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    /// `a` has length `n * b.len()`; `b` is added to every block.
    AddTiled(Var, Var),
    Scale(Var, T),
    Shift(Var),
    MatVec {
        w: Var,
        x: Var,
        rows: usize,
        cols: usize,
    },
    Conv1d {
        w: Var,
        x: Var,
        shape: ConvShape,
    },
    Tanh(Var),
    Exp(Var),
    Sigmoid(Var),
    /// `ln(max(a, floor))`.
    LnFloor(Var, T),
    Clamp(Var, T, T),
    Softmax(Var),
    Square(Var),
    SmoothL1(Var),
    PairNorm(Var),
    Rotate2(Var, T, T),
    Concat(Vec<Var>),
    Slice(Var, usize),
    Sum(Var),
    MeanOf(Vec<Var>),
}

/// Geometry of a valid (unpadded) dilated 1-D convolution.
///
/// Input is time-major: element `(t, c)` lives at `t * in_ch + c`. Weights are
/// laid out `[out_ch][in_ch][kernel]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvShape {
    pub len_in: usize,
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
    pub dilation: usize,
}

impl ConvShape {
    pub fn len_out(&self) -> usize {
        self.len_in - self.dilation * (self.kernel - 1)
    }

    pub fn weight_len(&self) -> usize {
        self.out_ch * self.in_ch * self.kernel
    }
}

#[derive(Debug, Clone)]
struct Node<T> {
    value: Vec<T>,
    op: Op<T>,
}

/// Append-only record of a forward computation.
#[derive(Debug, Clone, Default)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

/// Adjoints produced by [`Tape::backward`].
#[derive(Debug, Clone)]
pub struct Gradients<T> {
    adjoints: Vec<Option<Vec<T>>>,
    lens: Vec<usize>,
}

impl<T: Real> Gradients<T> {
    /// Gradient of the differentiated output with respect to `v`.
    pub fn wrt(&self, v: Var) -> Vec<T> {
        match &self.adjoints[v.0] {
            Some(a) => a.clone(),
            None => vec![T::zero(); self.lens[v.0]],
        }
    }

    /// Like [`Gradients::wrt`] without copying; `None` when `v` does not
    /// influence the output.
    pub fn get(&self, v: Var) -> Option<&[T]> {
        self.adjoints[v.0].as_deref()
    }
}

fn accumulate<T: Real>(slot: &mut Option<Vec<T>>, len: usize) -> &mut Vec<T> {
    slot.get_or_insert_with(|| vec![T::zero(); len])
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Vec<T>, op: Op<T>) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// Input or parameter node.
    pub fn leaf(&mut self, value: Vec<T>) -> Var {
        self.push(value, Op::Leaf)
    }

    /// Copies the value of `v` into a fresh leaf, cutting the gradient path.
    pub fn detach(&mut self, v: Var) -> Var {
        let value = self.nodes[v.0].value.clone();
        self.leaf(value)
    }

    pub fn value(&self, v: Var) -> &[T] {
        &self.nodes[v.0].value
    }

    /// Value of a length-1 node.
    pub fn scalar(&self, v: Var) -> T {
        let val = self.value(v);
        debug_assert_eq!(val.len(), 1, "scalar() on a vector node");
        val[0]
    }

    pub fn len_of(&self, v: Var) -> usize {
        self.nodes[v.0].value.len()
    }

    fn zip_with(&self, a: Var, b: Var, f: impl Fn(T, T) -> T) -> Vec<T> {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!(va.len(), vb.len(), "elementwise op on mismatched lengths");
        va.iter().zip(vb).map(|(&x, &y)| f(x, y)).collect()
    }

    fn map(&self, a: Var, f: impl Fn(T) -> T) -> Vec<T> {
        self.value(a).iter().map(|&x| f(x)).collect()
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.zip_with(a, b, |x, y| x + y);
        self.push(v, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.zip_with(a, b, |x, y| x - y);
        self.push(v, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = self.zip_with(a, b, |x, y| x * y);
        self.push(v, Op::Mul(a, b))
    }

    /// Adds `b` to each consecutive `b.len()`-sized block of `a`.
    pub fn add_tiled(&mut self, a: Var, b: Var) -> Var {
        let vb = self.value(b).to_vec();
        let va = self.value(a);
        assert!(
            !vb.is_empty() && va.len() % vb.len() == 0,
            "add_tiled: block length does not divide input"
        );
        let v = va
            .iter()
            .enumerate()
            .map(|(i, &x)| x + vb[i % vb.len()])
            .collect();
        self.push(v, Op::AddTiled(a, b))
    }

    pub fn scale(&mut self, a: Var, c: T) -> Var {
        let v = self.map(a, |x| x * c);
        self.push(v, Op::Scale(a, c))
    }

    /// Adds a constant to every element.
    pub fn shift(&mut self, a: Var, c: T) -> Var {
        let v = self.map(a, |x| x + c);
        self.push(v, Op::Shift(a))
    }

    /// Row-major `rows x cols` matrix `w` times vector `x`.
    pub fn matvec(&mut self, w: Var, x: Var, rows: usize, cols: usize) -> Var {
        let (vw, vx) = (self.value(w), self.value(x));
        assert_eq!(vw.len(), rows * cols, "matvec: weight shape");
        assert_eq!(vx.len(), cols, "matvec: input width");
        let v = vw
            .chunks_exact(cols)
            .map(|row| row.iter().zip(vx).map(|(&a, &b)| a * b).sum())
            .collect();
        self.push(v, Op::MatVec { w, x, rows, cols })
    }

    pub fn conv1d(&mut self, w: Var, x: Var, shape: ConvShape) -> Var {
        let (vw, vx) = (self.value(w), self.value(x));
        assert_eq!(vw.len(), shape.weight_len(), "conv1d: weight shape");
        assert_eq!(vx.len(), shape.len_in * shape.in_ch, "conv1d: input shape");
        let len_out = shape.len_out();
        let mut out = vec![T::zero(); len_out * shape.out_ch];
        for t in 0..len_out {
            for o in 0..shape.out_ch {
                let mut acc = T::zero();
                for c in 0..shape.in_ch {
                    let wbase = (o * shape.in_ch + c) * shape.kernel;
                    for k in 0..shape.kernel {
                        acc += vw[wbase + k] * vx[(t + k * shape.dilation) * shape.in_ch + c];
                    }
                }
                out[t * shape.out_ch + o] = acc;
            }
        }
        self.push(out, Op::Conv1d { w, x, shape })
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.map(a, T::tanh);
        self.push(v, Op::Tanh(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let v = self.map(a, T::exp);
        self.push(v, Op::Exp(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.map(a, sigmoid);
        self.push(v, Op::Sigmoid(a))
    }

    /// Natural log with the argument clamped from below at `floor`.
    pub fn ln_floor(&mut self, a: Var, floor: T) -> Var {
        let v = self.map(a, |x| x.max(floor).ln());
        self.push(v, Op::LnFloor(a, floor))
    }

    /// Clamps to `[lo, hi]`; the gradient is zero where the clamp is active.
    pub fn clamp(&mut self, a: Var, lo: T, hi: T) -> Var {
        let v = self.map(a, |x| x.max(lo).min(hi));
        self.push(v, Op::Clamp(a, lo, hi))
    }

    pub fn softmax(&mut self, a: Var) -> Var {
        let v = softmax(self.value(a));
        self.push(v, Op::Softmax(a))
    }

    pub fn square(&mut self, a: Var) -> Var {
        let v = self.map(a, |x| x * x);
        self.push(v, Op::Square(a))
    }

    /// Elementwise smooth-L1 (Huber with unit threshold).
    pub fn smooth_l1(&mut self, a: Var) -> Var {
        let v = self.map(a, smooth_l1);
        self.push(v, Op::SmoothL1(a))
    }

    /// Euclidean norm of each interleaved `(x, y)` pair.
    pub fn pair_norm(&mut self, a: Var) -> Var {
        let va = self.value(a);
        assert!(va.len() % 2 == 0, "pair_norm on odd length");
        let v = va.chunks_exact(2).map(|p| p[0].hypot(p[1])).collect();
        self.push(v, Op::PairNorm(a))
    }

    /// Rotates every `(x, y)` pair by the angle with the given cosine and sine.
    pub fn rotate2(&mut self, a: Var, cos: T, sin: T) -> Var {
        let va = self.value(a);
        assert!(va.len() % 2 == 0, "rotate2 on odd length");
        let v = va
            .chunks_exact(2)
            .flat_map(|p| [cos * p[0] - sin * p[1], sin * p[0] + cos * p[1]])
            .collect();
        self.push(v, Op::Rotate2(a, cos, sin))
    }

    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let v = parts
            .iter()
            .flat_map(|p| self.value(*p).iter().copied())
            .collect();
        self.push(v, Op::Concat(parts.to_vec()))
    }

    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Var {
        let v = self.value(a)[start..start + len].to_vec();
        self.push(v, Op::Slice(a, start))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let v = self.value(a).iter().copied().sum();
        self.push(vec![v], Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let n = T::from_usize(self.len_of(a)).expect("length fits scalar");
        let s = self.sum(a);
        self.scale(s, T::one() / n)
    }

    /// Elementwise mean of equal-length nodes.
    pub fn mean_of(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "mean_of needs at least one input");
        let len = self.len_of(parts[0]);
        let n = T::from_usize(parts.len()).expect("count fits scalar");
        let mut v = vec![T::zero(); len];
        for p in parts {
            let vp = self.value(*p);
            assert_eq!(vp.len(), len, "mean_of on mismatched lengths");
            for (acc, &x) in v.iter_mut().zip(vp) {
                *acc += x;
            }
        }
        v.iter_mut().for_each(|x| *x /= n);
        self.push(v, Op::MeanOf(parts.to_vec()))
    }

    /// Reverse sweep from the scalar node `out`.
    pub fn backward(&self, out: Var) -> Gradients<T> {
        assert_eq!(self.len_of(out), 1, "backward from a non-scalar node");
        let lens: Vec<usize> = self.nodes.iter().map(|n| n.value.len()).collect();
        let mut adj: Vec<Option<Vec<T>>> = vec![None; self.nodes.len()];
        adj[out.0] = Some(vec![T::one()]);

        for i in (0..=out.0).rev() {
            let Some(g) = adj[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf => {}
                Op::Add(a, b) => {
                    add_into(accumulate(&mut adj[a.0], lens[a.0]), &g);
                    add_into(accumulate(&mut adj[b.0], lens[b.0]), &g);
                }
                Op::Sub(a, b) => {
                    add_into(accumulate(&mut adj[a.0], lens[a.0]), &g);
                    let gb = accumulate(&mut adj[b.0], lens[b.0]);
                    for (d, &x) in gb.iter_mut().zip(&g) {
                        *d -= x;
                    }
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    let ga: Vec<T> = g.iter().zip(vb).map(|(&x, &y)| x * y).collect();
                    let gb: Vec<T> = g.iter().zip(va).map(|(&x, &y)| x * y).collect();
                    add_into(accumulate(&mut adj[a.0], lens[a.0]), &ga);
                    add_into(accumulate(&mut adj[b.0], lens[b.0]), &gb);
                }
                Op::AddTiled(a, b) => {
                    add_into(accumulate(&mut adj[a.0], lens[a.0]), &g);
                    let m = lens[b.0];
                    let gb = accumulate(&mut adj[b.0], m);
                    for (j, &x) in g.iter().enumerate() {
                        gb[j % m] += x;
                    }
                }
                Op::Scale(a, c) => {
                    let ga = accumulate(&mut adj[a.0], lens[a.0]);
                    for (d, &x) in ga.iter_mut().zip(&g) {
                        *d += x * *c;
                    }
                }
                Op::Shift(a) => add_into(accumulate(&mut adj[a.0], lens[a.0]), &g),
                Op::MatVec { w, x, rows, cols } => {
                    let (vw, vx) = (&self.nodes[w.0].value, &self.nodes[x.0].value);
                    {
                        let gw = accumulate(&mut adj[w.0], lens[w.0]);
                        for r in 0..*rows {
                            let gr = g[r];
                            if gr == T::zero() {
                                continue;
                            }
                            for (d, &xv) in gw[r * cols..(r + 1) * cols].iter_mut().zip(vx) {
                                *d += gr * xv;
                            }
                        }
                    }
                    let gx = accumulate(&mut adj[x.0], lens[x.0]);
                    for r in 0..*rows {
                        let gr = g[r];
                        if gr == T::zero() {
                            continue;
                        }
                        for (d, &wv) in gx.iter_mut().zip(&vw[r * cols..(r + 1) * cols]) {
                            *d += gr * wv;
                        }
                    }
                }
                Op::Conv1d { w, x, shape } => {
                    let (vw, vx) = (&self.nodes[w.0].value, &self.nodes[x.0].value);
                    let mut gw = vec![T::zero(); lens[w.0]];
                    let mut gx = vec![T::zero(); lens[x.0]];
                    for t in 0..shape.len_out() {
                        for o in 0..shape.out_ch {
                            let go = g[t * shape.out_ch + o];
                            if go == T::zero() {
                                continue;
                            }
                            for c in 0..shape.in_ch {
                                let wbase = (o * shape.in_ch + c) * shape.kernel;
                                for k in 0..shape.kernel {
                                    let xi = (t + k * shape.dilation) * shape.in_ch + c;
                                    gw[wbase + k] += go * vx[xi];
                                    gx[xi] += go * vw[wbase + k];
                                }
                            }
                        }
                    }
                    add_into(accumulate(&mut adj[w.0], lens[w.0]), &gw);
                    add_into(accumulate(&mut adj[x.0], lens[x.0]), &gx);
                }
                Op::Tanh(a) => {
                    let ga = accumulate(&mut adj[a.0], lens[a.0]);
                    for ((d, &x), &y) in ga.iter_mut().zip(&g).zip(&node.value) {
                        *d += x * (T::one() - y * y);
                    }
                }
                Op::Exp(a) => {
                    let ga = accumulate(&mut adj[a.0], lens[a.0]);
                    for ((d, &x), &y) in ga.iter_mut().zip(&g).zip(&node.value) {
                        *d += x * y;
                    }
                }
                Op::Sigmoid(a) => {
                    let ga = accumulate(&mut adj[a.0], lens[a.0]);
                    for ((d, &x), &y) in ga.iter_mut().zip(&g).zip(&node.value) {
                        *d += x * y * (T::one() - y);
                    }
                }
                Op::LnFloor(a, floor) => {
                    let va = &self.nodes[a.0].value;
                    let ga = accumulate(&mut adj[a.0], lens[a.0]);
                    for ((d, &x), &av) in ga.iter_mut().zip(&g).zip(va) {
                        if av > *floor {
                            *d += x / av;
                        }
                    }
                }
                Op::Clamp(a, lo, hi) => {
                    let va = &self.nodes[a.0].value;
                    let ga = accumulate(&mut adj[a.0], lens[a.0]);
                    for ((d, &x), &av) in ga.iter_mut().zip(&g).zip(va) {
                        if av > *lo && av < *hi {
                            *d += x;
                        }
                    }
                }
                Op::Softmax(a) => {
                    let y = &node.value;
                    let dot: T = g.iter().zip(y).map(|(&x, &s)| x * s).sum();
                    let ga = accumulate(&mut adj[a.0], lens[a.0]);
                    for ((d, &x), &s) in ga.iter_mut().zip(&g).zip(y) {
                        *d += s * (x - dot);
                    }
                }
                Op::Square(a) => {
                    let va = &self.nodes[a.0].value;
                    let ga = accumulate(&mut adj[a.0], lens[a.0]);
                    let two = T::one() + T::one();
                    for ((d, &x), &av) in ga.iter_mut().zip(&g).zip(va) {
                        *d += x * two * av;
                    }
                }
                Op::SmoothL1(a) => {
                    let va = &self.nodes[a.0].value;
                    let ga = accumulate(&mut adj[a.0], lens[a.0]);
                    for ((d, &x), &av) in ga.iter_mut().zip(&g).zip(va) {
                        *d += x * smooth_l1_grad(av);
                    }
                }
                Op::PairNorm(a) => {
                    let va = &self.nodes[a.0].value;
                    let ga = accumulate(&mut adj[a.0], lens[a.0]);
                    for (j, (&x, &norm)) in g.iter().zip(&node.value).enumerate() {
                        if norm > T::zero() {
                            ga[2 * j] += x * va[2 * j] / norm;
                            ga[2 * j + 1] += x * va[2 * j + 1] / norm;
                        }
                    }
                }
                Op::Rotate2(a, cos, sin) => {
                    let ga = accumulate(&mut adj[a.0], lens[a.0]);
                    for (j, p) in g.chunks_exact(2).enumerate() {
                        // transpose of the rotation
                        ga[2 * j] += *cos * p[0] + *sin * p[1];
                        ga[2 * j + 1] += -*sin * p[0] + *cos * p[1];
                    }
                }
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let n = lens[p.0];
                        add_into(accumulate(&mut adj[p.0], n), &g[offset..offset + n]);
                        offset += n;
                    }
                }
                Op::Slice(a, start) => {
                    let ga = accumulate(&mut adj[a.0], lens[a.0]);
                    add_into(&mut ga[*start..*start + g.len()], &g);
                }
                Op::Sum(a) => {
                    let ga = accumulate(&mut adj[a.0], lens[a.0]);
                    ga.iter_mut().for_each(|d| *d += g[0]);
                }
                Op::MeanOf(parts) => {
                    let n = T::from_usize(parts.len()).expect("count fits scalar");
                    let share: Vec<T> = g.iter().map(|&x| x / n).collect();
                    for p in parts {
                        add_into(accumulate(&mut adj[p.0], lens[p.0]), &share);
                    }
                }
            }
            adj[i] = Some(g);
        }
        Gradients {
            adjoints: adj,
            lens,
        }
    }
}

fn add_into<T: Real>(dst: &mut [T], src: &[T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

pub fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

pub fn softmax<T: Real>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&l| (l - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

pub fn smooth_l1<T: Real>(e: T) -> T {
    let half = T::lit(0.5);
    if e.abs() < T::one() {
        half * e * e
    } else {
        e.abs() - half
    }
}

fn smooth_l1_grad<T: Real>(e: T) -> T {
    if e.abs() < T::one() {
        e
    } else {
        e.signum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn numeric_grad(f: impl Fn(&[f64]) -> f64, at: &[f64]) -> Vec<f64> {
        let h = 1e-6;
        (0..at.len())
            .map(|i| {
                let mut p = at.to_vec();
                let mut m = at.to_vec();
                p[i] += h;
                m[i] -= h;
                (f(&p) - f(&m)) / (2.0 * h)
            })
            .collect()
    }

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol * (1.0 + y.abs()), "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn matvec_and_tanh_match_finite_differences() {
        let w0 = vec![0.3, -0.2, 0.5, 0.1, 0.7, -0.4];
        let x0 = vec![0.9, -1.1, 0.25];
        let run = |w: &[f64], x: &[f64]| {
            let mut t = Tape::new();
            let wv = t.leaf(w.to_vec());
            let xv = t.leaf(x.to_vec());
            let y = t.matvec(wv, xv, 2, 3);
            let y = t.tanh(y);
            let s = t.sum(y);
            (t, wv, xv, s)
        };
        let (t, wv, xv, s) = run(&w0, &x0);
        let g = t.backward(s);
        let fw = |w: &[f64]| {
            let (t, _, _, s) = run(w, &x0);
            t.scalar(s)
        };
        let fx = |x: &[f64]| {
            let (t, _, _, s) = run(&w0, x);
            t.scalar(s)
        };
        assert_close(&g.wrt(wv), &numeric_grad(fw, &w0), 1e-7);
        assert_close(&g.wrt(xv), &numeric_grad(fx, &x0), 1e-7);
    }

    #[test]
    fn conv1d_gradients() {
        let shape = ConvShape {
            len_in: 6,
            in_ch: 2,
            out_ch: 3,
            kernel: 2,
            dilation: 2,
        };
        let w0: Vec<f64> = (0..shape.weight_len()).map(|i| (i as f64 * 0.37).sin()).collect();
        let x0: Vec<f64> = (0..12).map(|i| (i as f64 * 0.91).cos()).collect();
        let run = |w: &[f64], x: &[f64]| {
            let mut t = Tape::new();
            let wv = t.leaf(w.to_vec());
            let xv = t.leaf(x.to_vec());
            let y = t.conv1d(wv, xv, shape);
            let y = t.square(y);
            let s = t.sum(y);
            (t, wv, xv, s)
        };
        let (t, wv, xv, s) = run(&w0, &x0);
        let g = t.backward(s);
        let fw = |w: &[f64]| {
            let (t, _, _, s) = run(w, &x0);
            t.scalar(s)
        };
        let fx = |x: &[f64]| {
            let (t, _, _, s) = run(&w0, x);
            t.scalar(s)
        };
        assert_close(&g.wrt(wv), &numeric_grad(fw, &w0), 1e-6);
        assert_close(&g.wrt(xv), &numeric_grad(fx, &x0), 1e-6);
    }

    #[test]
    fn waypoint_ops_gradients() {
        let a0 = vec![1.0, 2.0, -0.5, 0.3, 2.5, -1.5];
        let b0 = vec![0.2, -0.7];
        let (c, s) = (0.6f64, 0.8f64);
        let run = |a: &[f64], b: &[f64]| {
            let mut t = Tape::new();
            let av = t.leaf(a.to_vec());
            let bv = t.leaf(b.to_vec());
            let y = t.add_tiled(av, bv);
            let y = t.rotate2(y, c, s);
            let n = t.pair_norm(y);
            let sm = t.softmax(n);
            let l1 = t.smooth_l1(y);
            let l = t.ln_floor(sm, 1e-7);
            let parts = t.concat(&[l, l1]);
            let out = t.mean(parts);
            (t, av, bv, out)
        };
        let (t, av, bv, out) = run(&a0, &b0);
        let g = t.backward(out);
        let fa = |a: &[f64]| {
            let (t, _, _, o) = run(a, &b0);
            t.scalar(o)
        };
        let fb = |b: &[f64]| {
            let (t, _, _, o) = run(&a0, b);
            t.scalar(o)
        };
        assert_close(&g.wrt(av), &numeric_grad(fa, &a0), 1e-6);
        assert_close(&g.wrt(bv), &numeric_grad(fb, &b0), 1e-6);
    }

    #[test]
    fn clamp_blocks_gradient_when_saturated() {
        let mut t = Tape::<f64>::new();
        let a = t.leaf(vec![-2.0, 0.5, 3.0]);
        let c = t.clamp(a, 0.0, 1.0);
        let s = t.sum(c);
        assert_eq!(t.backward(s).wrt(a), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn unused_leaf_has_zero_gradient() {
        let mut t = Tape::<f32>::new();
        let a = t.leaf(vec![1.0, 2.0]);
        let b = t.leaf(vec![3.0]);
        let s = t.sum(a);
        let g = t.backward(s);
        assert!(g.get(b).is_none());
        assert_eq!(g.wrt(b), vec![0.0]);
    }

    #[test]
    fn mean_of_and_slice() {
        let mut t = Tape::<f64>::new();
        let a = t.leaf(vec![1.0, 2.0, 3.0]);
        let b = t.leaf(vec![3.0, 4.0, 5.0]);
        let m = t.mean_of(&[a, b]);
        assert_eq!(t.value(m), &[2.0, 3.0, 4.0]);
        let s = t.slice(m, 1, 2);
        let out = t.sum(s);
        let g = t.backward(out);
        assert_eq!(g.wrt(a), vec![0.0, 0.5, 0.5]);
    }
}
