use super::{Float, Tensor, Var};

fn permute_raw<T: Float>(x: &Tensor<T>, perm: &[usize]) -> Tensor<T> {
    let shape = x.shape();
    let rank = shape.len();
    assert_eq!(perm.len(), rank, "permute rank mismatch");
    let mut in_strides = vec![1usize; rank];
    for d in (0..rank.saturating_sub(1)).rev() {
        in_strides[d] = in_strides[d + 1] * shape[d + 1];
    }
    let out_shape: Vec<usize> = perm.iter().map(|&p| shape[p]).collect();
    let src_strides: Vec<usize> = perm.iter().map(|&p| in_strides[p]).collect();
    let n = x.numel();
    let mut out = Vec::with_capacity(n);
    let mut idx = vec![0usize; rank];
    let mut off = 0usize;
    let data = x.data();
    for _ in 0..n {
        out.push(data[off]);
        for d in (0..rank).rev() {
            idx[d] += 1;
            off += src_strides[d];
            if idx[d] < out_shape[d] {
                break;
            }
            off -= src_strides[d] * out_shape[d];
            idx[d] = 0;
        }
    }
    Tensor::new(&out_shape, out)
}

fn batched_matmul<T: Float>(
    a: &Tensor<T>,
    b: &Tensor<T>,
    trans_a: bool,
    trans_b: bool,
) -> Tensor<T> {
    let (sa, sb) = (a.shape(), b.shape());
    assert!(sa.len() == 3 && sb.len() == 3 && sa[0] == sb[0], "bmm expects [B,M,K]x[B,K,N]");
    let batch = sa[0];
    let (m, ka) = if trans_a { (sa[2], sa[1]) } else { (sa[1], sa[2]) };
    let (kb, n) = if trans_b { (sb[2], sb[1]) } else { (sb[1], sb[2]) };
    assert_eq!(ka, kb, "bmm inner dimension mismatch");
    let mut out = vec![T::zero(); batch * m * n];
    let (astride, bstride) = (sa[1] * sa[2], sb[1] * sb[2]);
    let (rsa, csa) = if trans_a { (1, sa[2] as isize) } else { (sa[2] as isize, 1) };
    let (rsb, csb) = if trans_b { (1, sb[2] as isize) } else { (sb[2] as isize, 1) };
    for i in 0..batch {
        unsafe {
            T::gemm(
                m,
                ka,
                n,
                T::one(),
                a.data()[i * astride..].as_ptr(),
                rsa,
                csa,
                b.data()[i * bstride..].as_ptr(),
                rsb,
                csb,
                T::zero(),
                out[i * m * n..].as_mut_ptr(),
                n as isize,
                1,
            );
        }
    }
    Tensor::new(&[batch, m, n], out)
}

impl<'t, T: Float> Var<'t, T> {
    pub fn reshape(self, shape: &[usize]) -> Var<'t, T> {
        let old = self.shape();
        let out = (*self.value()).clone().reshape(shape);
        self.tape
            .push(out, &[self], move |g| vec![Some(g.clone().reshape(&old))])
    }

    /// Axis permutation: output axis `i` is input axis `perm[i]`.
    pub fn permute(self, perm: &[usize]) -> Var<'t, T> {
        let out = permute_raw(&self.value(), perm);
        let mut inv = vec![0; perm.len()];
        for (i, &p) in perm.iter().enumerate() {
            inv[p] = i;
        }
        self.tape
            .push(out, &[self], move |g| vec![Some(permute_raw(g, &inv))])
    }

    pub fn narrow_channels(self, start: usize, len: usize) -> Var<'t, T> {
        let x = self.value();
        let (n, c, h, w) = x.dims4();
        if start == 0 && len == c {
            return self;
        }
        let out = x.narrow_channels(start, len);
        self.tape.push(out, &[self], move |g| {
            let mut gx = Tensor::zeros(&[n, c, h, w]);
            let plane = h * w;
            for b in 0..n {
                let dst = (b * c + start) * plane;
                let src = b * len * plane;
                gx.data_mut()[dst..dst + len * plane]
                    .copy_from_slice(&g.data()[src..src + len * plane]);
            }
            vec![Some(gx)]
        })
    }

    /// Batched matmul `[B,M,K] x [B,K,N] -> [B,M,N]`.
    pub fn bmm(self, other: Var<'t, T>) -> Var<'t, T> {
        let (a, b) = (self.value(), other.value());
        let out = batched_matmul(&a, &b, false, false);
        let (ra, rb) = (self.requires_grad(), other.requires_grad());
        self.tape.push(out, &[self, other], move |g| {
            vec![
                ra.then(|| batched_matmul(g, &b, false, true)),
                rb.then(|| batched_matmul(&a, g, true, false)),
            ]
        })
    }

    /// Softmax over the last axis.
    pub fn softmax_last(self) -> Var<'t, T> {
        let x = self.value();
        let last = *x.shape().last().expect("softmax of a scalar");
        let mut y = (*x).clone();
        for row in y.data_mut().chunks_mut(last) {
            let m = row.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
            let mut s = T::zero();
            for v in row.iter_mut() {
                *v = (*v - m).exp();
                s += *v;
            }
            for v in row.iter_mut() {
                *v /= s;
            }
        }
        let y = std::rc::Rc::new(y);
        let yc = std::rc::Rc::clone(&y);
        self.tape.push(y, &[self], move |g| {
            let mut gx = g.clone();
            for (grow, yrow) in gx.data_mut().chunks_mut(last).zip(yc.data().chunks(last)) {
                let dot = grow
                    .iter()
                    .zip(yrow)
                    .fold(T::zero(), |a, (&gv, &yv)| a + gv * yv);
                for (gv, &yv) in grow.iter_mut().zip(yrow) {
                    *gv = yv * (*gv - dot);
                }
            }
            vec![Some(gx)]
        })
    }
}

impl<T: Float> super::Tape<T> {
    /// Concatenate NCHW vars along the channel axis.
    pub fn cat_channels<'t>(&'t self, parts: &[Var<'t, T>]) -> Var<'t, T> {
        if parts.len() == 1 {
            return parts[0];
        }
        let values: Vec<_> = parts.iter().map(|p| p.value()).collect();
        let refs: Vec<&Tensor<T>> = values.iter().map(|v| v.as_ref()).collect();
        let out = Tensor::cat_channels(&refs);
        let widths: Vec<usize> = values.iter().map(|v| v.shape()[1]).collect();
        self.push(out, parts, move |g| {
            let mut start = 0;
            widths
                .iter()
                .map(|&w| {
                    let s = g.narrow_channels(start, w);
                    start += w;
                    Some(s)
                })
                .collect()
        })
    }
}
