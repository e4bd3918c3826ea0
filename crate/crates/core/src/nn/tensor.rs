use serde::{Deserialize, Serialize};

/// Dense row-major array of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self { shape: shape.to_vec(), data: vec![0.0; n] }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Self {
        assert_eq!(shape.iter().product::<usize>(), data.len(), "shape/data length mismatch");
        Self { shape: shape.to_vec(), data }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    /// Row `r` of a 2-D tensor.
    pub fn row(&self, r: usize) -> &[f64] {
        let cols = self.shape[1];
        &self.data[r * cols..(r + 1) * cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        let cols = self.shape[1];
        &mut self.data[r * cols..(r + 1) * cols]
    }
}

/// `out = W x + b` for `W` of shape `[out, in]`.
pub(crate) fn affine(w: &Tensor, b: &Tensor, x: &[f64], out: &mut Vec<f64>) {
    let rows = w.shape[0];
    let cols = w.shape[1];
    debug_assert_eq!(cols, x.len());
    out.clear();
    out.extend((0..rows).map(|r| {
        let row = &w.data[r * cols..(r + 1) * cols];
        b.data[r] + row.iter().zip(x).map(|(a, c)| a * c).sum::<f64>()
    }));
}

/// Accumulates `gW += dz x^T`, `gb += dz` and writes `dx = W^T dz`.
pub(crate) fn affine_backward(
    w: &Tensor,
    x: &[f64],
    dz: &[f64],
    gw: &mut Tensor,
    gb: &mut Tensor,
    dx: Option<&mut Vec<f64>>,
) {
    let cols = w.shape[1];
    for (r, &d) in dz.iter().enumerate() {
        if d == 0.0 {
            continue;
        }
        gb.data[r] += d;
        let grow = &mut gw.data[r * cols..(r + 1) * cols];
        for (g, xv) in grow.iter_mut().zip(x) {
            *g += d * xv;
        }
    }
    if let Some(dx) = dx {
        dx.clear();
        dx.resize(cols, 0.0);
        for (r, &d) in dz.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            let row = &w.data[r * cols..(r + 1) * cols];
            for (o, wv) in dx.iter_mut().zip(row) {
                *o += d * wv;
            }
        }
    }
}
