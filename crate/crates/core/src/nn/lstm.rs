use ndarray::{Array2, Array3, ArrayView2, ArrayView3, Axis};

use super::activation::sigmoid;
use super::{join, Param1, Param2, ParamKind, ParamMut, ParamRef, Parameters};
use crate::error::{Error, Result};

/// One LSTM cell with separate per-gate matrices.
///
/// ```text
/// i = sigmoid(W_ix x + W_ih h + b_i)
/// f = sigmoid(W_fx x + W_fh h + b_f)
/// o = sigmoid(W_ox x + W_oh h + b_o)
/// g = tanh(W_cx x + W_ch h + b_c)
/// c' = f * c + i * g
/// h' = o * tanh(c')
/// ```
///
/// Input matrices are hidden x features, recurrent ones hidden x hidden.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCellParams {
    pub w_ix: Param2,
    pub w_fx: Param2,
    pub w_ox: Param2,
    pub w_cx: Param2,
    pub w_ih: Param2,
    pub w_fh: Param2,
    pub w_oh: Param2,
    pub w_ch: Param2,
    pub b_i: Param1,
    pub b_f: Param1,
    pub b_o: Param1,
    pub b_c: Param1,
}

/// Values saved by the forward pass of one step, batch-major.
#[derive(Debug, Clone)]
pub struct LstmStepCache {
    pub x: Array2<f64>,
    pub h_prev: Array2<f64>,
    pub c_prev: Array2<f64>,
    pub i: Array2<f64>,
    pub f: Array2<f64>,
    pub o: Array2<f64>,
    pub g: Array2<f64>,
    pub c: Array2<f64>,
    pub tanh_c: Array2<f64>,
}

#[derive(Debug, Clone)]
pub struct LstmSequenceCache {
    pub steps: Vec<LstmStepCache>,
}

impl LstmSequenceCache {
    pub fn h_last(&self) -> Array2<f64> {
        let last = self.steps.last().expect("sequence has at least one step");
        &last.o * &last.tanh_c
    }

    pub fn c_last(&self) -> Array2<f64> {
        self.steps
            .last()
            .expect("sequence has at least one step")
            .c
            .clone()
    }
}

impl LstmCellParams {
    pub fn new(features: usize, hidden: usize) -> Self {
        let wx = || Param2::zeros((hidden, features));
        let wh = || Param2::zeros((hidden, hidden));
        let b = || Param1::zeros(hidden);
        Self {
            w_ix: wx(),
            w_fx: wx(),
            w_ox: wx(),
            w_cx: wx(),
            w_ih: wh(),
            w_fh: wh(),
            w_oh: wh(),
            w_ch: wh(),
            b_i: b(),
            b_f: b(),
            b_o: b(),
            b_c: b(),
        }
    }

    pub fn features(&self) -> usize {
        self.w_ix.value.ncols()
    }

    pub fn hidden(&self) -> usize {
        self.w_ix.value.nrows()
    }

    fn check(&self, x: &ArrayView2<f64>, h: &ArrayView2<f64>, c: &ArrayView2<f64>) -> Result<()> {
        let b = x.nrows();
        if x.ncols() != self.features() {
            return Err(Error::ShapeMismatch(format!(
                "lstm expects {} features, got {}",
                self.features(),
                x.ncols()
            )));
        }
        for (name, s) in [("h", h), ("c", c)] {
            if s.dim() != (b, self.hidden()) {
                return Err(Error::ShapeMismatch(format!(
                    "lstm {name} state {:?}, expected {:?}",
                    s.dim(),
                    (b, self.hidden())
                )));
            }
        }
        Ok(())
    }

    fn gate(
        x: &ArrayView2<f64>,
        h: &ArrayView2<f64>,
        wx: &Param2,
        wh: &Param2,
        b: &Param1,
    ) -> Array2<f64> {
        x.dot(&wx.value.t()) + h.dot(&wh.value.t()) + &b.value
    }

    /// One step over a batch: `x` is batch x features, states batch x hidden.
    pub fn step(
        &self,
        x: ArrayView2<f64>,
        h_prev: ArrayView2<f64>,
        c_prev: ArrayView2<f64>,
    ) -> Result<LstmStepCache> {
        self.check(&x, &h_prev, &c_prev)?;
        let i = Self::gate(&x, &h_prev, &self.w_ix, &self.w_ih, &self.b_i).mapv_into(sigmoid);
        let f = Self::gate(&x, &h_prev, &self.w_fx, &self.w_fh, &self.b_f).mapv_into(sigmoid);
        let o = Self::gate(&x, &h_prev, &self.w_ox, &self.w_oh, &self.b_o).mapv_into(sigmoid);
        let g = Self::gate(&x, &h_prev, &self.w_cx, &self.w_ch, &self.b_c).mapv_into(f64::tanh);
        let c = &f * &c_prev + &i * &g;
        let tanh_c = c.mapv(f64::tanh);
        Ok(LstmStepCache {
            x: x.to_owned(),
            h_prev: h_prev.to_owned(),
            c_prev: c_prev.to_owned(),
            i,
            f,
            o,
            g,
            c,
            tanh_c,
        })
    }

    /// Backward through one step given gradients w.r.t. its `h` and `c`
    /// outputs. Accumulates parameter gradients and returns
    /// `(dx, dh_prev, dc_prev)`.
    pub fn step_backward(
        &mut self,
        cache: &LstmStepCache,
        dh: ArrayView2<f64>,
        dc: ArrayView2<f64>,
    ) -> (Array2<f64>, Array2<f64>, Array2<f64>) {
        let one = |a: &Array2<f64>| a.mapv(|v| v * (1.0 - v));
        let dc_total = &dc + &(&dh * &cache.o * &cache.tanh_c.mapv(|t| 1.0 - t * t));
        let da_o = &dh * &cache.tanh_c * one(&cache.o);
        let da_i = &dc_total * &cache.g * one(&cache.i);
        let da_f = &dc_total * &cache.c_prev * one(&cache.f);
        let da_g = &dc_total * &cache.i * &cache.g.mapv(|t| 1.0 - t * t);
        let dc_prev = &dc_total * &cache.f;

        let mut dx = Array2::zeros(cache.x.raw_dim());
        let mut dh_prev = Array2::zeros(cache.h_prev.raw_dim());
        let gates = [
            (&da_i, &mut self.w_ix, &mut self.w_ih, &mut self.b_i),
            (&da_f, &mut self.w_fx, &mut self.w_fh, &mut self.b_f),
            (&da_o, &mut self.w_ox, &mut self.w_oh, &mut self.b_o),
            (&da_g, &mut self.w_cx, &mut self.w_ch, &mut self.b_c),
        ];
        for (da, wx, wh, b) in gates {
            wx.grad += &da.t().dot(&cache.x);
            wh.grad += &da.t().dot(&cache.h_prev);
            b.grad += &da.sum_axis(Axis(0));
            dx += &da.dot(&wx.value);
            dh_prev += &da.dot(&wh.value);
        }
        (dx, dh_prev, dc_prev)
    }

    fn entries(&self) -> [(&'static str, Entry<'_>); 12] {
        [
            ("W_ix", Entry::M(&self.w_ix)),
            ("W_fx", Entry::M(&self.w_fx)),
            ("W_ox", Entry::M(&self.w_ox)),
            ("W_cx", Entry::M(&self.w_cx)),
            ("W_ih", Entry::M(&self.w_ih)),
            ("W_fh", Entry::M(&self.w_fh)),
            ("W_oh", Entry::M(&self.w_oh)),
            ("W_ch", Entry::M(&self.w_ch)),
            ("b_i", Entry::V(&self.b_i)),
            ("b_f", Entry::V(&self.b_f)),
            ("b_o", Entry::V(&self.b_o)),
            ("b_c", Entry::V(&self.b_c)),
        ]
    }
}

enum Entry<'a> {
    M(&'a Param2),
    V(&'a Param1),
}

fn matrix_kind(p: &Param2) -> ParamKind {
    // weights map columns (inputs) to rows (hidden units)
    let (rows, cols) = p.value.dim();
    ParamKind::Weight {
        fan_in: cols,
        fan_out: rows,
    }
}

impl Parameters for LstmCellParams {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(ParamRef<'_>)) {
        for (name, e) in self.entries() {
            match e {
                Entry::M(p) => f(p.view(join(prefix, name), matrix_kind(p))),
                Entry::V(p) => f(p.view(join(prefix, name), ParamKind::Bias)),
            }
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(ParamMut<'_>)) {
        let matrices = [
            ("W_ix", &mut self.w_ix),
            ("W_fx", &mut self.w_fx),
            ("W_ox", &mut self.w_ox),
            ("W_cx", &mut self.w_cx),
            ("W_ih", &mut self.w_ih),
            ("W_fh", &mut self.w_fh),
            ("W_oh", &mut self.w_oh),
            ("W_ch", &mut self.w_ch),
        ];
        for (name, p) in matrices {
            let kind = matrix_kind(p);
            f(p.view_mut(join(prefix, name), kind));
        }
        for (name, p) in [
            ("b_i", &mut self.b_i),
            ("b_f", &mut self.b_f),
            ("b_o", &mut self.b_o),
            ("b_c", &mut self.b_c),
        ] {
            f(p.view_mut(join(prefix, name), ParamKind::Bias));
        }
    }
}

/// Single step on one example: vectors in, `(h_t, c_t, cache)` out.
pub fn lstm_cell_forward(
    x_t: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    params: &LstmCellParams,
) -> Result<(Vec<f64>, Vec<f64>, LstmStepCache)> {
    fn row(v: &[f64]) -> Result<ArrayView2<'_, f64>> {
        ArrayView2::from_shape((1, v.len()), v).map_err(|e| Error::ShapeMismatch(e.to_string()))
    }
    let cache = params.step(row(x_t)?, row(h_prev)?, row(c_prev)?)?;
    let h = (&cache.o * &cache.tanh_c).into_raw_vec_and_offset().0;
    let c = cache.c.clone().into_raw_vec_and_offset().0;
    Ok((h, c, cache))
}

/// Unroll over `sequence` (seq x batch x features) from `(h0, c0)`.
pub fn lstm_sequence_forward(
    sequence: ArrayView3<f64>,
    h0: ArrayView2<f64>,
    c0: ArrayView2<f64>,
    params: &LstmCellParams,
) -> Result<LstmSequenceCache> {
    let (t_n, _, _) = sequence.dim();
    if t_n == 0 {
        return Err(Error::ShapeMismatch("lstm sequence is empty".into()));
    }
    let mut steps: Vec<LstmStepCache> = Vec::with_capacity(t_n);
    for t in 0..t_n {
        let x = sequence.index_axis(Axis(0), t);
        let step = match steps.last() {
            None => params.step(x, h0, c0)?,
            Some(prev) => {
                let h = &prev.o * &prev.tanh_c;
                params.step(x, h.view(), prev.c.view())?
            }
        };
        steps.push(step);
    }
    Ok(LstmSequenceCache { steps })
}

/// Backpropagate through time from a gradient on `h_T`. Parameter gradients
/// accumulate into `params`; returns the gradient w.r.t. the input sequence.
pub fn lstm_sequence_backward(
    cache: &LstmSequenceCache,
    dh_last: ArrayView2<f64>,
    params: &mut LstmCellParams,
) -> Result<Array3<f64>> {
    let last = cache
        .steps
        .last()
        .ok_or_else(|| Error::ShapeMismatch("empty lstm cache".into()))?;
    if dh_last.dim() != last.c.dim() {
        return Err(Error::ShapeMismatch(format!(
            "lstm upstream gradient {:?}, expected {:?}",
            dh_last.dim(),
            last.c.dim()
        )));
    }
    let (b, f) = last.x.dim();
    let mut dx_seq = Array3::zeros((cache.steps.len(), b, f));
    let mut dh = dh_last.to_owned();
    let mut dc = Array2::zeros(last.c.raw_dim());
    for (t, step) in cache.steps.iter().enumerate().rev() {
        let (dx, dh_prev, dc_prev) = params.step_backward(step, dh.view(), dc.view());
        dx_seq.index_axis_mut(Axis(0), t).assign(&dx);
        dh = dh_prev;
        dc = dc_prev;
    }
    Ok(dx_seq)
}
