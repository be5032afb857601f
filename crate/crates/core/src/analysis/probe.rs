use crate::error::{Error, Result};
use crate::optimizers::GradientBundle;
use crate::params::sum_squares;

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub t: u64,
    pub bundle: GradientBundle,
}

/// Gradient bundles captured at strictly increasing steps.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StabilityTrace {
    records: Vec<TraceRecord>,
}

impl StabilityTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, t: u64, bundle: GradientBundle) -> Result<()> {
        if let Some(last) = self.records.last() {
            if t <= last.t {
                return Err(Error::invalid("t", format!("trace steps must increase: {t} after {}", last.t)));
            }
            if bundle.g.len() != last.bundle.g.len() {
                return Err(Error::LengthMismatch { expected: last.bundle.g.len(), found: bundle.g.len() });
            }
        }
        self.records.push(TraceRecord { t, bundle });
        Ok(())
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Differences `‖x_t − x_{t+k}‖` at one step, raw and divided by the running
/// mean of `‖x_j‖` over every record up to step `t + k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeRow {
    pub t: u64,
    pub d_gs: f64,
    pub d_gh: f64,
    pub d_gv: f64,
    pub norm_d_gs: f64,
    pub norm_d_gh: f64,
    pub norm_d_gv: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityProbe {
    pub k: u64,
    pub rows: Vec<ProbeRow>,
}

impl StabilityProbe {
    fn mean(&self, f: impl Fn(&ProbeRow) -> f64) -> f64 {
        self.rows.iter().map(f).sum::<f64>() / self.rows.len() as f64
    }

    pub fn mean_norm_d_gs(&self) -> f64 {
        self.mean(|r| r.norm_d_gs)
    }

    pub fn mean_norm_d_gh(&self) -> f64 {
        self.mean(|r| r.norm_d_gh)
    }

    pub fn mean_norm_d_gv(&self) -> f64 {
        self.mean(|r| r.norm_d_gv)
    }
}

fn diff_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn ratio(d: f64, mean: f64) -> f64 {
    if mean == 0.0 {
        0.0
    } else {
        d / mean
    }
}

/// Compares each record with the one `k` steps later.
///
/// Fails on traces with no such pair, and on traces containing a record
/// whose plain gradient vanished.
pub fn gv_stability_probe(trace: &StabilityTrace, k: u64) -> Result<StabilityProbe> {
    let recs = trace.records();
    if k == 0 {
        return Err(Error::invalid("k", "must be at least 1"));
    }
    if recs.len() as u64 <= k {
        return Err(Error::TraceTooShort { len: recs.len(), k: k as usize });
    }
    if recs.iter().any(|r| r.bundle.degenerate) {
        return Err(Error::ZeroGradientTrace);
    }
    let norms = |f: fn(&GradientBundle) -> &[f64]| -> Vec<f64> {
        let mut acc = 0.0;
        recs.iter()
            .enumerate()
            .map(|(j, r)| {
                acc += sum_squares(f(&r.bundle)).sqrt();
                acc / (j + 1) as f64
            })
            .collect()
    };
    let mean_gs = norms(|b| &b.g_s);
    let mean_gh = norms(|b| &b.g_h);
    let mean_gv = norms(|b| &b.g_v);
    let mut rows = Vec::new();
    for (i, a) in recs.iter().enumerate() {
        let Ok(offset) = recs[i..].binary_search_by_key(&(a.t + k), |r| r.t) else {
            continue;
        };
        let j = i + offset;
        let b = &recs[j];
        let d_gs = diff_norm(&a.bundle.g_s, &b.bundle.g_s);
        let d_gh = diff_norm(&a.bundle.g_h, &b.bundle.g_h);
        let d_gv = diff_norm(&a.bundle.g_v, &b.bundle.g_v);
        rows.push(ProbeRow {
            t: a.t,
            d_gs,
            d_gh,
            d_gv,
            norm_d_gs: ratio(d_gs, mean_gs[j]),
            norm_d_gh: ratio(d_gh, mean_gh[j]),
            norm_d_gv: ratio(d_gv, mean_gv[j]),
        });
    }
    if rows.is_empty() {
        return Err(Error::TraceTooShort { len: recs.len(), k: k as usize });
    }
    Ok(StabilityProbe { k, rows })
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        // ties share the average of their 1-based ranks
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            out[o] = r;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch { expected: x.len(), found: y.len() });
    }
    if x.len() < 2 {
        return Err(Error::invalid("samples", "need at least two pairs"));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::invalid("samples", "rank correlation undefined for a constant series"));
    }
    Ok(sxy / (sxx * syy).sqrt())
}
