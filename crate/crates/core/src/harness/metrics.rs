use std::fmt::Write as _;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::nav::NavState;
use crate::quat::quat_diff;

/// Truth-minus-estimate errors at matched timestamps.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ErrorSeries {
    pub t: Vec<i64>,
    /// Attitude error `quat_diff(q, q̂)` (rad).
    pub r: Vec<Vector3<f64>>,
    pub p: Vec<Vector3<f64>>,
    pub v: Vec<Vector3<f64>>,
    /// Estimates with no truth sample within tolerance.
    pub unmatched: usize,
}

impl ErrorSeries {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("#t,rex,rey,rez,pex,pey,pez,vex,vey,vez\n");
        for i in 0..self.len() {
            let (r, p, v) = (self.r[i], self.p[i], self.v[i]);
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{}",
                self.t[i], r.x, r.y, r.z, p.x, p.y, p.z, v.x, v.y, v.z
            );
        }
        s
    }
}

/// Pairs every estimate with the nearest truth sample no further than
/// `tolerance_ns` away. Both inputs must be sorted by time.
pub fn compute_errors(
    estimates: &[(i64, NavState)],
    truth: &[(i64, NavState)],
    tolerance_ns: i64,
) -> ErrorSeries {
    let mut out = ErrorSeries::default();
    for (t, est) in estimates {
        let idx = truth.partition_point(|(tt, _)| tt < t);
        let nearest = [idx.checked_sub(1), Some(idx)]
            .into_iter()
            .flatten()
            .filter_map(|i| truth.get(i))
            .min_by_key(|(tt, _)| (tt - t).abs());
        match nearest {
            Some((tt, x)) if (tt - t).abs() <= tolerance_ns => {
                out.t.push(*t);
                out.r.push(quat_diff(&x.q, &est.q).0);
                out.p.push(x.p - est.p);
                out.v.push(x.v - est.v);
            }
            _ => out.unmatched += 1,
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub loss: f64,
    pub mse_q: f64,
    pub mse_p: f64,
    pub mse_v: f64,
    pub transient_skip: usize,
    pub samples: usize,
}

impl LossReport {
    pub fn table_row(&self, label: &str) -> String {
        format!(
            "| {label} | {:.6} | {:.6e} | {:.6e} | {:.6e} | {} |",
            self.loss, self.mse_q, self.mse_p, self.mse_v, self.samples
        )
    }

    pub const TABLE_HEADER: &'static str =
        "| run | loss | mse_q (rad^2) | mse_p (m^2) | mse_v (m^2/s^2) | samples |";
}

fn mse(v: &[Vector3<f64>]) -> f64 {
    v.iter().map(|e| e.norm_squared()).sum::<f64>() / v.len() as f64
}

/// `w_q·mse_q + w_p·mse_p + w_v·mse_v` over the samples after `skip`, where
/// each MSE is the mean squared error norm.
pub fn compute_loss(
    e: &ErrorSeries,
    w_q: f64,
    w_p: f64,
    w_v: f64,
    skip: usize,
) -> Result<LossReport, HarnessError> {
    if e.len() <= skip {
        return Err(HarnessError::SeriesTooShort { len: e.len(), skip });
    }
    let (mse_q, mse_p, mse_v) = (mse(&e.r[skip..]), mse(&e.p[skip..]), mse(&e.v[skip..]));
    Ok(LossReport {
        loss: w_q * mse_q + w_p * mse_p + w_v * mse_v,
        mse_q,
        mse_p,
        mse_v,
        transient_skip: skip,
        samples: e.len() - skip,
    })
}
