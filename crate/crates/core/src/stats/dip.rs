use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;

use super::{check_finite, sorted, TestResult};
use crate::error::{Error, Result};

pub const DEFAULT_DIP_REPLICATES: usize = 10_000;
const MIN_REPLICATES: usize = 1000;

/// Hartigan's dip statistic of a sample.
///
/// Follows the classic greatest-convex-minorant / least-concave-majorant
/// construction, cycling the modal interval inward until it stabilises.
/// The result is never below `1/(2n)`.
pub fn dip_statistic(x: &[f64]) -> Result<f64> {
    check_finite("sample", x)?;
    if x.is_empty() {
        return Err(Error::contract("dip of an empty sample"));
    }
    Ok(dip_sorted(&sorted(x)))
}

/// Dip of sorted data. Indices below are 1-based to stay close to the
/// textbook description; slot 0 of every work array is unused.
fn dip_sorted(xs: &[f64]) -> f64 {
    let n = xs.len();
    let mut dip = 1.0f64;
    if n < 2 || xs[n - 1] == xs[0] {
        return dip / (2 * n) as f64;
    }
    let x = |i: usize| xs[i - 1];

    let mut mn = vec![0usize; n + 1];
    let mut mj = vec![0usize; n + 1];
    let mut gcm = vec![0usize; n + 2];
    let mut lcm = vec![0usize; n + 2];

    mn[1] = 1;
    for j in 2..=n {
        mn[j] = j - 1;
        loop {
            let mnj = mn[j];
            let mnmnj = mn[mnj];
            if mnj == 1
                || (x(j) - x(mnj)) * ((mnj - mnmnj) as f64) < (x(mnj) - x(mnmnj)) * ((j - mnj) as f64)
            {
                break;
            }
            mn[j] = mnmnj;
        }
    }
    mj[n] = n;
    for k in (1..n).rev() {
        mj[k] = k + 1;
        loop {
            let mjk = mj[k];
            let mjmjk = mj[mjk];
            if mjk == n
                || (x(k) - x(mjk)) * (mjk as f64 - mjmjk as f64)
                    < (x(mjk) - x(mjmjk)) * (k as f64 - mjk as f64)
            {
                break;
            }
            mj[k] = mjmjk;
        }
    }

    let (mut low, mut high) = (1usize, n);
    loop {
        gcm[1] = high;
        let mut i = 1;
        while gcm[i] > low {
            gcm[i + 1] = mn[gcm[i]];
            i += 1;
        }
        let l_gcm = i;
        let mut ig = l_gcm;
        let mut ix = ig - 1;

        lcm[1] = low;
        let mut i = 1;
        while lcm[i] < high {
            lcm[i + 1] = mj[lcm[i]];
            i += 1;
        }
        let l_lcm = i;
        let mut ih = l_lcm;
        let mut iv = 2;

        let mut d = 0.0f64;
        if l_gcm != 2 || l_lcm != 2 {
            loop {
                let gcmix = gcm[ix];
                let lcmiv = lcm[iv];
                if gcmix > lcmiv {
                    let gcmi1 = gcm[ix + 1];
                    let dx = (lcmiv as f64 - gcmi1 as f64 + 1.0)
                        - (x(lcmiv) - x(gcmi1)) * (gcmix - gcmi1) as f64 / (x(gcmix) - x(gcmi1));
                    iv += 1;
                    if dx >= d {
                        d = dx;
                        ig = ix + 1;
                        ih = iv - 1;
                    }
                } else {
                    let lcmiv1 = lcm[iv - 1];
                    let dx = (x(gcmix) - x(lcmiv1)) * (lcmiv - lcmiv1) as f64
                        / (x(lcmiv) - x(lcmiv1))
                        - (gcmix as f64 - lcmiv1 as f64 - 1.0);
                    ix -= 1;
                    if dx >= d {
                        d = dx;
                        ig = ix + 1;
                        ih = iv;
                    }
                }
                ix = ix.max(1);
                iv = iv.min(l_lcm);
                if gcm[ix] == lcm[iv] {
                    break;
                }
            }
        } else {
            d = 1.0;
        }
        if d < dip {
            break;
        }

        let mut dip_l = 0.0f64;
        for j in ig..l_gcm {
            let (jb, je) = (gcm[j + 1], gcm[j]);
            let mut max_t = 1.0f64;
            if je - jb > 1 && x(je) != x(jb) {
                let c = (je - jb) as f64 / (x(je) - x(jb));
                for jj in jb..=je {
                    let t = (jj - jb + 1) as f64 - (x(jj) - x(jb)) * c;
                    max_t = max_t.max(t);
                }
            }
            dip_l = dip_l.max(max_t);
        }
        let mut dip_u = 0.0f64;
        for j in ih..l_lcm {
            let (jb, je) = (lcm[j], lcm[j + 1]);
            let mut max_t = 1.0f64;
            if je - jb > 1 && x(je) != x(jb) {
                let c = (je - jb) as f64 / (x(je) - x(jb));
                for jj in jb..=je {
                    let t = (x(jj) - x(jb)) * c - (jj as f64 - jb as f64 - 1.0);
                    max_t = max_t.max(t);
                }
            }
            dip_u = dip_u.max(max_t);
        }
        dip = dip.max(dip_u.max(dip_l));

        if low == gcm[ig] && high == lcm[ih] {
            break;
        }
        low = gcm[ig];
        high = lcm[ih];
    }
    dip / (2 * n) as f64
}

type NullKey = (usize, usize, u64);

fn null_cache() -> &'static Mutex<HashMap<NullKey, Arc<Vec<f64>>>> {
    static CACHE: OnceLock<Mutex<HashMap<NullKey, Arc<Vec<f64>>>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

const NULL_CACHE_CAP: usize = 32;

/// Sorted dips of `n_boot` uniform samples of size `n`. Replicate `b` draws
/// from its own ChaCha stream so the table does not depend on thread count.
fn null_distribution(n: usize, n_boot: usize, seed: u64) -> Arc<Vec<f64>> {
    let key = (n, n_boot, seed);
    if let Some(hit) = null_cache().lock().expect("dip cache poisoned").get(&key) {
        return hit.clone();
    }
    let mut dips: Vec<f64> = (0..n_boot)
        .into_par_iter()
        .map_init(
            || vec![0.0f64; n],
            |buf, b| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(b as u64);
                sorted_uniforms(&mut rng, buf);
                dip_sorted(buf)
            },
        )
        .collect();
    dips.sort_by(f64::total_cmp);
    let table = Arc::new(dips);
    let mut cache = null_cache().lock().expect("dip cache poisoned");
    if cache.len() >= NULL_CACHE_CAP {
        cache.clear();
    }
    cache.insert(key, table.clone());
    table
}

/// Fills `out` with sorted U(0,1) order statistics via normalised
/// exponential spacings, avoiding a sort.
fn sorted_uniforms(rng: &mut impl Rng, out: &mut [f64]) {
    let mut acc = 0.0;
    for v in out.iter_mut() {
        acc += rng.sample::<f64, _>(Exp1);
        *v = acc;
    }
    let total = acc + rng.sample::<f64, _>(Exp1);
    for v in out.iter_mut() {
        *v /= total;
    }
}

/// Hartigan's dip test of unimodality with a Monte Carlo p value against
/// uniform samples of the same size:
/// `p = (1 + #{null dip ≥ observed}) / (n_boot + 1)`.
pub fn hartigan_dip(x: &[f64], n_boot: usize, seed: u64) -> Result<TestResult> {
    if x.len() < 4 {
        return Err(Error::contract(format!(
            "dip test needs at least 4 values, got {}",
            x.len()
        )));
    }
    if n_boot < MIN_REPLICATES {
        return Err(Error::contract(format!(
            "dip test needs at least {MIN_REPLICATES} replicates, got {n_boot}"
        )));
    }
    let dip = dip_statistic(x)?;
    let null = null_distribution(x.len(), n_boot, seed);
    let below = null.partition_point(|d| *d < dip - 1e-12);
    let exceed = null.len() - below;
    let p = (1 + exceed) as f64 / (n_boot + 1) as f64;
    Ok(TestResult::new("hartigan_dip", dip, p, vec![x.len()])
        .param("n_boot", n_boot)
        .param("seed", seed))
}
