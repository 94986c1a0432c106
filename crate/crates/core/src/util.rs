/// Sum that does not depend on the order of `values`: sort, then compensated sum.
pub(crate) fn canonical_sum(values: &mut [f64]) -> f64 {
    values.sort_unstable_by(f64::total_cmp);
    neumaier_sum(values.iter().copied())
}

pub(crate) fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) const UNIT_TOL: f64 = 1e-10;

pub(crate) fn check_unit(theta: &[f64]) -> crate::Result<()> {
    let n = norm(theta);
    if (n - 1.0).abs() > UNIT_TOL || !n.is_finite() {
        return Err(crate::Error::NonUnitDirection { norm: n });
    }
    Ok(())
}
