use std::collections::HashMap;

/// Subtracts from every value the mean of all values sharing its year.
/// This is the within transformation for time fixed effects.
pub fn demean_by_year(values: &[f64], years: &[i32]) -> Vec<f64> {
    assert_eq!(values.len(), years.len(), "values and years must align");
    let mut sums: HashMap<i32, (f64, usize)> = HashMap::new();
    for (v, y) in values.iter().zip(years) {
        let e = sums.entry(*y).or_insert((0.0, 0));
        e.0 += v;
        e.1 += 1;
    }
    let first: Vec<f64> = values
        .iter()
        .zip(years)
        .map(|(v, y)| {
            let (s, c) = sums[y];
            v - s / c as f64
        })
        .collect();

    // second pass removes the rounding residue of the first
    let mut resid: HashMap<i32, (f64, usize)> = HashMap::new();
    for (v, y) in first.iter().zip(years) {
        let e = resid.entry(*y).or_insert((0.0, 0));
        e.0 += v;
        e.1 += 1;
    }
    first
        .iter()
        .zip(years)
        .map(|(v, y)| {
            let (s, c) = resid[y];
            v - s / c as f64
        })
        .collect()
}
