//! Significance tests on per-level success counts.

use vishsim::analytics::{
    chi_squared, logistic_fit, mann_whitney_u, spearman_rho, ContingencyTable,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let successes = [46u64, 35, 23, 20];
    let n = 60;
    let table = ContingencyTable::new(successes.iter().map(|&s| vec![s, n - s]).collect())?;
    let chi = chi_squared(&table)?;
    println!(
        "chi-squared = {:.2}, dof = {}, p = {:.2e}",
        chi.statistic, chi.dof, chi.p_value
    );

    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (level, &s) in successes.iter().enumerate() {
        for i in 0..n {
            x.push(level as f64 + 1.0);
            y.push(u8::from(i < s));
        }
    }
    let fit = logistic_fit(&x, &y)?;
    println!(
        "logistic: logit(p) = {:.3} {:+.3} * level, slope p = {:.2e}",
        fit.intercept, fit.slope, fit.slope_p
    );

    // Likert-style answers from two groups.
    let before = [2.0, 3.0, 3.0, 4.0, 2.0, 3.0, 1.0, 2.0];
    let after = [4.0, 4.0, 5.0, 3.0, 4.0, 5.0, 4.0, 3.0];
    let mw = mann_whitney_u(&before, &after)?;
    println!(
        "mann-whitney U = {}, z = {:.2}, p = {:.3}",
        mw.u, mw.z, mw.p_value
    );
    let rho = spearman_rho(&[1.0, 2.0, 3.0, 4.0], &[0.77, 0.58, 0.38, 0.33])?;
    println!("spearman rho between level and success rate = {rho:.2}");
    Ok(())
}
