use conts::stats::{paired_test, t_cdf, two_sided_p};

fn gamma_half(n: u32) -> f64 {
    // Γ(n/2) for positive integers n
    match n {
        1 => std::f64::consts::PI.sqrt(),
        2 => 1.0,
        _ => (n as f64 / 2.0 - 1.0) * gamma_half(n - 2),
    }
}

fn t_pdf(x: f64, df: u32) -> f64 {
    let v = df as f64;
    gamma_half(df + 1) / ((v * std::f64::consts::PI).sqrt() * gamma_half(df)) * (1.0 + x * x / v).powf(-(v + 1.0) / 2.0)
}

/// `0.5 + ∫_0^t pdf` by composite Simpson.
fn t_cdf_oracle(t: f64, df: u32) -> f64 {
    let n = 20_000;
    let h = t / n as f64;
    let mut s = t_pdf(0.0, df) + t_pdf(t, df);
    for i in 1..n {
        s += t_pdf(i as f64 * h, df) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    0.5 + s * h / 3.0
}

#[test]
fn cdf_matches_numeric_integration() {
    for (t, df) in [(1.0, 1), (2.228, 10), (-1.5, 5), (0.5, 30), (3.0, 3)] {
        let got = t_cdf(t, df as f64).unwrap();
        let want = t_cdf_oracle(t, df);
        assert!((got - want).abs() < 1e-6, "t={t} df={df}: {got} vs {want}");
    }
    // table value: t = 2.228 is the two-sided 5% point at 10 df
    assert!((two_sided_p(2.228, 10.0).unwrap() - 0.05).abs() < 1e-3);
    assert!((t_cdf(1.0, 1.0).unwrap() - 0.75).abs() < 1e-12);
}

#[test]
fn identical_samples() {
    let a = [3.0, 5.0, 15.0, 7.0];
    let r = paired_test(&a, &a).unwrap();
    assert_eq!(r.mean_diff, 0.0);
    assert_eq!(r.p_value, 1.0);
}

#[test]
fn constant_shift() {
    let a: Vec<f64> = (0..10).map(|i| i as f64).collect();
    let b: Vec<f64> = a.iter().map(|x| x + 1.0).collect();
    let r = paired_test(&a, &b).unwrap();
    assert_eq!(r.n, 10);
    assert_eq!(r.mean_diff, -1.0);
    assert!(r.p_value < 1e-6);
}

#[test]
fn hand_computed_statistic() {
    // diffs 1, 2, 3: mean 2, sd 1, t = 2 / (1 / √3)
    let r = paired_test(&[2.0, 4.0, 6.0], &[1.0, 2.0, 3.0]).unwrap();
    assert!((r.t - 2.0 * 3f64.sqrt()).abs() < 1e-12);
    assert!((r.p_value - two_sided_p(r.t, 2.0).unwrap()).abs() < 1e-15);
    assert!(r.p_value > 0.05 && r.p_value < 0.1);
}

#[test]
fn degenerate_inputs() {
    assert!(paired_test(&[1.0], &[2.0]).is_err());
    assert!(paired_test(&[], &[]).is_err());
    assert!(paired_test(&[1.0, 2.0], &[1.0]).is_err());
    assert!(paired_test(&[1.0, f64::NAN], &[1.0, 2.0]).is_err());
}
