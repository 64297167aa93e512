use fracdiff::specfun::{gamma_fn, MLParams, MittagLeffler};

fn rows(name: &str) -> Vec<Vec<f64>> {
    let path = format!("{}/tests/data/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.trim().parse().unwrap()).collect())
        .collect()
}

#[test]
fn gamma_against_oracle() {
    for r in rows("gamma_oracle.csv") {
        let g = gamma_fn(r[0]).unwrap();
        let rel = ((g - r[1]) / r[1]).abs();
        assert!(rel < 1e-13, "x = {}: {g} vs {} (rel {rel:e})", r[0], r[1]);
    }
}

#[test]
fn mittag_leffler_against_oracle() {
    let mut worst: f64 = 0.0;
    for r in rows("ml_oracle.csv") {
        let (a, b, z, want) = (r[0], r[1], r[2], r[3]);
        let ml = MittagLeffler::new(MLParams::new(a, b).unwrap());
        let (v, regime) = ml.eval_with_regime(num_complex::Complex64::new(z, 0.0)).unwrap();
        let err = (v.re - want).abs() / want.abs().max(1e-300);
        let abs = (v.re - want).abs();
        worst = worst.max(err.min(abs / 1e-300));
        assert!(
            err < 1e-10 || abs < 1e-14,
            "E({a},{b})({z}) = {} via {regime}, want {want} (rel {err:e})",
            v.re
        );
    }
    eprintln!("worst {worst:e}");
}
