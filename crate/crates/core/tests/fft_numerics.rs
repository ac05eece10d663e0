use emu_core::kernel::dsp::{dft_naive, fft_radix2, idft_naive, ifft};
use emu_core::rng::SeededRng;
use num_complex::Complex64;

fn signal(rng: &mut SeededRng, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|_| Complex64::new(rng.unit() * 2.0 - 1.0, rng.unit() * 2.0 - 1.0))
        .collect()
}

fn max_err(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

#[test]
fn radix2_matches_naive_dft_up_to_4096() {
    let mut rng = SeededRng::new(42);
    for log_n in 1..=12 {
        let n = 1usize << log_n;
        let x = signal(&mut rng, n);
        let mut f = x.clone();
        fft_radix2(&mut f).unwrap();
        let err = max_err(&f, &dft_naive(&x));
        assert!(err <= 1e-9, "forward n={n}: {err:e}");
        let mut inv = f.clone();
        ifft(&mut inv).unwrap();
        let err = max_err(&inv, &idft_naive(&f));
        assert!(err <= 1e-9, "inverse n={n}: {err:e}");
        assert!(max_err(&inv, &x) <= 1e-9, "round trip n={n}");
    }
}
