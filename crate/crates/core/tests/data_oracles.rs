//! Dataset checks against values recomputed from the raw files and against
//! the analytic error of the synthetic task.

use std::path::PathBuf;

use advbound::data::{load_mnist_dir, make_pair, synth_2d, MNIST_FILES};
use statrs::distribution::{ContinuousCDF, Normal};

/// `$ADVBOUND_MNIST_DIR`, else `<workspace>/data/mnist`; `None` when the
/// files are absent.
fn mnist_dir() -> Option<PathBuf> {
    let dir = std::env::var_os("ADVBOUND_MNIST_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist"));
    MNIST_FILES.iter().all(|f| dir.join(f).is_file()).then_some(dir)
}

#[test]
fn full_mnist_counts_and_pixel_mean() {
    let Some(dir) = mnist_dir() else {
        eprintln!("MNIST files not present; skipping");
        return;
    };
    let (train, test) = load_mnist_dir(&dir).unwrap();
    assert_eq!((train.len(), test.len()), (60_000, 10_000));
    assert_eq!((train.rows, train.cols), (28, 28));
    let total: u64 = train.pixels.iter().map(|&p| u64::from(p)).sum();
    let mean = total as f64 / train.pixels.len() as f64 / 255.0;
    assert!((mean - 0.1307).abs() < 5e-5, "pixel mean {mean}");

    let ones_sevens = train.labels.iter().filter(|&&l| l == 1 || l == 7).count();
    let pair = make_pair(&train, 1, 7, "mnist-train").unwrap();
    assert_eq!(pair.len(), ones_sevens);
    assert_eq!(pair.labels.iter().filter(|&&y| y == 1).count(), train.labels.iter().filter(|&&l| l == 1).count());
}

/// The rule `sign(x₀ − ½)` is Bayes-optimal for two equal-weight blobs
/// separated along the first axis; its error is `Φ(−margin / (2·noise))`.
#[test]
fn synthetic_task_bayes_error_matches_gaussian_overlap() {
    let (margin, noise, m) = (0.2, 0.1, 40_000);
    let data = synth_2d(m, margin, noise, 5).unwrap();
    let errors = data
        .inputs
        .iter()
        .zip(&data.labels)
        .filter(|&(x, &y)| (if x[0] >= 0.5 { 1 } else { -1 }) != y)
        .count();
    let empirical = errors as f64 / m as f64;
    let analytic = Normal::standard().cdf(-margin / (2.0 * noise));
    let se = (analytic * (1.0 - analytic) / m as f64).sqrt();
    assert!((empirical - analytic).abs() <= 4.0 * se, "empirical {empirical}, analytic {analytic}, se {se}");
}
