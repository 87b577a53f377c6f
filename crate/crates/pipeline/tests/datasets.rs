use hlad_pipeline::{generate, generate_with_conditions, DatasetFile, GenConfig, PipelineError};
use hlad_sim::Domain;
use proptest::prelude::*;

fn bytes(f: &DatasetFile) -> Vec<u8> {
    let mut out = Vec::new();
    f.write(&mut out).unwrap();
    out
}

#[test]
fn write_then_read_is_bitwise_identical() {
    let cfg = GenConfig::default();
    for labeled in [true, false] {
        let original = generate(&cfg, Domain::TargetEmulated, 7, 12, labeled).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.ssld");
        original.save(&path).unwrap();
        let mut back = DatasetFile::load(&path).unwrap();
        assert_eq!(back.header, original.header);
        let same_bits = |a: &[f32], b: &[f32]| a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits());
        assert_eq!(back.features().len(), original.features().len());
        assert!(same_bits(back.features(), original.features()));
        assert_eq!(back.positions(), original.positions());
        assert_eq!(bytes(&back), std::fs::read(&path).unwrap());
        if !labeled {
            let mut original = original;
            assert_eq!(back.take_audit().unwrap().unseal(), original.take_audit().unwrap().unseal());
        }
    }
}

#[test]
fn same_seed_gives_identical_bytes() {
    let cfg = GenConfig::default();
    let a = bytes(&generate(&cfg, Domain::Source, 3, 10, true).unwrap());
    let b = bytes(&generate(&cfg, Domain::Source, 3, 10, true).unwrap());
    let c = bytes(&generate(&cfg, Domain::Source, 4, 10, true).unwrap());
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn randomized_snr_is_log_uniform_between_a_tenth_and_one() {
    let n = 400;
    let (_, cond) = generate_with_conditions(&GenConfig::default(), Domain::SourceRandomized, 11, n, true).unwrap();
    let mut u: Vec<f64> = cond
        .iter()
        .map(|c| {
            assert!((0.1..=1.0).contains(&c.snr_linear), "{}", c.snr_linear);
            assert!((0.0..=10.0).contains(&c.wall_margin));
            // ln(snr) ~ U(ln 0.1, 0) maps to U(0, 1)
            (c.snr_linear.ln() - 0.1f64.ln()) / -0.1f64.ln()
        })
        .collect();
    u.sort_by(f64::total_cmp);
    let d = u
        .iter()
        .enumerate()
        .map(|(i, &x)| (x - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - x).abs()))
        .fold(0.0, f64::max);
    // Kolmogorov-Smirnov critical value at p = 0.01
    assert!(d < 1.628 / (n as f64).sqrt(), "KS statistic {d}");

    let (_, fixed) = generate_with_conditions(&GenConfig::default(), Domain::Source, 11, 20, true).unwrap();
    assert!(fixed.iter().all(|c| c == &fixed[0]));
}

#[test]
fn unlabeled_files_keep_positions_out_of_the_training_view() {
    let mut f = generate(&GenConfig::default(), Domain::TargetEmulated, 5, 6, false).unwrap();
    assert!(f.positions().is_none());
    let train = f.training_dataset("t").unwrap();
    assert!(!train.is_labeled());
    assert!(train.positions(0).is_err());
    assert!(train.heatmap(0).is_err());
    assert_eq!(train.label_reads(), 0);
    // the audit is handed out once, then gone
    let audit = f.take_audit().unwrap();
    assert_eq!(audit.len(), 6);
    assert!(f.take_audit().is_none());
    assert!(f.training_dataset("t").unwrap().positions(0).is_err());

    let labeled = generate(&GenConfig::default(), Domain::TargetEmulated, 5, 6, true).unwrap();
    assert_eq!(audit.unseal(), labeled.positions().unwrap().to_vec());
}

/// 84-byte header; per record f32 features, then for labeled files the f32
/// heatmap and a count byte plus two f32 pairs; unlabeled files end with the
/// audit tag, a u64 count and the same metadata per record.
pub fn expected_size(n: usize, labeled: bool) -> usize {
    let (features, heatmap, meta) = (2 * 8 * 257 * 9, 24 * 24, 1 + 2 * 8);
    let per_record = 4 * features + if labeled { 4 * heatmap + meta } else { 0 };
    84 + n * per_record + if labeled { 0 } else { 4 + 8 + n * meta }
}

#[test]
fn file_sizes_follow_the_format_arithmetic() {
    for labeled in [true, false] {
        let f = generate(&GenConfig::default(), Domain::Source, 2, 3, labeled).unwrap();
        assert_eq!(bytes(&f).len(), expected_size(3, labeled));
        assert_eq!(f.header.file_len() as usize, expected_size(3, labeled));
    }
}

fn small_files() -> Vec<Vec<u8>> {
    [true, false].map(|l| bytes(&generate(&GenConfig::default(), Domain::Source, 9, 2, l).unwrap())).to_vec()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn truncated_or_padded_files_are_rejected(which in 0usize..2, cut in 0.0f64..1.0, pad in 1usize..64) {
        let files = small_files();
        let full = &files[which];
        let keep = (cut * full.len() as f64) as usize;
        let short = DatasetFile::from_bytes(&full[..keep]);
        prop_assert!(short.is_err());
        let mut long = full.clone();
        long.extend(std::iter::repeat_n(0u8, pad));
        match DatasetFile::from_bytes(&long) {
            Err(PipelineError::SizeMismatch { expected, actual }) => {
                prop_assert_eq!(expected, full.len() as u64);
                prop_assert_eq!(actual, long.len() as u64);
            }
            other => prop_assert!(false, "expected a size mismatch, got {:?}", other.map(|f| f.len())),
        }
    }

    #[test]
    fn corrupted_counts_are_detected(which in 0usize..2, count in 0u64..1000) {
        let files = small_files();
        prop_assume!(count != 2);
        let mut b = files[which].clone();
        b[8..16].copy_from_slice(&count.to_le_bytes());
        prop_assert!(DatasetFile::from_bytes(&b).is_err());
    }
}
