use std::time::Instant;

use hlad_core::kernels::*;

fn time<F: FnMut()>(label: &str, reps: usize, mut f: F) {
    let t = Instant::now();
    for _ in 0..reps {
        f();
    }
    println!("{label:<28} {:8.2} ms", t.elapsed().as_secs_f64() * 1e3 / reps as f64);
}

fn main() {
    let batch = 64;
    let layers = [
        ("enc.conv1", ConvGeom { in_channels: 8, height: 257, width: 9, out_channels: 8, kernel_h: 3, kernel_w: 3, stride: 2, padding: 1 }),
        ("enc.conv2", ConvGeom { in_channels: 8, height: 129, width: 5, out_channels: 16, kernel_h: 3, kernel_w: 3, stride: 2, padding: 1 }),
        ("enc.conv3", ConvGeom { in_channels: 16, height: 65, width: 3, out_channels: 16, kernel_h: 3, kernel_w: 3, stride: 1, padding: 1 }),
        ("dec.conv2", ConvGeom { in_channels: 8, height: 24, width: 24, out_channels: 8, kernel_h: 3, kernel_w: 3, stride: 1, padding: 1 }),
    ];
    for (name, g) in layers {
        let x = vec![0.5f32; batch * g.in_channels * g.height * g.width];
        let w = vec![0.1f32; g.out_channels * g.in_channels * 9];
        let b = vec![0.0f32; g.out_channels];
        let y = conv2d_forward(&x, &w, &b, batch, &g);
        time(&format!("{name} fwd"), 5, || {
            conv2d_forward(&x, &w, &b, batch, &g);
        });
        let mut dx = vec![0.0f32; x.len()];
        let mut dw = vec![0.0f32; w.len()];
        time(&format!("{name} bwd dw"), 5, || conv2d_backward(&y, &x, &w, batch, &g, None, Some(&mut dw), None));
        time(&format!("{name} bwd dx"), 5, || conv2d_backward(&y, &x, &w, batch, &g, Some(&mut dx), None, None));
    }
    let x = vec![0.5f32; batch * 3120];
    let w = vec![0.1f32; 64 * 3120];
    let b = vec![0.0f32; 64];
    {
        use hlad_core::Scalar;
        let (o, k, n) = (8usize, 72usize, 645usize);
        let a = vec![0.1f32; o * k];
        let bm = vec![0.2f32; k * n];
        let mut c = vec![0.0f32; o * n];
        time("gemm 8x72x645 x64", 5, || {
            for _ in 0..batch {
                f32::gemm(o, k, n, 1.0, &a, (k as isize, 1), &bm, (n as isize, 1), 0.0, &mut c, (n as isize, 1));
            }
        });
        let big = vec![0.2f32; k * n * batch];
        let mut cb = vec![0.0f32; o * n * batch];
        time("gemm 8x72x(645*64)", 5, || {
            f32::gemm(o, k, n * batch, 1.0, &a, (k as isize, 1), &big, ((n * batch) as isize, 1), 0.0, &mut cb, ((n * batch) as isize, 1));
        });
        time("gemm (645*64)x72x8 ", 5, || {
            f32::gemm(n * batch, k, o, 1.0, &big, (1, (n * batch) as isize), &a, (1, k as isize), 0.0, &mut cb, (o as isize, 1));
        });
    }
    {
        let idx: Vec<u32> = (0..72 * 645).map(|i| ((i * 7919) % 22000) as u32).collect();
        let padded = vec![0.3f32; 22800];
        let mut cols = vec![0.0f32; 72 * 645];
        time("gather 46k x64", 5, || {
            for _ in 0..batch {
                for (d, &i) in cols.iter_mut().zip(&idx) {
                    *d = padded[i as usize];
                }
            }
        });
        let seq: Vec<u32> = (0..72 * 645).map(|i| (i % 22000) as u32).collect();
        time("gather seq 46k x64", 5, || {
            for _ in 0..batch {
                for (d, &i) in cols.iter_mut().zip(&seq) {
                    *d = padded[i as usize];
                }
            }
        });
        std::hint::black_box(&cols);
    }
    time("enc.dense fwd", 5, || {
        dense_forward(&x, &w, &b, batch, 3120, 64);
    });
}

#[allow(dead_code)]
fn gemm_only() {}
