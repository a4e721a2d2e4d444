//! 2-D FFT convolution against radially sampled transfer functions.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::raster::Grid2;

/// Smallest 5-smooth length >= n (fast for rustfft).
pub(crate) fn next_fast_len(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut k = m;
        for p in [2, 3, 5] {
            while k % p == 0 {
                k /= p;
            }
        }
        if k == 1 {
            return m;
        }
        m += 1;
    }
}

/// In-place 2-D FFT of a row-major buffer. The inverse path is normalized
/// by 1/(w*h).
pub(crate) fn fft_2d(buf: &mut [Complex64], w: usize, h: usize, inverse: bool) {
    assert_eq!(buf.len(), w * h);
    let mut planner = FftPlanner::new();
    let dir = if inverse {
        rustfft::FftDirection::Inverse
    } else {
        rustfft::FftDirection::Forward
    };
    let row_fft = planner.plan_fft(w, dir);
    let mut scratch = vec![Complex64::default(); row_fft.get_inplace_scratch_len()];
    for row in buf.chunks_exact_mut(w) {
        row_fft.process_with_scratch(row, &mut scratch);
    }
    let mut transposed = transpose(buf, w, h);
    let col_fft = planner.plan_fft(h, dir);
    scratch.resize(col_fft.get_inplace_scratch_len(), Complex64::default());
    for col in transposed.chunks_exact_mut(h) {
        col_fft.process_with_scratch(col, &mut scratch);
    }
    let back = transpose(&transposed, h, w);
    buf.copy_from_slice(&back);
    if inverse {
        let scale = 1.0 / (w * h) as f64;
        for v in buf.iter_mut() {
            *v *= scale;
        }
    }
}

fn transpose(buf: &[Complex64], w: usize, h: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::default(); buf.len()];
    for y in 0..h {
        for x in 0..w {
            out[x * h + y] = buf[y * w + x];
        }
    }
    out
}

/// Symmetric (mirror) extension of `src` by `pad` samples on every side,
/// zero-filled to `pw` x `ph`. Mirror reflection is edge-inclusive, so flux
/// across the crop boundary cancels for even kernels.
pub(crate) fn mirror_pad(src: &Grid2<f64>, pad: usize, pw: usize, ph: usize) -> Vec<Complex64> {
    let (w, h) = (src.width(), src.height());
    assert!(pw >= w + 2 * pad && ph >= h + 2 * pad);
    let mirror = |i: isize, n: usize| -> usize {
        // fold into one period of the reflected extension
        let period = 2 * n as isize;
        let mut j = i.rem_euclid(period);
        if j >= n as isize {
            j = period - 1 - j;
        }
        j as usize
    };
    let mut out = vec![Complex64::default(); pw * ph];
    for y in 0..h + 2 * pad {
        let sy = mirror(y as isize - pad as isize, h);
        for x in 0..w + 2 * pad {
            let sx = mirror(x as isize - pad as isize, w);
            out[y * pw + x] = Complex64::new(*src.get(sx, sy), 0.0);
        }
    }
    out
}

/// Real part of the padded buffer, cropped back to the source window.
pub(crate) fn crop_real(buf: &[Complex64], pw: usize, w: usize, h: usize, pad: usize) -> Grid2<f64> {
    let mut out = Grid2::filled(w, h, 0.0);
    for y in 0..h {
        for x in 0..w {
            *out.get_mut(x, y) = buf[(y + pad) * pw + (x + pad)].re;
        }
    }
    out
}

/// Samples a radial transfer profile onto the DFT frequency grid of a
/// `pw` x `ph` buffer with the given angular pixel pitch (degrees/pixel).
/// `profile(f_cpd)` must cover the full grid band.
pub(crate) fn radial_transfer_grid<F>(pw: usize, ph: usize, pitch_deg: f64, profile: F) -> Vec<Complex64>
where
    F: Fn(f64) -> Complex64,
{
    let mut grid = vec![Complex64::default(); pw * ph];
    for ky in 0..ph {
        let sy = signed_bin(ky, ph);
        let fy = sy / (ph as f64 * pitch_deg);
        for kx in 0..pw {
            let sx = signed_bin(kx, pw);
            let fx = sx / (pw as f64 * pitch_deg);
            grid[ky * pw + kx] = profile(fx.hypot(fy));
        }
    }
    grid
}

fn signed_bin(k: usize, n: usize) -> f64 {
    if k <= n / 2 {
        k as f64
    } else {
        k as f64 - n as f64
    }
}

/// Convolves an image with the kernel whose transfer function is the given
/// precomputed DFT-grid samples. The image is mirror-padded by `pad`.
pub(crate) fn convolve_with_transfer(
    src: &Grid2<f64>,
    transfer: &[Complex64],
    pw: usize,
    ph: usize,
    pad: usize,
) -> Grid2<f64> {
    let mut buf = mirror_pad(src, pad, pw, ph);
    fft_2d(&mut buf, pw, ph, false);
    for (v, t) in buf.iter_mut().zip(transfer) {
        *v *= t;
    }
    fft_2d(&mut buf, pw, ph, true);
    crop_real(&buf, pw, src.width(), src.height(), pad)
}
