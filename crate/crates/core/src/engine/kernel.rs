//! Packed register-blocked dot-product kernel.
//!
//! Query rows are packed into panels of `mr` rows and gallery rows into
//! panels of `nr` rows, each stored dimension-major (`[k][row]`). One call of
//! the micro-kernel produces an `mr x nr` block of dot products with all
//! accumulators held in registers. Panels are zero padded, which adds exact
//! zeros to the padded outputs only.

use crate::scalar::Scalar;

/// Row-major matrix view.
#[derive(Debug, Clone, Copy)]
pub struct MatrixView<'a, T> {
    pub data: &'a [T],
    pub rows: usize,
    pub dim: usize,
}

impl<'a, T> MatrixView<'a, T> {
    pub fn new(data: &'a [T], dim: usize) -> Self {
        let rows = data.len().checked_div(dim).unwrap_or(0);
        Self { data, rows, dim }
    }

    pub fn row(&self, i: usize) -> &'a [T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

/// Rows packed into fixed-height panels.
#[derive(Debug, Clone)]
pub struct Packed<T> {
    pub panel: usize,
    pub dim: usize,
    pub rows: usize,
    data: Vec<T>,
}

impl<T: Scalar> Packed<T> {
    pub fn pack(src: MatrixView<'_, T>, panel: usize) -> Self {
        let panels = src.rows.div_ceil(panel);
        let dim = src.dim;
        let mut data = vec![T::zero(); panels * panel * dim];
        for (p, out) in data.chunks_exact_mut(panel * dim).enumerate() {
            let lo = p * panel;
            let hi = (lo + panel).min(src.rows);
            for (r, i) in (lo..hi).enumerate() {
                for (k, &x) in src.row(i).iter().enumerate() {
                    out[k * panel + r] = x;
                }
            }
        }
        Self {
            panel,
            dim,
            rows: src.rows,
            data,
        }
    }

    pub fn panels(&self) -> usize {
        self.rows.div_ceil(self.panel)
    }

    #[inline]
    fn panel_data(&self, p: usize) -> &[T] {
        let len = self.panel * self.dim;
        &self.data[p * len..(p + 1) * len]
    }
}

#[inline(always)]
fn micro<T: Scalar, const MR: usize, const NR: usize, const FMA: bool>(
    q: &[T],
    g: &[T],
    dim: usize,
) -> [[T; NR]; MR] {
    let mut acc = [[T::zero(); NR]; MR];
    for (qk, gk) in q.chunks_exact(MR).zip(g.chunks_exact(NR)).take(dim) {
        let qk: &[T; MR] = qk.try_into().unwrap();
        let gk: &[T; NR] = gk.try_into().unwrap();
        for r in 0..MR {
            let a = qk[r];
            for c in 0..NR {
                acc[r][c] = if FMA {
                    a.mul_add(gk[c], acc[r][c])
                } else {
                    acc[r][c] + a * gk[c]
                };
            }
        }
    }
    acc
}

/// Dot products of query panels `qp` against gallery panels `gp`, written
/// row-major into `out` with row stride `gp.len() * NR`.
#[inline(always)]
fn block_generic<T: Scalar, const MR: usize, const NR: usize, const FMA: bool>(
    queries: &Packed<T>,
    qp: std::ops::Range<usize>,
    gallery: &Packed<T>,
    gp: std::ops::Range<usize>,
    out: &mut [T],
) {
    let stride = gp.len() * NR;
    let dim = queries.dim;
    // Gallery panel outermost: it stays cache resident while the query
    // panels stream past it.
    for (gc, g) in gp.clone().enumerate() {
        let gdata = gallery.panel_data(g);
        for (qr, q) in qp.clone().enumerate() {
            let acc = micro::<T, MR, NR, FMA>(queries.panel_data(q), gdata, dim);
            for (r, row) in acc.iter().enumerate() {
                let o = (qr * MR + r) * stride + gc * NR;
                out[o..o + NR].copy_from_slice(row);
            }
        }
    }
}

type BlockFn<T> =
    fn(&Packed<T>, std::ops::Range<usize>, &Packed<T>, std::ops::Range<usize>, &mut [T]);

/// A micro-kernel shape bound to the best instruction set found at runtime.
#[derive(Clone, Copy)]
pub struct Kernel<T> {
    pub mr: usize,
    pub nr: usize,
    pub name: &'static str,
    run: BlockFn<T>,
}

impl<T> std::fmt::Debug for Kernel<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Kernel")
            .field("mr", &self.mr)
            .field("nr", &self.nr)
            .field("name", &self.name)
            .finish()
    }
}

macro_rules! kernel_variant {
    ($name:ident, $feat:literal, $fma:expr) => {
        #[cfg(target_arch = "x86_64")]
        #[target_feature(enable = $feat)]
        unsafe fn $name<T: Scalar, const MR: usize, const NR: usize>(
            q: &Packed<T>,
            qp: std::ops::Range<usize>,
            g: &Packed<T>,
            gp: std::ops::Range<usize>,
            out: &mut [T],
        ) {
            block_generic::<T, MR, NR, $fma>(q, qp, g, gp, out)
        }
    };
}

kernel_variant!(block_avx2, "avx2,fma", true);
kernel_variant!(block_avx512, "avx512f,fma", true);

fn portable<T: Scalar, const MR: usize, const NR: usize>(
    q: &Packed<T>,
    qp: std::ops::Range<usize>,
    g: &Packed<T>,
    gp: std::ops::Range<usize>,
    out: &mut [T],
) {
    block_generic::<T, MR, NR, false>(q, qp, g, gp, out)
}

impl<T: Scalar> Kernel<T> {
    /// Portable kernel, no target features assumed.
    pub fn portable() -> Self {
        if T::BYTES == 4 {
            Self { mr: 4, nr: 8, name: "portable", run: portable::<T, 4, 8> }
        } else {
            Self { mr: 4, nr: 4, name: "portable", run: portable::<T, 4, 4> }
        }
    }

    /// Widest kernel supported by the running CPU.
    pub fn detect() -> Self {
        #[cfg(target_arch = "x86_64")]
        {
            if std::arch::is_x86_feature_detected!("avx512f")
                && std::arch::is_x86_feature_detected!("fma")
            {
                fn run<T: Scalar, const MR: usize, const NR: usize>(
                    q: &Packed<T>,
                    qp: std::ops::Range<usize>,
                    g: &Packed<T>,
                    gp: std::ops::Range<usize>,
                    out: &mut [T],
                ) {
                    // SAFETY: only selected after avx512f and fma were detected.
                    unsafe { block_avx512::<T, MR, NR>(q, qp, g, gp, out) }
                }
                return if T::BYTES == 4 {
                    Self { mr: 5, nr: 48, name: "avx512", run: run::<T, 5, 48> }
                } else {
                    Self { mr: 5, nr: 24, name: "avx512", run: run::<T, 5, 24> }
                };
            }
            if std::arch::is_x86_feature_detected!("avx2")
                && std::arch::is_x86_feature_detected!("fma")
            {
                fn run<T: Scalar, const MR: usize, const NR: usize>(
                    q: &Packed<T>,
                    qp: std::ops::Range<usize>,
                    g: &Packed<T>,
                    gp: std::ops::Range<usize>,
                    out: &mut [T],
                ) {
                    // SAFETY: only selected after avx2 and fma were detected.
                    unsafe { block_avx2::<T, MR, NR>(q, qp, g, gp, out) }
                }
                return if T::BYTES == 4 {
                    Self { mr: 6, nr: 16, name: "avx2", run: run::<T, 6, 16> }
                } else {
                    Self { mr: 6, nr: 8, name: "avx2", run: run::<T, 6, 8> }
                };
            }
        }
        Self::portable()
    }

    /// Fills `out` (row-major, `qp.len()*mr` rows by `gp.len()*nr` columns).
    pub fn run(
        &self,
        queries: &Packed<T>,
        qp: std::ops::Range<usize>,
        gallery: &Packed<T>,
        gp: std::ops::Range<usize>,
        out: &mut [T],
    ) {
        assert_eq!(queries.panel, self.mr);
        assert_eq!(gallery.panel, self.nr);
        assert_eq!(queries.dim, gallery.dim);
        assert!(qp.end <= queries.panels() && gp.end <= gallery.panels());
        assert!(out.len() >= qp.len() * self.mr * gp.len() * self.nr);
        (self.run)(queries, qp, gallery, gp, out)
    }
}

/// Sequential 64-bit dot product: the reference every fast score is checked
/// against and the value reported for selected pairs.
#[inline]
pub fn dot_f64<T: Scalar>(a: &[T], b: &[T]) -> f64 {
    let mut s = 0.0f64;
    for (&x, &y) in a.iter().zip(b) {
        s += x.to_f64_lossless() * y.to_f64_lossless();
    }
    s
}
