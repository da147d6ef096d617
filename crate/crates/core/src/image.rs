//! Binary masks and the few raster operations the contact and contour
//! extractors need: differencing, box smoothing, 3x3 morphology and
//! connected-component labeling.

use crate::data::IntensityFrame;

/// Row-major boolean grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl Mask {
    pub fn empty(width: usize, height: usize) -> Self {
        Mask {
            width,
            height,
            data: vec![false; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Mask {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    /// Whether a sub-pixel point falls on a set pixel. Pixel `(i, j)` covers
    /// `[i, i + 1) x [j, j + 1)`.
    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        if !(x >= 0.0 && y >= 0.0) {
            return false;
        }
        let (i, j) = (x.floor() as usize, y.floor() as usize);
        i < self.width && j < self.height && self.get(i, j)
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&v| v)
    }

    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &v)| v)
            .map(move |(i, _)| (i % self.width, i / self.width))
    }
}

/// Per-pixel maximum over channels of `|a - b|`.
pub fn max_channel_difference(a: &IntensityFrame, b: &IntensityFrame) -> Vec<u8> {
    let n = a.width() * a.height();
    let mut out = vec![0u8; n];
    for c in 0..3 {
        for ((o, &pa), &pb) in out.iter_mut().zip(a.plane(c)).zip(b.plane(c)) {
            *o = (*o).max(pa.abs_diff(pb));
        }
    }
    out
}

pub fn threshold(values: &[u8], width: usize, height: usize, level: u8) -> Mask {
    Mask {
        width,
        height,
        data: values.iter().map(|&v| v >= level).collect(),
    }
}

/// Pixels whose mean over a `(2r+1)^2` window, clipped at the borders, is at
/// least `level`. Compared as integer sums so the result is exact.
pub fn box_threshold(values: &[u8], width: usize, height: usize, radius: usize, level: u8) -> Mask {
    // column prefix sums of row-window sums, both passes in row-major order
    let mut prefix = vec![0u32; width + 1];
    let mut cols = vec![0u32; (height + 1) * width];
    for y in 0..height {
        let row = &values[y * width..(y + 1) * width];
        for x in 0..width {
            prefix[x + 1] = prefix[x] + u32::from(row[x]);
        }
        let (done, rest) = cols.split_at_mut((y + 1) * width);
        let above = &done[y * width..];
        for (x, c) in rest[..width].iter_mut().enumerate() {
            let lo = x.saturating_sub(radius);
            let hi = (x + radius + 1).min(width);
            *c = above[x] + prefix[hi] - prefix[lo];
        }
    }
    let span = |i: usize, n: usize| (i.saturating_sub(radius), (i + radius + 1).min(n));
    let mut data = vec![false; values.len()];
    for y in 0..height {
        let (lo, hi) = span(y, height);
        let ny = (hi - lo) as u32;
        let (top, bottom) = (&cols[lo * width..(lo + 1) * width], &cols[hi * width..(hi + 1) * width]);
        for x in 0..width {
            let (xl, xh) = span(x, width);
            let need = u32::from(level) * ny * (xh - xl) as u32;
            data[y * width + x] = bottom[x] - top[x] >= need;
        }
    }
    Mask { width, height, data }
}

/// 3x3 erosion (`all`) or dilation (`!all`) done as two separable passes;
/// pixels outside the image count as background.
fn morph3(m: &Mask, all: bool) -> Mask {
    let (w, h) = (m.width, m.height);
    let combine = |a: bool, b: bool| if all { a && b } else { a || b };
    let at = |d: &[bool], i: Option<usize>| i.is_some_and(|i| d[i]);
    let mut horiz = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let left = (x > 0).then(|| i - 1);
            let right = (x + 1 < w).then(|| i + 1);
            horiz[i] = combine(combine(at(&m.data, left), m.data[i]), at(&m.data, right));
        }
    }
    let mut data = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let up = (y > 0).then(|| i - w);
            let down = (y + 1 < h).then(|| i + w);
            data[i] = combine(combine(at(&horiz, up), horiz[i]), at(&horiz, down));
        }
    }
    Mask { width: w, height: h, data }
}

pub fn erode(m: &Mask) -> Mask {
    morph3(m, true)
}

pub fn dilate(m: &Mask) -> Mask {
    morph3(m, false)
}

/// Opening followed by closing, both with a 3x3 square.
pub fn open_close(m: &Mask) -> Mask {
    let opened = dilate(&erode(m));
    erode(&dilate(&opened))
}

/// Labels 8-connected components; returns `(labels, sizes)` where label 0 is
/// background and component `k` has label `k + 1`.
pub fn label_components(m: &Mask) -> (Vec<u32>, Vec<usize>) {
    let mut labels = vec![0u32; m.data.len()];
    let mut sizes = Vec::new();
    let mut stack = Vec::new();
    for start in 0..m.data.len() {
        if !m.data[start] || labels[start] != 0 {
            continue;
        }
        let label = sizes.len() as u32 + 1;
        let mut size = 0;
        labels[start] = label;
        stack.push(start);
        while let Some(i) = stack.pop() {
            size += 1;
            let (x, y) = (i % m.width, i / m.width);
            for ny in y.saturating_sub(1)..(y + 2).min(m.height) {
                for nx in x.saturating_sub(1)..(x + 2).min(m.width) {
                    let j = ny * m.width + nx;
                    if m.data[j] && labels[j] == 0 {
                        labels[j] = label;
                        stack.push(j);
                    }
                }
            }
        }
        sizes.push(size);
    }
    (labels, sizes)
}

/// Keeps only the largest 8-connected component (the first one found on a
/// tie, in raster order).
pub fn largest_component(m: &Mask) -> Mask {
    let (labels, sizes) = label_components(m);
    let Some((best, _)) = sizes
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
    else {
        return Mask::empty(m.width, m.height);
    };
    let keep = best as u32 + 1;
    Mask {
        width: m.width,
        height: m.height,
        data: labels.iter().map(|&l| l == keep).collect(),
    }
}
