//! Small row-major raster containers shared by the rendering and simulation
//! pipelines. Color data is kept as linear-light `f64` planes; sRGB transfer
//! is applied only at the file boundary (see [`crate::io`]).

/// Row-major 2-D grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Clone> Grid2<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }
}

impl<T> Grid2<T> {
    /// Wraps an existing row-major buffer. Panics if the length does not
    /// match `width * height`.
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), width * height, "grid buffer length mismatch");
        Self {
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

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> &T {
        &self.data[y * self.width + x]
    }

    #[inline]
    pub fn get_mut(&mut self, x: usize, y: usize) -> &mut T {
        &mut self.data[y * self.width + x]
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn same_dims<U>(&self, other: &Grid2<U>) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn map<U, F: FnMut(&T) -> U>(&self, mut f: F) -> Grid2<U> {
        Grid2 {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(&mut f).collect(),
        }
    }
}

/// Three-plane linear-light color image (red, green, blue in [0, 1]).
#[derive(Debug, Clone, PartialEq)]
pub struct ColorImage {
    pub planes: [Grid2<f64>; 3],
}

impl ColorImage {
    pub fn filled(width: usize, height: usize, value: [f64; 3]) -> Self {
        Self {
            planes: [
                Grid2::filled(width, height, value[0]),
                Grid2::filled(width, height, value[1]),
                Grid2::filled(width, height, value[2]),
            ],
        }
    }

    pub fn from_planes(planes: [Grid2<f64>; 3]) -> Self {
        assert!(
            planes[0].same_dims(&planes[1]) && planes[0].same_dims(&planes[2]),
            "color planes must share dimensions"
        );
        Self { planes }
    }

    pub fn width(&self) -> usize {
        self.planes[0].width()
    }

    pub fn height(&self) -> usize {
        self.planes[0].height()
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        [
            *self.planes[0].get(x, y),
            *self.planes[1].get(x, y),
            *self.planes[2].get(x, y),
        ]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [f64; 3]) {
        for (plane, v) in self.planes.iter_mut().zip(rgb) {
            *plane.get_mut(x, y) = v;
        }
    }

    /// Rec. 709 luma of the linear planes.
    pub fn luminance(&self) -> Grid2<f64> {
        let (w, h) = (self.width(), self.height());
        let mut out = Grid2::filled(w, h, 0.0);
        for i in 0..w * h {
            out.data_mut()[i] = 0.2126 * self.planes[0].data()[i]
                + 0.7152 * self.planes[1].data()[i]
                + 0.0722 * self.planes[2].data()[i];
        }
        out
    }

    pub fn mean(&self) -> f64 {
        let n = (self.width() * self.height() * 3) as f64;
        self.planes
            .iter()
            .map(|p| p.data().iter().sum::<f64>())
            .sum::<f64>()
            / n
    }
}

/// sRGB electro-optical transfer function (encoded -> linear).
pub fn srgb_to_linear(c: f64) -> f64 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

/// Inverse sRGB transfer (linear -> encoded).
pub fn linear_to_srgb(c: f64) -> f64 {
    let c = c.clamp(0.0, 1.0);
    if c <= 0.0031308 {
        12.92 * c
    } else {
        1.055 * c.powf(1.0 / 2.4) - 0.055
    }
}
