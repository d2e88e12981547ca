use crate::{Error, Result};

macro_rules! scalar_map {
    ($name:ident, $doc:literal) => {
        #[doc = $doc]
        ///
        /// Values are stored row-major; an entry is valid only when it is
        /// finite and strictly positive.
        #[derive(Clone, Debug, PartialEq)]
        pub struct $name {
            width: usize,
            height: usize,
            values: Vec<f64>,
            valid: Vec<bool>,
        }

        impl $name {
            /// Builds a map whose validity is derived from the values.
            pub fn from_values(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
                if values.len() != width * height {
                    return Err(Error::shape(
                        format!("{} values", width * height),
                        format!("{} values", values.len()),
                    ));
                }
                let valid = values.iter().map(|v| v.is_finite() && *v > 0.0).collect();
                Ok(Self {
                    width,
                    height,
                    values,
                    valid,
                })
            }

            /// Builds a map with an explicit mask; masked-in entries must be valid.
            pub fn with_mask(
                width: usize,
                height: usize,
                values: Vec<f64>,
                mask: Vec<bool>,
            ) -> Result<Self> {
                if values.len() != width * height || mask.len() != width * height {
                    return Err(Error::shape(
                        format!("{} values and mask entries", width * height),
                        format!("{} values, {} mask entries", values.len(), mask.len()),
                    ));
                }
                let valid = values
                    .iter()
                    .zip(&mask)
                    .map(|(v, m)| *m && v.is_finite() && *v > 0.0)
                    .collect();
                Ok(Self {
                    width,
                    height,
                    values,
                    valid,
                })
            }

            pub fn constant(width: usize, height: usize, value: f64) -> Self {
                Self::from_values(width, height, vec![value; width * height])
                    .expect("sizes agree by construction")
            }

            pub fn width(&self) -> usize {
                self.width
            }

            pub fn height(&self) -> usize {
                self.height
            }

            pub fn len(&self) -> usize {
                self.values.len()
            }

            pub fn is_empty(&self) -> bool {
                self.values.is_empty()
            }

            pub fn values(&self) -> &[f64] {
                &self.values
            }

            pub fn mask(&self) -> &[bool] {
                &self.valid
            }

            pub fn get(&self, u: usize, v: usize) -> Option<f64> {
                let i = v * self.width + u;
                self.valid[i].then(|| self.values[i])
            }

            pub fn is_valid(&self, index: usize) -> bool {
                self.valid[index]
            }

            pub fn value(&self, index: usize) -> f64 {
                self.values[index]
            }

            pub fn count_valid(&self) -> usize {
                self.valid.iter().filter(|v| **v).count()
            }

            /// Overwrites one entry; validity follows the new value.
            pub fn set(&mut self, index: usize, value: f64) {
                self.values[index] = value;
                self.valid[index] = value.is_finite() && value > 0.0;
            }

            pub fn invalidate(&mut self, index: usize) {
                self.valid[index] = false;
            }

            pub fn dims(&self) -> (usize, usize) {
                (self.width, self.height)
            }

            pub fn check_dims(&self, width: usize, height: usize) -> Result<()> {
                if (self.width, self.height) != (width, height) {
                    return Err(Error::shape(
                        format!("{width}x{height}"),
                        format!("{}x{}", self.width, self.height),
                    ));
                }
                Ok(())
            }

            /// Multiplies every valid entry by `factor`.
            pub fn scaled(&self, factor: f64) -> Self {
                let values = self.values.iter().map(|v| v * factor).collect();
                Self::with_mask(self.width, self.height, values, self.valid.clone())
                    .expect("sizes agree by construction")
            }
        }
    };
}

scalar_map!(InverseDepthMap, "Per-pixel inverse depth in 1/m.");
scalar_map!(DepthMap, "Per-pixel depth in meters.");

impl InverseDepthMap {
    pub fn to_depth(&self) -> DepthMap {
        let values = self
            .values
            .iter()
            .zip(&self.valid)
            .map(|(v, ok)| if *ok { 1.0 / v } else { 0.0 })
            .collect();
        DepthMap::with_mask(self.width, self.height, values, self.valid.clone())
            .expect("sizes agree by construction")
    }
}

impl DepthMap {
    pub fn to_inverse(&self) -> InverseDepthMap {
        let values = self
            .values
            .iter()
            .zip(&self.valid)
            .map(|(v, ok)| if *ok { 1.0 / v } else { 0.0 })
            .collect();
        InverseDepthMap::with_mask(self.width, self.height, values, self.valid.clone())
            .expect("sizes agree by construction")
    }

    /// Keeps only entries in `(0, cap]`.
    pub fn capped(&self, cap: f64) -> DepthMap {
        let mask = self
            .values
            .iter()
            .zip(&self.valid)
            .map(|(v, ok)| *ok && *v <= cap)
            .collect();
        DepthMap::with_mask(self.width, self.height, self.values.clone(), mask)
            .expect("sizes agree by construction")
    }
}
