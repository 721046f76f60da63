//! Binary-mask post-processing: connected components, small-object
//! removal, and close/open morphology. Together these turn raw
//! segmentation output into training-grade urban masks without any
//! manual cleanup step.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MaskError {
    #[error("mask dimensions {0}x{1} and {2}x{3} differ")]
    DimMismatch(usize, usize, usize, usize),
    #[error("min_area must be at least 1")]
    ZeroMinArea,
}

/// Pixel adjacency rule for component labeling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connectivity {
    Four,
    Eight,
}

/// Width x height bitmap; value 1 marks urban pixels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<u8>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize) -> Self {
        BinaryMask {
            width,
            height,
            bits: vec![0; width * height],
        }
    }

    /// Build from raw 0/1 values (anything nonzero counts as set).
    pub fn from_bits(width: usize, height: usize, bits: Vec<u8>) -> Self {
        assert_eq!(bits.len(), width * height);
        BinaryMask {
            width,
            height,
            bits: bits.into_iter().map(|b| u8::from(b != 0)).collect(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x] != 0
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = u8::from(v);
    }

    /// Number of set pixels.
    pub fn count_ones(&self) -> usize {
        self.bits.iter().map(|&b| b as usize).sum()
    }

    pub fn is_empty_mask(&self) -> bool {
        self.count_ones() == 0
    }

    /// Intersection-over-union with another mask of the same size.
    pub fn iou(&self, other: &BinaryMask) -> Result<f64, MaskError> {
        check_dims(self, other)?;
        let mut inter = 0usize;
        let mut union = 0usize;
        for (&a, &b) in self.bits.iter().zip(&other.bits) {
            inter += (a & b) as usize;
            union += (a | b) as usize;
        }
        if union == 0 {
            return Ok(1.0); // both empty
        }
        Ok(inter as f64 / union as f64)
    }

    /// Pixels set here but not in `other`.
    pub fn difference_count(&self, other: &BinaryMask) -> Result<usize, MaskError> {
        check_dims(self, other)?;
        Ok(self
            .bits
            .iter()
            .zip(&other.bits)
            .filter(|(&a, &b)| a == 1 && b == 0)
            .count())
    }

    /// True if every set pixel here is set in `other`.
    pub fn is_subset_of(&self, other: &BinaryMask) -> Result<bool, MaskError> {
        check_dims(self, other)?;
        Ok(self
            .bits
            .iter()
            .zip(&other.bits)
            .all(|(&a, &b)| a == 0 || b == 1))
    }
}

fn check_dims(a: &BinaryMask, b: &BinaryMask) -> Result<(), MaskError> {
    if a.width != b.width || a.height != b.height {
        return Err(MaskError::DimMismatch(a.width, a.height, b.width, b.height));
    }
    Ok(())
}

/// One labeled component: 1-based id, pixel area, inclusive bounding box.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    pub id: u32,
    pub area: usize,
    pub bbox: (usize, usize, usize, usize), // min_x, min_y, max_x, max_y
}

/// Components in id order; ids are dense starting at 1.
#[derive(Debug, Clone, Default)]
pub struct ComponentTable {
    pub components: Vec<Component>,
}

impl ComponentTable {
    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn total_area(&self) -> usize {
        self.components.iter().map(|c| c.area).sum()
    }
}

/// Two-pass connected-component labeling with union-find.
///
/// Returns the component table and the label map (0 = background).
pub fn connected_components(
    mask: &BinaryMask,
    connectivity: Connectivity,
) -> (ComponentTable, Vec<u32>) {
    let (w, h) = (mask.width, mask.height);
    let mut labels = vec![0u32; w * h];
    if w == 0 || h == 0 {
        return (ComponentTable::default(), labels);
    }
    let mut parent: Vec<u32> = vec![0]; // parent[0] unused (background)

    fn find(parent: &mut [u32], mut x: u32) -> u32 {
        while parent[x as usize] != x {
            parent[x as usize] = parent[parent[x as usize] as usize];
            x = parent[x as usize];
        }
        x
    }

    // First pass: provisional labels from already-visited neighbors.
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            let mut neighbor_labels: [u32; 4] = [0; 4];
            let mut n = 0;
            let mut push = |l: u32| {
                if l != 0 {
                    neighbor_labels[n] = l;
                    n += 1;
                }
            };
            if x > 0 {
                push(labels[y * w + x - 1]);
            }
            if y > 0 {
                push(labels[(y - 1) * w + x]);
                if matches!(connectivity, Connectivity::Eight) {
                    if x > 0 {
                        push(labels[(y - 1) * w + x - 1]);
                    }
                    if x + 1 < w {
                        push(labels[(y - 1) * w + x + 1]);
                    }
                }
            }
            if n == 0 {
                let fresh = parent.len() as u32;
                parent.push(fresh);
                labels[y * w + x] = fresh;
            } else {
                let mut min_root = u32::MAX;
                for &l in &neighbor_labels[..n] {
                    min_root = min_root.min(find(&mut parent, l));
                }
                labels[y * w + x] = min_root;
                for &l in &neighbor_labels[..n] {
                    let r = find(&mut parent, l);
                    parent[r as usize] = min_root;
                }
            }
        }
    }

    // Second pass: compress to dense ids in scan order and accumulate stats.
    let mut dense: Vec<u32> = vec![0; parent.len()];
    let mut table = ComponentTable::default();
    for y in 0..h {
        for x in 0..w {
            let l = labels[y * w + x];
            if l == 0 {
                continue;
            }
            let root = find(&mut parent, l);
            let id = if dense[root as usize] != 0 {
                dense[root as usize]
            } else {
                let id = table.components.len() as u32 + 1;
                dense[root as usize] = id;
                table.components.push(Component {
                    id,
                    area: 0,
                    bbox: (x, y, x, y),
                });
                id
            };
            labels[y * w + x] = id;
            let c = &mut table.components[(id - 1) as usize];
            c.area += 1;
            c.bbox.0 = c.bbox.0.min(x);
            c.bbox.1 = c.bbox.1.min(y);
            c.bbox.2 = c.bbox.2.max(x);
            c.bbox.3 = c.bbox.3.max(y);
        }
    }
    (table, labels)
}

/// Zero out components smaller than `min_area` pixels (8-connectivity).
pub fn remove_small_components(
    mask: &BinaryMask,
    min_area: usize,
) -> Result<BinaryMask, MaskError> {
    if min_area == 0 {
        return Err(MaskError::ZeroMinArea);
    }
    let (table, labels) = connected_components(mask, Connectivity::Eight);
    let keep: Vec<bool> = table.components.iter().map(|c| c.area >= min_area).collect();
    let mut out = BinaryMask::new(mask.width, mask.height);
    for (i, &l) in labels.iter().enumerate() {
        if l != 0 && keep[(l - 1) as usize] {
            out.bits[i] = 1;
        }
    }
    Ok(out)
}

fn dilate(mask: &BinaryMask, radius: usize) -> BinaryMask {
    if radius == 0 {
        return mask.clone();
    }
    let (w, h) = (mask.width, mask.height);
    let r = radius as isize;
    let mut out = BinaryMask::new(w, h);
    for y in 0..h as isize {
        for x in 0..w as isize {
            'scan: for dy in -r..=r {
                let yy = y + dy;
                if yy < 0 || yy >= h as isize {
                    continue;
                }
                for dx in -r..=r {
                    let xx = x + dx;
                    if xx < 0 || xx >= w as isize {
                        continue;
                    }
                    if mask.get(xx as usize, yy as usize) {
                        out.set(x as usize, y as usize, true);
                        break 'scan;
                    }
                }
            }
        }
    }
    out
}

fn erode(mask: &BinaryMask, radius: usize) -> BinaryMask {
    if radius == 0 {
        return mask.clone();
    }
    let (w, h) = (mask.width, mask.height);
    let r = radius as isize;
    let mut out = BinaryMask::new(w, h);
    // Pixels outside the image count as background, so erosion shrinks
    // shapes touching the border.
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut all = true;
            'scan: for dy in -r..=r {
                let yy = y + dy;
                for dx in -r..=r {
                    let xx = x + dx;
                    if yy < 0
                        || yy >= h as isize
                        || xx < 0
                        || xx >= w as isize
                        || !mask.get(xx as usize, yy as usize)
                    {
                        all = false;
                        break 'scan;
                    }
                }
            }
            if all {
                out.set(x as usize, y as usize, true);
            }
        }
    }
    out
}

/// Morphological closing then opening with a square structuring element
/// of side 2*radius+1. Radius 0 is the identity.
pub fn morph_close_open(mask: &BinaryMask, radius: usize) -> BinaryMask {
    if radius == 0 {
        return mask.clone();
    }
    let closed = erode(&dilate(mask, radius), radius);
    dilate(&erode(&closed, radius), radius)
}
