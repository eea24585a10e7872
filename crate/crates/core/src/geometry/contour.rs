//! Moore-neighbour boundary tracing.

use std::collections::VecDeque;

use crate::data::image::Mask;
use crate::error::{Error, Result};
use crate::geometry::polygon::{Point, Polygon};

/// Clockwise on screen, starting west.
const DIRS: [(isize, isize); 8] = [
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
];

fn dir_index(dx: isize, dy: isize) -> usize {
    DIRS.iter()
        .position(|&d| d == (dx, dy))
        .expect("offset is an 8-neighbour")
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContourTrace {
    /// Boundary pixel centres, counterclockwise, first point not repeated.
    pub polygon: Polygon,
    /// Number of 4-connected foreground components in the input mask. Only
    /// the largest is traced; anything above 1 deserves a warning.
    pub components: usize,
}

impl ContourTrace {
    pub fn had_extra_components(&self) -> bool {
        self.components > 1
    }
}

/// Largest 4-connected component (first in raster order on ties) and the
/// total component count.
pub fn largest_component(mask: &Mask) -> (Mask, usize) {
    let (w, h) = (mask.width, mask.height);
    let mut label = vec![0u32; w * h];
    let mut sizes = vec![0usize];
    for start in 0..w * h {
        if mask.data[start] == 0 || label[start] != 0 {
            continue;
        }
        let id = sizes.len() as u32;
        let mut size = 0;
        let mut queue = VecDeque::from([start]);
        label[start] = id;
        while let Some(i) = queue.pop_front() {
            size += 1;
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                if mask.get_signed(x + dx, y + dy) {
                    let j = (y + dy) as usize * w + (x + dx) as usize;
                    if label[j] == 0 {
                        label[j] = id;
                        queue.push_back(j);
                    }
                }
            }
        }
        sizes.push(size);
    }
    let count = sizes.len() - 1;
    let best = (1..sizes.len())
        .max_by(|&a, &b| sizes[a].cmp(&sizes[b]).then(b.cmp(&a)))
        .unwrap_or(0) as u32;
    let data = label.iter().map(|&l| (l == best && best != 0) as u8).collect();
    (Mask { width: w, height: h, data }, count)
}

/// Traces the outer boundary of the largest 4-connected component.
pub fn extract_contour(mask: &Mask) -> Result<ContourTrace> {
    let (component, components) = largest_component(mask);
    if components == 0 {
        return Err(Error::measurement("cannot trace the contour of an empty mask"));
    }
    let start_idx = component
        .data
        .iter()
        .position(|&v| v != 0)
        .expect("component is non-empty");
    let start = (
        (start_idx % mask.width) as isize,
        (start_idx / mask.width) as isize,
    );
    let fg = |(x, y): (isize, isize)| component.get_signed(x, y);

    // state: current pixel and the direction of the background pixel we came from
    let step = |p: (isize, isize), back: usize| -> Option<((isize, isize), usize)> {
        for k in 1..=8 {
            let d = (back + k) % 8;
            let q = (p.0 + DIRS[d].0, p.1 + DIRS[d].1);
            if fg(q) {
                let prev = DIRS[(back + k - 1) % 8];
                let b = (p.0 + prev.0, p.1 + prev.1);
                return Some((q, dir_index(b.0 - q.0, b.1 - q.1)));
            }
        }
        None
    };

    let mut points = vec![start];
    let Some(first) = step(start, 0) else {
        return Ok(ContourTrace {
            polygon: Polygon::new(vec![Point::new(start.0 as f64, start.1 as f64)]),
            components,
        });
    };
    let limit = 4 * component.count() + 8;
    let (mut p, mut back) = first;
    while points.len() <= limit {
        let (next, next_back) = step(p, back).expect("a traced pixel keeps its neighbour");
        if p == start && next == first.0 {
            break;
        }
        points.push(p);
        p = next;
        back = next_back;
    }

    let mut polygon = Polygon::new(
        points
            .iter()
            .map(|&(x, y)| Point::new(x as f64, y as f64))
            .collect(),
    );
    if polygon.signed_area() < 0.0 {
        polygon.points[1..].reverse();
    }
    Ok(ContourTrace {
        polygon,
        components,
    })
}
