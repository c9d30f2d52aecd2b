//! Connected-set morphology on 8-bit rasters, 8-connectivity throughout.

use std::collections::VecDeque;

fn neighbors8(i: usize, width: usize, height: usize) -> impl Iterator<Item = usize> {
    let (x, y) = ((i % width) as isize, (i / width) as isize);
    (-1isize..=1)
        .flat_map(move |dy| (-1isize..=1).map(move |dx| (dx, dy)))
        .filter(|&(dx, dy)| dx != 0 || dy != 0)
        .filter_map(move |(dx, dy)| {
            let (nx, ny) = (x + dx, y + dy);
            (nx >= 0 && ny >= 0 && (nx as usize) < width && (ny as usize) < height)
                .then(|| ny as usize * width + nx as usize)
        })
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    let mut root = i;
    while parent[root] != root {
        root = parent[root];
    }
    while parent[i] != root {
        let next = parent[i];
        parent[i] = root;
        i = next;
    }
    root
}

/// Area opening: flattens every bright connected component smaller than
/// `min_area` pixels down to its surrounding level.
///
/// Union-find over pixels in decreasing gray order; a component stops
/// absorbing neighbors once it reaches `min_area`.
pub fn area_open(values: &[u8], width: usize, height: usize, min_area: usize) -> Vec<u8> {
    let n = values.len();
    assert_eq!(n, width * height);
    if min_area <= 1 || n == 0 {
        return values.to_vec();
    }

    // counting sort, decreasing gray, stable in index
    let mut counts = [0usize; 256];
    for &v in values {
        counts[v as usize] += 1;
    }
    let mut start = [0usize; 256];
    let mut acc = 0;
    for v in (0..256).rev() {
        start[v] = acc;
        acc += counts[v];
    }
    let mut order = vec![0usize; n];
    for (i, &v) in values.iter().enumerate() {
        order[start[v as usize]] = i;
        start[v as usize] += 1;
    }

    const UNSEEN: usize = usize::MAX;
    let mut parent = vec![UNSEEN; n];
    let mut area = vec![0usize; n];

    for &p in &order {
        parent[p] = p;
        area[p] = 1;
        for q in neighbors8(p, width, height) {
            if parent[q] == UNSEEN {
                continue;
            }
            let r = find(&mut parent, q);
            if r == p {
                continue;
            }
            if values[r] == values[p] || area[r] < min_area {
                area[p] = (area[p] + area[r]).min(min_area);
                parent[r] = p;
            } else {
                area[p] = min_area;
            }
        }
    }

    // parents are always processed after their children
    let mut out = vec![0u8; n];
    for &p in order.iter().rev() {
        out[p] = if parent[p] == p {
            values[p]
        } else {
            out[parent[p]]
        };
    }
    out
}

/// Area closing: the dual of [`area_open`], filling dark components
/// smaller than `min_area`.
pub fn area_close(values: &[u8], width: usize, height: usize, min_area: usize) -> Vec<u8> {
    let inverted: Vec<u8> = values.iter().map(|v| 255 - v).collect();
    area_open(&inverted, width, height, min_area)
        .into_iter()
        .map(|v| 255 - v)
        .collect()
}

/// Binary reconstruction by dilation: the connected components of `mask`
/// that contain at least one `seed` pixel.
pub fn reconstruct(seed: &[bool], mask: &[bool], width: usize, height: usize) -> Vec<bool> {
    assert_eq!(seed.len(), width * height);
    assert_eq!(mask.len(), width * height);
    let mut out = vec![false; mask.len()];
    let mut queue: VecDeque<usize> = VecDeque::new();
    for i in 0..mask.len() {
        if seed[i] && mask[i] && !out[i] {
            out[i] = true;
            queue.push_back(i);
        }
    }
    while let Some(i) = queue.pop_front() {
        for j in neighbors8(i, width, height) {
            if mask[j] && !out[j] {
                out[j] = true;
                queue.push_back(j);
            }
        }
    }
    out
}
