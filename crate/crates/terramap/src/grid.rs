//! Dense row-major grid storage and the shared region-growing primitive.

/// A dense square grid indexed by `(row, col)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2<T> {
    side: usize,
    data: Vec<T>,
}

impl<T: Clone> Grid2<T> {
    pub fn filled(side: usize, value: T) -> Self {
        Grid2 {
            side,
            data: vec![value; side * side],
        }
    }
}

impl<T> Grid2<T> {
    pub fn from_vec(side: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), side * side, "grid data must be side*side");
        Grid2 { side, data }
    }

    #[inline]
    pub fn side(&self) -> usize {
        self.side
    }

    #[inline]
    pub fn idx(&self, row: usize, col: usize) -> usize {
        debug_assert!(row < self.side && col < self.side);
        row * self.side + col
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> &T {
        &self.data[self.idx(row, col)]
    }

    #[inline]
    pub fn get_mut(&mut self, row: usize, col: usize) -> &mut T {
        let i = self.idx(row, col);
        &mut self.data[i]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    /// Iterate `(row, col, &value)` in row-major order.
    pub fn iter_cells(&self) -> impl Iterator<Item = (usize, usize, &T)> {
        let side = self.side;
        self.data
            .iter()
            .enumerate()
            .map(move |(i, v)| (i / side, i % side, v))
    }
}

/// The 4-neighborhood of `(row, col)` inside a `side`×`side` grid.
pub fn neighbors4(side: usize, row: usize, col: usize) -> impl Iterator<Item = (usize, usize)> {
    const OFFS: [(isize, isize); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];
    OFFS.iter().filter_map(move |&(dr, dc)| {
        let r = row as isize + dr;
        let c = col as isize + dc;
        if r >= 0 && c >= 0 && (r as usize) < side && (c as usize) < side {
            Some((r as usize, c as usize))
        } else {
            None
        }
    })
}

/// Flood fill over 4-adjacent cells whose connecting edge passes `edge_ok`.
///
/// Both the traversability cost map and ground-truth finalization perform
/// their region growing through this single routine; only the edge predicate
/// differs. Returns a boolean mask of reached cells. Seeds outside the grid
/// are ignored.
pub fn grow_region<F>(side: usize, seeds: &[(usize, usize)], mut edge_ok: F) -> Grid2<bool>
where
    F: FnMut((usize, usize), (usize, usize)) -> bool,
{
    let mut reached = Grid2::filled(side, false);
    let mut stack: Vec<(usize, usize)> = Vec::new();
    for &(r, c) in seeds {
        if r < side && c < side && !*reached.get(r, c) {
            *reached.get_mut(r, c) = true;
            stack.push((r, c));
        }
    }
    while let Some((r, c)) = stack.pop() {
        for (nr, nc) in neighbors4(side, r, c) {
            if !*reached.get(nr, nc) && edge_ok((r, c), (nr, nc)) {
                *reached.get_mut(nr, nc) = true;
                stack.push((nr, nc));
            }
        }
    }
    reached
}
