use crate::sum::CompensatedSum;

/// Dense storage for probability mass over `(c, s, r)` restricted to a
/// bounding box in `(c, s)`. `r` runs over `0..depth` and is innermost.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct MassGrid {
    c_lo: usize,
    nc: usize,
    s_lo: usize,
    ns: usize,
    depth: usize,
    cells: Vec<f64>,
}

impl MassGrid {
    /// Unit mass at `(0, 0, 0)`.
    pub(crate) fn origin(depth: usize) -> Self {
        let mut g = Self::zeros(0, 1, 0, 1, depth);
        g.cells[0] = 1.0;
        g
    }

    pub(crate) fn zeros(c_lo: usize, nc: usize, s_lo: usize, ns: usize, depth: usize) -> Self {
        Self {
            c_lo,
            nc,
            s_lo,
            ns,
            depth,
            cells: vec![0.0; nc * ns * depth],
        }
    }

    pub(crate) fn depth(&self) -> usize {
        self.depth
    }

    pub(crate) fn c_bounds(&self) -> (usize, usize) {
        (self.c_lo, self.nc)
    }

    pub(crate) fn s_bounds(&self) -> (usize, usize) {
        (self.s_lo, self.ns)
    }

    pub(crate) fn is_empty(&self) -> bool {
        self.cells.iter().all(|&x| x == 0.0)
    }

    #[inline]
    fn offset(&self, c: usize, s: usize) -> Option<usize> {
        let dc = c.checked_sub(self.c_lo)?;
        let ds = s.checked_sub(self.s_lo)?;
        (dc < self.nc && ds < self.ns).then(|| (dc * self.ns + ds) * self.depth)
    }

    pub(crate) fn get(&self, c: usize, s: usize, r: usize) -> f64 {
        match self.offset(c, s) {
            Some(o) if r < self.depth => self.cells[o + r],
            _ => 0.0,
        }
    }

    /// Panics when `(c, s)` lies outside the box; callers size the box first.
    #[inline]
    pub(crate) fn add(&mut self, c: usize, s: usize, r: usize, v: f64) {
        let o = self.offset(c, s).expect("state outside grid bounds");
        self.cells[o + r] += v;
    }

    /// Visits every cell as `(c, s, masses_by_r)` in ascending `(c, s)` order.
    pub(crate) fn for_each_cell(&self, mut f: impl FnMut(usize, usize, &[f64])) {
        if self.depth == 0 {
            return;
        }
        for (i, chunk) in self.cells.chunks_exact(self.depth).enumerate() {
            f(self.c_lo + i / self.ns, self.s_lo + i % self.ns, chunk);
        }
    }

    pub(crate) fn total(&self) -> f64 {
        self.cells
            .iter()
            .copied()
            .collect::<CompensatedSum>()
            .value()
    }

    /// Zeroes entries below `floor` and returns the mass removed.
    pub(crate) fn prune(&mut self, floor: f64) -> f64 {
        if floor <= 0.0 {
            return 0.0;
        }
        let mut dropped = CompensatedSum::default();
        for x in self.cells.iter_mut() {
            if *x != 0.0 && *x < floor {
                dropped.add(*x);
                *x = 0.0;
            }
        }
        dropped.value()
    }

    /// Shrinks the box to the smallest one holding all non-zero cells.
    pub(crate) fn trim(&mut self) {
        let (mut c_min, mut c_max, mut s_min, mut s_max) = (usize::MAX, 0, usize::MAX, 0);
        self.for_each_cell(|c, s, row| {
            if row.iter().any(|&x| x != 0.0) {
                c_min = c_min.min(c);
                c_max = c_max.max(c);
                s_min = s_min.min(s);
                s_max = s_max.max(s);
            }
        });
        if c_min == usize::MAX {
            *self = Self::zeros(self.c_lo, 0, self.s_lo, 0, self.depth);
            return;
        }
        let (nc, ns) = (c_max - c_min + 1, s_max - s_min + 1);
        if (c_min, nc, s_min, ns) == (self.c_lo, self.nc, self.s_lo, self.ns) {
            return;
        }
        let mut out = Self::zeros(c_min, nc, s_min, ns, self.depth);
        for c in c_min..=c_max {
            for s in s_min..=s_max {
                let src = self.offset(c, s).expect("inside old box");
                let dst = out.offset(c, s).expect("inside new box");
                out.cells[dst..dst + self.depth]
                    .copy_from_slice(&self.cells[src..src + self.depth]);
            }
        }
        *self = out;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trim_keeps_mass_and_shrinks_box() {
        let mut g = MassGrid::zeros(0, 5, 0, 5, 2);
        g.add(2, 3, 1, 0.25);
        g.add(3, 1, 0, 0.5);
        g.trim();
        assert_eq!(g.c_bounds(), (2, 2));
        assert_eq!(g.s_bounds(), (1, 3));
        assert_eq!(g.get(2, 3, 1), 0.25);
        assert_eq!(g.get(3, 1, 0), 0.5);
        assert_eq!(g.get(0, 0, 0), 0.0);
        assert_eq!(g.total(), 0.75);
    }

    #[test]
    fn prune_reports_dropped_mass() {
        let mut g = MassGrid::origin(3);
        g.add(0, 0, 1, 1e-14);
        g.add(0, 0, 2, 2e-14);
        let dropped = g.prune(1e-12);
        assert!((dropped - 3e-14).abs() < 1e-28);
        assert_eq!(g.get(0, 0, 1), 0.0);
        assert_eq!(g.total(), 1.0);
        assert_eq!(g.prune(0.0), 0.0);
    }

    #[test]
    fn trimming_an_empty_grid_leaves_nothing() {
        let mut g = MassGrid::zeros(4, 3, 2, 3, 1);
        g.trim();
        assert!(g.is_empty());
        let mut visited = 0;
        g.for_each_cell(|_, _, _| visited += 1);
        assert_eq!(visited, 0);
    }
}
