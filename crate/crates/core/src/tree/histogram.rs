use crate::dataset::BinnedDataset;
use crate::objective::GradHess;
use crate::parallel::{map_indices, Execution};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BinStat {
    pub grad: f64,
    pub hess: f64,
    pub count: u32,
}

/// Per-bin gradient, hessian and row-count sums of one feature over the
/// rows of one leaf.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Histogram {
    pub bins: Vec<BinStat>,
}

impl Histogram {
    pub fn total(&self) -> BinStat {
        self.bins.iter().fold(BinStat::default(), |acc, b| BinStat {
            grad: acc.grad + b.grad,
            hess: acc.hess + b.hess,
            count: acc.count + b.count,
        })
    }
}

fn build_one(column: &[u16], bins: usize, rows: &[u32], gh: &[GradHess]) -> Histogram {
    let mut out = vec![BinStat::default(); bins];
    for &r in rows {
        let r = r as usize;
        let b = &mut out[column[r] as usize];
        let g = gh[r];
        b.grad += g.grad;
        b.hess += g.hess;
        b.count += 1;
    }
    Histogram { bins: out }
}

/// One histogram per feature over `rows`. Features are independent, so
/// they are built in parallel when `exec` allows.
pub fn build_histograms(
    data: &BinnedDataset,
    rows: &[u32],
    gh: &[GradHess],
    exec: Execution,
) -> Vec<Histogram> {
    let counts = data.bin_counts();
    map_indices(exec, data.feature_count(), |f| {
        build_one(data.column(f), counts[f] as usize, rows, gh)
    })
}

/// `parent - child`, i.e. the histograms of the child's sibling.
pub fn subtract(parent: &[Histogram], child: &[Histogram]) -> Vec<Histogram> {
    parent
        .iter()
        .zip(child)
        .map(|(p, c)| Histogram {
            bins: p
                .bins
                .iter()
                .zip(&c.bins)
                .map(|(a, b)| match a.count - b.count {
                    0 => BinStat::default(),
                    count => BinStat {
                        grad: a.grad - b.grad,
                        hess: a.hess - b.hess,
                        count,
                    },
                })
                .collect(),
        })
        .collect()
}
