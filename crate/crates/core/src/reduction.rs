//! Static condensation of the free-DoF stiffness matrix onto the active
//! (interface) DoFs.
//!
//! With the free DoFs partitioned into active (`a`) and passive/condensable
//! (`c`) sets, the condensed stiffness is the Schur complement
//!
//! ```text
//! K̄ = K_aa − K_ac K_cc⁻¹ K_ca
//! ```
//!
//! and an active-DoF displacement `ū` is expanded back to the full system by
//! the static recovery `u_c = −K_cc⁻¹ K_ca ū` (zero forces on the passive
//! DoFs). `K_cc` is always factorized (banded or dense Cholesky), never
//! inverted explicitly; the recovery matrix `W = −K_cc⁻¹K_ca` is kept so
//! every later expansion is a single matrix–vector product.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::banded::BandMatrix;
use crate::error::Error;
use crate::model::GroundStructure;
use crate::Result;

/// Partition of the free DoFs into active and passive index sets.
///
/// Indices refer to the free system (after support elimination). `active`
/// order defines the ordering of the condensed matrix and of every mode
/// vector; `passive` is the ascending complement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DofPartition {
    pub active: Vec<usize>,
    pub passive: Vec<usize>,
}

impl DofPartition {
    /// Build from the active list; the passive set is the ascending
    /// complement of `active` in `0..n_free`.
    pub fn new(active: Vec<usize>, n_free: usize) -> Result<Self> {
        if active.is_empty() {
            return Err(Error::InvalidDofSelection("no active DoFs".into()));
        }
        if active.len() >= n_free {
            return Err(Error::InvalidDofSelection(format!(
                "{} active DoFs leave no passive DoFs (free system has {})",
                active.len(),
                n_free
            )));
        }
        let mut is_active = vec![false; n_free];
        for &d in &active {
            if d >= n_free {
                return Err(Error::InvalidDofSelection(format!(
                    "active DoF {d} exceeds free DoF count {n_free}"
                )));
            }
            if std::mem::replace(&mut is_active[d], true) {
                return Err(Error::InvalidDofSelection(format!(
                    "active DoF {d} listed twice"
                )));
            }
        }
        let passive = (0..n_free).filter(|&d| !is_active[d]).collect();
        Ok(Self { active, passive })
    }

    pub fn n_active(&self) -> usize {
        self.active.len()
    }

    pub fn n_free(&self) -> usize {
        self.active.len() + self.passive.len()
    }
}

/// Dense partition blocks of a free-DoF stiffness matrix.
#[derive(Debug, Clone)]
pub struct Blocks {
    pub kaa: DMatrix<f64>,
    pub kac: DMatrix<f64>,
    pub kca: DMatrix<f64>,
    pub kcc: DMatrix<f64>,
    pub partition: DofPartition,
}

/// Extract the four partition blocks from a dense free-DoF matrix.
pub fn partition(k: &DMatrix<f64>, part: &DofPartition) -> Result<Blocks> {
    let n = part.n_free();
    if k.nrows() != n || k.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: k.nrows(),
            context: "stiffness matrix vs partition",
        });
    }
    let pick = |rows: &[usize], cols: &[usize]| {
        DMatrix::from_fn(rows.len(), cols.len(), |i, j| k[(rows[i], cols[j])])
    };
    Ok(Blocks {
        kaa: pick(&part.active, &part.active),
        kac: pick(&part.active, &part.passive),
        kca: pick(&part.passive, &part.active),
        kcc: pick(&part.passive, &part.passive),
        partition: part.clone(),
    })
}

/// Condensed system: the reduced stiffness and the static recovery map.
#[derive(Debug, Clone)]
pub struct CondensedSystem {
    /// Condensed (q×q, symmetric) stiffness matrix.
    pub kbar: DMatrix<f64>,
    /// Static recovery `W = −K_cc⁻¹ K_ca`; expansion is `u_c = W ū`.
    pub recovery: DMatrix<f64>,
    pub partition: DofPartition,
}

impl CondensedSystem {
    /// Expand an active-DoF vector to the full free system (active entries
    /// scattered in place, passive entries recovered statically).
    pub fn expand(&self, vbar: &DVector<f64>) -> Result<DVector<f64>> {
        let q = self.partition.n_active();
        if vbar.len() != q {
            return Err(Error::DimensionMismatch {
                expected: q,
                got: vbar.len(),
                context: "condensed vector",
            });
        }
        let uc = &self.recovery * vbar;
        let mut full = DVector::zeros(self.partition.n_free());
        for (i, &d) in self.partition.active.iter().enumerate() {
            full[d] = vbar[i];
        }
        for (i, &d) in self.partition.passive.iter().enumerate() {
            full[d] = uc[i];
        }
        Ok(full)
    }

    /// Expand several active-DoF column vectors at once.
    pub fn expand_columns(&self, vbars: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let mut out = DMatrix::zeros(self.partition.n_free(), vbars.ncols());
        for (c, col) in vbars.column_iter().enumerate() {
            let full = self.expand(&DVector::from_column_slice(col.as_slice()))?;
            out.set_column(c, &full);
        }
        Ok(out)
    }
}

/// Condense dense partition blocks via a dense Cholesky of `K_cc`.
pub fn condense(blocks: &Blocks) -> Result<CondensedSystem> {
    let chol = Cholesky::new(blocks.kcc.clone())
        .ok_or(Error::NotPositiveDefinite("passive block K_cc"))?;
    let w = chol.solve(&blocks.kca);
    let kbar = &blocks.kaa - &blocks.kac * &w;
    Ok(CondensedSystem {
        kbar: symmetrized(kbar),
        recovery: -w,
        partition: blocks.partition.clone(),
    })
}

/// Expand an active-DoF vector through dense blocks (one fresh `K_cc` solve;
/// the driver keeps the recovery matrix instead, this is the oracle path).
pub fn expand(vbar: &DVector<f64>, blocks: &Blocks) -> Result<DVector<f64>> {
    let chol = Cholesky::new(blocks.kcc.clone())
        .ok_or(Error::NotPositiveDefinite("passive block K_cc"))?;
    let uc = -chol.solve(&(&blocks.kca * vbar));
    let mut full = DVector::zeros(blocks.partition.n_free());
    for (i, &d) in blocks.partition.active.iter().enumerate() {
        full[d] = vbar[i];
    }
    for (i, &d) in blocks.partition.passive.iter().enumerate() {
        full[d] = uc[i];
    }
    Ok(full)
}

/// Partitioned assembly of `K(x)`: dense active blocks plus the passive
/// block in band storage, ready for condensation.
#[derive(Debug, Clone)]
pub struct PartitionedSystem {
    pub kaa: DMatrix<f64>,
    pub kca: DMatrix<f64>,
    pub kcc: BandMatrix,
    pub partition: DofPartition,
}

/// Classification of each free DoF for scatter-assembly.
#[derive(Debug, Clone, Copy)]
enum DofClass {
    Active(usize),
    Passive(usize),
}

/// Precomputed assembly layout for a fixed ground structure + partition.
///
/// Owns the free-DoF classification and the passive bandwidth so the
/// per-iteration assembly allocates only the block matrices.
#[derive(Debug, Clone)]
pub struct Assembler {
    classes: Vec<DofClass>,
    partition: DofPartition,
    bandwidth: usize,
}

impl Assembler {
    pub fn new(gs: &GroundStructure, part: &DofPartition) -> Result<Self> {
        if part.n_free() != gs.n_free() {
            return Err(Error::DimensionMismatch {
                expected: gs.n_free(),
                got: part.n_free(),
                context: "partition vs ground structure",
            });
        }
        let mut classes = vec![DofClass::Passive(0); gs.n_free()];
        for (i, &d) in part.active.iter().enumerate() {
            classes[d] = DofClass::Active(i);
        }
        for (i, &d) in part.passive.iter().enumerate() {
            classes[d] = DofClass::Passive(i);
        }
        // Exact passive bandwidth of this connectivity.
        let mut bandwidth = 0usize;
        for e in 0..gs.n_elements() {
            let map = gs.element_free_dofs(e);
            let passive: Vec<usize> = map
                .iter()
                .flatten()
                .filter_map(|&f| match classes[f] {
                    DofClass::Passive(i) => Some(i),
                    DofClass::Active(_) => None,
                })
                .collect();
            for &i in &passive {
                for &j in &passive {
                    bandwidth = bandwidth.max(i.abs_diff(j));
                }
            }
        }
        Ok(Self {
            classes,
            partition: part.clone(),
            bandwidth,
        })
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    /// Assemble the partitioned `K(x)` blocks.
    pub fn assemble(&self, gs: &GroundStructure, x: &[f64]) -> Result<PartitionedSystem> {
        if x.len() != gs.n_elements() {
            return Err(Error::DimensionMismatch {
                expected: gs.n_elements(),
                got: x.len(),
                context: "design vector",
            });
        }
        let q = self.partition.n_active();
        let p = self.partition.passive.len();
        let mut kaa = DMatrix::<f64>::zeros(q, q);
        let mut kca = DMatrix::<f64>::zeros(p, q);
        let mut kcc = BandMatrix::zeros(p, self.bandwidth);
        for (e, ke) in gs.element_stiffnesses.iter().enumerate() {
            let xe = x[e];
            let map = gs.element_free_dofs(e);
            for (r, &fr) in map.iter().enumerate() {
                let Some(fr) = fr else { continue };
                let cr = self.classes[fr];
                for (c, &fc) in map.iter().enumerate() {
                    let Some(fc) = fc else { continue };
                    let v = xe * ke[(r, c)];
                    match (cr, self.classes[fc]) {
                        (DofClass::Active(i), DofClass::Active(j)) => kaa[(i, j)] += v,
                        (DofClass::Passive(i), DofClass::Active(j)) => kca[(i, j)] += v,
                        (DofClass::Passive(i), DofClass::Passive(j)) if i >= j => {
                            kcc.add(i, j, v)
                        }
                        _ => {} // K_ac and upper K_cc follow by symmetry
                    }
                }
            }
        }
        Ok(PartitionedSystem {
            kaa,
            kca,
            kcc,
            partition: self.partition.clone(),
        })
    }
}

/// Condense a partitioned (banded) assembly.
pub fn condense_banded(sys: PartitionedSystem) -> Result<CondensedSystem> {
    let chol = sys.kcc.cholesky()?;
    let w = chol.solve_matrix(&sys.kca);
    let kbar = &sys.kaa - sys.kca.transpose() * &w;
    Ok(CondensedSystem {
        kbar: symmetrized(kbar),
        recovery: -w,
        partition: sys.partition,
    })
}

fn symmetrized(m: DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    0.5 * (m + t)
}
