//! Sparse Fock-state representation of few-photon states over labeled
//! bosonic modes.
//!
//! A mode is a (spatial path, polarization) pair registered in a
//! [`ModeRegistry`]. States are sparse maps from photon-number occupations to
//! complex amplitudes; every occupation in one state carries the same total
//! photon number. Unitaries act on a subset of modes through the
//! creation-operator substitution `a†_i → Σ_j U_ji a†_j`, with the bosonic
//! `√n!` factors carried explicitly so that multi-photon bunching
//! (Hong-Ou-Mandel and friends) is exact.
//!
//! Amplitudes below [`AMPLITUDE_EPS`] are pruned after every evolution step to
//! keep term counts bounded and results deterministic. Global phase is never
//! normalized away; comparisons should use overlaps.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

use crate::linalg::CMat;

/// Hard upper bound on registered modes (16 spatial paths × 2 polarizations).
pub const MAX_MODES: usize = 32;
/// Default total-photon cutoff enforced at state construction.
pub const DEFAULT_PHOTON_CUTOFF: u32 = 3;
/// Largest supported total-photon cutoff (multi-pair noise studies).
pub const MAX_PHOTON_CUTOFF: u32 = 6;
/// Amplitudes with modulus below this are dropped after each element.
pub const AMPLITUDE_EPS: f64 = 1e-12;
/// Maximum tolerated deviation of `U†U` from the identity.
pub const UNITARITY_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum FockError {
    #[error("too many modes: {0} paths exceed the {MAX_MODES}-mode registry limit")]
    TooManyModes(usize),
    #[error("duplicate spatial path `{0}` in mode registry")]
    DuplicatePath(String),
    #[error("unknown spatial path `{0}`")]
    UnknownPath(String),
    #[error("states use different mode registries")]
    RegistryMismatch,
    #[error("overlapping mode labels: path `{0}` present in both factors")]
    OverlappingModes(String),
    #[error("photon number mismatch: {0} vs {1}")]
    PhotonNumberMismatch(u32, u32),
    #[error("total photon number {0} exceeds cutoff {1}")]
    CutoffExceeded(u32, u32),
    #[error("photon cutoff {0} outside supported range 0..={MAX_PHOTON_CUTOFF}")]
    UnsupportedCutoff(u32),
    #[error("matrix is not unitary (defect {0:.3e})")]
    NotUnitary(f64),
    #[error("unitary mode list is empty or repeats a mode")]
    BadModeList,
    #[error("matrix dimension {0} does not match mode count {1}")]
    DimensionMismatch(usize, usize),
    #[error("cannot normalize a state with zero norm")]
    ZeroNorm,
    #[error("registry `{0}` is not contained in the embedding target")]
    NotEmbeddable(String),
}

/// Photon polarization along the horizontal/vertical axis pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Polarization {
    H,
    V,
}

impl Polarization {
    pub const BOTH: [Polarization; 2] = [Polarization::H, Polarization::V];

    fn offset(self) -> usize {
        match self {
            Polarization::H => 0,
            Polarization::V => 1,
        }
    }
}

impl fmt::Display for Polarization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Polarization::H => "H",
            Polarization::V => "V",
        })
    }
}

/// Index of a registered spatial path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PathId(usize);

/// Index of a registered (path, polarization) mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModeId(usize);

impl ModeId {
    pub(crate) fn index(self) -> usize {
        self.0
    }
}

/// Registry of spatial paths; every path carries an H and a V mode.
#[derive(Debug, PartialEq, Eq)]
pub struct ModeRegistry {
    paths: Vec<String>,
}

impl ModeRegistry {
    pub fn new<I, S>(paths: I) -> Result<Arc<Self>, FockError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let paths: Vec<String> = paths.into_iter().map(Into::into).collect();
        if 2 * paths.len() > MAX_MODES {
            return Err(FockError::TooManyModes(paths.len()));
        }
        for (i, p) in paths.iter().enumerate() {
            if paths[..i].contains(p) {
                return Err(FockError::DuplicatePath(p.clone()));
            }
        }
        Ok(Arc::new(ModeRegistry { paths }))
    }

    pub fn path(&self, name: &str) -> Option<PathId> {
        self.paths.iter().position(|p| p == name).map(PathId)
    }

    pub fn require_path(&self, name: &str) -> Result<PathId, FockError> {
        self.path(name)
            .ok_or_else(|| FockError::UnknownPath(name.to_string()))
    }

    pub fn path_name(&self, id: PathId) -> &str {
        &self.paths[id.0]
    }

    pub fn path_count(&self) -> usize {
        self.paths.len()
    }

    pub fn mode_count(&self) -> usize {
        2 * self.paths.len()
    }

    pub fn mode(&self, path: PathId, pol: Polarization) -> ModeId {
        ModeId(2 * path.0 + pol.offset())
    }

    pub fn paths(&self) -> impl Iterator<Item = (PathId, &str)> {
        self.paths
            .iter()
            .enumerate()
            .map(|(i, n)| (PathId(i), n.as_str()))
    }

    /// Union of two registries with disjoint path names.
    pub fn merge(&self, other: &ModeRegistry) -> Result<Arc<Self>, FockError> {
        for p in &other.paths {
            if self.paths.contains(p) {
                return Err(FockError::OverlappingModes(p.clone()));
            }
        }
        let mut paths = self.paths.clone();
        paths.extend(other.paths.iter().cloned());
        ModeRegistry::new(paths)
    }
}

/// Photon counts per registered mode; keys of the sparse amplitude map.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FockOccupation(Vec<u8>);

impl FockOccupation {
    pub fn vacuum(registry: &ModeRegistry) -> Self {
        FockOccupation(vec![0; registry.mode_count()])
    }

    pub fn count(&self, mode: ModeId) -> u32 {
        self.0[mode.0] as u32
    }

    pub fn total(&self) -> u32 {
        self.0.iter().map(|&n| n as u32).sum()
    }

    /// Copy with the listed modes emptied.
    pub fn cleared(&self, modes: &[ModeId]) -> FockOccupation {
        let mut v = self.0.clone();
        for m in modes {
            v[m.0] = 0;
        }
        FockOccupation(v)
    }

    fn set(&mut self, mode: ModeId, n: u32) {
        self.0[mode.0] = n as u8;
    }
}

const FACTORIALS: [f64; 13] = [
    1.0,
    1.0,
    2.0,
    6.0,
    24.0,
    120.0,
    720.0,
    5040.0,
    40320.0,
    362880.0,
    3628800.0,
    39916800.0,
    479001600.0,
];

fn factorial(n: u32) -> f64 {
    FACTORIALS[n as usize]
}

/// A unitary acting on an ordered subset of registered modes.
///
/// `matrix()[r][c]` is the amplitude taking an input photon in `modes()[c]`
/// to `modes()[r]`.
#[derive(Debug, Clone)]
pub struct ModeUnitary {
    registry: Arc<ModeRegistry>,
    modes: Vec<ModeId>,
    mat: CMat,
}

impl ModeUnitary {
    pub fn new(
        registry: Arc<ModeRegistry>,
        modes: Vec<ModeId>,
        rows: &[Vec<Complex64>],
    ) -> Result<Self, FockError> {
        if modes.is_empty() {
            return Err(FockError::BadModeList);
        }
        for (i, m) in modes.iter().enumerate() {
            if m.0 >= registry.mode_count() || modes[..i].contains(m) {
                return Err(FockError::BadModeList);
            }
        }
        if rows.len() != modes.len() || rows.iter().any(|r| r.len() != modes.len()) {
            return Err(FockError::DimensionMismatch(rows.len(), modes.len()));
        }
        let mat = CMat::from_rows(rows);
        let defect = mat.unitarity_defect();
        if defect >= UNITARITY_TOL {
            return Err(FockError::NotUnitary(defect));
        }
        Ok(ModeUnitary {
            registry,
            modes,
            mat,
        })
    }

    pub fn registry(&self) -> &Arc<ModeRegistry> {
        &self.registry
    }

    pub fn modes(&self) -> &[ModeId] {
        &self.modes
    }

    pub fn dim(&self) -> usize {
        self.modes.len()
    }

    pub fn entry(&self, r: usize, c: usize) -> Complex64 {
        self.mat[(r, c)]
    }

    pub fn adjoint(&self) -> ModeUnitary {
        ModeUnitary {
            registry: self.registry.clone(),
            modes: self.modes.clone(),
            mat: self.mat.adjoint(),
        }
    }

    /// `then ∘ self` over an identical mode list.
    pub fn compose(&self, then: &ModeUnitary) -> Result<ModeUnitary, FockError> {
        if !Arc::ptr_eq(&self.registry, &then.registry) && self.registry != then.registry {
            return Err(FockError::RegistryMismatch);
        }
        if self.modes != then.modes {
            return Err(FockError::BadModeList);
        }
        Ok(ModeUnitary {
            registry: self.registry.clone(),
            modes: self.modes.clone(),
            mat: then.mat.mul(&self.mat),
        })
    }

    /// Expand to the full single-photon transfer matrix over all registered
    /// modes (identity outside `modes`).
    pub(crate) fn embed_full(&self) -> CMat {
        let n = self.registry.mode_count();
        let mut full = CMat::identity(n);
        for (r, mr) in self.modes.iter().enumerate() {
            for (c, mc) in self.modes.iter().enumerate() {
                full[(mr.0, mc.0)] = self.mat[(r, c)];
            }
        }
        full
    }
}

/// A pure few-photon state: sparse complex amplitudes over occupations with a
/// common total photon number.
#[derive(Debug, Clone)]
pub struct PhotonicState {
    registry: Arc<ModeRegistry>,
    photons: u32,
    cutoff: u32,
    amps: BTreeMap<FockOccupation, Complex64>,
}

impl PhotonicState {
    pub fn vacuum(registry: Arc<ModeRegistry>) -> Self {
        let mut amps = BTreeMap::new();
        amps.insert(FockOccupation::vacuum(&registry), Complex64::ONE);
        PhotonicState {
            registry,
            photons: 0,
            cutoff: DEFAULT_PHOTON_CUTOFF,
            amps,
        }
    }

    /// Basis ket with the given per-mode photon counts, default cutoff.
    pub fn basis(
        registry: Arc<ModeRegistry>,
        occupied: &[(PathId, Polarization, u32)],
    ) -> Result<Self, FockError> {
        Self::basis_with_cutoff(registry, occupied, DEFAULT_PHOTON_CUTOFF)
    }

    pub fn basis_with_cutoff(
        registry: Arc<ModeRegistry>,
        occupied: &[(PathId, Polarization, u32)],
        cutoff: u32,
    ) -> Result<Self, FockError> {
        if cutoff > MAX_PHOTON_CUTOFF {
            return Err(FockError::UnsupportedCutoff(cutoff));
        }
        let mut occ = FockOccupation::vacuum(&registry);
        for &(path, pol, n) in occupied {
            let mode = registry.mode(path, pol);
            occ.set(mode, occ.count(mode) + n);
        }
        let photons = occ.total();
        if photons > cutoff {
            return Err(FockError::CutoffExceeded(photons, cutoff));
        }
        let mut amps = BTreeMap::new();
        amps.insert(occ, Complex64::ONE);
        Ok(PhotonicState {
            registry,
            photons,
            cutoff,
            amps,
        })
    }

    /// One photon on `path` in the polarization state `alpha|H⟩ + beta|V⟩`.
    pub fn single_photon(
        registry: Arc<ModeRegistry>,
        path: PathId,
        alpha: Complex64,
        beta: Complex64,
    ) -> Result<Self, FockError> {
        let mut amps = BTreeMap::new();
        if alpha.norm() > 0.0 {
            let mut occ = FockOccupation::vacuum(&registry);
            occ.set(registry.mode(path, Polarization::H), 1);
            amps.insert(occ, alpha);
        }
        if beta.norm() > 0.0 {
            let mut occ = FockOccupation::vacuum(&registry);
            occ.set(registry.mode(path, Polarization::V), 1);
            amps.insert(occ, beta);
        }
        if amps.is_empty() {
            return Err(FockError::ZeroNorm);
        }
        Ok(PhotonicState {
            registry,
            photons: 1,
            cutoff: DEFAULT_PHOTON_CUTOFF,
            amps,
        })
    }

    pub fn registry(&self) -> &Arc<ModeRegistry> {
        &self.registry
    }

    pub fn photon_number(&self) -> u32 {
        self.photons
    }

    pub fn cutoff(&self) -> u32 {
        self.cutoff
    }

    pub fn term_count(&self) -> usize {
        self.amps.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&FockOccupation, Complex64)> {
        self.amps.iter().map(|(occ, &a)| (occ, a))
    }

    pub fn amplitude(&self, occ: &FockOccupation) -> Complex64 {
        self.amps.get(occ).copied().unwrap_or(Complex64::ZERO)
    }

    /// Amplitude of the basis ket occupying exactly the listed modes.
    pub fn basis_amplitude(&self, occupied: &[(PathId, Polarization, u32)]) -> Complex64 {
        let mut occ = FockOccupation::vacuum(&self.registry);
        for &(path, pol, n) in occupied {
            let mode = self.registry.mode(path, pol);
            occ.set(mode, occ.count(mode) + n);
        }
        self.amplitude(&occ)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn scale(&self, factor: Complex64) -> PhotonicState {
        let mut out = self.clone();
        for a in out.amps.values_mut() {
            *a *= factor;
        }
        out
    }

    pub fn normalize(&self) -> Result<PhotonicState, FockError> {
        let n = self.norm();
        if n < AMPLITUDE_EPS {
            return Err(FockError::ZeroNorm);
        }
        Ok(self.scale(Complex64::new(1.0 / n, 0.0)))
    }

    fn prune(&mut self) {
        self.amps.retain(|_, a| a.norm() >= AMPLITUDE_EPS);
    }

    /// Tensor product of states over disjoint registries; the result lives on
    /// the merged registry.
    pub fn tensor(&self, other: &PhotonicState) -> Result<PhotonicState, FockError> {
        let merged = self.registry.merge(&other.registry)?;
        let photons = self.photons + other.photons;
        let cutoff = self.cutoff.max(other.cutoff);
        if photons > cutoff {
            return Err(FockError::CutoffExceeded(photons, cutoff));
        }
        let left = self.registry.mode_count();
        let mut amps = BTreeMap::new();
        for (occ_a, amp_a) in &self.amps {
            for (occ_b, amp_b) in &other.amps {
                let mut v = vec![0u8; merged.mode_count()];
                v[..left].copy_from_slice(&occ_a.0);
                v[left..].copy_from_slice(&occ_b.0);
                amps.insert(FockOccupation(v), amp_a * amp_b);
            }
        }
        Ok(PhotonicState {
            registry: merged,
            photons,
            cutoff,
            amps,
        })
    }

    /// Re-express the state on a larger registry; paths are matched by name
    /// and all new modes start in vacuum.
    pub fn embed_into(&self, target: Arc<ModeRegistry>) -> Result<PhotonicState, FockError> {
        let mut mode_map = vec![0usize; self.registry.mode_count()];
        for (id, name) in self.registry.paths() {
            let tid = target
                .path(name)
                .ok_or_else(|| FockError::NotEmbeddable(name.to_string()))?;
            for pol in Polarization::BOTH {
                mode_map[self.registry.mode(id, pol).0] = target.mode(tid, pol).0;
            }
        }
        let mut amps = BTreeMap::new();
        for (occ, amp) in &self.amps {
            let mut v = vec![0u8; target.mode_count()];
            for (src, &n) in occ.0.iter().enumerate() {
                v[mode_map[src]] = n;
            }
            amps.insert(FockOccupation(v), *amp);
        }
        Ok(PhotonicState {
            registry: target,
            photons: self.photons,
            cutoff: self.cutoff,
            amps,
        })
    }

    /// Evolve by the multi-photon unitary induced from `u` via
    /// `a†_i → Σ_j U_ji a†_j`.
    pub fn apply_unitary(&self, u: &ModeUnitary) -> Result<PhotonicState, FockError> {
        if !Arc::ptr_eq(&self.registry, &u.registry) && *self.registry != *u.registry {
            return Err(FockError::RegistryMismatch);
        }
        let m = u.dim();
        let mut out: BTreeMap<FockOccupation, Complex64> = BTreeMap::new();
        for (occ, amp) in &self.amps {
            let ns: Vec<u32> = u.modes.iter().map(|&mid| occ.count(mid)).collect();
            let mut base = occ.clone();
            for &mid in &u.modes {
                base.set(mid, 0);
            }
            let mut denom = 1.0;
            for &n in &ns {
                denom *= factorial(n);
            }
            // expand one photon at a time: monomial exponents over u's modes
            let mut terms: BTreeMap<Vec<u8>, Complex64> = BTreeMap::new();
            terms.insert(vec![0u8; m], amp / denom.sqrt());
            for (i, &n) in ns.iter().enumerate() {
                for _ in 0..n {
                    let mut next: BTreeMap<Vec<u8>, Complex64> = BTreeMap::new();
                    for (mono, c) in &terms {
                        for j in 0..m {
                            let coeff = u.mat[(j, i)];
                            if coeff.norm() < 1e-15 {
                                continue;
                            }
                            let mut mm = mono.clone();
                            mm[j] += 1;
                            *next.entry(mm).or_insert(Complex64::ZERO) += c * coeff;
                        }
                    }
                    terms = next;
                }
            }
            for (mono, c) in terms {
                let mut occ2 = base.clone();
                let mut numer = 1.0;
                for (j, &n) in mono.iter().enumerate() {
                    occ2.set(u.modes[j], n as u32);
                    numer *= factorial(n as u32);
                }
                *out.entry(occ2).or_insert(Complex64::ZERO) += c * numer.sqrt();
            }
        }
        let mut state = PhotonicState {
            registry: self.registry.clone(),
            photons: self.photons,
            cutoff: self.cutoff,
            amps: out,
        };
        state.prune();
        Ok(state)
    }

    /// Overlap of `self` against `other`, conjugating `other`:
    /// `inner_product(a, b) = Σ a(occ)·conj(b(occ)) = ⟨b|a⟩`.
    pub fn inner_product(&self, other: &PhotonicState) -> Result<Complex64, FockError> {
        if *self.registry != *other.registry {
            return Err(FockError::RegistryMismatch);
        }
        if self.photons != other.photons {
            return Err(FockError::PhotonNumberMismatch(self.photons, other.photons));
        }
        let mut acc = Complex64::ZERO;
        for (occ, amp) in &self.amps {
            if let Some(b) = other.amps.get(occ) {
                acc += amp * b.conj();
            }
        }
        Ok(acc)
    }

    /// `|⟨a|b⟩| / (‖a‖·‖b‖)`; 1 means equal up to global phase.
    pub fn overlap(&self, other: &PhotonicState) -> Result<f64, FockError> {
        let ip = self.inner_product(other)?;
        let denom = self.norm() * other.norm();
        if denom < AMPLITUDE_EPS {
            return Err(FockError::ZeroNorm);
        }
        Ok(ip.norm() / denom)
    }

    pub(crate) fn from_parts(
        registry: Arc<ModeRegistry>,
        photons: u32,
        cutoff: u32,
        amps: BTreeMap<FockOccupation, Complex64>,
    ) -> PhotonicState {
        PhotonicState {
            registry,
            photons,
            cutoff,
            amps,
        }
    }
}
