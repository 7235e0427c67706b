//! Optical elements compiled to mode unitaries.
//!
//! Phase conventions (fixed here, compensated where needed in the router
//! assembly):
//!
//! * HWP at fast-axis angle θ from horizontal acts on (H, V) as
//!   `[[cos2θ, sin2θ], [sin2θ, −cos2θ]]`.
//! * QWP at θ is `R(θ)·diag(1, i)·R(−θ)` (slow axis retarded by π/2), so
//!   `QWP(θ)⁴ = 1` exactly.
//! * PBS transmits H and swaps V between the two paths with an `i` phase on
//!   reflection.
//! * A beam displacer maps `(trunk, H) ↔ (arm_h, H)` and
//!   `(trunk, V) ↔ (arm_v, V)`; the same involutive permutation serves the
//!   split and merge directions.
//! * Mirrors act as the identity on modes (geometry only).

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

use crate::fock::{FockError, ModeRegistry, ModeUnitary, PathId, Polarization};

#[derive(Debug, Error, PartialEq)]
pub enum ElementError {
    #[error("wave-plate fast-axis angle {0} outside [0, π)")]
    AngleOutOfRange(f64),
    #[error(transparent)]
    Fock(#[from] FockError),
}

/// Half- or quarter-wave retarder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavePlateKind {
    Half,
    Quarter,
}

/// A wave plate with its fast axis at `angle` radians from horizontal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WavePlateSetting {
    pub kind: WavePlateKind,
    pub angle: f64,
}

impl WavePlateSetting {
    /// `angle` must lie in `[0, π)`.
    pub fn new(kind: WavePlateKind, angle: f64) -> Result<Self, ElementError> {
        if !(0.0..PI).contains(&angle) {
            return Err(ElementError::AngleOutOfRange(angle));
        }
        Ok(WavePlateSetting { kind, angle })
    }

    pub fn half(angle: f64) -> Result<Self, ElementError> {
        Self::new(WavePlateKind::Half, angle)
    }

    pub fn quarter(angle: f64) -> Result<Self, ElementError> {
        Self::new(WavePlateKind::Quarter, angle)
    }

    /// 2×2 Jones matrix over (H, V).
    pub fn jones(&self) -> [[Complex64; 2]; 2] {
        let c = Complex64::new(self.angle.cos(), 0.0);
        let s = Complex64::new(self.angle.sin(), 0.0);
        match self.kind {
            WavePlateKind::Half => {
                let c2 = Complex64::new((2.0 * self.angle).cos(), 0.0);
                let s2 = Complex64::new((2.0 * self.angle).sin(), 0.0);
                [[c2, s2], [s2, -c2]]
            }
            WavePlateKind::Quarter => {
                // R(θ)·diag(1, i)·R(−θ)
                let i = Complex64::I;
                [
                    [c * c + i * s * s, c * s - i * s * c],
                    [s * c - i * c * s, s * s + i * c * c],
                ]
            }
        }
    }
}

fn jones_to_unitary(
    registry: &Arc<ModeRegistry>,
    path: PathId,
    jones: [[Complex64; 2]; 2],
) -> Result<ModeUnitary, ElementError> {
    let modes = vec![
        registry.mode(path, Polarization::H),
        registry.mode(path, Polarization::V),
    ];
    Ok(ModeUnitary::new(
        registry.clone(),
        modes,
        &[jones[0].to_vec(), jones[1].to_vec()],
    )?)
}

/// Wave plate acting on one spatial path's polarization pair.
pub fn waveplate_unitary(
    registry: &Arc<ModeRegistry>,
    path: PathId,
    setting: WavePlateSetting,
) -> Result<ModeUnitary, ElementError> {
    jones_to_unitary(registry, path, setting.jones())
}

/// HWP at 22.5°: the polarization Hadamard.
pub fn hadamard_plate_unitary(
    registry: &Arc<ModeRegistry>,
    path: PathId,
) -> Result<ModeUnitary, ElementError> {
    waveplate_unitary(
        registry,
        path,
        WavePlateSetting::half(PI / 8.0).expect("valid angle"),
    )
}

/// Polarizing beam splitter between two paths: H transmits, V swaps paths
/// with phase `i` on reflection.
pub fn pbs_unitary(
    registry: &Arc<ModeRegistry>,
    path_a: PathId,
    path_b: PathId,
) -> Result<ModeUnitary, ElementError> {
    let modes = vec![
        registry.mode(path_a, Polarization::H),
        registry.mode(path_a, Polarization::V),
        registry.mode(path_b, Polarization::H),
        registry.mode(path_b, Polarization::V),
    ];
    let o = Complex64::ONE;
    let z = Complex64::ZERO;
    let i = Complex64::I;
    Ok(ModeUnitary::new(
        registry.clone(),
        modes,
        &[
            vec![o, z, z, z],
            vec![z, z, z, i],
            vec![z, z, o, z],
            vec![z, i, z, z],
        ],
    )?)
}

/// Which way a beam displacer is traversed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DisplacerDirection {
    /// `(trunk, H) → (arm_h, H)`, `(trunk, V) → (arm_v, V)`.
    Split,
    /// Arms recombine into the trunk.
    Merge,
}

/// Beam displacer as a lossless mode relabeling embedded in a permutation
/// unitary. The permutation is involutive, so `Split` and `Merge` share the
/// same matrix; the direction records intent in circuit descriptions.
pub fn beam_displacer_unitary(
    registry: &Arc<ModeRegistry>,
    trunk: PathId,
    arm_h: PathId,
    arm_v: PathId,
    _direction: DisplacerDirection,
) -> Result<ModeUnitary, ElementError> {
    let th = registry.mode(trunk, Polarization::H);
    let tv = registry.mode(trunk, Polarization::V);
    let ah = registry.mode(arm_h, Polarization::H);
    let av = registry.mode(arm_v, Polarization::V);
    if th == ah && tv == av {
        return Err(ElementError::Fock(FockError::BadModeList));
    }
    let modes = vec![th, tv, ah, av];
    let o = Complex64::ONE;
    let z = Complex64::ZERO;
    Ok(ModeUnitary::new(
        registry.clone(),
        modes,
        &[
            vec![z, z, o, z],
            vec![z, z, z, o],
            vec![o, z, z, z],
            vec![z, o, z, z],
        ],
    )?)
}

/// Multiplies the selected mode's creation operator by `e^{iφ}`.
pub fn phase_shifter_unitary(
    registry: &Arc<ModeRegistry>,
    path: PathId,
    pol: Polarization,
    phi: f64,
) -> Result<ModeUnitary, ElementError> {
    Ok(ModeUnitary::new(
        registry.clone(),
        vec![registry.mode(path, pol)],
        &[vec![Complex64::from_polar(1.0, phi)]],
    )?)
}

/// Mirror: identity on the path's modes.
pub fn mirror_unitary(
    registry: &Arc<ModeRegistry>,
    path: PathId,
) -> Result<ModeUnitary, ElementError> {
    jones_to_unitary(
        registry,
        path,
        [
            [Complex64::ONE, Complex64::ZERO],
            [Complex64::ZERO, Complex64::ONE],
        ],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::PhotonicState;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn reg(paths: &[&str]) -> Arc<ModeRegistry> {
        ModeRegistry::new(paths.iter().copied()).unwrap()
    }

    fn single(
        r: &Arc<ModeRegistry>,
        path: PathId,
        alpha: Complex64,
        beta: Complex64,
    ) -> PhotonicState {
        PhotonicState::single_photon(r.clone(), path, alpha, beta).unwrap()
    }

    #[test]
    fn hwp_at_22_5_is_hadamard() {
        let r = reg(&["a"]);
        let p = r.path("a").unwrap();
        let u = hadamard_plate_unitary(&r, p).unwrap();
        let h = single(&r, p, Complex64::ONE, Complex64::ZERO);
        let out = h.apply_unitary(&u).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((out.basis_amplitude(&[(p, Polarization::H, 1)]) - c(s, 0.0)).norm() < 1e-12);
        assert!((out.basis_amplitude(&[(p, Polarization::V, 1)]) - c(s, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn hwp_at_45_flips_h_to_v() {
        let r = reg(&["a"]);
        let p = r.path("a").unwrap();
        let u = waveplate_unitary(&r, p, WavePlateSetting::half(PI / 4.0).unwrap()).unwrap();
        let h = single(&r, p, Complex64::ONE, Complex64::ZERO);
        let out = h.apply_unitary(&u).unwrap();
        assert!((out.basis_amplitude(&[(p, Polarization::V, 1)]) - Complex64::ONE).norm() < 1e-12);
    }

    #[test]
    fn hwp_applied_twice_is_identity() {
        let r = reg(&["a"]);
        let p = r.path("a").unwrap();
        for angle in [PI / 8.0, PI / 4.0, 0.3, 1.1, 2.9] {
            let u = waveplate_unitary(&r, p, WavePlateSetting::half(angle).unwrap()).unwrap();
            let input = single(&r, p, c(0.6, 0.1), c(0.2, 0.77));
            let out = input.apply_unitary(&u).unwrap().apply_unitary(&u).unwrap();
            let ip = out.inner_product(&input).unwrap();
            assert!(
                (ip.norm() - input.norm_sqr()).abs() < 1e-12,
                "angle {angle}"
            );
        }
    }

    #[test]
    fn qwp_fourth_power_is_identity() {
        let r = reg(&["a"]);
        let p = r.path("a").unwrap();
        for angle in [0.0, PI / 8.0, PI / 4.0, 1.0, 2.5] {
            let u = waveplate_unitary(&r, p, WavePlateSetting::quarter(angle).unwrap()).unwrap();
            let input = single(&r, p, c(0.6, 0.1), c(0.2, 0.77));
            let mut out = input.clone();
            for _ in 0..4 {
                out = out.apply_unitary(&u).unwrap();
            }
            let ip = out.inner_product(&input).unwrap();
            assert!(
                (ip.norm() - input.norm_sqr()).abs() < 1e-12,
                "angle {angle}"
            );
        }
    }

    #[test]
    fn qwp_at_45_makes_circular_from_h() {
        let r = reg(&["a"]);
        let p = r.path("a").unwrap();
        let u = waveplate_unitary(&r, p, WavePlateSetting::quarter(PI / 4.0).unwrap()).unwrap();
        let out = single(&r, p, Complex64::ONE, Complex64::ZERO)
            .apply_unitary(&u)
            .unwrap();
        let ah = out.basis_amplitude(&[(p, Polarization::H, 1)]);
        let av = out.basis_amplitude(&[(p, Polarization::V, 1)]);
        // circular polarization: equal magnitudes, ±π/2 relative phase
        assert!((ah.norm() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((av.norm() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!(((av / ah).arg().abs() - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn waveplate_angle_range_validated() {
        assert!(WavePlateSetting::half(-0.1).is_err());
        assert!(WavePlateSetting::half(PI).is_err());
        assert!(WavePlateSetting::half(0.0).is_ok());
    }

    #[test]
    fn pbs_transmits_h_and_reflects_v_with_i() {
        let r = reg(&["a", "b"]);
        let pa = r.path("a").unwrap();
        let pb = r.path("b").unwrap();
        let u = pbs_unitary(&r, pa, pb).unwrap();
        let h = single(&r, pa, Complex64::ONE, Complex64::ZERO)
            .apply_unitary(&u)
            .unwrap();
        assert!((h.basis_amplitude(&[(pa, Polarization::H, 1)]) - Complex64::ONE).norm() < 1e-12);
        let v = single(&r, pa, Complex64::ZERO, Complex64::ONE)
            .apply_unitary(&u)
            .unwrap();
        assert!((v.basis_amplitude(&[(pb, Polarization::V, 1)]) - Complex64::I).norm() < 1e-12);
    }

    #[test]
    fn pbs_double_reflection_gives_minus_one() {
        let r = reg(&["a", "b"]);
        let pa = r.path("a").unwrap();
        let pb = r.path("b").unwrap();
        let u = pbs_unitary(&r, pa, pb).unwrap();
        let input = PhotonicState::basis(
            r.clone(),
            &[(pa, Polarization::V, 1), (pb, Polarization::V, 1)],
        )
        .unwrap();
        let out = input.apply_unitary(&u).unwrap();
        let coincidence =
            out.basis_amplitude(&[(pa, Polarization::V, 1), (pb, Polarization::V, 1)]);
        assert!((coincidence - c(-1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn pbs_conserves_photon_number_per_polarization() {
        let r = reg(&["a", "b"]);
        let pa = r.path("a").unwrap();
        let pb = r.path("b").unwrap();
        let u = pbs_unitary(&r, pa, pb).unwrap();
        let input = PhotonicState::basis(
            r.clone(),
            &[
                (pa, Polarization::H, 1),
                (pa, Polarization::V, 1),
                (pb, Polarization::V, 1),
            ],
        )
        .unwrap();
        let out = input.apply_unitary(&u).unwrap();
        for (occ, _) in out.terms() {
            let nh =
                occ.count(r.mode(pa, Polarization::H)) + occ.count(r.mode(pb, Polarization::H));
            let nv =
                occ.count(r.mode(pa, Polarization::V)) + occ.count(r.mode(pb, Polarization::V));
            assert_eq!((nh, nv), (1, 2));
        }
    }

    #[test]
    fn displacer_splits_by_polarization() {
        let r = reg(&["in", "h_arm", "v_arm"]);
        let t = r.path("in").unwrap();
        let ah = r.path("h_arm").unwrap();
        let av = r.path("v_arm").unwrap();
        let u = beam_displacer_unitary(&r, t, ah, av, DisplacerDirection::Split).unwrap();
        let alpha = c(0.6, 0.0);
        let beta = c(0.0, 0.8);
        let out = single(&r, t, alpha, beta).apply_unitary(&u).unwrap();
        assert!((out.basis_amplitude(&[(ah, Polarization::H, 1)]) - alpha).norm() < 1e-12);
        assert!((out.basis_amplitude(&[(av, Polarization::V, 1)]) - beta).norm() < 1e-12);
    }

    #[test]
    fn displacer_merge_after_split_is_identity() {
        let r = reg(&["in", "h_arm", "v_arm"]);
        let t = r.path("in").unwrap();
        let ah = r.path("h_arm").unwrap();
        let av = r.path("v_arm").unwrap();
        let split = beam_displacer_unitary(&r, t, ah, av, DisplacerDirection::Split).unwrap();
        let merge = beam_displacer_unitary(&r, t, ah, av, DisplacerDirection::Merge).unwrap();
        let input = single(&r, t, c(0.6, 0.1), c(0.2, 0.77));
        let out = input
            .apply_unitary(&split)
            .unwrap()
            .apply_unitary(&merge)
            .unwrap();
        let ip = out.inner_product(&input).unwrap();
        assert!((ip.norm() - input.norm_sqr()).abs() < 1e-12);
    }

    #[test]
    fn displacer_routes_pure_v() {
        let r = reg(&["in", "h_arm", "v_arm"]);
        let t = r.path("in").unwrap();
        let av = r.path("v_arm").unwrap();
        let u = beam_displacer_unitary(
            &r,
            t,
            r.path("h_arm").unwrap(),
            av,
            DisplacerDirection::Split,
        )
        .unwrap();
        let out = single(&r, t, Complex64::ZERO, Complex64::ONE)
            .apply_unitary(&u)
            .unwrap();
        assert!((out.basis_amplitude(&[(av, Polarization::V, 1)]) - Complex64::ONE).norm() < 1e-12);
    }

    #[test]
    fn phase_shifter_cases() {
        let r = reg(&["a"]);
        let p = r.path("a").unwrap();
        let input = single(&r, p, c(0.6, 0.0), c(0.8, 0.0));

        let id = phase_shifter_unitary(&r, p, Polarization::V, 0.0).unwrap();
        let out = input.apply_unitary(&id).unwrap();
        assert!((out.inner_product(&input).unwrap().norm() - 1.0).abs() < 1e-12);

        // φ=π on V: the feed-forward correction V → −V
        let flip = phase_shifter_unitary(&r, p, Polarization::V, PI).unwrap();
        let out = input.apply_unitary(&flip).unwrap();
        assert!((out.basis_amplitude(&[(p, Polarization::V, 1)]) - c(-0.8, 0.0)).norm() < 1e-12);

        // φ=π/2 twice equals φ=π
        let quarter = phase_shifter_unitary(&r, p, Polarization::V, PI / 2.0).unwrap();
        let twice = input
            .apply_unitary(&quarter)
            .unwrap()
            .apply_unitary(&quarter)
            .unwrap();
        let once = input.apply_unitary(&flip).unwrap();
        assert!((twice.inner_product(&once).unwrap().norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mirror_is_identity() {
        let r = reg(&["a"]);
        let p = r.path("a").unwrap();
        let u = mirror_unitary(&r, p).unwrap();
        let input = single(&r, p, c(0.6, 0.1), c(0.2, 0.77));
        let out = input.apply_unitary(&u).unwrap();
        assert!((out.inner_product(&input).unwrap().norm() - input.norm_sqr()).abs() < 1e-12);
    }
}
