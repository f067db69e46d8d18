//! Analytic data sets for the rod study and the augmentation strategies for
//! RVE data: rotations of principal data, superposition of unit loads and
//! isotropic completion from two states.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase_space::{header_pairs, metric_distance, DataSet, DataTuple, PairingKind, TupleSource};
use crate::tensor::{rotate_pair, Rotation, Tensor2};

/// Constitutive families for the 1D data sets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Family {
    Linear,
    #[serde(alias = "NEO_HOOKE")]
    NeoHooke,
    Yeoh,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Linear => "LINEAR",
            Family::NeoHooke => "NEOHOOKE",
            Family::Yeoh => "YEOH",
        })
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "LINEAR" => Ok(Family::Linear),
            "NEOHOOKE" | "NEO_HOOKE" => Ok(Family::NeoHooke),
            "YEOH" => Ok(Family::Yeoh),
            _ => Err(Error::invalid(format!("unknown family '{s}' (LINEAR, NEOHOOKE, YEOH)"))),
        }
    }
}

impl Family {
    /// Uniaxial first Piola-Kirchhoff stress at stretch `l`.
    pub fn piola(self, l: f64, c1: f64, c3: f64) -> f64 {
        match self {
            Family::Linear => c1 * l,
            Family::NeoHooke => 2.0 * c1 * (l - l.powi(-2)),
            Family::Yeoh => 2.0 * (l - l.powi(-2)) * yeoh_factor(l, c1, c3),
        }
    }

    /// Uniaxial second Piola-Kirchhoff stress at stretch `l`.
    pub fn second_piola(self, l: f64, c1: f64, c3: f64) -> f64 {
        match self {
            Family::Linear => c1 * l * l,
            Family::NeoHooke => 2.0 * c1 * (1.0 - l.powi(-3)),
            Family::Yeoh => 2.0 * (1.0 - l.powi(-3)) * yeoh_factor(l, c1, c3),
        }
    }
}

fn yeoh_factor(l: f64, c1: f64, c3: f64) -> f64 {
    let i1 = l * l + 2.0 / l - 3.0;
    c1 + 3.0 * c3 * i1 * i1
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    #[default]
    Uniform,
    Log,
}

/// A 1D data set sampled from a closed-form uniaxial law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub family: Family,
    pub c1: f64,
    #[serde(default)]
    pub c3: f64,
    pub stretch_range: [f64; 2],
    pub n: usize,
    pub pairing: PairingKind,
    #[serde(default)]
    pub spacing: Spacing,
}

impl GeneratorSpec {
    pub fn new(family: Family, c1: f64, c3: f64, stretch_range: [f64; 2], n: usize, pairing: PairingKind) -> Self {
        GeneratorSpec {
            family,
            c1,
            c3,
            stretch_range,
            n,
            pairing,
            spacing: Spacing::Uniform,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.stretch_range;
        if !(lo > 0.0 && hi.is_finite() && hi >= lo) {
            return Err(Error::invalid(format!("stretch range [{lo}, {hi}] must satisfy 0 < min <= max")));
        }
        if self.n < 2 {
            return Err(Error::invalid(format!("generator needs n >= 2, got {}", self.n)));
        }
        if !(self.c1 > 0.0 && self.c1.is_finite()) {
            return Err(Error::invalid(format!("c1 must be positive, got {}", self.c1)));
        }
        if !self.c3.is_finite() || self.c3 < 0.0 {
            return Err(Error::invalid(format!("c3 must be non-negative, got {}", self.c3)));
        }
        if self.pairing == PairingKind::EpsSigma {
            return Err(Error::invalid("1D generators produce FP or CS data"));
        }
        Ok(())
    }

    /// Stretch of sample `k`; the last sample hits the upper bound exactly.
    pub fn stretch(&self, k: usize) -> f64 {
        let [lo, hi] = self.stretch_range;
        if k + 1 >= self.n {
            return hi;
        }
        let t = k as f64 / (self.n - 1) as f64;
        match self.spacing {
            Spacing::Uniform => lo + (hi - lo) * t,
            Spacing::Log => lo * (hi / lo).powf(t),
        }
    }

    /// Continuous sample index of stretch `l`.
    fn index_of(&self, l: f64) -> f64 {
        let [lo, hi] = self.stretch_range;
        if hi == lo {
            return 0.0;
        }
        let t = match self.spacing {
            Spacing::Uniform => (l - lo) / (hi - lo),
            Spacing::Log => (l / lo).ln() / (hi / lo).ln(),
        };
        t * (self.n - 1) as f64
    }

    /// `(strain, stress)` at stretch `l` in the spec's pairing.
    pub fn tuple_at(&self, l: f64) -> (Tensor2, Tensor2) {
        match self.pairing {
            PairingKind::Fp => (Tensor2::scalar(l), Tensor2::scalar(self.family.piola(l, self.c1, self.c3))),
            _ => (Tensor2::scalar(l * l), Tensor2::scalar(self.family.second_piola(l, self.c1, self.c3))),
        }
    }

    fn stretch_of_strain(&self, e: f64) -> f64 {
        match self.pairing {
            PairingKind::Fp => e,
            _ => e.max(0.0).sqrt(),
        }
    }
}

/// Samples the spec. `mu0 = None` derives the metric scale from the data.
pub fn generate_1d(spec: &GeneratorSpec, mu0: Option<f64>) -> Result<DataSet> {
    spec.validate()?;
    let pairs = (0..spec.n).into_par_iter().map(|k| spec.tuple_at(spec.stretch(k))).collect();
    DataSet::new(spec.pairing, 1, pairs, mu0)
}

fn with_family(spec: &GeneratorSpec, family: Family) -> Result<DataSet> {
    if spec.family != family {
        return Err(Error::invalid(format!("spec family {} used with the {family} generator", spec.family)));
    }
    generate_1d(spec, None)
}

/// Proportional data `(l, c1 l)` or `(l^2, c1 l^2)`.
pub fn gen_linear_1d(spec: &GeneratorSpec) -> Result<DataSet> {
    with_family(spec, Family::Linear)
}

/// Incompressible Neo-Hooke uniaxial data.
pub fn gen_neohooke_1d(spec: &GeneratorSpec) -> Result<DataSet> {
    with_family(spec, Family::NeoHooke)
}

/// Incompressible Yeoh uniaxial data.
pub fn gen_yeoh_1d(spec: &GeneratorSpec) -> Result<DataSet> {
    with_family(spec, Family::Yeoh)
}

impl TupleSource for GeneratorSpec {
    fn kind(&self) -> PairingKind {
        self.pairing
    }

    fn dim(&self) -> usize {
        1
    }

    /// Samples of the full lattice near `center`, evaluated on demand.
    fn tuples_within(&self, center: &DataTuple, radius: f64, mu0: f64) -> Result<Vec<(Tensor2, Tensor2)>> {
        self.validate()?;
        if center.strain.dim() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: center.strain.dim(),
            });
        }
        let e = center.strain.get(0, 0);
        let de = radius / mu0.sqrt();
        let lo = self.index_of(self.stretch_of_strain(e - de).max(self.stretch_range[0])).floor().max(0.0) as usize;
        let hi = self.index_of(self.stretch_of_strain(e + de)).ceil();
        if hi < 0.0 {
            return Ok(Vec::new());
        }
        let hi = (hi as usize).min(self.n - 1);
        Ok((lo..=hi)
            .map(|k| self.tuple_at(self.stretch(k)))
            .filter(|(s, t)| {
                let d = DataTuple {
                    strain: *s,
                    stress: *t,
                    id: 0,
                };
                metric_distance(center, &d, mu0) <= radius
            })
            .collect())
    }
}

/// Adds `n_angles` in-plane rotations `k pi / (n_angles + 1)` of every 2D tuple.
pub fn augment_rotations_2d(base: &DataSet, n_angles: usize) -> Result<DataSet> {
    if base.kind() == PairingKind::Fp {
        return Err(Error::PairingMismatch {
            expected: "CS or EPS".into(),
            found: base.kind().to_string(),
        });
    }
    if base.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: base.dim(),
        });
    }
    let rotations: Vec<Rotation> = (0..=n_angles)
        .map(|k| Rotation::about_z(2, k as f64 * std::f64::consts::PI / (n_angles + 1) as f64))
        .collect::<Result<_>>()?;
    let mut pairs = Vec::with_capacity(base.len() * rotations.len());
    for q in &rotations {
        let rotated: Vec<(Tensor2, Tensor2)> = base
            .tuples()
            .par_iter()
            .map(|t| {
                rotate_pair(&t.strain, &t.stress, q).map(|(e, s)| (e.symmetric_part(), s.symmetric_part()))
            })
            .collect::<Result<_>>()?;
        pairs.extend(rotated);
    }
    DataSet::new(base.kind(), 2, pairs, Some(base.mu0()))
}

/// Homogenized responses of the six canonical unit strain states
/// `alpha e_k` (Voigt, engineering shear).
#[derive(Clone, Debug, PartialEq)]
pub struct UnitLoadLibrary {
    pub alpha: f64,
    /// `stress[k]` is the Voigt stress answering unit state `k`.
    pub stress: [[f64; 6]; 6],
}

const UNIT_MAGIC: &str = "# dd-unitloads v1";

impl UnitLoadLibrary {
    /// Strain state `k` in Voigt form.
    pub fn strain_voigt(&self, k: usize) -> [f64; 6] {
        let mut v = [0.0; 6];
        v[k] = self.alpha;
        v
    }

    /// Unit state `k` as an EPS tuple.
    pub fn tuple(&self, k: usize) -> DataTuple {
        DataTuple {
            strain: Tensor2::from_voigt_engineering(3, &self.strain_voigt(k)).expect("3D voigt"),
            stress: Tensor2::from_voigt(3, &self.stress[k]).expect("3D voigt"),
            id: k,
        }
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        match lines.next() {
            Some((_, l)) if l == UNIT_MAGIC => {}
            Some((n, l)) => return Err(err(n, format!("expected '{UNIT_MAGIC}', found '{l}'"))),
            None => return Err(err(1, "empty file".into())),
        }
        let (hn, header) = lines.next().ok_or_else(|| err(2, "missing header line".into()))?;
        let mut alpha = None;
        for (k, v) in header_pairs(header) {
            match k {
                "alpha" => alpha = Some(v.parse::<f64>().map_err(|_| err(hn, format!("invalid alpha '{v}'")))?),
                "units" if v != "SI" => return Err(err(hn, format!("unsupported units '{v}'"))),
                _ => {}
            }
        }
        let alpha = alpha.filter(|a| *a != 0.0 && a.is_finite()).ok_or_else(|| err(hn, "header needs a nonzero alpha=".into()))?;
        let mut rows = Vec::new();
        let mut last = hn;
        for (n, line) in lines {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            last = n;
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| err(n, format!("invalid number '{t}'"))))
                .collect::<Result<_>>()?;
            let row: [f64; 6] = vals
                .try_into()
                .map_err(|v: Vec<f64>| err(n, format!("expected 6 Voigt stresses, found {}", v.len())))?;
            if rows.len() == 6 {
                return Err(err(n, "more than six unit states".into()));
            }
            rows.push(row);
        }
        let stress: [[f64; 6]; 6] = rows
            .try_into()
            .map_err(|r: Vec<[f64; 6]>| err(last, format!("expected six unit states, found {}", r.len())))?;
        Ok(UnitLoadLibrary { alpha, stress })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }
}

/// `sum_k c_k (eps_k, sigma_k) / alpha` as an EPS tuple with id 0.
pub fn superpose_linear(library: &UnitLoadLibrary, coefficients: &[f64; 6]) -> Result<DataTuple> {
    if coefficients.iter().any(|c| !c.is_finite()) {
        return Err(Error::invalid("superposition coefficients must be finite"));
    }
    let mut strain = [0.0; 6];
    let mut stress = [0.0; 6];
    for (k, &c) in coefficients.iter().enumerate() {
        let s = c / library.alpha;
        strain[k] += s * library.alpha;
        for (acc, v) in stress.iter_mut().zip(&library.stress[k]) {
            *acc += s * v;
        }
    }
    Ok(DataTuple {
        strain: Tensor2::from_voigt_engineering(3, &strain)?,
        stress: Tensor2::from_voigt(3, &stress)?,
        id: 0,
    })
}

/// Cubic stiffness (Voigt, engineering shear) built from one axial and one
/// shear unit response.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CubicStiffness {
    pub c11: f64,
    pub c12: f64,
    pub c44: f64,
}

impl CubicStiffness {
    /// Reads `C11` and the mean of the two lateral responses from an `e_11`
    /// state and `C44` from an `e_12` state.
    pub fn from_states(elong: &DataTuple, shear: &DataTuple) -> Result<Self> {
        for t in [elong, shear] {
            if t.strain.dim() != 3 || t.stress.dim() != 3 {
                return Err(Error::DimensionMismatch {
                    expected: 3,
                    found: t.strain.dim(),
                });
            }
        }
        let ev = elong.strain.to_voigt();
        let a = ev[0];
        if a == 0.0 || ev[1..].iter().any(|&v| v != 0.0) {
            return Err(Error::invalid("elongation state must strain the 11 slot only"));
        }
        let mut sv = shear.strain.to_voigt();
        sv[3..].iter_mut().for_each(|v| *v *= 2.0);
        let g = sv[3];
        if g == 0.0 || sv.iter().enumerate().any(|(i, &v)| i != 3 && v != 0.0) {
            return Err(Error::invalid("shear state must strain the 12 slot only"));
        }
        let s = elong.stress.to_voigt();
        Ok(CubicStiffness {
            c11: s[0] / a,
            c12: 0.5 * (s[1] + s[2]) / a,
            c44: shear.stress.to_voigt()[3] / g,
        })
    }

    pub fn matrix(&self) -> [[f64; 6]; 6] {
        let mut d = [[0.0; 6]; 6];
        for (i, row) in d.iter_mut().enumerate().take(3) {
            for (j, v) in row.iter_mut().enumerate().take(3) {
                *v = if i == j { self.c11 } else { self.c12 };
            }
        }
        for (k, row) in d.iter_mut().enumerate().skip(3) {
            row[k] = self.c44;
        }
        d
    }
}

/// Strain grid for [`isotropic_grid_from_two_states`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IsotropicGrid {
    /// Explicit Voigt strains (engineering shear), emitted first.
    pub strains: Vec<[f64; 6]>,
    /// Voigt slots spanned by the tensor-product grid.
    pub slots: Vec<usize>,
    /// Amplitudes sampled along every slot in `slots`.
    pub amplitudes: Vec<f64>,
    /// Additional rotations about the 3 axis, `k pi / (rotations + 1)`.
    pub rotations: usize,
    /// Per-slot stress factors imitating deviations from cubic symmetry.
    pub scaling: Option<[f64; 6]>,
}

/// Completes an isotropic data set from one elongation and one shear response
/// by linear combination over the six slots, then optional rotations.
pub fn isotropic_grid_from_two_states(elong: &DataTuple, shear: &DataTuple, grid: &IsotropicGrid) -> Result<DataSet> {
    let stiff = CubicStiffness::from_states(elong, shear)?;
    if let Some(k) = grid.slots.iter().find(|&&k| k >= 6) {
        return Err(Error::invalid(format!("Voigt slot {k} out of range 0..6")));
    }
    let mut strains = grid.strains.clone();
    if !grid.slots.is_empty() && !grid.amplitudes.is_empty() {
        let m = grid.amplitudes.len();
        let total = m.checked_pow(grid.slots.len() as u32).ok_or_else(|| Error::invalid("strain grid too large"))?;
        for mut idx in 0..total {
            let mut v = [0.0; 6];
            for &slot in &grid.slots {
                v[slot] += grid.amplitudes[idx % m];
                idx /= m;
            }
            strains.push(v);
        }
    }
    if strains.is_empty() {
        return Err(Error::invalid("strain grid is empty"));
    }
    let d = stiff.matrix();
    let scale = grid.scaling.unwrap_or([1.0; 6]);
    let mut pairs = Vec::with_capacity(strains.len() * (grid.rotations + 1));
    let base: Vec<(Tensor2, Tensor2)> = strains
        .iter()
        .map(|e| {
            let mut s = [0.0; 6];
            for (i, si) in s.iter_mut().enumerate() {
                *si = (0..6).map(|j| d[i][j] * e[j] * scale[j]).sum();
            }
            Ok((Tensor2::from_voigt_engineering(3, e)?, Tensor2::from_voigt(3, &s)?))
        })
        .collect::<Result<_>>()?;
    for k in 0..=grid.rotations {
        let q = Rotation::about_z(3, k as f64 * std::f64::consts::PI / (grid.rotations + 1) as f64)?;
        for (e, s) in &base {
            let (e, s) = rotate_pair(e, s, &q)?;
            pairs.push((e.symmetric_part(), s.symmetric_part()));
        }
    }
    with_auto_mu0(PairingKind::EpsSigma, 3, pairs, stiff.c11.abs())
}

/// Derives the metric scale from the data, or uses `fallback` when the data
/// carry no strain spread.
fn with_auto_mu0(kind: PairingKind, dim: usize, pairs: Vec<(Tensor2, Tensor2)>, fallback: f64) -> Result<DataSet> {
    let set = DataSet::new(kind, dim, pairs, Some(1.0))?;
    let mu0 = crate::phase_space::auto_mu0(&set).unwrap_or(fallback);
    set.with_mu0(mu0)
}

/// Converts every tuple to the `target` pairing.
///
/// FP to CS uses `C = F^T F`, `S = F^-1 P`; CS to FP takes the symmetric root
/// `F = C^1/2` (rotations are lost); EPS and CS are linked by `C = 2 eps + I`
/// with unchanged stress. The metric scale is derived anew where the data
/// allow it.
pub fn convert_pairing(set: &DataSet, target: PairingKind) -> Result<DataSet> {
    if set.kind() == target {
        return Ok(set.clone());
    }
    let d = set.dim();
    let pairs = set
        .tuples()
        .par_iter()
        .map(|t| convert_tuple(set.kind(), target, d, t))
        .collect::<Result<Vec<_>>>()?;
    with_auto_mu0(target, d, pairs, set.mu0())
}

fn convert_tuple(from: PairingKind, to: PairingKind, d: usize, t: &DataTuple) -> Result<(Tensor2, Tensor2)> {
    let bad = |message: &str| Error::InvalidTuple {
        id: t.id,
        message: message.into(),
    };
    let (c, s) = match from {
        PairingKind::Cs => (t.strain, t.stress),
        PairingKind::EpsSigma => (t.strain * 2.0 + Tensor2::identity(d), t.stress),
        PairingKind::Fp => {
            let f = t.strain;
            let finv = f.inverse().filter(|_| f.det() > 0.0).ok_or_else(|| bad("deformation gradient is singular or inverted"))?;
            (f.transpose().dot(&f).symmetric_part(), finv.dot(&t.stress).symmetric_part())
        }
    };
    Ok(match to {
        PairingKind::Cs => (c, s),
        PairingKind::EpsSigma => ((c - Tensor2::identity(d)) * 0.5, s),
        PairingKind::Fp => {
            let f = c.spd_sqrt().ok_or_else(|| bad("C is not positive definite"))?;
            (f, f.dot(&s))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const MPA: f64 = 1e6;

    fn spec(family: Family, c1: f64, c3: f64, range: [f64; 2], n: usize, pairing: PairingKind) -> GeneratorSpec {
        GeneratorSpec::new(family, c1, c3, range, n, pairing)
    }

    fn fixture() -> UnitLoadLibrary {
        UnitLoadLibrary::read(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/unit_loads.txt")).unwrap()
    }

    #[test]
    fn linear_examples() {
        let s = gen_linear_1d(&spec(Family::Linear, MPA, 0.0, [1.0, 2.0], 2, PairingKind::Fp)).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!((s.tuples()[0].strain.get(0, 0), s.tuples()[0].stress.get(0, 0)), (1.0, MPA));
        assert_eq!((s.tuples()[1].strain.get(0, 0), s.tuples()[1].stress.get(0, 0)), (2.0, 2.0 * MPA));
        let s = gen_linear_1d(&spec(Family::Linear, MPA, 0.0, [1.0, 2.0], 2, PairingKind::Cs)).unwrap();
        assert_eq!((s.tuples()[1].strain.get(0, 0), s.tuples()[1].stress.get(0, 0)), (4.0, 4.0 * MPA));
        assert!(gen_linear_1d(&spec(Family::Yeoh, MPA, 0.0, [1.0, 2.0], 2, PairingKind::Cs)).is_err());
    }

    #[test]
    fn neohooke_and_yeoh_examples() {
        let c1 = MPA / 6.0;
        assert_eq!(Family::NeoHooke.piola(1.0, c1, 0.0), 0.0);
        assert_eq!(Family::NeoHooke.second_piola(1.0, c1, 0.0), 0.0);
        assert_eq!(Family::Yeoh.piola(1.0, c1, MPA / 1000.0), 0.0);
        assert_relative_eq!(Family::NeoHooke.piola(2.0, c1, 0.0), 1.75 / 3.0 * MPA, max_relative = 1e-14);
        assert_relative_eq!(Family::NeoHooke.second_piola(2.0, c1, 0.0), 0.875 / 3.0 * MPA, max_relative = 1e-14);
        let p = 2.0 * 1.75 * (1.0 / 6.0 + 0.003 * 4.0);
        assert_relative_eq!(Family::Yeoh.piola(2.0, c1, MPA / 1000.0), p * MPA, max_relative = 1e-14);
        for pairing in [PairingKind::Fp, PairingKind::Cs] {
            let nh = generate_1d(&spec(Family::NeoHooke, c1, 0.0, [0.8, 3.0], 57, pairing), Some(1.0)).unwrap();
            let ye = generate_1d(&spec(Family::Yeoh, c1, 0.0, [0.8, 3.0], 57, pairing), Some(1.0)).unwrap();
            assert_eq!(nh, ye);
        }
    }

    #[test]
    fn stresses_are_monotone() {
        for (family, c3) in [(Family::Linear, 0.0), (Family::NeoHooke, 0.0), (Family::Yeoh, MPA / 1000.0)] {
            for pairing in [PairingKind::Fp, PairingKind::Cs] {
                let set = generate_1d(&spec(family, MPA / 6.0, c3, [1.0, 3.2], 10_000, pairing), None).unwrap();
                let t = set.tuples();
                assert!(t.windows(2).all(|w| w[1].stress.get(0, 0) > w[0].stress.get(0, 0)), "{family} {pairing}");
                assert!(t.windows(2).all(|w| w[1].strain.get(0, 0) > w[0].strain.get(0, 0)));
                assert_eq!(t.last().unwrap().strain.get(0, 0), if pairing == PairingKind::Fp { 3.2 } else { 3.2 * 3.2 });
            }
        }
    }

    #[test]
    fn log_spacing_and_bad_specs() {
        let mut s = spec(Family::NeoHooke, 1.0, 0.0, [1.0, 4.0], 3, PairingKind::Fp);
        s.spacing = Spacing::Log;
        assert_relative_eq!(s.stretch(1), 2.0, max_relative = 1e-15);
        for bad in [
            spec(Family::Linear, 1.0, 0.0, [0.0, 2.0], 3, PairingKind::Fp),
            spec(Family::Linear, 1.0, 0.0, [1.0, 2.0], 1, PairingKind::Fp),
            spec(Family::Linear, -1.0, 0.0, [1.0, 2.0], 3, PairingKind::Fp),
            spec(Family::Linear, 1.0, 0.0, [2.0, 1.0], 3, PairingKind::Fp),
            spec(Family::Linear, 1.0, 0.0, [1.0, 2.0], 3, PairingKind::EpsSigma),
        ] {
            assert!(generate_1d(&bad, None).is_err());
        }
    }

    #[test]
    fn generator_source_matches_materialized_set() {
        for pairing in [PairingKind::Fp, PairingKind::Cs] {
            let sp = spec(Family::NeoHooke, MPA / 6.0, 0.0, [1.0, 3.2], 2000, pairing);
            let set = generate_1d(&sp, Some(2e5)).unwrap();
            for center in [0usize, 17, 700, 1999] {
                let c = set.tuples()[center];
                for r in [1e-3, 3e2, 1e4] {
                    let a = sp.tuples_within(&c, r, set.mu0()).unwrap();
                    let b = set.tuples_within(&c, r, set.mu0()).unwrap();
                    assert_eq!(a, b, "{pairing} center {center} radius {r}");
                }
            }
        }
    }

    #[test]
    fn rotation_augmentation() {
        let base: Vec<(Tensor2, Tensor2)> = (0..51 * 51)
            .map(|k| {
                let (i, j) = ((k / 51) as f64, (k % 51) as f64);
                (Tensor2::diag(&[1.0 + 0.01 * i, 1.0 + 0.007 * j]), Tensor2::diag(&[1e3 * i, 2e3 * j - 1e4]))
            })
            .collect();
        let base = DataSet::new(PairingKind::Cs, 2, base, Some(1e4)).unwrap();
        let aug = augment_rotations_2d(&base, 72).unwrap();
        assert_eq!(aug.len(), 189_873);
        for (k, t) in aug.tuples().iter().enumerate() {
            let b = &base.tuples()[k % base.len()];
            assert!(t.strain.is_symmetric(0.0) && t.stress.is_symmetric(0.0));
            assert!((t.strain.trace() - b.strain.trace()).abs() <= 1e-10 * b.strain.trace().abs().max(1.0));
            assert!((t.strain.det() - b.strain.det()).abs() <= 1e-10 * b.strain.det().abs().max(1.0));
            let sn = b.stress.norm().max(1.0);
            assert!((t.stress.trace() - b.stress.trace()).abs() <= 1e-10 * sn);
            assert!((t.stress.det() - b.stress.det()).abs() <= 1e-10 * sn * sn);
        }
        assert_eq!(augment_rotations_2d(&base, 0).unwrap(), base);
        let half = augment_rotations_2d(&base, 1).unwrap();
        let t = &half.tuples()[base.len() + 5];
        assert!(t.strain.max_abs_diff(&base.tuples()[5].strain.transpose()) < 1.0);
        let pi = Rotation::about_z(2, std::f64::consts::PI).unwrap();
        let b = &base.tuples()[77];
        let (e, s) = rotate_pair(&b.strain, &b.stress, &pi).unwrap();
        assert!(e.max_abs_diff(&b.strain) < 1e-14 && s.max_abs_diff(&b.stress) < 1e-9);
        let fp = DataSet::new(PairingKind::Fp, 2, vec![(Tensor2::identity(2), Tensor2::zeros(2))], Some(1.0)).unwrap();
        assert!(matches!(augment_rotations_2d(&fp, 3), Err(Error::PairingMismatch { .. })));
    }

    #[test]
    fn appendix_fixture_superposition() {
        let lib = fixture();
        assert_eq!(lib.alpha, 0.02);
        let t = superpose_linear(&lib, &[0.02, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(t.stress.to_voigt(), vec![9.13e4, 3.87e4, 3.96e4, 0.0, 0.0, 0.0]);
        assert_eq!(t.strain.to_voigt(), vec![0.02, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let z = superpose_linear(&lib, &[0.0; 6]).unwrap();
        assert!(z.strain.norm() == 0.0 && z.stress.norm() == 0.0);
        let (a, b) = (0.013, -0.0071);
        let ab = superpose_linear(&lib, &[a, b, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let ta = superpose_linear(&lib, &[a, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let tb = superpose_linear(&lib, &[0.0, b, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert!((ab.stress - (ta.stress + tb.stress)).norm() <= 1e-12 * ab.stress.norm());
        assert!((ab.strain - (ta.strain + tb.strain)).norm() <= 1e-12 * ab.strain.norm());
        let sh = superpose_linear(&lib, &[0.0, 0.0, 0.0, 0.02, 0.0, 0.0]).unwrap();
        assert_eq!(sh.strain.get(0, 1), 0.01);
        assert_eq!(sh.stress.get(1, 0), 1.94e4);
        assert!(superpose_linear(&lib, &[f64::NAN, 0.0, 0.0, 0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn fixture_parse_errors() {
        let p = Path::new("u.txt");
        let good = "# dd-unitloads v1\nalpha=0.02\n1 0 0 0 0 0\n1 0 0 0 0 0\n1 0 0 0 0 0\n1 0 0 0 0 0\n1 0 0 0 0 0\n";
        assert!(matches!(UnitLoadLibrary::parse(good, p), Err(Error::Parse { line: 7, .. })));
        let short = "# dd-unitloads v1\nalpha=0.02\n1 0 0 0 0\n";
        assert!(matches!(UnitLoadLibrary::parse(short, p), Err(Error::Parse { line: 3, .. })));
        assert!(matches!(UnitLoadLibrary::parse("# dd-unitloads v1\n\n", p), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn isotropic_completion() {
        let lib = fixture();
        let (elong, shear) = (lib.tuple(0), lib.tuple(3));
        let c = CubicStiffness::from_states(&elong, &shear).unwrap();
        let unit = IsotropicGrid {
            strains: (0..6).map(|k| lib.strain_voigt(k)).collect(),
            ..Default::default()
        };
        let set = isotropic_grid_from_two_states(&elong, &shear, &unit).unwrap();
        assert_eq!(set.len(), 6);
        for k in 0..6 {
            let s = set.tuples()[k].stress.to_voigt();
            for (i, v) in s.iter().enumerate() {
                let expect = match (k < 3, i < 3) {
                    (true, true) if i == k => c.c11,
                    (true, true) => c.c12,
                    (false, false) if i == k => c.c44,
                    _ => 0.0,
                } * lib.alpha;
                assert_relative_eq!(*v, expect, max_relative = 1e-12);
            }
        }
        assert_relative_eq!(set.tuples()[0].stress.get(0, 0), 9.13e4, max_relative = 1e-12);
        let zero = IsotropicGrid {
            strains: vec![[0.0; 6]],
            ..Default::default()
        };
        let z = isotropic_grid_from_two_states(&elong, &shear, &zero).unwrap();
        assert_eq!(z.len(), 1);
        assert!(z.tuples()[0].stress.norm() == 0.0 && z.tuples()[0].strain.norm() == 0.0);

        let grid = IsotropicGrid {
            slots: vec![0, 1, 3],
            amplitudes: vec![-0.01, 0.0, 0.02],
            rotations: 3,
            ..Default::default()
        };
        let set = isotropic_grid_from_two_states(&elong, &shear, &grid).unwrap();
        assert_eq!(set.len(), 27 * 4);
        let d = nalgebra::SMatrix::<f64, 6, 6>::from_fn(|i, j| c.matrix()[i][j]);
        for t in &set.tuples()[..27] {
            let mut e = nalgebra::SVector::<f64, 6>::from_column_slice(&t.strain.to_voigt());
            for k in 3..6 {
                e[k] *= 2.0;
            }
            let s = d * e;
            let got = nalgebra::SVector::<f64, 6>::from_column_slice(&t.stress.to_voigt());
            assert!((s - got).norm() <= 1e-12 * s.norm().max(1.0));
        }
        let bad = DataTuple {
            strain: Tensor2::zeros(2),
            stress: Tensor2::zeros(2),
            id: 0,
        };
        assert!(isotropic_grid_from_two_states(&bad, &shear, &unit).is_err());
        assert!(isotropic_grid_from_two_states(&shear, &elong, &unit).is_err());
    }

    #[test]
    fn pairing_conversion() {
        let fp = DataSet::new(PairingKind::Fp, 1, vec![(Tensor2::scalar(1.2), Tensor2::scalar(0.6))], Some(1.0)).unwrap();
        let cs = convert_pairing(&fp, PairingKind::Cs).unwrap();
        assert_relative_eq!(cs.tuples()[0].strain.get(0, 0), 1.44, max_relative = 1e-15);
        assert_relative_eq!(cs.tuples()[0].stress.get(0, 0), 0.5, max_relative = 1e-15);
        for kind in [PairingKind::Fp, PairingKind::Cs, PairingKind::EpsSigma] {
            let r = kind.reference_strain(3);
            let id = DataSet::new(kind, 3, vec![(r, Tensor2::zeros(3))], Some(1.0)).unwrap();
            for target in [PairingKind::Fp, PairingKind::Cs, PairingKind::EpsSigma] {
                let conv = convert_pairing(&id, target).unwrap();
                let t = &conv.tuples()[0];
                assert!(t.strain.max_abs_diff(&target.reference_strain(3)) < 1e-15 && t.stress.norm() == 0.0);
            }
        }
        let eps = DataSet::new(PairingKind::EpsSigma, 3, vec![(Tensor2::diag(&[0.02, 0.0, 0.0]), Tensor2::zeros(3))], Some(1.0)).unwrap();
        let c = convert_pairing(&eps, PairingKind::Cs).unwrap();
        assert!(c.tuples()[0].strain.max_abs_diff(&Tensor2::diag(&[1.04, 1.0, 1.0])) < 1e-15);

        let f = Tensor2::from_row_major(2, &[1.1, 0.05, 0.05, 0.95]).unwrap();
        let s = Tensor2::from_row_major(2, &[3.0, 0.4, 0.4, -1.0]).unwrap();
        let p = f.dot(&s);
        let fp = DataSet::new(PairingKind::Fp, 2, vec![(f, p)], Some(1.0)).unwrap();
        let back = convert_pairing(&convert_pairing(&fp, PairingKind::Cs).unwrap(), PairingKind::Fp).unwrap();
        assert!(back.tuples()[0].strain.max_abs_diff(&f) < 1e-9 && back.tuples()[0].stress.max_abs_diff(&p) < 1e-9);

        let sing = DataSet::new(PairingKind::Fp, 1, vec![(Tensor2::scalar(1.0), Tensor2::scalar(0.0)), (Tensor2::scalar(0.0), Tensor2::scalar(0.0))], Some(1.0)).unwrap();
        assert!(matches!(convert_pairing(&sing, PairingKind::Cs), Err(Error::InvalidTuple { id: 1, .. })));
    }
}
