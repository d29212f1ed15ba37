use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mc::{ApertureGeometry, ExperimentConfig, Source};
use crate::plate::{PlateSpec, QUARTZ};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Singlet,
    Coherent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceSection {
    pub kind: SourceKind,
    pub gamma: f64,
    pub pairs: u64,
    pub coherent_mean: f64,
    pub pump_jitter: f64,
}

impl Default for SourceSection {
    fn default() -> Self {
        Self { kind: SourceKind::Singlet, gamma: 0.33, pairs: 500_000, coherent_mean: 1e5, pump_jitter: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorSection {
    pub eta: f64,
    pub eta_ah: Option<f64>,
    pub eta_av: Option<f64>,
    pub eta_bh: Option<f64>,
    pub eta_bv: Option<f64>,
    pub electronic_noise: f64,
    pub gain: f64,
}

impl Default for DetectorSection {
    fn default() -> Self {
        Self { eta: 0.57, eta_ah: None, eta_av: None, eta_bh: None, eta_bv: None, electronic_noise: 300.0, gain: 1.0 }
    }
}

impl DetectorSection {
    pub fn channels(&self) -> [f64; 4] {
        [self.eta_ah, self.eta_av, self.eta_bh, self.eta_bv].map(|e| e.unwrap_or(self.eta))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub pulses: usize,
    pub seed: u64,
}

impl Default for RunSection {
    fn default() -> Self {
        Self { pulses: 20_000, seed: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OpticsSection {
    pub lambda_a_nm: f64,
    pub lambda_b_nm: f64,
}

impl Default for OpticsSection {
    fn default() -> Self {
        Self { lambda_a_nm: 635.0, lambda_b_nm: 805.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ApertureSection {
    /// Unset means matched to `d2_mm`.
    pub d1_mm: Option<f64>,
    pub d2_mm: f64,
}

impl Default for ApertureSection {
    fn default() -> Self {
        Self { d1_mm: None, d2_mm: 8.9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    Aperture,
    Phase,
    Pathlength,
    Efficiency,
}

impl std::str::FromStr for SweepKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "aperture" => Ok(SweepKind::Aperture),
            "phase" => Ok(SweepKind::Phase),
            "pathlength" => Ok(SweepKind::Pathlength),
            "efficiency" => Ok(SweepKind::Efficiency),
            other => Err(Error::Config(format!("unknown sweep kind '{other}' (aperture, phase, pathlength, efficiency)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub kind: SweepKind,
    pub points: usize,
    pub d1_min_mm: f64,
    pub d1_max_mm: f64,
    pub path_max_mm: f64,
    pub eta_min: f64,
    pub eta_max: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            kind: SweepKind::Aperture,
            points: 25,
            d1_min_mm: 3.0,
            d1_max_mm: 11.0,
            path_max_mm: 5.0,
            eta_min: 0.0,
            eta_max: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EntanglementSection {
    pub target: String,
    pub herald: String,
    /// 0 means one standard deviation of the herald counts.
    pub half_width: u64,
}

impl Default for EntanglementSection {
    fn default() -> Self {
        Self { target: "beam_b".into(), herald: "beam_a".into(), half_width: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationSection {
    pub levels: Vec<f64>,
}

impl Default for CalibrationSection {
    fn default() -> Self {
        Self { levels: vec![1e4, 3e4, 1e5, 3e5, 1e6] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlateSection {
    pub thickness_um: f64,
}

impl Default for PlateSection {
    fn default() -> Self {
        Self { thickness_um: 170.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSection {
    pub gammas: Vec<f64>,
    pub rotations: usize,
    pub tolerance: f64,
}

impl Default for OracleSection {
    fn default() -> Self {
        Self { gammas: vec![0.05, 0.1, 0.2, 0.3, 0.5], rotations: 5, tolerance: 1e-8 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub source: SourceSection,
    pub detector: DetectorSection,
    pub run: RunSection,
    pub optics: OpticsSection,
    pub aperture: ApertureSection,
    pub sweep: SweepSection,
    pub entanglement: EntanglementSection,
    pub calibration: CalibrationSection,
    pub plate: PlateSection,
    pub oracle: OracleSection,
}

/// `(key, default, unit, meaning)` for every config key.
pub const SCHEMA: &[(&str, &str, &str, &str)] = &[
    ("source.kind", "\"singlet\"", "-", "\"singlet\" or \"coherent\" (H-polarized control beam)"),
    ("source.gamma", "0.33", "1", "parametric gain; photons per mode sinh^2(gamma)"),
    ("source.pairs", "500000", "modes", "mode pairs M behind aperture D2"),
    ("source.coherent_mean", "100000.0", "photons", "coherent control: mean photons per beam"),
    ("source.pump_jitter", "0.0", "relative", "std of the per-pulse gain, gamma (1 + delta)"),
    ("detector.eta", "0.57", "1", "detection efficiency of every channel"),
    ("detector.eta_ah", "eta", "1", "efficiency override, channel AH (also eta_av, eta_bh, eta_bv)"),
    ("detector.eta_av", "eta", "1", "efficiency override, channel AV"),
    ("detector.eta_bh", "eta", "1", "efficiency override, channel BH"),
    ("detector.eta_bv", "eta", "1", "efficiency override, channel BV"),
    ("detector.electronic_noise", "300.0", "photons rms", "readout noise per detector, photon-equivalent"),
    ("detector.gain", "1.0", "units/photon", "detector units per detected photon"),
    ("run.pulses", "20000", "pulses", "pulses per ensemble (per Stokes basis)"),
    ("run.seed", "1", "-", "seed of all random numbers"),
    ("optics.lambda_a_nm", "635.0", "nm", "wavelength of beam A"),
    ("optics.lambda_b_nm", "805.0", "nm", "wavelength of beam B"),
    ("aperture.d1_mm", "matched", "mm", "aperture of beam A; unset = d2 lambda_a / lambda_b"),
    ("aperture.d2_mm", "8.9", "mm", "aperture of beam B"),
    ("sweep.kind", "\"aperture\"", "-", "aperture | phase | pathlength | efficiency"),
    ("sweep.points", "25", "points", "grid size of every sweep"),
    ("sweep.d1_min_mm", "3.0", "mm", "aperture sweep start"),
    ("sweep.d1_max_mm", "11.0", "mm", "aperture sweep end"),
    ("sweep.path_max_mm", "5.0", "mm", "path-length sweep covers -max..max"),
    ("sweep.eta_min", "0.0", "1", "efficiency sweep start"),
    ("sweep.eta_max", "1.0", "1", "efficiency sweep end"),
    ("entanglement.target", "\"beam_b\"", "-", "measured channel: ah av bh bv beam_a beam_b"),
    ("entanglement.herald", "\"beam_a\"", "-", "post-selection channel"),
    ("entanglement.half_width", "0", "photons", "herald window half width; 0 = one std"),
    ("calibration.levels", "[10000.0, 30000.0, 100000.0, 300000.0, 1000000.0]", "photons", "source levels (>= 3 distinct)"),
    ("plate.thickness_um", "170.0", "um", "crystal quartz plate thickness"),
    ("oracle.gammas", "[0.05, 0.1, 0.2, 0.3, 0.5]", "1", "gains compared against the Fock oracle"),
    ("oracle.rotations", "5", "-", "random polarization rotations per state"),
    ("oracle.tolerance", "1e-8", "abs", "largest accepted moment difference"),
];

pub fn schema_help() -> String {
    let mut out = String::from("Configuration keys (TOML sections, key = value):\n");
    let width = SCHEMA.iter().map(|r| r.0.len()).max().unwrap_or(0);
    for (key, default, unit, meaning) in SCHEMA {
        out.push_str(&format!("  {key:<width$}  default {default}  [{unit}]  {meaning}\n"));
    }
    out.push_str("\nExit codes: 0 success, 1 I/O failure, 2 config error, 3 numeric or convergence failure.\n");
    out
}

fn parse_err(e: toml::de::Error) -> Error {
    Error::Config(e.to_string())
}

impl Config {
    /// Parses TOML, or the `# key: value` manifest block of an output CSV.
    pub fn parse(text: &str) -> Result<Self> {
        if text.trim_start().starts_with('#') {
            return Self::from_manifest(text);
        }
        let cfg: Config = toml::from_str(text).map_err(parse_err)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    fn from_manifest(text: &str) -> Result<Self> {
        let mut sections: std::collections::BTreeMap<String, Vec<String>> = Default::default();
        for line in text.lines().take_while(|l| l.starts_with('#')) {
            let body = line.trim_start_matches('#').trim();
            let Some((key, value)) = body.split_once(": ") else { continue };
            let Some((section, field)) = key.split_once('.') else { continue };
            if section == "output" {
                continue;
            }
            sections.entry(section.to_string()).or_default().push(format!("{field} = {value}"));
        }
        let toml_text: String = sections.iter().map(|(s, lines)| format!("[{s}]\n{}\n", lines.join("\n"))).collect();
        Self::parse(&toml_text)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        self.experiment().validate().map_err(|e| Error::Config(e.to_string()))?;
        for (name, v) in [("optics.lambda_a_nm", self.optics.lambda_a_nm), ("optics.lambda_b_nm", self.optics.lambda_b_nm)] {
            if !(v.is_finite() && v > 0.0) {
                return fail(format!("{name} must be > 0, got {v}"));
            }
        }
        if !(self.aperture.d2_mm > 0.0) || self.aperture.d1_mm.is_some_and(|d| !(d > 0.0)) {
            return fail("aperture diameters must be > 0".into());
        }
        let s = &self.sweep;
        if s.points < 2 {
            return fail(format!("sweep.points must be >= 2, got {}", s.points));
        }
        if !(s.d1_min_mm > 0.0 && s.d1_max_mm > s.d1_min_mm) {
            return fail("sweep needs 0 < d1_min_mm < d1_max_mm".into());
        }
        if !(s.path_max_mm > 0.0) {
            return fail("sweep.path_max_mm must be > 0".into());
        }
        if !(0.0 <= s.eta_min && s.eta_min < s.eta_max && s.eta_max <= 1.0) {
            return fail("sweep needs 0 <= eta_min < eta_max <= 1".into());
        }
        self.entanglement.target.parse::<crate::mc::Channel>().map_err(|e| Error::Config(format!("entanglement.target: {e}")))?;
        self.entanglement.herald.parse::<crate::mc::Channel>().map_err(|e| Error::Config(format!("entanglement.herald: {e}")))?;
        if !(self.plate.thickness_um >= 0.0) {
            return fail("plate.thickness_um must be >= 0".into());
        }
        if self.oracle.gammas.iter().any(|g| !(g.is_finite() && *g >= 0.0)) || !(self.oracle.tolerance > 0.0) {
            return fail("oracle.gammas must be >= 0 and oracle.tolerance > 0".into());
        }
        Ok(())
    }

    pub fn geometry(&self) -> ApertureGeometry {
        ApertureGeometry { d2: self.aperture.d2_mm * 1e-3, lambda_a: self.optics.lambda_a_nm * 1e-9, lambda_b: self.optics.lambda_b_nm * 1e-9 }
    }

    pub fn d1(&self) -> f64 {
        self.aperture.d1_mm.map(|d| d * 1e-3).unwrap_or_else(|| self.geometry().matched_d1())
    }

    pub fn experiment(&self) -> ExperimentConfig {
        let g = self.geometry();
        ExperimentConfig {
            gamma: self.source.gamma,
            n_pairs: self.source.pairs,
            pulses: self.run.pulses,
            eta: self.detector.channels(),
            pump_jitter: self.source.pump_jitter,
            electronic_noise: self.detector.electronic_noise,
            gain: self.detector.gain,
            seed: self.run.seed,
            aperture_ratio: g.ratio(self.aperture.d1_mm.map(|d| d * 1e-3).unwrap_or_else(|| g.matched_d1())),
            source: match self.source.kind {
                SourceKind::Singlet => Source::Singlet,
                SourceKind::Coherent => Source::Coherent { mean_per_beam: self.source.coherent_mean },
            },
        }
    }

    pub fn plate_spec(&self) -> PlateSpec {
        PlateSpec {
            thickness: self.plate.thickness_um * 1e-6,
            lambda_a: self.optics.lambda_a_nm * 1e-9,
            lambda_b: self.optics.lambda_b_nm * 1e-9,
            material: QUARTZ,
        }
    }

    /// Config with every default written out, as `section.key` / TOML
    /// literal pairs.
    pub fn manifest_entries(&self) -> Vec<(String, String)> {
        let mut resolved = self.clone();
        let [ah, av, bh, bv] = self.detector.channels();
        resolved.detector.eta_ah = Some(ah);
        resolved.detector.eta_av = Some(av);
        resolved.detector.eta_bh = Some(bh);
        resolved.detector.eta_bv = Some(bv);
        let value = toml::Value::try_from(&resolved).expect("config serializes");
        let mut out = Vec::new();
        if let toml::Value::Table(sections) = value {
            for (section, body) in sections {
                if let toml::Value::Table(keys) = body {
                    for (key, v) in keys {
                        out.push((format!("{section}.{key}"), v.to_string()));
                    }
                }
            }
        }
        // A matched aperture stays unset so that reloading reproduces the
        // exact unit ratio; the diameter actually used is recorded alongside.
        out.push(("output.d1_mm".into(), num_literal(self.d1() * 1e3)));
        out
    }
}

fn num_literal(v: f64) -> String {
    toml::Value::Float(v).to_string()
}
