//! Tunable thresholds and the flat `key = value` config file.
//!
//! Every key belongs to exactly one of the three sections below; the file
//! format has no section headers. Unknown keys, duplicate keys and
//! unparsable values are errors.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` given twice")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: invalid value `{value}` for `{key}`")]
    BadValue {
        line: usize,
        key: String,
        value: String,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("{0}")]
    Io(String),
}

/// Thresholds of the per-frame tactile pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Earliest frame at which a soft stable contact may be declared.
    pub soft_stable_window: usize,
    /// Frame at which stable contact is declared unconditionally.
    pub hard_stable_frame: usize,
    /// Residual marker motion (px/frame) below which contact is settled.
    pub soft_stable_threshold_px: f64,
    pub onset_angle_threshold_deg: f64,
    pub onset_motion_threshold_px: f64,
    pub stability_angle_deg: f64,
    pub vote_dominance_ratio: f64,
    pub svd_translation_ratio: f64,
    pub contact_intensity_threshold: u8,
    pub min_contact_markers: usize,
    /// Motions shorter than this are treated as tracking noise.
    pub noise_floor_px: f64,
    /// Markers closer than this to the COR are left out of the angle.
    pub min_cor_distance_px: f64,
    pub max_condition_number: f64,
    /// Weight least-squares rows by motion length (raw perpendicularity
    /// form); when false every row is normalized to unit length.
    pub weight_by_motion: bool,
    pub contour_intensity_threshold: u8,
    pub contour_min_area_px: usize,
    pub min_eccentricity: f64,
    /// Contour rotation (degrees) that counts as onset in small-area mode.
    pub contour_onset_deg: f64,
    /// Percentile of stable-frame displacement used to pick contact markers
    /// when no intensity frames are available.
    pub fallback_displacement_percentile: f64,
    /// Fraction of contact markers that must be lost to call a detachment.
    pub detach_invisible_fraction: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            soft_stable_window: 10,
            hard_stable_frame: 30,
            soft_stable_threshold_px: 0.05,
            onset_angle_threshold_deg: 10.0,
            onset_motion_threshold_px: 3.0,
            stability_angle_deg: 5.0,
            vote_dominance_ratio: 2.0,
            svd_translation_ratio: 4.0,
            contact_intensity_threshold: 25,
            min_contact_markers: 6,
            noise_floor_px: 0.5,
            min_cor_distance_px: 2.0,
            max_condition_number: 1e6,
            weight_by_motion: true,
            contour_intensity_threshold: 30,
            contour_min_area_px: 50,
            min_eccentricity: 1.2,
            contour_onset_deg: 1.0,
            fallback_displacement_percentile: 0.6,
            detach_invisible_fraction: 0.7,
        }
    }
}

/// Plane segmentation and object-length settings (meters).
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryConfig {
    pub ransac_iterations: usize,
    pub ransac_threshold_m: f64,
    pub length_percentile: f64,
    /// Use Euclidean distance to the center instead of the distance along
    /// the principal axis.
    pub euclidean_length: bool,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig {
            ransac_iterations: 500,
            ransac_threshold_m: 0.005,
            length_percentile: 0.95,
            euclidean_length: false,
        }
    }
}

/// Regrasp step schedule, as fractions of the object length.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerConfig {
    pub initial_step_fraction: f64,
    pub later_step_fraction: f64,
    pub flip_step_factor: f64,
    pub max_regrasps: usize,
    /// Offsets are clamped to `±0.5 L (1 - clamp_epsilon)`.
    pub clamp_epsilon: f64,
    /// Inverts the orientation-to-direction mapping for mirrored mounts.
    pub flip_direction: bool,
    pub lift_height_m: f64,
    pub hold_time_s: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            initial_step_fraction: 0.4,
            later_step_fraction: 1.0 / 6.0,
            flip_step_factor: 0.5,
            max_regrasps: 10,
            clamp_epsilon: 0.05,
            flip_direction: false,
            lift_height_m: 0.05,
            hold_time_s: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Settings {
    pub pipeline: PipelineConfig,
    pub geometry: GeometryConfig,
    pub controller: ControllerConfig,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("soft_stable_threshold_px", self.soft_stable_threshold_px),
            ("onset_angle_threshold_deg", self.onset_angle_threshold_deg),
            ("onset_motion_threshold_px", self.onset_motion_threshold_px),
            ("stability_angle_deg", self.stability_angle_deg),
            ("noise_floor_px", self.noise_floor_px),
            ("min_cor_distance_px", self.min_cor_distance_px),
            ("max_condition_number", self.max_condition_number),
            ("min_eccentricity", self.min_eccentricity),
            ("contour_onset_deg", self.contour_onset_deg),
        ];
        for (k, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ConfigError::Invalid(format!("{k} must be positive")));
            }
        }
        if self.soft_stable_window == 0 || self.hard_stable_frame == 0 {
            return Err(ConfigError::Invalid("stable-contact frames must be positive".into()));
        }
        if self.contact_intensity_threshold == 0 || self.contour_intensity_threshold == 0 {
            return Err(ConfigError::Invalid("intensity thresholds must be positive".into()));
        }
        if self.min_contact_markers == 0 || self.contour_min_area_px == 0 {
            return Err(ConfigError::Invalid("minimum counts must be positive".into()));
        }
        if !(self.vote_dominance_ratio > 1.0) {
            return Err(ConfigError::Invalid("vote_dominance_ratio must exceed 1".into()));
        }
        if !(self.svd_translation_ratio > 1.0) {
            return Err(ConfigError::Invalid("svd_translation_ratio must exceed 1".into()));
        }
        for (k, v) in [
            ("fallback_displacement_percentile", self.fallback_displacement_percentile),
            ("detach_invisible_fraction", self.detach_invisible_fraction),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(ConfigError::Invalid(format!("{k} must lie in (0, 1)")));
            }
        }
        Ok(())
    }
}

impl GeometryConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.ransac_iterations == 0 {
            return Err(ConfigError::Invalid("ransac_iterations must be positive".into()));
        }
        if !(self.ransac_threshold_m > 0.0) {
            return Err(ConfigError::Invalid("ransac_threshold_m must be positive".into()));
        }
        if !(self.length_percentile > 0.0 && self.length_percentile <= 1.0) {
            return Err(ConfigError::Invalid("length_percentile must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (k, v) in [
            ("initial_step_fraction", self.initial_step_fraction),
            ("later_step_fraction", self.later_step_fraction),
            ("lift_height_m", self.lift_height_m),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ConfigError::Invalid(format!("{k} must be positive")));
            }
        }
        if !(self.flip_step_factor > 0.0 && self.flip_step_factor < 1.0) {
            return Err(ConfigError::Invalid("flip_step_factor must lie in (0, 1)".into()));
        }
        if !(self.clamp_epsilon >= 0.0 && self.clamp_epsilon < 1.0) {
            return Err(ConfigError::Invalid("clamp_epsilon must lie in [0, 1)".into()));
        }
        if self.max_regrasps == 0 {
            return Err(ConfigError::Invalid("max_regrasps must be positive".into()));
        }
        if !(self.hold_time_s >= 0.0) {
            return Err(ConfigError::Invalid("hold_time_s must be non-negative".into()));
        }
        Ok(())
    }
}

// One table drives parsing and formatting so the two cannot drift apart.
macro_rules! settings_keys {
    ($( $section:ident . $field:ident : $kind:ident ),* $(,)?) => {
        const KEYS: &[&str] = &[$(stringify!($field)),*];

        fn assign(s: &mut Settings, key: &str, value: &str) -> Option<Result<(), ()>> {
            match key {
                $( stringify!($field) => Some(settings_keys!(@parse $kind, value).map(|v| s.$section.$field = v)), )*
                _ => None,
            }
        }

        fn render(s: &Settings) -> String {
            let mut out = String::new();
            $( writeln!(out, "{} = {}", stringify!($field), s.$section.$field).unwrap(); )*
            out
        }
    };
    (@parse float, $v:expr) => { $v.parse::<f64>().map_err(|_| ()) };
    (@parse usize, $v:expr) => { $v.parse::<usize>().map_err(|_| ()) };
    (@parse u8, $v:expr) => { $v.parse::<u8>().map_err(|_| ()) };
    (@parse bool, $v:expr) => { match $v { "true" => Ok(true), "false" => Ok(false), _ => Err(()) } };
}

settings_keys! {
    pipeline.soft_stable_window: usize,
    pipeline.hard_stable_frame: usize,
    pipeline.soft_stable_threshold_px: float,
    pipeline.onset_angle_threshold_deg: float,
    pipeline.onset_motion_threshold_px: float,
    pipeline.stability_angle_deg: float,
    pipeline.vote_dominance_ratio: float,
    pipeline.svd_translation_ratio: float,
    pipeline.contact_intensity_threshold: u8,
    pipeline.min_contact_markers: usize,
    pipeline.noise_floor_px: float,
    pipeline.min_cor_distance_px: float,
    pipeline.max_condition_number: float,
    pipeline.weight_by_motion: bool,
    pipeline.contour_intensity_threshold: u8,
    pipeline.contour_min_area_px: usize,
    pipeline.min_eccentricity: float,
    pipeline.contour_onset_deg: float,
    pipeline.fallback_displacement_percentile: float,
    pipeline.detach_invisible_fraction: float,
    geometry.ransac_iterations: usize,
    geometry.ransac_threshold_m: float,
    geometry.length_percentile: float,
    geometry.euclidean_length: bool,
    controller.initial_step_fraction: float,
    controller.later_step_fraction: float,
    controller.flip_step_factor: float,
    controller.max_regrasps: usize,
    controller.clamp_epsilon: float,
    controller.flip_direction: bool,
    controller.lift_height_m: float,
    controller.hold_time_s: float,
}

impl Settings {
    pub fn parse(text: &str) -> Result<Settings, ConfigError> {
        let mut s = Settings::default();
        let mut seen = std::collections::HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or(ConfigError::Syntax { line })?;
            if key.is_empty() || value.is_empty() {
                return Err(ConfigError::Syntax { line });
            }
            if !seen.insert(key.to_string()) {
                return Err(ConfigError::DuplicateKey {
                    line,
                    key: key.into(),
                });
            }
            match assign(&mut s, key, value) {
                None => {
                    return Err(ConfigError::UnknownKey {
                        line,
                        key: key.into(),
                    })
                }
                Some(Err(())) => {
                    return Err(ConfigError::BadValue {
                        line,
                        key: key.into(),
                        value: value.into(),
                    })
                }
                Some(Ok(())) => {}
            }
        }
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.pipeline.validate()?;
        self.geometry.validate()?;
        self.controller.validate()
    }

    pub fn to_text(&self) -> String {
        render(self)
    }

    pub fn keys() -> &'static [&'static str] {
        KEYS
    }

    pub fn read(path: &Path) -> Result<Settings, ConfigError> {
        let text = fs::read_to_string(path)
            .map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
        Settings::parse(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        Settings::default().validate().unwrap();
        assert_eq!(PipelineConfig::default().soft_stable_window, 10);
        assert_eq!(PipelineConfig::default().hard_stable_frame, 30);
        assert_eq!(PipelineConfig::default().stability_angle_deg, 5.0);
    }

    #[test]
    fn text_round_trip() {
        let mut s = Settings::default();
        s.pipeline.onset_angle_threshold_deg = 12.5;
        s.geometry.euclidean_length = true;
        s.controller.max_regrasps = 7;
        let back = Settings::parse(&s.to_text()).unwrap();
        assert_eq!(back, s);
        assert_eq!(s.to_text().lines().count(), Settings::keys().len());
    }

    #[test]
    fn parse_errors() {
        assert_eq!(
            Settings::parse("bogus = 1\n"),
            Err(ConfigError::UnknownKey {
                line: 1,
                key: "bogus".into()
            })
        );
        assert!(matches!(
            Settings::parse("# comment\nstability_angle_deg 5\n"),
            Err(ConfigError::Syntax { line: 2 })
        ));
        assert!(matches!(
            Settings::parse("min_contact_markers = -1\n"),
            Err(ConfigError::BadValue { .. })
        ));
        assert!(matches!(
            Settings::parse("vote_dominance_ratio = 1.0\n"),
            Err(ConfigError::Invalid(_))
        ));
        assert!(matches!(
            Settings::parse("stability_angle_deg = 5\nstability_angle_deg = 6\n"),
            Err(ConfigError::DuplicateKey { .. })
        ));
        assert!(matches!(
            Settings::parse("stability_angle_deg = 0\n"),
            Err(ConfigError::Invalid(_))
        ));
    }

    #[test]
    fn comments_and_blank_lines() {
        let s = Settings::parse("\n# tuned\nstability_angle_deg = 7 # wider\n").unwrap();
        assert_eq!(s.pipeline.stability_angle_deg, 7.0);
    }
}
