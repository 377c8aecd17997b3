//! Scenario files: flat `section.key = value` TOML.
//!
//! Every key is optional and overrides the preset chosen by `sim.scenario`.
//! Unknown keys are an error. See the README for the full key list.

use crate::attitude::{Mat3, Vec3};
use crate::controller::{l_rho, Variant};
use crate::envelope::DetectionParams;
use crate::plant::{DesiredMotion, DisturbanceModel, InertiaVariation};
use crate::sim::{ScenarioConfig, ScenarioError};
use std::path::{Path, PathBuf};
use thiserror::Error;
use toml::Value;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read `{path}`: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("config key `{key}` must be {expected}")]
    Type { key: String, expected: &'static str },
    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: String, reason: String },
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

/// Parameters of the non-default controller variants, kept so that the
/// variant can be switched after loading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariantParams {
    pub zeta_const: f64,
    pub d_m: f64,
    pub phi: f64,
    pub k_s: f64,
}

impl Default for VariantParams {
    fn default() -> Self {
        Self {
            zeta_const: 30.0,
            d_m: 0.06,
            phi: 0.01,
            k_s: 1.0,
        }
    }
}

impl VariantParams {
    /// Build a variant from its CLI / config name.
    pub fn variant(&self, name: &str) -> Option<Variant> {
        match name {
            "acpc" => Some(Variant::Acpc),
            "constant-gain" => Some(Variant::ConstantGain {
                zeta: self.zeta_const,
            }),
            "nominal" => Some(Variant::Nominal {
                d_m: self.d_m,
                phi: self.phi,
                k_s: self.k_s,
            }),
            _ => None,
        }
    }
}

pub const VARIANT_NAMES: [&str; 3] = ["acpc", "constant-gain", "nominal"];

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedConfig {
    pub scenario: ScenarioConfig,
    pub variants: VariantParams,
}

pub fn load_config(path: &Path) -> Result<LoadedConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
}

/// All accepted keys.
pub const KEYS: &[&str] = &[
    "sim.scenario",
    "sim.variant",
    "sim.dt",
    "sim.t_end",
    "sim.plant_substeps",
    "sim.modification_substeps",
    "sim.steady_window",
    "plant.J0",
    "plant.inertia_variation",
    "plant.disturbance",
    "plant.omega_p",
    "plant.d_scale",
    "plant.U_max",
    "plant.Omega_max",
    "plant.q_s0",
    "plant.q_d0",
    "plant.omega_s0",
    "plant.desired",
    "plant.omega_d_amplitude",
    "plant.omega_d_c",
    "envelope.rho_0",
    "envelope.rho_inf",
    "envelope.gamma",
    "envelope.alpha",
    "envelope.epsilon",
    "envelope.C_rho",
    "envelope.C_v",
    "envelope.F_v",
    "envelope.sigma",
    "envelope.sigma_rho",
    "envelope.sigma_s",
    "controller.C_d",
    "controller.C_f",
    "controller.B_omega",
    "controller.B_omega_margin",
    "controller.kappa_min",
    "controller.k_B",
    "controller.K_q",
    "controller.K_xi",
    "controller.K_2",
    "controller.K_delta",
    "controller.K_gamma",
    "controller.K_zeta",
    "controller.lambda_zeta",
    "controller.lambda_chi",
    "controller.p_1",
    "controller.p_2",
    "controller.p_xi",
    "controller.p_c",
    "controller.n_1",
    "controller.n_2",
    "controller.n_delta",
    "controller.g_1",
    "controller.g_2",
    "controller.g_gamma",
    "controller.g_c",
    "controller.a_1",
    "controller.a_2",
    "controller.a_3",
    "controller.b_1",
    "controller.zeta_0",
    "controller.zeta_max",
    "controller.sigma_zeta",
    "controller.chi_0",
    "controller.Theta_Lm",
    "controller.sigma_Theta",
    "controller.eps_omega",
    "controller.eps_aux",
    "controller.v_ceiling",
    "controller.zeta_const",
    "controller.D_m",
    "controller.phi",
    "controller.K_s",
];

fn flatten(prefix: &str, table: &toml::Table, out: &mut Vec<(String, Value)>) {
    for (k, v) in table {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            Value::Table(t) => flatten(&key, t, out),
            other => out.push((key, other.clone())),
        }
    }
}

fn num(key: &str, v: &Value) -> Result<f64, ConfigError> {
    match v {
        Value::Float(x) => Ok(*x),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(ConfigError::Type {
            key: key.into(),
            expected: "a number",
        }),
    }
}

fn count(key: &str, v: &Value) -> Result<usize, ConfigError> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as usize),
        _ => Err(ConfigError::Type {
            key: key.into(),
            expected: "a non-negative integer",
        }),
    }
}

fn text<'a>(key: &str, v: &'a Value) -> Result<&'a str, ConfigError> {
    v.as_str().ok_or_else(|| ConfigError::Type {
        key: key.into(),
        expected: "a string",
    })
}

fn array<const N: usize>(key: &str, v: &Value) -> Result<[f64; N], ConfigError> {
    let err = || ConfigError::Type {
        key: key.into(),
        expected: match N {
            3 => "an array of 3 numbers",
            4 => "an array of 4 numbers",
            _ => "a numeric array",
        },
    };
    let items = v.as_array().ok_or_else(err)?;
    if items.len() != N {
        return Err(err());
    }
    let mut out = [0.0; N];
    for (o, item) in out.iter_mut().zip(items) {
        *o = num(key, item).map_err(|_| err())?;
    }
    Ok(out)
}

pub fn parse_config(source: &str) -> Result<LoadedConfig, ConfigError> {
    let table: toml::Table = source.parse()?;
    let mut entries = Vec::new();
    flatten("", &table, &mut entries);
    if let Some((k, _)) = entries.iter().find(|(k, _)| !KEYS.contains(&k.as_str())) {
        return Err(ConfigError::UnknownKey(k.clone()));
    }
    let get = |name: &str| entries.iter().find(|(k, _)| k == name).map(|(_, v)| v);

    let mut sc = match get("sim.scenario")
        .map(|v| text("sim.scenario", v))
        .transpose()?
    {
        None | Some("fundamental") => ScenarioConfig::fundamental(),
        Some("reorientation") => ScenarioConfig::reorientation(0.0175),
        Some(other) => {
            return Err(ConfigError::Invalid {
                key: "sim.scenario".into(),
                reason: format!("expected `fundamental` or `reorientation`, got `{other}`"),
            })
        }
    };
    let mut vp = VariantParams::default();
    let mut variant_name = String::from("acpc");
    let (mut alpha, mut eps) = (sc.detection.alpha, sc.detection.sm);
    let (mut omega_p, mut d_scale) = match sc.disturbance {
        DisturbanceModel::MultiTone { omega_p, scale } => (omega_p, scale),
        DisturbanceModel::None => (0.01, 1.0),
    };
    let mut disturbance_on = !matches!(sc.disturbance, DisturbanceModel::None);
    let (mut amp, mut c) = match sc.desired {
        DesiredMotion::Tracking { amplitude, c } => (amplitude, c),
        DesiredMotion::Rest => (0.0, [80.0, 150.0, 100.0]),
    };
    let mut tracking = matches!(sc.desired, DesiredMotion::Tracking { .. });
    let mut p_c = None;

    for (key, v) in &entries {
        let k = key.as_str();
        let g = &mut sc.gains;
        match k {
            "sim.scenario" => {}
            "sim.variant" => variant_name = text(k, v)?.to_string(),
            "sim.dt" => sc.dt = num(k, v)?,
            "sim.t_end" => sc.t_end = num(k, v)?,
            "sim.plant_substeps" => sc.plant_substeps = count(k, v)?,
            "sim.modification_substeps" => sc.modification_substeps = count(k, v)?,
            "sim.steady_window" => sc.steady_window = num(k, v)?,
            "plant.J0" => sc.j0 = Mat3::diag(Vec3::from_array(array::<3>(k, v)?)),
            "plant.inertia_variation" => {
                sc.inertia_variation = match text(k, v)? {
                    "constant" => InertiaVariation::Constant,
                    "sinusoidal" => InertiaVariation::Sinusoidal,
                    o => {
                        return Err(invalid(
                            k,
                            format!("expected `constant` or `sinusoidal`, got `{o}`"),
                        ))
                    }
                }
            }
            "plant.disturbance" => {
                disturbance_on = match text(k, v)? {
                    "none" => false,
                    "multi-tone" => true,
                    o => {
                        return Err(invalid(
                            k,
                            format!("expected `none` or `multi-tone`, got `{o}`"),
                        ))
                    }
                }
            }
            "plant.omega_p" => omega_p = num(k, v)?,
            "plant.d_scale" => d_scale = num(k, v)?,
            "plant.U_max" => sc.u_max = num(k, v)?,
            "plant.Omega_max" => sc.omega_max = num(k, v)?,
            "plant.q_s0" => sc.q_s0 = array::<4>(k, v)?,
            "plant.q_d0" => sc.q_d0 = array::<4>(k, v)?,
            "plant.omega_s0" => sc.omega_s0 = Vec3::from_array(array::<3>(k, v)?),
            "plant.desired" => {
                tracking = match text(k, v)? {
                    "rest" => false,
                    "tracking" => true,
                    o => {
                        return Err(invalid(
                            k,
                            format!("expected `rest` or `tracking`, got `{o}`"),
                        ))
                    }
                }
            }
            "plant.omega_d_amplitude" => amp = num(k, v)?,
            "plant.omega_d_c" => c = array::<3>(k, v)?,
            "envelope.rho_0" => sc.perf.rho_0 = num(k, v)?,
            "envelope.rho_inf" => sc.perf.rho_inf = num(k, v)?,
            "envelope.gamma" => sc.perf.gamma = num(k, v)?,
            "envelope.alpha" => alpha = num(k, v)?,
            "envelope.epsilon" => eps = num(k, v)?,
            "envelope.C_rho" => sc.modification.c_rho = num(k, v)?,
            "envelope.C_v" => sc.modification.c_v = num(k, v)?,
            "envelope.F_v" => sc.modification.f_v = num(k, v)?,
            "envelope.sigma" => sc.modification.sigma = num(k, v)?,
            "envelope.sigma_rho" => sc.modification.sigma_rho = num(k, v)?,
            "envelope.sigma_s" => sc.modification.sigma_s = num(k, v)?,
            "controller.C_d" => sc.c_d = num(k, v)?,
            "controller.C_f" => sc.c_f = num(k, v)?,
            "controller.B_omega" => sc.b_omega = Some(num(k, v)?),
            "controller.B_omega_margin" => sc.b_omega_margin = num(k, v)?,
            "controller.kappa_min" => sc.kappa_min = num(k, v)?,
            "controller.k_B" => g.k_b = num(k, v)?,
            "controller.K_q" => g.k_q = num(k, v)?,
            "controller.K_xi" => g.k_xi = num(k, v)?,
            "controller.K_2" => g.k_2 = num(k, v)?,
            "controller.K_delta" => g.k_delta = num(k, v)?,
            "controller.K_gamma" => g.k_gamma = num(k, v)?,
            "controller.K_zeta" => g.k_zeta = num(k, v)?,
            "controller.lambda_zeta" => g.lambda_zeta = num(k, v)?,
            "controller.lambda_chi" => g.lambda_chi = num(k, v)?,
            "controller.p_1" => g.p_1 = num(k, v)?,
            "controller.p_2" => g.p_2 = num(k, v)?,
            "controller.p_xi" => g.p_xi = num(k, v)?,
            "controller.p_c" => p_c = Some(num(k, v)?),
            "controller.n_1" => g.n_1 = num(k, v)?,
            "controller.n_2" => g.n_2 = num(k, v)?,
            "controller.n_delta" => g.n_delta = num(k, v)?,
            "controller.g_1" => g.g_1 = num(k, v)?,
            "controller.g_2" => g.g_2 = num(k, v)?,
            "controller.g_gamma" => g.g_gamma = num(k, v)?,
            "controller.g_c" => g.g_c = num(k, v)?,
            "controller.a_1" => g.a_1 = num(k, v)?,
            "controller.a_2" => g.a_2 = num(k, v)?,
            "controller.a_3" => g.a_3 = num(k, v)?,
            "controller.b_1" => g.b_1 = num(k, v)?,
            "controller.zeta_0" => g.zeta_0 = num(k, v)?,
            "controller.zeta_max" => g.zeta_max = num(k, v)?,
            "controller.sigma_zeta" => g.sigma_zeta = num(k, v)?,
            "controller.chi_0" => g.chi_0 = num(k, v)?,
            "controller.Theta_Lm" => g.theta_lm = num(k, v)?,
            "controller.sigma_Theta" => g.sigma_theta = num(k, v)?,
            "controller.eps_omega" => g.eps_omega = num(k, v)?,
            "controller.eps_aux" => g.eps_aux = num(k, v)?,
            "controller.v_ceiling" => g.v_ceiling = num(k, v)?,
            "controller.zeta_const" => vp.zeta_const = num(k, v)?,
            "controller.D_m" => vp.d_m = num(k, v)?,
            "controller.phi" => vp.phi = num(k, v)?,
            "controller.K_s" => vp.k_s = num(k, v)?,
            _ => return Err(ConfigError::UnknownKey(key.clone())),
        }
    }

    if !(eps > 0.0) {
        return Err(invalid("envelope.epsilon", "must be positive".into()));
    }
    sc.detection = DetectionParams::from_epsilon(alpha, eps);
    sc.disturbance = if disturbance_on {
        DisturbanceModel::MultiTone {
            omega_p,
            scale: d_scale,
        }
    } else {
        DisturbanceModel::None
    };
    sc.desired = if tracking {
        DesiredMotion::Tracking { amplitude: amp, c }
    } else {
        DesiredMotion::Rest
    };
    sc.kind = if tracking {
        crate::sim::ScenarioKind::Tracking
    } else {
        crate::sim::ScenarioKind::Reorientation
    };
    sc.gains.p_c = p_c.unwrap_or_else(|| l_rho(sc.modification.c_v, sc.modification.sigma_rho));
    sc.variant = vp.variant(&variant_name).ok_or_else(|| {
        invalid(
            "sim.variant",
            format!(
                "expected one of {}, got `{variant_name}`",
                VARIANT_NAMES.join(", ")
            ),
        )
    })?;
    Ok(LoadedConfig {
        scenario: sc,
        variants: vp,
    })
}

fn invalid(key: &str, reason: String) -> ConfigError {
    ConfigError::Invalid {
        key: key.into(),
        reason,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_fundamental_case() {
        let c = parse_config("").unwrap();
        assert_eq!(c.scenario, ScenarioConfig::fundamental());
        assert_eq!(c.variants, VariantParams::default());
    }

    #[test]
    fn reorientation_preset() {
        let c =
            parse_config("sim.scenario = \"reorientation\"\nplant.Omega_max = 0.0873\n").unwrap();
        assert_eq!(c.scenario, ScenarioConfig::reorientation(0.0873));
    }

    #[test]
    fn sections_and_dotted_keys_agree() {
        let a = parse_config("[controller]\nK_2 = 12\n[sim]\ndt = 0.05\n").unwrap();
        let b = parse_config("controller.K_2 = 12.0\nsim.dt = 0.05\n").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.scenario.gains.k_2, 12.0);
        assert_eq!(a.scenario.dt, 0.05);
    }

    #[test]
    fn unknown_key_is_named() {
        let e = parse_config("controller.K_22 = 1.0").unwrap_err();
        assert!(
            matches!(&e, ConfigError::UnknownKey(k) if k == "controller.K_22"),
            "{e}"
        );
        let e = parse_config("[plant]\nUmax = 1.0").unwrap_err();
        assert!(e.to_string().contains("plant.Umax"));
    }

    #[test]
    fn type_errors_name_the_key() {
        let e = parse_config("plant.U_max = \"big\"").unwrap_err();
        assert!(e.to_string().contains("plant.U_max"));
        let e = parse_config("plant.q_s0 = [1.0, 0.0]").unwrap_err();
        assert!(e.to_string().contains("plant.q_s0"));
    }

    #[test]
    fn p_c_follows_modification_unless_pinned() {
        let c = parse_config("envelope.C_v = 4.0").unwrap();
        assert!((c.scenario.gains.p_c - l_rho(4.0, 0.1)).abs() < 1e-15);
        let c = parse_config("envelope.C_v = 4.0\ncontroller.p_c = 3.0").unwrap();
        assert_eq!(c.scenario.gains.p_c, 3.0);
    }

    #[test]
    fn variants_by_name() {
        let c =
            parse_config("sim.variant = \"constant-gain\"\ncontroller.zeta_const = 12").unwrap();
        assert_eq!(c.scenario.variant, Variant::ConstantGain { zeta: 12.0 });
        let c = parse_config("sim.variant = \"nominal\"").unwrap();
        assert_eq!(
            c.scenario.variant,
            Variant::Nominal {
                d_m: 0.06,
                phi: 0.01,
                k_s: 1.0
            }
        );
        assert!(parse_config("sim.variant = \"pid\"").is_err());
    }

    #[test]
    fn disturbance_and_desired_switches() {
        let c = parse_config("plant.disturbance = \"none\"\nplant.desired = \"rest\"").unwrap();
        assert_eq!(c.scenario.disturbance, DisturbanceModel::None);
        assert_eq!(c.scenario.desired, DesiredMotion::Rest);
        let c = parse_config("plant.d_scale = 0.5").unwrap();
        assert_eq!(
            c.scenario.disturbance,
            DisturbanceModel::MultiTone {
                omega_p: 0.01,
                scale: 0.5
            }
        );
    }

    #[test]
    fn every_key_is_reachable() {
        for key in KEYS {
            let (section, name) = key.split_once('.').unwrap();
            let value = match *key {
                "sim.scenario" => "\"fundamental\"".to_string(),
                "sim.variant" => "\"acpc\"".to_string(),
                "plant.inertia_variation" => "\"constant\"".to_string(),
                "plant.disturbance" => "\"multi-tone\"".to_string(),
                "plant.desired" => "\"tracking\"".to_string(),
                "plant.J0" | "plant.omega_s0" | "plant.omega_d_c" => "[1.0, 2.0, 3.0]".to_string(),
                "plant.q_s0" | "plant.q_d0" => "[0.0, 0.0, 0.0, 1.0]".to_string(),
                "sim.plant_substeps" | "sim.modification_substeps" => "2".to_string(),
                _ => "0.5".to_string(),
            };
            let src = format!("[{section}]\n{name} = {value}\n");
            parse_config(&src).unwrap_or_else(|e| panic!("{key}: {e}"));
        }
    }
}
