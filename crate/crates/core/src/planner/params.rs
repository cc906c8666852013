//! The tunable planner parameter vector and its flat key→number schema.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::world::VelocityLimits;

/// Named update set as carried by directives.
pub type ParamUpdates = BTreeMap<String, f64>;

macro_rules! sfm_params {
    ($( $(#[$doc:meta])* $field:ident = $default:expr ),* $(,)?) => {
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        #[serde(default)]
        pub struct SfmParams {
            $( $(#[$doc])* pub $field: f64, )*
        }

        impl Default for SfmParams {
            fn default() -> Self {
                Self { $( $field: $default, )* }
            }
        }

        impl SfmParams {
            /// Every accepted key, in declaration order.
            pub const KEYS: &'static [&'static str] = &[ $( stringify!($field), )* ];

            pub fn get(&self, key: &str) -> Option<f64> {
                match canonical_key(key)? {
                    $( stringify!($field) => Some(self.$field), )*
                    _ => None,
                }
            }

            fn set_unchecked(&mut self, key: &str, value: f64) -> Result<()> {
                match canonical_key(key) {
                    $( Some(stringify!($field)) => self.$field = value, )*
                    _ => return Err(Error::UnknownParam(key.to_string())),
                }
                Ok(())
            }
        }
    };
}

sfm_params! {
    force_factor_desired = 1.0,
    force_factor_obstacle = 1.0,
    force_factor_social = 1.0,
    force_factor_group = 1.0,
    sfm_people_weight = 1.0,
    sfm_goal_weight = 1.0,
    sfm_obstacle_weight = 1.0,
    /// m/s
    desired_speed = 0.8,
    /// τ, seconds
    relaxation_time = 0.5,
    obstacle_amplitude = 2.0,
    /// meters
    obstacle_range = 0.35,
    social_amplitude = 2.0,
    /// meters
    social_range = 0.5,
    k_rep = 2.0,
    k_att = 1.0,
    d_min = 1.0,
    d_max = 3.0,
    max_lin_vel = 1.0,
    max_rot_vel = 1.5,
    k_ang = 2.0,
    k_lin = 0.4,
}

/// Maps the camel-case force-factor aliases onto the canonical keys.
pub fn canonical_key(key: &str) -> Option<&'static str> {
    let alias = match key {
        "forceFactorDesired" => "force_factor_desired",
        "forceFactorObstacle" => "force_factor_obstacle",
        "forceFactorSocial" => "force_factor_social",
        "forceFactorGroup" => "force_factor_group",
        other => other,
    };
    SfmParams::KEYS.iter().copied().find(|k| *k == alias)
}

impl SfmParams {
    pub fn validate(&self) -> Result<()> {
        for key in Self::KEYS {
            let v = self.get(key).unwrap_or(f64::NAN);
            if !v.is_finite() {
                return Err(Error::Validation(format!("parameter `{key}` must be finite")));
            }
            if v < 0.0 {
                return Err(Error::Validation(format!("parameter `{key}` must be ≥ 0")));
            }
        }
        if self.relaxation_time <= 0.0 {
            return Err(Error::Validation("relaxation_time must be > 0".into()));
        }
        if self.obstacle_range <= 0.0 || self.social_range <= 0.0 {
            return Err(Error::Validation("obstacle_range and social_range must be > 0".into()));
        }
        if !(self.d_min > 0.0 && self.d_min < self.d_max) {
            return Err(Error::Validation("band needs 0 < d_min < d_max".into()));
        }
        Ok(())
    }

    /// Returns a copy with `updates` applied, or an error and no change.
    pub fn apply_param_update(&self, updates: &ParamUpdates) -> Result<SfmParams> {
        let mut next = self.clone();
        for (key, &value) in updates {
            next.set_unchecked(key, value)?;
        }
        next.validate()?;
        Ok(next)
    }

    pub fn velocity_limits(&self) -> VelocityLimits {
        VelocityLimits { max_lin_vel: self.max_lin_vel, max_rot_vel: self.max_rot_vel }
    }

    /// Rejects keys outside the schema without applying anything.
    pub fn check_keys<'a>(keys: impl IntoIterator<Item = &'a String>) -> Result<()> {
        for k in keys {
            if canonical_key(k).is_none() {
                return Err(Error::UnknownParam(k.clone()));
            }
        }
        Ok(())
    }
}
