use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::IngestError;

/// Physical quantity a file variable plays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariableRole {
    Salinity,
    Temperature,
    U,
    V,
    W,
}

impl VariableRole {
    pub const ALL: [VariableRole; 5] =
        [Self::Salinity, Self::Temperature, Self::U, Self::V, Self::W];

    pub fn name(self) -> &'static str {
        match self {
            Self::Salinity => "salinity",
            Self::Temperature => "temperature",
            Self::U => "u",
            Self::V => "v",
            Self::W => "w",
        }
    }
}

impl fmt::Display for VariableRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for VariableRole {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| {
                format!("unknown variable role `{s}` (expected salinity, temperature, u, v or w)")
            })
    }
}

/// Maps file dimension/variable names onto physical roles.
///
/// The default follows the NEMO/CMEMS reanalysis naming (`longitude`,
/// `latitude`, `depth`, `time`, `so`, `thetao`, `uo`, `vo`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableMap {
    pub lon: String,
    pub lat: String,
    pub depth: String,
    pub time: String,
    pub salinity: Option<String>,
    pub temperature: Option<String>,
    pub u: Option<String>,
    pub v: Option<String>,
    pub w: Option<String>,
    /// Overrides any fill value declared in the file.
    pub fill_value: Option<f64>,
}

impl Default for VariableMap {
    fn default() -> Self {
        Self {
            lon: "longitude".into(),
            lat: "latitude".into(),
            depth: "depth".into(),
            time: "time".into(),
            salinity: Some("so".into()),
            temperature: Some("thetao".into()),
            u: Some("uo".into()),
            v: Some("vo".into()),
            w: None,
            fill_value: None,
        }
    }
}

pub const MAP_KEYS: [&str; 10] = [
    "lon",
    "lat",
    "depth",
    "time",
    "salinity",
    "temperature",
    "u",
    "v",
    "w",
    "fill_value",
];

impl VariableMap {
    /// Map with only dimension names set and no variables.
    pub fn dims_only(lon: &str, lat: &str, depth: &str, time: &str) -> Self {
        Self {
            lon: lon.into(),
            lat: lat.into(),
            depth: depth.into(),
            time: time.into(),
            salinity: None,
            temperature: None,
            u: None,
            v: None,
            w: None,
            fill_value: None,
        }
    }

    pub fn get(&self, role: VariableRole) -> Option<&str> {
        match role {
            VariableRole::Salinity => self.salinity.as_deref(),
            VariableRole::Temperature => self.temperature.as_deref(),
            VariableRole::U => self.u.as_deref(),
            VariableRole::V => self.v.as_deref(),
            VariableRole::W => self.w.as_deref(),
        }
    }

    pub fn set(&mut self, role: VariableRole, name: Option<String>) {
        let slot = match role {
            VariableRole::Salinity => &mut self.salinity,
            VariableRole::Temperature => &mut self.temperature,
            VariableRole::U => &mut self.u,
            VariableRole::V => &mut self.v,
            VariableRole::W => &mut self.w,
        };
        *slot = name;
    }

    /// `(role, file variable name)` for every mapped role, in role order.
    pub fn mapped(&self) -> Vec<(VariableRole, &str)> {
        VariableRole::ALL
            .into_iter()
            .filter_map(|r| self.get(r).map(|n| (r, n)))
            .collect()
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        let dims = [&self.lon, &self.lat, &self.depth, &self.time];
        for (a, da) in dims.iter().enumerate() {
            if dims[a + 1..].contains(da) {
                return Err(IngestError::InvalidMap(format!(
                    "dimension name `{da}` used twice"
                )));
            }
        }
        let vars = self.mapped();
        for (a, (ra, na)) in vars.iter().enumerate() {
            if let Some((rb, _)) = vars[a + 1..].iter().find(|(_, nb)| nb == na) {
                return Err(IngestError::InvalidMap(format!(
                    "roles {ra} and {rb} both map to variable `{na}`"
                )));
            }
        }
        Ok(())
    }

    /// Parses the key-value configuration format. Only the documented keys
    /// are accepted at top level; tables (e.g. `[defaults]`) are ignored here.
    /// An empty string unmaps a variable role.
    pub fn from_toml_str(text: &str) -> Result<Self, IngestError> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| IngestError::InvalidMap(e.to_string()))?;
        Self::from_table(&table)
    }

    pub fn from_table(table: &toml::Table) -> Result<Self, IngestError> {
        let mut map = Self::default();
        for (key, value) in table {
            if value.is_table() {
                continue;
            }
            let as_str = || {
                value
                    .as_str()
                    .map(str::to_string)
                    .ok_or_else(|| IngestError::InvalidMap(format!("`{key}` must be a string")))
            };
            match key.as_str() {
                "lon" => map.lon = as_str()?,
                "lat" => map.lat = as_str()?,
                "depth" => map.depth = as_str()?,
                "time" => map.time = as_str()?,
                "fill_value" => {
                    map.fill_value = Some(
                        value
                            .as_float()
                            .or_else(|| value.as_integer().map(|i| i as f64))
                            .ok_or_else(|| {
                                IngestError::InvalidMap("`fill_value` must be a number".into())
                            })?,
                    )
                }
                other => {
                    let role: VariableRole = other.parse().map_err(|_| {
                        IngestError::InvalidMap(format!(
                            "unknown key `{other}` (expected one of {})",
                            MAP_KEYS.join(", ")
                        ))
                    })?;
                    let name = as_str()?;
                    map.set(role, (!name.is_empty()).then_some(name));
                }
            }
        }
        map.validate()?;
        Ok(map)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_config() {
        let m = VariableMap::from_toml_str(
            r#"
            lon = "nav_lon"
            lat = "nav_lat"
            salinity = "vosaline"
            temperature = ""
            w = "vovecrtz"
            fill_value = -999

            [defaults]
            persistence = 0.1
            "#,
        )
        .unwrap();
        assert_eq!(m.lon, "nav_lon");
        assert_eq!(m.salinity.as_deref(), Some("vosaline"));
        assert_eq!(m.temperature, None);
        assert_eq!(m.w.as_deref(), Some("vovecrtz"));
        assert_eq!(m.fill_value, Some(-999.0));
        assert_eq!(m.u.as_deref(), Some("uo"));
    }

    #[test]
    fn duplicate_roles_rejected() {
        let err = VariableMap::from_toml_str("u = \"so\"").unwrap_err();
        assert!(matches!(err, IngestError::InvalidMap(_)));
        assert!(VariableMap::from_toml_str("bogus = \"x\"").is_err());
    }
}
