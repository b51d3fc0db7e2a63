//! Resolved run configuration: per-subcommand defaults, overridden by a
//! key=value config file, overridden by command-line flags.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ini::Ini;

/// Invalid user input; maps to exit code 2.
#[derive(Debug)]
pub struct Invalid(pub String);

impl fmt::Display for Invalid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

pub fn invalid(msg: impl Into<String>) -> anyhow::Error {
    Invalid(msg.into()).into()
}

const COMMON: &[(&str, &str)] = &[("d", "1"), ("m", "0.8"), ("exec", "parallel")];

fn defaults(sub: &str) -> &'static [(&'static str, &'static str)] {
    match sub {
        "params" => &[("strict", "false")],
        "profile" => &[
            ("kind", "fstar"),
            ("t", "1"),
            ("grid", "64,64"),
            ("extent", "4,4"),
            ("x0", "0"),
            ("v0", "0"),
        ],
        "fig1" => &[
            ("m_list", "0.7,1.7"),
            ("t_start", "0.1"),
            ("t_step", "0.5"),
            ("t_count", "13"),
            ("points", "200"),
            ("r_max", "3"),
            ("r_points", "301"),
        ],
        "evolve" => &[
            ("strict", "true"),
            ("grid", "128,128"),
            ("extent", "auto"),
            ("n", "64"),
            ("T", "10"),
            ("flavor", "lie"),
            ("transport", "well-balanced"),
            ("snapshot_dt", "0.5"),
            ("cfl", "0.9"),
            ("init", "sandwich"),
            ("seed", "1"),
            ("amplitude", "0.6"),
            ("dumps", "ends"),
        ],
        "converge" => &[
            ("strict", "true"),
            ("grid", "128,128"),
            ("extent", "auto"),
            ("n", "64"),
            ("T", "10"),
            ("flavor", "lie"),
            ("snapshot_dt", "0.5"),
            ("seed", "1"),
            ("members", "3"),
            ("amplitude", "0.6"),
            ("lp", "2"),
        ],
        "spectrum" => &[
            ("domain", "rectangle"),
            ("grid", "120,180"),
            ("extent", "18,28"),
            ("count", "30"),
            ("backend", "auto"),
            ("stencil", "centered"),
            ("window", "0.5"),
            ("reference", "auto"),
        ],
        "difflimit" => &[
            ("eps_list", "0.4,0.2,0.1"),
            ("taus", "0.25,0.5,1"),
            ("tau0", "1"),
            ("grid", "192,80"),
            ("extent", "24,20"),
            ("step_fraction", "0.2"),
            ("cfl", "0.4"),
        ],
        _ => &[],
    }
}

#[derive(Debug, Clone)]
pub struct Settings {
    pub sub: String,
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn defaults(sub: &str) -> Self {
        let values = COMMON
            .iter()
            .chain(defaults(sub))
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        Self {
            sub: sub.to_string(),
            values,
        }
    }

    /// Applies keys outside any section and in the section named after the
    /// subcommand; other sections are ignored.
    pub fn load_file(&mut self, path: &Path) -> anyhow::Result<()> {
        let ini = Ini::load_from_file(path).map_err(|e| invalid(format!("config {}: {e}", path.display())))?;
        for (section, props) in ini.iter() {
            if section.is_some_and(|s| s != self.sub) {
                continue;
            }
            for (k, v) in props.iter() {
                self.set(k, v)?;
            }
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> anyhow::Result<()> {
        match self.values.get_mut(key) {
            Some(slot) => {
                *slot = value.trim().to_string();
                Ok(())
            }
            None => Err(invalid(format!("unknown key '{key}' for {}", self.sub))),
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = (&String, &String)> {
        self.values.iter()
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or("")
    }

    pub fn get<T: FromStr>(&self, key: &str) -> anyhow::Result<T> {
        let raw = self.raw(key);
        raw.parse()
            .map_err(|_| invalid(format!("{key} = '{raw}' is not a valid {}", std::any::type_name::<T>())))
    }

    pub fn list<T: FromStr>(&self, key: &str) -> anyhow::Result<Vec<T>> {
        let raw = self.raw(key);
        raw.split(',')
            .map(|s| s.trim().parse().map_err(|_| invalid(format!("{key} = '{raw}': bad entry '{s}'"))))
            .collect()
    }

    pub fn pair<T: FromStr + Copy>(&self, key: &str) -> anyhow::Result<(T, T)> {
        match self.list::<T>(key)?.as_slice() {
            [a, b] => Ok((*a, *b)),
            _ => Err(invalid(format!("{key} = '{}' needs two comma-separated values", self.raw(key)))),
        }
    }

    pub fn flag(&self, key: &str) -> anyhow::Result<bool> {
        match self.raw(key) {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            other => Err(invalid(format!("{key} = '{other}' is not a boolean"))),
        }
    }
}
