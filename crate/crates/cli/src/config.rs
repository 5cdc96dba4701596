//! TOML configuration: parsing with strict key checking, defaulting, emission.
//!
//! Every key is optional; missing keys fall back to the built-in base case
//! (the liquid market at r = 3%, μ = 8%, σ = 25%, the fixed-term asset at
//! F₀ = 1, μ_F = 10%, σ_F = 25%, exponents p₁ = −2, p₂ = −1, floors c̲ = 3
//! and V̲ = 80, horizon T = 3, initial capital v₀ = 100). Unknown keys are
//! rejected so typos cannot silently revert a run to defaults.

use fixterm::{
    Constraints, IlliquidSpec, MarketSpec, NumericsConfig, Preferences, Scenario,
};
use serde::{Deserialize, Serialize};

/// `[market]` section: liquid bond/stock dynamics.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MarketSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

/// `[illiquid]` section: fixed-term asset dynamics.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IlliquidSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu_f: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_f: Option<f64>,
}

/// `[prefs]` section: utility curvature exponents.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PrefsSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p2: Option<f64>,
}

/// `[constraints]` section: consumption floor and terminal guarantee.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstraintsSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_floor: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_floor: Option<f64>,
}

/// `[run]` section: horizon and initial capital.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    #[serde(rename = "T", skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v0: Option<f64>,
}

/// `[numerics]` section: tolerances, node counts, sample sizes, seed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericsSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bisect_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quad_nodes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psi_grid: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fd_rel_step: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc_paths: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc_steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Whole configuration document. An empty document is valid and selects the
/// base case for every value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigDoc {
    pub market: MarketSection,
    pub illiquid: IlliquidSection,
    pub prefs: PrefsSection,
    pub constraints: ConstraintsSection,
    pub run: RunSection,
    pub numerics: NumericsSection,
}

/// Parse a TOML document, rejecting unknown sections and keys.
pub fn parse(text: &str) -> Result<ConfigDoc, String> {
    toml::from_str(text).map_err(|e| format!("config error: {e}"))
}

/// Fully resolved parameter set: the document with defaults filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub r: f64,
    pub mu: f64,
    pub sigma: f64,
    pub f0: f64,
    pub mu_f: f64,
    pub sigma_f: f64,
    pub p1: f64,
    pub p2: f64,
    pub c_floor: f64,
    pub v_floor: f64,
    pub horizon: f64,
    pub v0: f64,
    pub numerics: NumericsConfig,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            r: 0.03,
            mu: 0.08,
            sigma: 0.25,
            f0: 1.0,
            mu_f: 0.10,
            sigma_f: 0.25,
            p1: -2.0,
            p2: -1.0,
            c_floor: 3.0,
            v_floor: 80.0,
            horizon: 3.0,
            v0: 100.0,
            numerics: NumericsConfig::default(),
        }
    }
}

impl Params {
    /// Apply a parsed document on top of the base-case defaults.
    pub fn from_doc(doc: &ConfigDoc) -> Self {
        let mut p = Self::default();
        let d = &mut p;
        if let Some(v) = doc.market.r {
            d.r = v;
        }
        if let Some(v) = doc.market.mu {
            d.mu = v;
        }
        if let Some(v) = doc.market.sigma {
            d.sigma = v;
        }
        if let Some(v) = doc.illiquid.f0 {
            d.f0 = v;
        }
        if let Some(v) = doc.illiquid.mu_f {
            d.mu_f = v;
        }
        if let Some(v) = doc.illiquid.sigma_f {
            d.sigma_f = v;
        }
        if let Some(v) = doc.prefs.p1 {
            d.p1 = v;
        }
        if let Some(v) = doc.prefs.p2 {
            d.p2 = v;
        }
        if let Some(v) = doc.constraints.c_floor {
            d.c_floor = v;
        }
        if let Some(v) = doc.constraints.v_floor {
            d.v_floor = v;
        }
        if let Some(v) = doc.run.t {
            d.horizon = v;
        }
        if let Some(v) = doc.run.v0 {
            d.v0 = v;
        }
        let n = &doc.numerics;
        if let Some(v) = n.bisect_tol {
            d.numerics.bisect_tol = v;
        }
        if let Some(v) = n.quad_nodes {
            d.numerics.quad_nodes = v;
        }
        if let Some(v) = n.psi_grid {
            d.numerics.psi_grid = v;
        }
        if let Some(v) = n.fd_rel_step {
            d.numerics.fd_rel_step = v;
        }
        if let Some(v) = n.mc_paths {
            d.numerics.mc_paths = v;
        }
        if let Some(v) = n.mc_steps {
            d.numerics.mc_steps = v;
        }
        if let Some(v) = n.seed {
            d.numerics.seed = v;
        }
        p
    }

    /// Render back into a document with every key present. Together with
    /// [`parse`] this gives an exact serialization round trip; only the test
    /// suite exercises it, hence the allowance.
    #[cfg_attr(not(test), allow(dead_code))]
    pub fn to_doc(&self) -> ConfigDoc {
        ConfigDoc {
            market: MarketSection {
                r: Some(self.r),
                mu: Some(self.mu),
                sigma: Some(self.sigma),
            },
            illiquid: IlliquidSection {
                f0: Some(self.f0),
                mu_f: Some(self.mu_f),
                sigma_f: Some(self.sigma_f),
            },
            prefs: PrefsSection {
                p1: Some(self.p1),
                p2: Some(self.p2),
            },
            constraints: ConstraintsSection {
                c_floor: Some(self.c_floor),
                v_floor: Some(self.v_floor),
            },
            run: RunSection {
                t: Some(self.horizon),
                v0: Some(self.v0),
            },
            numerics: NumericsSection {
                bisect_tol: Some(self.numerics.bisect_tol),
                quad_nodes: Some(self.numerics.quad_nodes),
                psi_grid: Some(self.numerics.psi_grid),
                fd_rel_step: Some(self.numerics.fd_rel_step),
                mc_paths: Some(self.numerics.mc_paths),
                mc_steps: Some(self.numerics.mc_steps),
                seed: Some(self.numerics.seed),
            },
        }
    }

    /// Serialize with every key written out, suitable for re-parsing.
    #[cfg_attr(not(test), allow(dead_code))]
    pub fn emit(&self) -> String {
        toml::to_string(&self.to_doc()).expect("a fully populated document always serializes")
    }

    /// Overwrite one named scalar, as used by parameter sweeps.
    pub fn set(&mut self, name: &str, value: f64) -> Result<(), String> {
        match name {
            "T" => self.horizon = value,
            "r" => self.r = value,
            "mu" => self.mu = value,
            "sigma" => self.sigma = value,
            "mu_f" => self.mu_f = value,
            "sigma_f" => self.sigma_f = value,
            "p1" => self.p1 = value,
            "p2" => self.p2 = value,
            "c_floor" => self.c_floor = value,
            "v_floor" => self.v_floor = value,
            "v0" => self.v0 = value,
            other => {
                return Err(format!(
                    "unknown sweep parameter `{other}`; expected one of \
                     T, r, mu, sigma, mu_f, sigma_f, p1, p2, c_floor, v_floor, v0"
                ))
            }
        }
        Ok(())
    }

    /// Build the validated scenario, pointing at the offending section and
    /// key on failure (e.g. `[market].sigma`).
    pub fn to_scenario(&self) -> Result<Scenario, String> {
        let market = MarketSpec::new(self.r, self.mu, self.sigma)
            .map_err(|e| locate(e.to_string(), &[("r", "[market].r"), ("mu", "[market].mu"), ("sigma", "[market].sigma")]))?;
        let illiquid = IlliquidSpec::new(self.f0, self.mu_f, self.sigma_f)
            .map_err(|e| locate(e.to_string(), &[("f0", "[illiquid].f0"), ("mu_f", "[illiquid].mu_f"), ("sigma_f", "[illiquid].sigma_f")]))?;
        let prefs = Preferences::new(self.p1, self.p2)
            .map_err(|e| locate(e.to_string(), &[("p1", "[prefs].p1"), ("p2", "[prefs].p2")]))?;
        let constraints = Constraints::new(self.c_floor, self.v_floor)
            .map_err(|e| locate(e.to_string(), &[("c_floor", "[constraints].c_floor"), ("v_floor", "[constraints].v_floor")]))?;
        self.numerics
            .validate()
            .map_err(|e| format!("[numerics]: {e}"))?;
        Scenario::new(
            market,
            illiquid,
            prefs,
            constraints,
            self.horizon,
            self.v0,
            self.numerics,
        )
        .map_err(|e| {
            locate(
                e.to_string(),
                &[("horizon_t", "[run].T"), ("horizon", "[run].T"), ("v0", "[run].v0")],
            )
        })
    }
}

/// Prefix a validation message with the `[section].key` path of the first
/// key name it mentions, so the user sees where in the file to look.
fn locate(message: String, keys: &[(&str, &str)]) -> String {
    for (needle, path) in keys {
        if mentions_word(&message, needle) {
            return format!("{path}: {message}");
        }
    }
    format!("config: {message}")
}

/// Whole-word containment: `r` must not match inside `strictly`, and `mu`
/// must not match inside `mu_f`.
fn mentions_word(message: &str, word: &str) -> bool {
    let is_word_byte = |b: u8| b.is_ascii_alphanumeric() || b == b'_';
    let bytes = message.as_bytes();
    let mut from = 0;
    while let Some(pos) = message[from..].find(word) {
        let start = from + pos;
        let end = start + word.len();
        let clean_before = start == 0 || !is_word_byte(bytes[start - 1]);
        let clean_after = end == bytes.len() || !is_word_byte(bytes[end]);
        if clean_before && clean_after {
            return true;
        }
        from = start + 1;
    }
    false
}
