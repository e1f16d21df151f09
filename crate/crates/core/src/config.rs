//! Plain-text experiment configuration: `key = value` entries grouped under
//! `[section]` headers, `#` comments, no interactive state.
//!
//! Parsing materializes every default so the effective configuration is
//! fully explicit; [`ExperimentConfig::to_canonical_text`] writes it back in
//! a canonical form that re-parses to the same configuration.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("config error: line {line}: {message}")]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

fn err(line: usize, message: impl Into<String>) -> ConfigError {
    ConfigError {
        line,
        message: message.into(),
    }
}

#[derive(Debug, Clone, Default)]
struct Section {
    name: String,
    line: usize,
    entries: Vec<(String, String, usize)>,
}

impl Section {
    fn get(&self, key: &str) -> Option<(&str, usize)> {
        self.entries
            .iter()
            .find(|(k, _, _)| k == key)
            .map(|(_, v, l)| (v.as_str(), *l))
    }

    fn f64(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some((v, l)) => v
                .parse::<f64>()
                .map(Some)
                .map_err(|_| err(l, format!("field '{key}': expected a number, got '{v}'"))),
        }
    }

    fn usize(&self, key: &str) -> Result<Option<usize>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some((v, l)) => v
                .parse::<usize>()
                .map(Some)
                .map_err(|_| err(l, format!("field '{key}': expected an integer, got '{v}'"))),
        }
    }

    fn u64(&self, key: &str) -> Result<Option<u64>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some((v, l)) => v
                .parse::<u64>()
                .map(Some)
                .map_err(|_| err(l, format!("field '{key}': expected an integer, got '{v}'"))),
        }
    }

    fn bool(&self, key: &str) -> Result<Option<bool>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some((v, l)) => match v {
                "true" => Ok(Some(true)),
                "false" => Ok(Some(false)),
                _ => Err(err(l, format!("field '{key}': expected true/false, got '{v}'"))),
            },
        }
    }

    fn f64_list(&self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some((v, l)) => {
                let parsed: Result<Vec<f64>, _> =
                    v.split(',').map(|p| p.trim().parse::<f64>()).collect();
                parsed
                    .map(Some)
                    .map_err(|_| err(l, format!("field '{key}': expected a number list, got '{v}'")))
            }
        }
    }

    fn require_f64(&self, key: &str) -> Result<f64, ConfigError> {
        self.f64(key)?
            .ok_or_else(|| err(self.line, format!("[{}] is missing field '{key}'", self.name)))
    }

    fn require_usize(&self, key: &str) -> Result<usize, ConfigError> {
        self.usize(key)?
            .ok_or_else(|| err(self.line, format!("[{}] is missing field '{key}'", self.name)))
    }
}

fn parse_sections(text: &str) -> Result<Vec<Section>, ConfigError> {
    let mut sections: Vec<Section> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| err(line_no, "unterminated section header"))?
                .trim()
                .to_string();
            if name.is_empty() {
                return Err(err(line_no, "empty section name"));
            }
            sections.push(Section {
                name,
                line: line_no,
                entries: Vec::new(),
            });
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(line_no, format!("expected 'key = value', got '{line}'")))?;
        let section = sections
            .last_mut()
            .ok_or_else(|| err(line_no, "entry before any [section] header"))?;
        let key = key.trim().to_string();
        if key.is_empty() {
            return Err(err(line_no, "empty key"));
        }
        if section.entries.iter().any(|(k, _, _)| *k == key) {
            return Err(err(
                line_no,
                format!("duplicate key '{key}' in [{}]", section.name),
            ));
        }
        section
            .entries
            .push((key, value.trim().to_string(), line_no));
    }
    Ok(sections)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub dim: usize,
    pub points_per_axis: usize,
    pub half_width: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamsConfig {
    pub n: usize,
    pub gamma: f64,
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionConfig {
    pub time_half_width: f64,
    pub time_nodes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KsConfig {
    pub cells_per_axis: usize,
    pub min_side_factor: f64,
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McConfig {
    pub alpha: f64,
    pub p: f64,
    pub centers_per_axis: usize,
    pub extent: f64,
    pub radii: Vec<f64>,
    pub cells_per_diameter: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FamilyConfig {
    pub count: usize,
    pub modes: usize,
    pub rho_min: f64,
    pub rho_max: f64,
    pub sigma_x: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanSectionConfig {
    pub axes: Vec<String>,
    pub levels: usize,
    pub couple_box_to_time: bool,
    pub enforce_window_bound: bool,
    /// `smoothing` (family-max ratio) or `extension` (normalized extension
    /// norm, honoring the rule axis).
    pub observable: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SigmaConfig {
    pub n: usize,
    pub radii: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PiecesConfig {
    pub j_min: u32,
    pub j_max: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuleConfig {
    pub degree: usize,
}

/// The fully-explicit experiment configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out_prefix: String,
    pub grid: Option<GridConfig>,
    pub params: Option<ParamsConfig>,
    pub weights: Vec<String>,
    pub evolution: Option<EvolutionConfig>,
    pub rule: RuleConfig,
    pub ks: KsConfig,
    pub mc: Option<McConfig>,
    pub family: Option<FamilyConfig>,
    pub scan: Option<ScanSectionConfig>,
    pub sigma: Option<SigmaConfig>,
    pub pieces: Option<PiecesConfig>,
}

impl ExperimentConfig {
    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        let sections = parse_sections(text)?;
        let known = [
            "run", "grid", "params", "weight", "evolution", "rule", "ks", "mc", "family", "scan",
            "sigma", "pieces", "output",
        ];
        for s in &sections {
            if !known.contains(&s.name.as_str()) {
                return Err(err(s.line, format!("unknown section [{}]", s.name)));
            }
        }
        let find = |name: &str| sections.iter().find(|s| s.name == name);

        let seed = find("run").map_or(Ok(None), |s| s.u64("seed"))?.unwrap_or(0);
        let out_prefix = find("output")
            .and_then(|s| s.get("prefix").map(|(v, _)| v.to_string()))
            .unwrap_or_else(|| "report".to_string());

        let grid = match find("grid") {
            None => None,
            Some(s) => Some(GridConfig {
                dim: s.require_usize("dim")?,
                points_per_axis: s.require_usize("points_per_axis")?,
                half_width: s.require_f64("half_width")?,
            }),
        };

        let params = match find("params") {
            None => None,
            Some(s) => {
                let n = match s.usize("n")? {
                    Some(n) => n,
                    None => grid.as_ref().map(|g| g.dim).ok_or_else(|| {
                        err(s.line, "[params] needs 'n' when no [grid] section is present")
                    })?,
                };
                let gamma = s.f64("gamma")?.unwrap_or(2.0);
                let beta = s.f64("beta")?.unwrap_or(1.0);
                let alpha = match (s.f64("alpha")?, s.f64("s")?) {
                    (Some(_), Some(_)) => {
                        return Err(err(s.line, "[params] takes either 'alpha' or 's', not both"))
                    }
                    (Some(a), None) => a,
                    // Invert the order condition: alpha = beta (gamma - 2 s).
                    (None, Some(sv)) => beta * (gamma - 2.0 * sv),
                    (None, None) => {
                        return Err(err(s.line, "[params] is missing field 'alpha' (or 's')"))
                    }
                };
                Some(ParamsConfig {
                    n,
                    gamma,
                    alpha,
                    beta,
                })
            }
        };

        let weights = match find("weight") {
            None => Vec::new(),
            Some(s) => {
                let mut ids = Vec::new();
                if let Some((v, _)) = s.get("id") {
                    ids.push(v.to_string());
                }
                if let Some((v, _)) = s.get("ids") {
                    for part in v.split(';') {
                        let part = part.trim();
                        if !part.is_empty() {
                            ids.push(part.to_string());
                        }
                    }
                }
                if ids.is_empty() {
                    return Err(err(s.line, "[weight] needs 'id' or 'ids'"));
                }
                ids
            }
        };

        let evolution = match find("evolution") {
            None => None,
            Some(s) => Some(EvolutionConfig {
                time_half_width: s.require_f64("t")?,
                time_nodes: s.usize("nodes")?.unwrap_or(128),
            }),
        };

        let rule = RuleConfig {
            degree: find("rule")
                .map_or(Ok(None), |s| s.usize("degree"))?
                .unwrap_or(48),
        };

        let ks = {
            let s = find("ks");
            KsConfig {
                cells_per_axis: s.map_or(Ok(None), |s| s.usize("cells"))?.unwrap_or(12),
                min_side_factor: s
                    .map_or(Ok(None), |s| s.f64("min_side_factor"))?
                    .unwrap_or(2.0),
                alpha: s.map_or(Ok(None), |s| s.f64("alpha"))?,
            }
        };

        let mc = match find("mc") {
            None => None,
            Some(s) => Some(McConfig {
                alpha: s.require_f64("alpha")?,
                p: s.require_f64("p")?,
                centers_per_axis: s.usize("centers")?.unwrap_or(5),
                extent: s.require_f64("extent")?,
                radii: s
                    .f64_list("radii")?
                    .ok_or_else(|| err(s.line, "[mc] is missing field 'radii'"))?,
                cells_per_diameter: s.usize("cells")?.unwrap_or(24),
            }),
        };

        let family = match find("family") {
            None => None,
            Some(s) => Some(FamilyConfig {
                count: s.usize("count")?.unwrap_or(16),
                modes: s.usize("modes")?.unwrap_or(6),
                rho_min: s.f64("rho_min")?.unwrap_or(1.0),
                rho_max: s.f64("rho_max")?.unwrap_or(1.5),
                sigma_x: s.require_f64("sigma_x")?,
            }),
        };

        let scan = match find("scan") {
            None => None,
            Some(s) => {
                let axes_raw = s
                    .get("axes")
                    .map(|(v, _)| v.to_string())
                    .unwrap_or_else(|| "points,time".to_string());
                let axes: Vec<String> = axes_raw
                    .split(',')
                    .map(|a| a.trim().to_string())
                    .filter(|a| !a.is_empty())
                    .collect();
                for a in &axes {
                    if !["points", "time", "box", "rule"].contains(&a.as_str()) {
                        return Err(err(
                            s.line,
                            format!("unknown scan axis '{a}' (use points, time, box, rule)"),
                        ));
                    }
                }
                let observable = s
                    .get("observable")
                    .map(|(v, _)| v.to_string())
                    .unwrap_or_else(|| "smoothing".to_string());
                if observable != "smoothing" && observable != "extension" {
                    return Err(err(
                        s.line,
                        format!("unknown scan observable '{observable}' (use smoothing or extension)"),
                    ));
                }
                Some(ScanSectionConfig {
                    axes,
                    levels: s.usize("levels")?.unwrap_or(3),
                    couple_box_to_time: s.bool("couple_box_to_time")?.unwrap_or(true),
                    enforce_window_bound: s.bool("enforce_window_bound")?.unwrap_or(true),
                    observable,
                })
            }
        };

        let sigma = match find("sigma") {
            None => None,
            Some(s) => {
                let n = s.usize("n")?.unwrap_or(3);
                let radii = match s.f64_list("radii")? {
                    Some(r) => r,
                    None => {
                        let r_max = s.f64("r_max")?.unwrap_or(40.0);
                        let count = s.usize("count")?.unwrap_or(50);
                        (1..=count)
                            .map(|i| r_max * i as f64 / count as f64)
                            .collect()
                    }
                };
                Some(SigmaConfig { n, radii })
            }
        };

        let pieces = match find("pieces") {
            None => None,
            Some(s) => {
                let j_min = s.usize("j_min")?.unwrap_or(2) as u32;
                let j_max = s.require_usize("j_max")? as u32;
                if j_min > j_max {
                    return Err(err(s.line, "[pieces] j_min exceeds j_max"));
                }
                Some(PiecesConfig { j_min, j_max })
            }
        };

        Ok(ExperimentConfig {
            seed,
            out_prefix,
            grid,
            params,
            weights,
            evolution,
            rule,
            ks,
            mc,
            family,
            scan,
            sigma,
            pieces,
        })
    }

    /// Canonical dump with every effective value explicit; re-parses to the
    /// same configuration.
    pub fn to_canonical_text(&self) -> String {
        let mut out = String::new();
        out.push_str("[run]\n");
        out.push_str(&format!("seed = {}\n", self.seed));
        out.push_str("\n[output]\n");
        out.push_str(&format!("prefix = {}\n", self.out_prefix));
        if let Some(g) = &self.grid {
            out.push_str("\n[grid]\n");
            out.push_str(&format!("dim = {}\n", g.dim));
            out.push_str(&format!("points_per_axis = {}\n", g.points_per_axis));
            out.push_str(&format!("half_width = {}\n", g.half_width));
        }
        if let Some(p) = &self.params {
            out.push_str("\n[params]\n");
            out.push_str(&format!("n = {}\n", p.n));
            out.push_str(&format!("gamma = {}\n", p.gamma));
            out.push_str(&format!("alpha = {}\n", p.alpha));
            out.push_str(&format!("beta = {}\n", p.beta));
        }
        if !self.weights.is_empty() {
            out.push_str("\n[weight]\n");
            out.push_str(&format!("ids = {}\n", self.weights.join("; ")));
        }
        if let Some(e) = &self.evolution {
            out.push_str("\n[evolution]\n");
            out.push_str(&format!("t = {}\n", e.time_half_width));
            out.push_str(&format!("nodes = {}\n", e.time_nodes));
        }
        out.push_str("\n[rule]\n");
        out.push_str(&format!("degree = {}\n", self.rule.degree));
        out.push_str("\n[ks]\n");
        out.push_str(&format!("cells = {}\n", self.ks.cells_per_axis));
        out.push_str(&format!("min_side_factor = {}\n", self.ks.min_side_factor));
        if let Some(a) = self.ks.alpha {
            out.push_str(&format!("alpha = {a}\n"));
        }
        if let Some(m) = &self.mc {
            out.push_str("\n[mc]\n");
            out.push_str(&format!("alpha = {}\n", m.alpha));
            out.push_str(&format!("p = {}\n", m.p));
            out.push_str(&format!("centers = {}\n", m.centers_per_axis));
            out.push_str(&format!("extent = {}\n", m.extent));
            out.push_str(&format!(
                "radii = {}\n",
                m.radii
                    .iter()
                    .map(|r| r.to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            ));
            out.push_str(&format!("cells = {}\n", m.cells_per_diameter));
        }
        if let Some(f) = &self.family {
            out.push_str("\n[family]\n");
            out.push_str(&format!("count = {}\n", f.count));
            out.push_str(&format!("modes = {}\n", f.modes));
            out.push_str(&format!("rho_min = {}\n", f.rho_min));
            out.push_str(&format!("rho_max = {}\n", f.rho_max));
            out.push_str(&format!("sigma_x = {}\n", f.sigma_x));
        }
        if let Some(s) = &self.scan {
            out.push_str("\n[scan]\n");
            out.push_str(&format!("axes = {}\n", s.axes.join(",")));
            out.push_str(&format!("levels = {}\n", s.levels));
            out.push_str(&format!("couple_box_to_time = {}\n", s.couple_box_to_time));
            out.push_str(&format!(
                "enforce_window_bound = {}\n",
                s.enforce_window_bound
            ));
            out.push_str(&format!("observable = {}\n", s.observable));
        }
        if let Some(s) = &self.sigma {
            out.push_str("\n[sigma]\n");
            out.push_str(&format!("n = {}\n", s.n));
            out.push_str(&format!(
                "radii = {}\n",
                s.radii
                    .iter()
                    .map(|r| r.to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            ));
        }
        if let Some(p) = &self.pieces {
            out.push_str("\n[pieces]\n");
            out.push_str(&format!("j_min = {}\n", p.j_min));
            out.push_str(&format!("j_max = {}\n", p.j_max));
        }
        out
    }
}
