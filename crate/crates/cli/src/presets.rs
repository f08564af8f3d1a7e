//! Configs shipped with the binary, addressed as `preset/<name>`.

/// `(name, TOML text)` for every preset.
pub const PRESETS: &[(&str, &str)] = &[
    ("c01_identities", include_str!("../presets/c01_identities.toml")),
    ("c02_dirac_dlt", include_str!("../presets/c02_dirac_dlt.toml")),
    ("bernoulli_clt", include_str!("../presets/bernoulli_clt.toml")),
    ("c04_conditional", include_str!("../presets/c04_conditional.toml")),
    ("c05_mixing_dlt", include_str!("../presets/c05_mixing_dlt.toml")),
    ("c06_mixing_correlation", include_str!("../presets/c06_mixing_correlation.toml")),
    ("c07_contraction", include_str!("../presets/c07_contraction.toml")),
    ("c07_splitting", include_str!("../presets/c07_splitting.toml")),
    ("c08_diag", include_str!("../presets/c08_diag.toml")),
    ("c08_catmap", include_str!("../presets/c08_catmap.toml")),
    ("c08_shear", include_str!("../presets/c08_shear.toml")),
    ("c09_zorich", include_str!("../presets/c09_zorich.toml")),
];

/// Other names accepted for presets.
const ALIASES: &[(&str, &str)] = &[("c03_plain_clt", "bernoulli_clt")];

/// The TOML text for `preset/<name>`, or `None` for anything else.
pub fn lookup(path: &str) -> Option<&'static str> {
    let name = path.strip_prefix("preset/")?;
    let name = ALIASES.iter().find(|(a, _)| *a == name).map_or(name, |(_, n)| n);
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assemble::Setup;
    use crate::config::{ExperimentConfig, ExperimentKind};

    #[test]
    fn every_preset_parses_and_assembles() {
        for (name, text) in PRESETS {
            let cfg = ExperimentConfig::from_toml(text).unwrap_or_else(|e| panic!("{name}: {e}"));
            if cfg.experiment != ExperimentKind::ZorichSpectrum {
                Setup::new(&cfg).unwrap_or_else(|e| panic!("{name}: {e}"));
            }
        }
    }

    #[test]
    fn lookup_needs_the_prefix() {
        assert!(lookup("preset/c08_diag").is_some());
        assert_eq!(lookup("preset/c03_plain_clt"), lookup("preset/bernoulli_clt"));
        assert!(lookup("c08_diag").is_none());
        assert!(lookup("preset/nope").is_none());
    }
}
