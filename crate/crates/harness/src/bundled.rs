//! Configs shipped with the binary, one per reproduced figure or table.

pub const BUNDLED: &[(&str, &str)] = &[
    ("appendix_e2", include_str!("../configs/appendix_e2.toml")),
    ("bounds", include_str!("../configs/bounds.toml")),
    ("e1_tuned", include_str!("../configs/e1_tuned.toml")),
    ("e1_x0_extreme", include_str!("../configs/e1_x0_extreme.toml")),
    ("e1_x0_zero", include_str!("../configs/e1_x0_zero.toml")),
    ("fig1", include_str!("../configs/fig1.toml")),
    ("fig2_noiseless", include_str!("../configs/fig2_noiseless.toml")),
    ("fig2_noisy", include_str!("../configs/fig2_noisy.toml")),
    ("fig3_b_growth", include_str!("../configs/fig3_b_growth.toml")),
    ("fig4_robustness", include_str!("../configs/fig4_robustness.toml")),
    ("fig5_initial_stepsize", include_str!("../configs/fig5_initial_stepsize.toml")),
    ("fig6_b0_linear", include_str!("../configs/fig6_b0_linear.toml")),
    ("ruig_example1", include_str!("../configs/ruig_example1.toml")),
    ("ruig_example2", include_str!("../configs/ruig_example2.toml")),
];

pub fn get(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn names() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|(n, _)| *n)
}
