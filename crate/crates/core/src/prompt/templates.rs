use alloc::string::String;

/// Named prompt skeletons. Slots are written `{name}`; unknown slots are left
/// in place.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptTemplates {
    pub base: String,
    pub static_prompt: String,
    pub vts: String,
    pub phase_exploration: String,
    pub phase_exploitation: String,
    pub gap_targeting: String,
    pub gap_breadth: String,
    pub assumption_inversion: String,
    pub cross_industry: String,
    pub constraint_variation: String,
}

/// File names used when templates are loaded from a directory, paired with
/// a setter into [`PromptTemplates`].
pub const TEMPLATE_FILES: &[&str] = &[
    "base.txt",
    "static.txt",
    "vts.txt",
    "phase_exploration.txt",
    "phase_exploitation.txt",
    "gap_targeting.txt",
    "gap_breadth.txt",
    "assumption_inversion.txt",
    "cross_industry.txt",
    "constraint_variation.txt",
];

impl Default for PromptTemplates {
    fn default() -> Self {
        let t = |s: &str| String::from(s.trim_end_matches('\n'));
        Self {
            base: t(include_str!("../../templates/base.txt")),
            static_prompt: t(include_str!("../../templates/static.txt")),
            vts: t(include_str!("../../templates/vts.txt")),
            phase_exploration: t(include_str!("../../templates/phase_exploration.txt")),
            phase_exploitation: t(include_str!("../../templates/phase_exploitation.txt")),
            gap_targeting: t(include_str!("../../templates/gap_targeting.txt")),
            gap_breadth: t(include_str!("../../templates/gap_breadth.txt")),
            assumption_inversion: t(include_str!("../../templates/assumption_inversion.txt")),
            cross_industry: t(include_str!("../../templates/cross_industry.txt")),
            constraint_variation: t(include_str!("../../templates/constraint_variation.txt")),
        }
    }
}

impl PromptTemplates {
    /// Mutable slot for a file in [`TEMPLATE_FILES`].
    pub fn slot_mut(&mut self, file: &str) -> Option<&mut String> {
        Some(match file {
            "base.txt" => &mut self.base,
            "static.txt" => &mut self.static_prompt,
            "vts.txt" => &mut self.vts,
            "phase_exploration.txt" => &mut self.phase_exploration,
            "phase_exploitation.txt" => &mut self.phase_exploitation,
            "gap_targeting.txt" => &mut self.gap_targeting,
            "gap_breadth.txt" => &mut self.gap_breadth,
            "assumption_inversion.txt" => &mut self.assumption_inversion,
            "cross_industry.txt" => &mut self.cross_industry,
            "constraint_variation.txt" => &mut self.constraint_variation,
            _ => return None,
        })
    }
}

/// Replaces each `{name}` with its value.
pub fn fill(template: &str, slots: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len() + 256);
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) => {
                let name = &after[..close];
                match slots.iter().find(|(k, _)| *k == name) {
                    Some((_, v)) => out.push_str(v),
                    None => {
                        out.push('{');
                        out.push_str(name);
                        out.push('}');
                    }
                }
                rest = &after[close + 1..];
            }
            None => {
                out.push_str(&rest[open..]);
                rest = "";
            }
        }
    }
    out.push_str(rest);
    out
}

/// Collapses runs of blank lines left behind by empty slots.
pub fn tidy(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut blank_run = 0;
    for line in text.lines() {
        let line = line.trim_end();
        if line.is_empty() {
            blank_run += 1;
            if blank_run > 1 {
                continue;
            }
        } else {
            blank_run = 0;
        }
        out.push_str(line);
        out.push('\n');
    }
    while out.ends_with("\n\n") {
        out.pop();
    }
    out.trim_start_matches('\n').into()
}
