//! Emits a matplotlib script that draws entropy curves from their CSV files.

use std::path::{Path, PathBuf};

/// Script plotting `h_reported` against `eps` for every `(label, csv)` pair,
/// with the suppressed negative part of each curve drawn dotted. The script
/// must sit in the same directory as the CSV files and the image.
pub fn entropy_curve_script(curves: &[(String, PathBuf)], image: &Path) -> String {
    let rel = |p: &Path| {
        p.file_name()
            .map(|f| f.to_string_lossy().into_owned())
            .unwrap_or_default()
    };
    let entries: Vec<String> = curves
        .iter()
        .map(|(label, path)| format!("    ({label:?}, {:?}),", rel(path)))
        .collect();
    format!(
        r#"import csv
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))
CURVES = [
{entries}
]

fig, ax = plt.subplots(figsize=(5, 4))
for label, name in CURVES:
    with open(os.path.join(HERE, name)) as f:
        rows = list(csv.DictReader(f))
    eps = [float(r["eps"]) for r in rows]
    line, = ax.plot(eps, [float(r["h_reported"]) for r in rows], label=label)
    neg = [float(r["h_nontrivial"]) if float(r["h_nontrivial"]) < 0 else float("nan") for r in rows]
    ax.plot(eps, neg, ":", color=line.get_color())
ax.axhline(0.0, color="black", linewidth=0.5)
ax.set_xlabel(r"$\epsilon$")
ax.set_ylabel(r"$(1/N)\,\mathbb{{E}}[H(X \mid Y)]$")
ax.set_xlim(0, 1)
ax.legend()
fig.tight_layout()
fig.savefig(os.path.join(HERE, {image:?}))
"#,
        entries = entries.join("\n"),
        image = rel(image),
    )
}
