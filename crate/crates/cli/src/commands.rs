use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ldpc_replica::bp::{simulate_rate, write_sim_csv};
use ldpc_replica::channel::{
    check_irreducible_q0, classify, frozen_solution_exists, stationary_left_message,
    ChannelSpec, FrozenWitness, MarkovChannelSpec,
};
use ldpc_replica::dec::{dec_bp_threshold, dec_entropy_curve, dec_map_threshold, write_curve_csv};
use ldpc_replica::ensemble::Ensemble;
use ldpc_replica::markov::{
    erased_fractions, rs_entropy_markov_default, run_markov_population_dynamics, write_psi_csv,
    write_psi_hat_csv,
};
use ldpc_replica::population::{
    rs_entropy_memoryless, run_population_dynamics, write_snapshot_csv, RsEntropy, SnapshotMeta,
};
use serde_json::json;

use crate::args::*;
use crate::error::{CliError, CliResult};
use crate::manifest::{manifest_path, sibling, suffixed, RunManifest};
use crate::plot::entropy_curve_script;

/// What a command produced, before it is recorded in a manifest.
pub struct Outcome {
    pub outputs: Vec<PathBuf>,
    pub seeds: Vec<u64>,
    pub spec: Option<ChannelSpec>,
    pub result: serde_json::Value,
    /// Where the manifest goes; `None` skips it.
    pub manifest: Option<PathBuf>,
}

/// Runs `cmd`. `inline_spec` replaces the spec file of `cmd` when replaying
/// a manifest. Returns the command that was actually run.
pub fn run(cmd: Command, inline_spec: Option<ChannelSpec>) -> CliResult<(Command, Outcome)> {
    let outcome = match &cmd {
        Command::DecCurve(a) => dec_curve(a)?,
        Command::Threshold(a) => threshold(a)?,
        Command::De(a) => de(a, inline_spec)?,
        Command::Simulate(a) => simulate(a, inline_spec)?,
        Command::ChannelCheck(a) => channel_check(a, inline_spec)?,
        Command::Replay(a) => return replay(a),
    };
    Ok((cmd, outcome))
}

fn replay(a: &ReplayArgs) -> CliResult<(Command, Outcome)> {
    let m = RunManifest::read(&a.manifest)?;
    let mut cmd = m.command;
    if let Some(out) = &a.out {
        match &mut cmd {
            Command::DecCurve(c) => c.out = out.clone(),
            Command::De(c) => c.out = out.clone(),
            Command::Simulate(c) => c.out = out.clone(),
            Command::Threshold(c) => c.out = Some(out.clone()),
            Command::ChannelCheck(c) => c.out = Some(out.clone()),
            Command::Replay(_) => {}
        }
    }
    if matches!(cmd, Command::Replay(_)) {
        return Err(CliError::Validation("a manifest cannot record a replay".into()));
    }
    let spec = m
        .channel_spec
        .map(|v| ChannelSpec::from_json(&v.to_string()))
        .transpose()?;
    run(cmd, spec)
}

fn write_with<F>(path: &Path, f: F) -> CliResult<()>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| CliError::io(path, e))
}

/// The channel named by `a`. A spec file is replaced by `inline` when one is
/// given, so a replay does not depend on the original file.
fn load_channel(a: &ChannelArgs, inline: Option<ChannelSpec>) -> CliResult<ChannelSpec> {
    match (&a.spec, a.eps) {
        (Some(_), _) if inline.is_some() => Ok(inline.expect("checked")),
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            ChannelSpec::from_json(&text)
                .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
        }
        (None, Some(eps)) => Ok(ChannelSpec::Markov(MarkovChannelSpec::dec(eps)?)),
        (None, None) => Err(CliError::Validation("give --spec or --eps".into())),
    }
}

fn eps_grid(start: f64, end: f64, steps: usize) -> CliResult<Vec<f64>> {
    if !(0.0 <= start && start < end && end <= 1.0) {
        return Err(CliError::Validation(format!(
            "need 0 <= eps-start < eps-end <= 1, got {start} and {end}"
        )));
    }
    match steps {
        0 => Err(CliError::Validation("steps must be at least 1".into())),
        1 => Ok(vec![start]),
        _ => Ok((0..steps)
            .map(|k| {
                if k + 1 == steps {
                    end
                } else {
                    start + (end - start) * k as f64 / (steps - 1) as f64
                }
            })
            .collect()),
    }
}

fn dec_curve(a: &DecCurveArgs) -> CliResult<Outcome> {
    if a.l.len() != a.r.len() {
        return Err(CliError::Validation(format!(
            "--l has {} values but --r has {}",
            a.l.len(),
            a.r.len()
        )));
    }
    let grid = eps_grid(a.eps_start, a.eps_end, a.steps)?;
    let ext = a
        .out
        .extension()
        .map(|e| format!(".{}", e.to_string_lossy()))
        .unwrap_or_default();
    let mut outputs = Vec::new();
    let mut curves = Vec::new();
    let mut summary = Vec::new();
    for (&l, &r) in a.l.iter().zip(&a.r) {
        let e = Ensemble::new(l, r)?;
        let points = dec_entropy_curve(&e, &grid)?;
        let path = if a.l.len() == 1 {
            a.out.clone()
        } else {
            sibling(&a.out, &format!("-{l}-{r}{ext}"))
        };
        write_with(&path, |w| write_curve_csv(&points, w))?;
        let onset = points.iter().find(|p| p.h_reported > 0.0).map(|p| p.eps);
        let unconverged = points.iter().filter(|p| !p.fp.converged).count();
        if unconverged > 0 {
            eprintln!("warning: ({l},{r}): {unconverged} grid points did not converge");
        }
        println!("({l},{r}): {} points -> {}", points.len(), path.display());
        summary.push(json!({ "l": l, "r": r, "path": path, "first_positive_eps": onset }));
        curves.push((format!("({l},{r})"), path.clone()));
        outputs.push(path);
    }
    let script = sibling(&a.out, ".plot.py");
    let image = sibling(&a.out, ".png");
    write_with(&script, |w| {
        w.write_all(entropy_curve_script(&curves, &image).as_bytes())
    })?;
    outputs.push(script);
    Ok(Outcome {
        manifest: Some(manifest_path(&a.out)),
        outputs,
        seeds: vec![],
        spec: None,
        result: json!({ "curves": summary }),
    })
}

fn threshold(a: &ThresholdArgs) -> CliResult<Outcome> {
    let e = Ensemble::new(a.l, a.r)?;
    let result = match a.kind {
        ThresholdKind::Bp => {
            let t = dec_bp_threshold(&e, a.tol)?;
            println!("{t:.6}");
            json!({ "kind": "bp", "value": t })
        }
        ThresholdKind::Map => {
            let t = dec_map_threshold(&e, a.tol)?;
            println!("{:.6}", t.value);
            if t.degenerate {
                eprintln!("note: the entropy is nonnegative at the BP threshold, so both thresholds coincide");
            }
            json!({ "kind": "map", "value": t.value, "degenerate": t.degenerate })
        }
    };
    Ok(Outcome {
        outputs: vec![],
        seeds: vec![],
        spec: None,
        result,
        manifest: a.out.clone(),
    })
}

fn print_entropy(h: &RsEntropy) {
    println!(
        "entropy: {:.6} +- {:.6} bits per symbol (reported {:.6})",
        h.estimate.mean, h.estimate.std_err, h.reported
    );
}

fn de(a: &DeArgs, inline: Option<ChannelSpec>) -> CliResult<Outcome> {
    let spec = load_channel(&a.channel, inline)?;
    let e = Ensemble::new(a.l, a.r)?;
    let mut outputs = vec![a.out.clone()];
    let mut result = serde_json::Map::new();
    let h = match &spec {
        ChannelSpec::Memoryless(w) => {
            let pop = run_population_dynamics(&e, w, a.pop_size, a.sweeps, a.seed)?;
            write_with(&a.out, |f| write_snapshot_csv(&pop.phi, f))?;
            rs_entropy_memoryless(&pop, &e, w, a.mc_samples, a.seed)?
        }
        ChannelSpec::Markov(c) => {
            let pop = run_markov_population_dynamics(c, &e, a.pop_size, a.sweeps, a.seed)?;
            write_with(&a.out, |f| write_snapshot_csv(&pop.phi, f))?;
            let psi = sibling(&a.out, ".psi.csv");
            let psi_hat = sibling(&a.out, ".psi_hat.csv");
            write_with(&psi, |f| write_psi_csv(&pop, f))?;
            write_with(&psi_hat, |f| write_psi_hat_csv(&pop, f))?;
            outputs.extend([psi, psi_hat]);
            if c.is_erasure_like() {
                let f = erased_fractions(&pop, &e, a.seed);
                println!(
                    "erased fractions: e_fv {:.6} e_vf {:.6} e_Rv {:.6} e_Ls {:.6}",
                    f.e_fv, f.e_vf, f.e_rv, f.e_ls
                );
                result.insert("erased_fractions".into(), json!(f.params()));
            }
            rs_entropy_markov_default(&pop, c, &e, a.mc_samples, a.seed)?
        }
    };
    print_entropy(&h);
    result.insert("entropy".into(), json!(h));
    let meta = suffixed(&a.out, ".meta.json");
    let m = SnapshotMeta {
        pop_size: a.pop_size,
        sweeps: a.sweeps,
        seed: a.seed,
        channel_hash: spec.hash(),
    };
    write_with(&meta, |f| {
        serde_json::to_writer_pretty(&mut *f, &m).map_err(std::io::Error::from)?;
        writeln!(f)
    })?;
    outputs.push(meta);
    Ok(Outcome {
        manifest: Some(manifest_path(&a.out)),
        outputs,
        seeds: vec![a.seed],
        spec: Some(spec),
        result: result.into(),
    })
}

fn simulate(a: &SimulateArgs, inline: Option<ChannelSpec>) -> CliResult<Outcome> {
    let spec = load_channel(&a.channel, inline)?;
    let e = Ensemble::new(a.l, a.r)?;
    let mut stats = simulate_rate(&e, a.n, &spec.to_markov(), a.trials, a.max_iter, a.seed)?;
    stats.param = a.channel.eps;
    write_with(&a.out, |f| write_sim_csv(std::slice::from_ref(&stats), f))?;
    println!(
        "mean residual rate {:.3e} +- {:.1e} over {} trials, {:.1} iterations on average",
        stats.mean_rate, stats.std_err, stats.trials, stats.avg_iters
    );
    Ok(Outcome {
        manifest: Some(manifest_path(&a.out)),
        outputs: vec![a.out.clone()],
        seeds: vec![a.seed],
        spec: Some(spec),
        result: json!({
            "mean_rate": stats.mean_rate,
            "std_err": stats.std_err,
            "avg_iters": stats.avg_iters,
        }),
    })
}

fn describe_witness(c: &MarkovChannelSpec, w: &FrozenWitness) -> String {
    let (ys, ss) = (c.outputs(), c.states());
    match *w {
        FrozenWitness::SplitSuccessor { y, x2, s2, s1 } => format!(
            "output {} with input {x2} in state {} moves to state {} or {}",
            ys[y], ss[s2], ss[s1[0]], ss[s1[1]]
        ),
        FrozenWitness::MergedPredecessor { y, s1, pairs } => format!(
            "output {} reaches state {} from (x={}, s={}) and (x={}, s={})",
            ys[y], ss[s1], pairs[0].0, ss[pairs[0].1], pairs[1].0, ss[pairs[1].1]
        ),
    }
}

fn channel_check(a: &ChannelCheckArgs, inline: Option<ChannelSpec>) -> CliResult<Outcome> {
    let spec = load_channel(&a.channel, inline)?;
    let c = spec.to_markov();
    let class = classify(&c);
    let irreducible = check_irreducible_q0(&c)?;
    let frozen = frozen_solution_exists(&c);
    let m_ls = if irreducible {
        Some(stationary_left_message(&c)?)
    } else {
        None
    };
    println!("class: {class}");
    println!("irreducible: {irreducible}");
    println!("frozen solution: {}", frozen.exists);
    if let Some(w) = &frozen.witness {
        println!("witness: {}", describe_witness(&c, w));
    }
    match &m_ls {
        Some(m) => println!(
            "m_Ls: {}",
            m.iter().map(|v| format!("{v:.6}")).collect::<Vec<_>>().join(", ")
        ),
        None => println!("m_Ls: undefined (state chain is reducible)"),
    }
    Ok(Outcome {
        outputs: vec![],
        seeds: vec![],
        result: json!({
            "class": class,
            "irreducible": irreducible,
            "frozen": frozen,
            "m_ls": m_ls,
        }),
        spec: Some(spec),
        manifest: a.out.clone(),
    })
}
