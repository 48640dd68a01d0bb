use std::path::Path;

use anyhow::anyhow;
use serde::{Deserialize, Serialize};

use firobf::attack::classify::DsmClassifier;
use firobf::attack::sat::extract_constants_sat;
use firobf::attack::{compile_report, extract_constants, infer_key_layout, RecoveredConstantSets, RecoveryReport};
use firobf::bits::ceil_log2;
use firobf::decoy::{assign_decoys, DecoyAssignment, DsmKind};
use firobf::evaluation::{
    behavior_report, behavior_report_with, emit_curves, sample_wrong_keys, EvaluationOptions, WrongKeySample,
};
use firobf::filter_design::{
    build_frequency_grid, design_filter, verify_half, BoundSet, FilterSpec, QuantizedFilter, RealCoefficients,
    ViolationReport,
};
use firobf::hw::{
    build_folded_filter, build_tmcm, emit_verilog, lower_to_gates, parse_verilog, ConstantMultiplier, FoldedFilter,
    GateNetlist,
};
use firobf::key::{Key, KeyLayout};

use crate::output::{ensure_dir, read_json, read_text, run_info, usage, write_artifact, write_text, Outcome};
use crate::{AttackArgs, BenchArgs, DesignArgs, EvaluateArgs, ObfuscateArgs};

fn load_spec(path: &Path) -> Outcome<FilterSpec> {
    let text = read_text(path)?;
    FilterSpec::from_json(&text).map_err(|e| usage(anyhow!("{}: {e}", path.display())))
}

#[derive(Serialize)]
struct DesignReport<'a> {
    spec: &'a FilterSpec,
    verify_density: f64,
    margin: f64,
    real: &'a RealCoefficients,
    bounds: &'a BoundSet,
    real_verification: ViolationReport,
    quantized_verification: &'a ViolationReport,
}

pub fn design(a: &DesignArgs) -> Outcome {
    let spec = load_spec(&a.spec)?;
    if a.grid_density.is_nan() || a.grid_density <= 0.0 {
        return Err(usage(anyhow!("--grid-density must be positive")));
    }
    let d = design_filter(&spec, a.grid_density)?;
    let verify_density = a.grid_density * 10.0;
    let dense = build_frequency_grid(&spec, verify_density);
    let report = DesignReport {
        spec: &spec,
        verify_density,
        margin: d.margin,
        real: &d.real,
        bounds: &d.bounds,
        real_verification: verify_half(&d.real.h, &spec, &dense),
        quantized_verification: &d.verification,
    };
    let run = run_info("design", a);
    ensure_dir(&a.out)?;
    let stem = format!("filter{}", spec.index);
    write_artifact(&a.out, &format!("{stem}.design.json"), &run, &report)?;
    write_artifact(&a.out, &format!("{stem}.quant.json"), &run, &d.quantized)?;
    println!(
        "filter {}: N = {}, mbw = {}, margin = {:.4}, real violations = {}, quantized violations = {}",
        spec.index,
        spec.taps,
        d.quantized.mbw,
        d.margin,
        report.real_verification.violating_points,
        d.verification.violating_points
    );
    Ok(())
}

/// Everything needed to check an attack; `obfuscate` marks it secret.
#[derive(Debug, Serialize, Deserialize)]
struct SecretBundle {
    secret: bool,
    key: String,
    coeffs: Vec<i64>,
    layout: KeyLayout,
    assignment: DecoyAssignment,
}

#[derive(Serialize)]
struct ObfuscateParams<'a> {
    #[serde(flatten)]
    args: &'a ObfuscateArgs,
    decoy_seed: u64,
    placement_seed: u64,
}

pub fn obfuscate(a: &ObfuscateArgs) -> Outcome {
    let qf: QuantizedFilter = match (&a.quant, &a.spec) {
        (Some(q), _) => read_json(q)?,
        (None, Some(s)) => design_filter(&load_spec(s)?, a.grid_density)?.quantized,
        (None, None) => unreachable!("clap requires one of --quant and --spec"),
    };
    if a.ibw == 0 {
        return Err(usage(anyhow!("--ibw must be positive")));
    }
    let width = qf.mbw + 1 + a.ibw + ceil_log2(qf.taps());
    if width > 64 {
        return Err(usage(anyhow!("accumulator would need {width} bits; reduce --ibw")));
    }
    let params =
        ObfuscateParams { args: a, decoy_seed: a.seed_obfuscate, placement_seed: a.seed_obfuscate.wrapping_add(1) };
    let da = assign_decoys(&qf, a.p, a.dsm, params.decoy_seed)?;
    let (tmcm, secret) = build_tmcm(&qf, &da, a.ibw, params.placement_seed)?;
    let net = lower_to_gates(&tmcm);
    let filter = build_folded_filter(&tmcm);

    let run = run_info("obfuscate", &params);
    ensure_dir(&a.out)?;
    write_artifact(&a.out, "netlist.json", &run, &net)?;
    let header = format!("// firobf obfuscate: {}\n", serde_json::to_string(&params).expect("params serialize"));
    write_text(&a.out, "design.v", &(header + &emit_verilog(&net)))?;
    write_text(&a.out, "key.hex", &format!("{}\n", secret.key.to_hex()))?;
    write_artifact(&a.out, "layout.json", &run, &secret.layout)?;
    write_artifact(&a.out, "filter.json", &run, &filter)?;
    let bundle = SecretBundle {
        secret: true,
        key: secret.key.to_hex(),
        coeffs: qf.coeffs.clone(),
        layout: secret.layout.clone(),
        assignment: da,
    };
    write_artifact(&a.out, "secret-assignment.json", &run, &bundle)?;
    let counts: Vec<String> = net.gate_counts().iter().map(|(k, c)| format!("{k}={c}")).collect();
    println!(
        "{} taps, p = {}, {} decoys, {} gates ({})",
        qf.taps(),
        a.p,
        bundle.assignment.nd.iter().sum::<usize>(),
        net.gates.len(),
        counts.join(" ")
    );
    Ok(())
}

fn load_netlist(path: &Path) -> Outcome<GateNetlist> {
    let text = read_text(path)?;
    let parsed =
        if path.extension().is_some_and(|e| e == "v") { parse_verilog(&text) } else { GateNetlist::from_json(&text) };
    parsed.map_err(|e| usage(anyhow!("{}: {e}", path.display())))
}

#[derive(Serialize)]
struct Recovered<'a> {
    widths: &'a [u32],
    #[serde(flatten)]
    sets: &'a RecoveredConstantSets,
}

pub fn attack(a: &AttackArgs) -> Outcome {
    let net = load_netlist(&a.netlist)?;
    let truth: Option<SecretBundle> = a.ground_truth.as_deref().map(read_json).transpose()?;
    let layout = infer_key_layout(&net)?;
    let r = if a.sat {
        extract_constants_sat(&net, &layout, a.seed_attack)?
    } else {
        extract_constants(&net, &layout, a.seed_attack)?
    };
    if let Some(t) = &truth {
        if t.coeffs.len() != r.sets.len() {
            return Err(usage(anyhow!(
                "ground truth has {} coefficients but the netlist has {} selects",
                t.coeffs.len(),
                r.sets.len()
            )));
        }
    }
    let classifier = DsmClassifier { tau: a.tau, ..DsmClassifier::default() };
    let verdict = classifier.classify(&r).ok();
    let report: RecoveryReport = compile_report(&r, verdict, a.tau, truth.as_ref().map(|t| t.coeffs.as_slice()));

    let run = run_info("attack", a);
    ensure_dir(&a.out)?;
    write_artifact(&a.out, "recovered.json", &run, &Recovered { widths: &layout.widths, sets: &r })?;
    write_artifact(&a.out, "report.json", &run, &report)?;
    let label = report.dsm_verdict.as_ref().map_or("inconclusive".to_string(), |v| {
        serde_json::to_value(v.label).ok().and_then(|l| l.as_str().map(String::from)).unwrap_or_default()
    });
    let cdc = report.cdc.map_or(String::new(), |c| format!(", cdc = {c}"));
    println!("{} constants, vc = {}{cdc}, apc = 2^{}, method: {label}", r.total(), report.vc, report.apc_log2);
    Ok(())
}

pub fn evaluate(a: &EvaluateArgs) -> Outcome {
    let spec = load_spec(&a.spec)?;
    let filter: FoldedFilter = read_json(&a.filter)?;
    if filter.taps() != spec.taps {
        return Err(usage(anyhow!("filter has {} taps but the specification has {}", filter.taps(), spec.taps)));
    }
    let p = filter.tmcm.key_bits();
    let key = Key::from_hex(&read_text(&a.key)?, p).map_err(|e| usage(anyhow!("{}: {e}", a.key.display())))?;
    if a.keys > 0 && !(1..=p).contains(&a.max_hd) {
        return Err(usage(anyhow!("--max-hd must lie in 1..={p}")));
    }
    let wrong = if a.keys == 0 {
        WrongKeySample { keys: Vec::new(), max_hd: a.max_hd, seed: a.seed_eval }
    } else {
        sample_wrong_keys(&key, a.keys, a.max_hd, a.seed_eval)?
    };
    let options = EvaluationOptions { grid_density: a.grid_density, curve_points: a.curve_points };
    let report = match &a.netlist {
        Some(path) => {
            let net = load_netlist(path)?;
            let t = &filter.tmcm;
            if net.key_bits() != p || net.input_width() != t.input_width() || net.output_width() != t.output_width() {
                return Err(usage(anyhow!("{} does not match the ports of the filter", path.display())));
            }
            behavior_report_with(&filter, &net, &spec, &key, &wrong, options)
        }
        None => behavior_report(&filter, &spec, &key, &wrong, options),
    };

    let run = run_info("evaluate", a);
    ensure_dir(&a.out)?;
    write_artifact(&a.out, "behavior.json", &run, &report)?;
    write_text(&a.out, "curves.csv", &emit_curves(&report))?;
    println!(
        "correct key {}, {}/{} wrong keys violate the specification",
        if report.keys[0].violated { "violates" } else { "meets" },
        report.violating_wrong_keys,
        report.wrong_keys
    );
    Ok(())
}

/// Key bits per benchmark filter.
const BENCH_KEY_BITS: [usize; 3] = [32, 64, 128];

#[derive(Serialize)]
struct BenchRow {
    filter: u32,
    dsm: DsmKind,
    p: usize,
    vc: usize,
    cdc: usize,
    apc_log2: u32,
    gates: usize,
}

pub fn bench(a: &BenchArgs) -> Outcome {
    let mut rows = Vec::new();
    println!("{:<8}{:<6}{:>5}{:>5}{:>5}{:>9}{:>8}", "filter", "dsm", "p", "vc", "cdc", "apc", "gates");
    for (spec, p) in FilterSpec::benchmarks().iter().zip(BENCH_KEY_BITS) {
        let d = design_filter(spec, a.grid_density)?;
        for dsm in DsmKind::ALL {
            let da = assign_decoys(&d.quantized, p, dsm, a.seed_obfuscate)?;
            let (tmcm, _) = build_tmcm(&d.quantized, &da, a.ibw, a.seed_obfuscate.wrapping_add(1))?;
            let net = lower_to_gates(&tmcm);
            let layout = infer_key_layout(&net)?;
            let r = extract_constants(&net, &layout, a.seed_attack)?;
            let report = compile_report(&r, None, firobf::attack::classify::DEFAULT_TAU, Some(&d.quantized.coeffs));
            let row = BenchRow {
                filter: spec.index,
                dsm,
                p,
                vc: report.vc,
                cdc: report.cdc.unwrap_or(0),
                apc_log2: report.apc_log2,
                gates: net.gates.len(),
            };
            println!(
                "{:<8}{:<6}{:>5}{:>5}{:>5}{:>9}{:>8}",
                row.filter,
                row.dsm.name(),
                row.p,
                row.vc,
                row.cdc,
                format!("2^{}", row.apc_log2),
                row.gates
            );
            rows.push(row);
        }
    }
    if let Some(out) = &a.out {
        ensure_dir(out)?;
        #[derive(Serialize)]
        struct Bench<'a> {
            rows: &'a [BenchRow],
        }
        write_artifact(out, "bench.json", &run_info("bench", a), &Bench { rows: &rows })?;
    }
    Ok(())
}
