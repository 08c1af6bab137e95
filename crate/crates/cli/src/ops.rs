//! Subcommand implementations and the full pipeline.

use std::path::Path;

use bitsim_core::arch::ArchConfig;
use bitsim_core::dataflow::{dram_traffic, tile_layer, Dataflow, WeightFormat};
use bitsim_core::encode::{bits_per_weight, EncodedLayer};
use bitsim_core::gen::{self, WeightDistribution};
use bitsim_core::layer::{validate_network, LayerKind, NetworkSpec};
use bitsim_core::metrics::{compare_runs, energy_report_totals, RunRecord};
use bitsim_core::netcfg;
use bitsim_core::quant::{numeric_range, quantize_tensor, quantize_weight, QuantStats};
use bitsim_core::reference::{
    bitserial_mac, conv_golden, relu_pool, sparse_conv_golden, sparse_mac,
};
use bitsim_core::systolic::{plan_layer, simulate_layer_timing, simulate_network, WorkloadMode};
use bitsim_core::weightfile;
use bitsim_core::{FixedTensor, Precision};

use crate::manifest::{RunManifest, WeightSource};
use crate::output::{
    csv, cycles_csv, ratios_csv, tensor_hash, EnergySummary, LayerRow, RunSummary, Workspace,
};
use crate::CliError;

fn stage<T, E: std::fmt::Display>(name: &str, r: Result<T, E>) -> Result<T, CliError> {
    r.map_err(|e| CliError::Runtime(format!("[{name}] {e}")))
}

/// Weight seed for one layer of a run.
fn layer_seed(seed: u64, idx: usize) -> u64 {
    seed.wrapping_add((idx as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

/// Loads network and arch, applies precision/n_max overrides, validates.
pub fn load_context(
    network: &str,
    arch_path: Option<&Path>,
    precision: Precision,
    n_max: Option<u8>,
) -> Result<(NetworkSpec, ArchConfig), CliError> {
    let mut loaded = netcfg::load_network(network)
        .map_err(|e| CliError::Validation(format!("[validate] network {network}: {e}")))?
        .with_precision(precision);
    if let Some(n) = n_max {
        loaded = loaded.with_n_max(n);
    }
    let arch = match arch_path {
        Some(p) => ArchConfig::load(p)
            .map_err(|e| CliError::Validation(format!("[validate] arch {}: {e}", p.display())))?,
        None => ArchConfig::default(),
    };
    let diags = validate_network(&loaded.spec, &arch);
    if !diags.is_empty() {
        let list: Vec<String> = diags.iter().map(|d| d.to_string()).collect();
        return Err(CliError::Validation(format!(
            "[validate] network {network}: {}",
            list.join("; ")
        )));
    }
    Ok((loaded.spec, arch))
}

fn parse_distribution(dist: &str) -> Result<WeightDistribution, CliError> {
    if dist == "uniform" {
        return Ok(WeightDistribution::Uniform);
    }
    if let Some(spec) = dist.strip_prefix("profiled:") {
        if let Ok(k) = spec.parse::<usize>() {
            let mut hist = vec![0.0; k + 1];
            hist[k] = 1.0;
            return Ok(WeightDistribution::NnzbProfiled(hist));
        }
        let hist: Result<Vec<f64>, _> = spec.split(',').map(str::parse::<f64>).collect();
        if let Ok(hist) = hist {
            return Ok(WeightDistribution::NnzbProfiled(hist));
        }
    }
    Err(CliError::Usage(format!(
        "distribution {dist:?} (want uniform, profiled:<k>, or profiled:<w0,w1,...>)"
    )))
}

fn generated_weights(net: &NetworkSpec, seed: u64, dist: &WeightDistribution) -> Vec<FixedTensor> {
    net.layers
        .iter()
        .enumerate()
        .map(|(i, l)| gen::gen_weights(l, layer_seed(seed, i), dist))
        .collect()
}

fn ingest_weights(
    net: &NetworkSpec,
    source: &WeightSource,
    dist: &WeightDistribution,
) -> Result<Vec<FixedTensor>, CliError> {
    match source {
        WeightSource::Seed(seed) => Ok(generated_weights(net, *seed, dist)),
        WeightSource::File(path) => {
            let bytes = stage("ingest", std::fs::read(path))?;
            stage(
                "ingest",
                weightfile::read_weights(net, &mut bytes.as_slice()),
            )
        }
    }
}

pub fn cmd_gen_weights(
    network: &str,
    precision: Precision,
    seed: u64,
    dist: &str,
    out_file: &Path,
) -> Result<(), CliError> {
    let (net, _) = load_context(network, None, precision, None)?;
    let dist = parse_distribution(dist)?;
    let tensors = generated_weights(&net, seed, &dist);
    stage(
        "ingest",
        weightfile::atomic_write(out_file, |buf| weightfile::write_weights(&tensors, buf)),
    )?;
    let total: usize = tensors.iter().map(|t| t.len()).sum();
    println!(
        "wrote {} ({} layers, {} weights, seed {})",
        out_file.display(),
        tensors.len(),
        total,
        seed
    );
    Ok(())
}

fn quantize_stage(
    net: &NetworkSpec,
    tensors: Vec<FixedTensor>,
) -> (Vec<FixedTensor>, Vec<QuantStats>) {
    let mut quantized = Vec::with_capacity(tensors.len());
    let mut stats = Vec::with_capacity(tensors.len());
    for (idx, t) in tensors.into_iter().enumerate() {
        let (q, mut s) = quantize_tensor(&t, net.layers[idx].n_nzb_max as u32);
        s.layer = idx;
        quantized.push(q);
        stats.push(s);
    }
    (quantized, stats)
}

fn quant_stats_csv(stats: &[QuantStats]) -> String {
    csv(
        "layer,n_max,mse,max_abs_error,modified_fraction",
        stats.iter().map(|s| {
            format!(
                "{},{},{:.6},{},{:.6}",
                s.layer, s.n_max, s.mse, s.max_abs_error, s.modified_fraction
            )
        }),
    )
}

pub fn cmd_quantize(
    network: &str,
    arch: Option<&Path>,
    precision: Precision,
    n_max: Option<u8>,
    weights: &Path,
    out: &Path,
) -> Result<(), CliError> {
    let (net, _) = load_context(network, arch, precision, n_max)?;
    let mut ws = Workspace::new(out)?;
    let result = (|| {
        let tensors = ingest_weights(
            &net,
            &WeightSource::File(weights.to_path_buf()),
            &WeightDistribution::Uniform,
        )?;
        let (quantized, stats) = quantize_stage(&net, tensors);
        let mut buf = Vec::new();
        stage("quantize", weightfile::write_weights(&quantized, &mut buf))?;
        ws.write_bytes("quantized.bin", &buf)?;
        ws.write_bytes("quant_stats.csv", quant_stats_csv(&stats).as_bytes())?;
        println!("layer  n_max  mse            max_err  modified");
        for s in &stats {
            println!(
                "{:<6} {:<6} {:<14.4} {:<8} {:.4}",
                s.layer, s.n_max, s.mse, s.max_abs_error, s.modified_fraction
            );
        }
        Ok(())
    })();
    if result.is_err() {
        ws.discard();
    }
    result
}

fn encode_stage(
    net: &NetworkSpec,
    quantized: Vec<FixedTensor>,
) -> Result<Vec<EncodedLayer>, CliError> {
    let mut encoded = Vec::with_capacity(quantized.len());
    for (idx, q) in quantized.into_iter().enumerate() {
        encoded.push(stage(
            "encode",
            EncodedLayer::from_tensor(&q, net.layers[idx].n_nzb_max),
        )?);
    }
    Ok(encoded)
}

fn encode_stats_csv(net: &NetworkSpec, encoded: &[EncodedLayer]) -> String {
    csv(
        "layer,weights,bits_per_weight,encoded_bits,raw_bits,ratio",
        encoded.iter().enumerate().map(|(i, e)| {
            let raw = e.weight_count() as u64 * net.layers[i].precision.bits() as u64;
            format!(
                "{},{},{},{},{},{:.4}",
                i,
                e.weight_count(),
                bits_per_weight(e.precision, e.n_max),
                e.total_bits(),
                raw,
                e.total_bits() as f64 / raw as f64
            )
        }),
    )
}

pub fn cmd_encode(
    network: &str,
    arch: Option<&Path>,
    precision: Precision,
    n_max: Option<u8>,
    weights: &Path,
    out: &Path,
) -> Result<(), CliError> {
    let (net, _) = load_context(network, arch, precision, n_max)?;
    let mut ws = Workspace::new(out)?;
    let result = (|| {
        let tensors = ingest_weights(
            &net,
            &WeightSource::File(weights.to_path_buf()),
            &WeightDistribution::Uniform,
        )?;
        // encoding requires weights at or under the cap; quantize first and
        // say so if that changed anything
        let (quantized, stats) = quantize_stage(&net, tensors);
        let touched: u64 = stats
            .iter()
            .map(|s| (s.modified_fraction * s.hist_before.iter().sum::<u64>() as f64) as u64)
            .sum();
        if touched > 0 {
            println!("note: {touched} weights exceeded n_nzb_max and were quantized first");
        }
        let encoded = encode_stage(&net, quantized)?;
        let mut buf = Vec::new();
        stage("encode", weightfile::write_encoded(&encoded, &mut buf))?;
        ws.write_bytes("encoded.bin", &buf)?;
        ws.write_bytes(
            "encode_stats.csv",
            encode_stats_csv(&net, &encoded).as_bytes(),
        )?;
        let enc_bits: u64 = encoded.iter().map(|e| e.total_bits()).sum();
        let raw_bits: u64 = net
            .layers
            .iter()
            .map(|l| l.weight_count() as u64 * l.precision.bits() as u64)
            .sum();
        println!(
            "encoded {} layers: {} bits vs {} raw ({:.4}x)",
            encoded.len(),
            enc_bits,
            raw_bits,
            enc_bits as f64 / raw_bits as f64
        );
        Ok(())
    })();
    if result.is_err() {
        ws.discard();
    }
    result
}

fn plan_csv(net: &NetworkSpec, arch: &ArchConfig) -> Result<String, CliError> {
    let mut rows = Vec::new();
    for (idx, layer) in net.layers.iter().enumerate() {
        let plan = stage("plan", tile_layer(layer, arch))?;
        let fmt = WeightFormat::Encoded {
            n_max: layer.n_nzb_max,
        };
        let rif = stage("plan", dram_traffic(layer, &plan, Dataflow::Rif, fmt))?;
        let rwf = stage("plan", dram_traffic(layer, &plan, Dataflow::Rwf, fmt))?;
        let chosen = if rwf.total_bits < rif.total_bits {
            Dataflow::Rwf
        } else {
            Dataflow::Rif
        };
        rows.push(format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            idx,
            plan.t_ic,
            plan.t_oc,
            plan.t_wi,
            plan.t_hi,
            chosen,
            rif.dram_bits_ifm,
            rif.dram_bits_weight,
            rif.total_bits,
            rwf.dram_bits_ifm,
            rwf.dram_bits_weight,
            rwf.total_bits,
            rif.dram_bits_ofm,
            rif.total_bits.min(rwf.total_bits),
        ));
    }
    Ok(csv(
        "layer,t_ic,t_oc,t_wi,t_hi,dataflow,rif_ifm_bits,rif_weight_bits,rif_total_bits,\
         rwf_ifm_bits,rwf_weight_bits,rwf_total_bits,ofm_bits,chosen_total_bits",
        rows,
    ))
}

pub fn cmd_plan(
    network: &str,
    arch_path: Option<&Path>,
    precision: Precision,
    n_max: Option<u8>,
    out: &Path,
) -> Result<(), CliError> {
    let (net, arch) = load_context(network, arch_path, precision, n_max)?;
    let mut ws = Workspace::new(out)?;
    let text = plan_csv(&net, &arch)?;
    ws.write_bytes("plan.csv", text.as_bytes())?;
    print!("{text}");
    Ok(())
}

/// Simulates the network with the requested workload, cross-checks every
/// layer against the reference engine, and times the dense baseline.
fn simulate_stage(
    net: &NetworkSpec,
    encoded: &[EncodedLayer],
    arch: &ArchConfig,
    mode: WorkloadMode,
    seed: u64,
    mode_name: &str,
    workload_name: &str,
) -> Result<RunSummary, CliError> {
    let sim = stage(
        "simulate",
        simulate_network(net, encoded, None, seed, arch, mode),
    )?;

    let mut layers = Vec::with_capacity(net.layers.len());
    let mut total_bits = 0u64;
    let mut baseline_cycles = 0u64;
    let mut baseline_bits = 0u64;
    for (idx, layer) in net.layers.iter().enumerate() {
        let enc = &encoded[idx];

        // always-on functional check against the reference engine
        let golden = stage(
            "simulate",
            sparse_conv_golden(&sim.ifms[idx], enc, layer).and_then(|raw| relu_pool(&raw, layer)),
        )?;
        if golden != sim.ofms[idx] {
            return Err(CliError::Runtime(format!(
                "[simulate] layer {idx}: simulator OFM diverges from reference engine"
            )));
        }

        let plan = stage("simulate", plan_layer(layer, arch, mode, enc.n_max))?;
        let traffic = stage(
            "simulate",
            dram_traffic(
                layer,
                &plan,
                plan.dataflow.unwrap(),
                mode.weight_format(enc.n_max),
            ),
        )?;
        total_bits += traffic.total_bits;

        let base_mode = WorkloadMode::DenseBitSerial;
        let base_plan = stage("simulate", plan_layer(layer, arch, base_mode, enc.n_max))?;
        let base_report = stage(
            "simulate",
            simulate_layer_timing(layer, enc, &base_plan, base_mode, arch),
        )?;
        let base_traffic = stage(
            "simulate",
            dram_traffic(
                layer,
                &base_plan,
                base_plan.dataflow.unwrap(),
                WeightFormat::Raw,
            ),
        )?;
        baseline_cycles += base_report.total_cycles;
        baseline_bits += base_traffic.total_bits;

        layers.push(LayerRow {
            index: idx,
            kind: match layer.kind {
                LayerKind::Conv => "conv".into(),
                LayerKind::Fc => "fc".into(),
            },
            n_max: enc.n_max,
            dataflow: plan.dataflow.unwrap().to_string(),
            report: sim.report.layers[idx],
            traffic,
            baseline_cycles: base_report.total_cycles,
            baseline_traffic: base_traffic,
            ofm_hash: tensor_hash(&sim.ofms[idx]),
        });
    }

    Ok(RunSummary {
        network: net.name.clone(),
        mode: mode_name.to_string(),
        workload: workload_name.to_string(),
        seed: Some(seed),
        total_cycles: sim.report.total_cycles,
        frames_per_second: sim.report.frames_per_second,
        total_dram_bits: total_bits,
        baseline_total_cycles: baseline_cycles,
        baseline_total_dram_bits: baseline_bits,
        golden_match: true,
        ofm_hash: layers
            .last()
            .map(|l| l.ofm_hash.clone())
            .unwrap_or_default(),
        layers,
    })
}

/// Mode/workload/seed selection shared by `simulate` calls.
pub struct SimArgs<'a> {
    pub precision: Precision,
    pub workload: WorkloadMode,
    pub seed: u64,
    pub mode_name: &'a str,
    pub workload_name: &'a str,
}

pub fn cmd_simulate(
    network: &str,
    arch_path: Option<&Path>,
    args: &SimArgs<'_>,
    encoded_path: &Path,
    out: &Path,
) -> Result<(), CliError> {
    let (net, arch) = load_context(network, arch_path, args.precision, None)?;
    let bytes = stage("ingest", std::fs::read(encoded_path))?;
    let encoded = stage("ingest", weightfile::read_encoded(&mut bytes.as_slice()))?;
    let mut ws = Workspace::new(out)?;
    let result = (|ws: &mut Workspace| {
        let summary = simulate_stage(
            &net,
            &encoded,
            &arch,
            args.workload,
            args.seed,
            args.mode_name,
            args.workload_name,
        )?;
        ws.write_bytes("cycles.csv", cycles_csv(&summary.layers).as_bytes())?;
        ws.write_json("summary.json", &summary)?;
        println!(
            "{}: {} cycles, {:.1} frame/s, golden check ok",
            net.name, summary.total_cycles, summary.frames_per_second
        );
        Ok(())
    })(&mut ws);
    if result.is_err() {
        ws.discard();
    }
    result
}

/// Energy/ratio reporting from a run summary (and optional separate baseline run).
/// Core power follows each run's own precision mode.
fn summary_precision(summary: &RunSummary) -> Result<Precision, CliError> {
    match summary.mode.as_str() {
        "16b" => Ok(Precision::Bits16),
        "8b" => Ok(Precision::Bits8),
        other => Err(CliError::Runtime(format!(
            "[report] summary has unknown mode {other:?}"
        ))),
    }
}

fn report_stage(
    ws: &mut Workspace,
    summary: &RunSummary,
    baseline: Option<&RunSummary>,
    arch: &ArchConfig,
) -> Result<EnergySummary, CliError> {
    let precision = summary_precision(summary)?;
    let ours = RunRecord {
        network: summary.network.clone(),
        total_cycles: summary.total_cycles,
        total_dram_bits: summary.total_dram_bits,
        energy: energy_report_totals(
            summary.total_cycles,
            summary.total_dram_bits,
            arch,
            precision,
        ),
    };
    let base = match baseline {
        Some(b) => RunRecord {
            network: b.network.clone(),
            total_cycles: b.total_cycles,
            total_dram_bits: b.total_dram_bits,
            energy: energy_report_totals(
                b.total_cycles,
                b.total_dram_bits,
                arch,
                summary_precision(b)?,
            ),
        },
        None => RunRecord {
            network: summary.network.clone(),
            total_cycles: summary.baseline_total_cycles,
            total_dram_bits: summary.baseline_total_dram_bits,
            energy: energy_report_totals(
                summary.baseline_total_cycles,
                summary.baseline_total_dram_bits,
                arch,
                precision,
            ),
        },
    };
    let ratios = stage("report", compare_runs(&ours, &base))?;
    let energy = EnergySummary {
        network: summary.network.clone(),
        ours: ours.energy,
        baseline: base.energy,
        ratios,
    };
    ws.write_json("energy.json", &energy)?;
    ws.write_bytes("ratios.csv", ratios_csv(&ratios).as_bytes())?;
    Ok(energy)
}

fn read_summary(dir: &Path) -> Result<RunSummary, CliError> {
    let path = dir.join("summary.json");
    let text = stage("report", std::fs::read_to_string(&path))?;
    stage("report", serde_json::from_str::<RunSummary>(&text))
}

pub fn cmd_report(
    run_dir: &Path,
    baseline_dir: Option<&Path>,
    arch_path: Option<&Path>,
    out: &Path,
) -> Result<(), CliError> {
    let summary = read_summary(run_dir)?;
    let baseline = baseline_dir.map(read_summary).transpose()?;
    let arch = match arch_path {
        Some(p) => ArchConfig::load(p)
            .map_err(|e| CliError::Validation(format!("[validate] arch: {e}")))?,
        None => ArchConfig::default(),
    };
    let mut ws = Workspace::new(out)?;
    let result = report_stage(&mut ws, &summary, baseline.as_ref(), &arch);
    match result {
        Ok(energy) => {
            println!(
                "{}: speedup {:.3}, power ratio {:.3}, dram ratio {:.3}, energy efficiency {:.3}",
                energy.network,
                energy.ratios.speedup,
                energy.ratios.power_ratio,
                energy.ratios.dram_ratio,
                energy.ratios.energy_efficiency_ratio
            );
            Ok(())
        }
        Err(e) => {
            ws.discard();
            Err(e)
        }
    }
}

/// The full pipeline: validate, ingest, quantize, encode, plan, simulate,
/// report. Fails atomically: on any stage error the artifacts written so
/// far are removed.
pub fn run_pipeline(m: &RunManifest) -> Result<RunSummary, CliError> {
    m.validate()?;
    let precision = m.precision()?;
    let workload = m.workload_mode()?;
    let (net, arch) = load_context(&m.network, m.arch.as_deref(), precision, m.n_max)?;

    let mut ws = Workspace::new(&m.out)?;
    let result = (|ws: &mut Workspace| {
        let seed = match m.weights {
            WeightSource::Seed(s) => s,
            WeightSource::File(_) => 0,
        };
        let tensors = ingest_weights(&net, &m.weights, &WeightDistribution::Uniform)?;
        if matches!(m.weights, WeightSource::Seed(_)) {
            let mut buf = Vec::new();
            stage("ingest", weightfile::write_weights(&tensors, &mut buf))?;
            ws.write_bytes("weights.bin", &buf)?;
        }

        let (quantized, stats) = quantize_stage(&net, tensors);
        let mut buf = Vec::new();
        stage("quantize", weightfile::write_weights(&quantized, &mut buf))?;
        ws.write_bytes("quantized.bin", &buf)?;
        ws.write_bytes("quant_stats.csv", quant_stats_csv(&stats).as_bytes())?;

        let encoded = encode_stage(&net, quantized)?;
        let mut buf = Vec::new();
        stage("encode", weightfile::write_encoded(&encoded, &mut buf))?;
        ws.write_bytes("encoded.bin", &buf)?;
        ws.write_bytes(
            "encode_stats.csv",
            encode_stats_csv(&net, &encoded).as_bytes(),
        )?;

        ws.write_bytes("plan.csv", plan_csv(&net, &arch)?.as_bytes())?;

        let summary = simulate_stage(&net, &encoded, &arch, workload, seed, &m.mode, &m.workload)?;
        ws.write_bytes("cycles.csv", cycles_csv(&summary.layers).as_bytes())?;
        ws.write_json("summary.json", &summary)?;

        report_stage(ws, &summary, None, &arch)?;

        let manifest_text = stage("report", toml::to_string_pretty(m))?;
        ws.write_bytes("manifest.toml", manifest_text.as_bytes())?;
        Ok(summary)
    })(&mut ws);

    match result {
        Ok(summary) => {
            println!(
                "{} [{} {}]: {} cycles, {:.1} frame/s, {:.3}x vs dense bit-serial",
                net.name,
                m.mode,
                m.workload,
                summary.total_cycles,
                summary.frames_per_second,
                summary.baseline_total_cycles as f64 / summary.total_cycles as f64
            );
            Ok(summary)
        }
        Err(e) => {
            ws.discard();
            Err(e)
        }
    }
}

/// Oracle equivalence suites; prints one line per suite.
pub fn cmd_check() -> Result<(), CliError> {
    let mut failures = 0u64;
    let mut suite = |name: &str, failed: u64, total: u64| {
        println!(
            "suite {name}: {}/{} ok{}",
            total - failed,
            total,
            if failed == 0 { "" } else { "  FAIL" }
        );
        failures += failed;
    };

    // bit-serial MAC vs native multiply, exhaustive 8-bit
    let mut failed = 0;
    for i in -128i64..=127 {
        for w in -128i64..=127 {
            if bitserial_mac(i, w, 8).0 != i * w {
                failed += 1;
            }
        }
    }
    suite("bitserial_vs_native_8bit", failed, 256 * 256);

    // 10^6 random 16-bit pairs
    let mut failed = 0;
    let mut s = 0x12345678u64;
    let total = 1_000_000u64;
    for _ in 0..total {
        s = s
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        let i = ((s >> 16) as u16 as i16) as i64;
        let w = ((s >> 32) as u16 as i16) as i64;
        if bitserial_mac(i, w, 16).0 != i * w {
            failed += 1;
        }
    }
    suite("bitserial_vs_native_16bit_random", failed, total);

    // sparse MAC vs native multiply on the quantized weight
    let mut failed = 0;
    let mut total = 0;
    for n_max in 1u8..=8 {
        for i in -128i64..=127 {
            for w in -128i32..=127 {
                total += 1;
                let q = quantize_weight(w, n_max as u32);
                let e = bitsim_core::encode::encode_weight(q, Precision::Bits8, n_max).unwrap();
                let (v, c) = sparse_mac(i, &e, n_max);
                if v != i * q as i64 || c != n_max as u32 {
                    failed += 1;
                }
            }
        }
    }
    suite("sparse_mac_quantized_8bit", failed, total);

    // sparse conv vs dense conv on decoded weights, random small layers
    let mut failed = 0;
    for case in 0..200u64 {
        let mut l = bitsim_core::LayerSpec::conv(
            1 + (case as usize % 4),
            1 + (case as usize / 4 % 4),
            4 + (case as usize % 5),
            4 + (case as usize / 2 % 5),
            1 + (case as usize % 3),
            1 + (case as usize / 3 % 3),
        );
        l.n_nzb_max = 2 + (case % 4) as u8;
        let w = gen::gen_weights(&l, case, &WeightDistribution::Uniform);
        let (q, _) = quantize_tensor(&w, l.n_nzb_max as u32);
        let enc = EncodedLayer::from_tensor(&q, l.n_nzb_max).unwrap();
        let ifm = gen::gen_ifm(&[l.n_ic, l.h_i, l.w_i], l.precision, case ^ 0xabc);
        let a = sparse_conv_golden(&ifm, &enc, &l).unwrap();
        let b = conv_golden(&ifm, &q, &l).unwrap();
        if a != b {
            failed += 1;
        }
    }
    suite("sparse_conv_vs_golden_random_layers", failed, 200);

    // numeric range vs brute-force enumeration
    let mut failed = 0;
    let mut total = 0;
    for n in 1u32..=12 {
        for n_max in 0..=n {
            total += 1;
            let brute = (0u64..1 << n).filter(|v| v.count_ones() <= n_max).count() as u64;
            if numeric_range(n_max, n) != brute {
                failed += 1;
            }
        }
    }
    suite("numeric_range_enumeration", failed, total);

    // encode/decode round trip, exhaustive 8-bit
    let mut failed = 0;
    let mut total = 0;
    for n_max in 1u8..=8 {
        for w in -128i32..=127 {
            total += 1;
            let q = quantize_weight(w, n_max as u32);
            let e = bitsim_core::encode::encode_weight(q, Precision::Bits8, n_max).unwrap();
            if bitsim_core::encode::decode_weight(&e) != q {
                failed += 1;
            }
        }
    }
    suite("encode_roundtrip_8bit", failed, total);

    if failures == 0 {
        println!("PASS (6 suites)");
        Ok(())
    } else {
        Err(CliError::Runtime(format!(
            "[check] {failures} oracle mismatches"
        )))
    }
}
