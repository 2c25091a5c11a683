use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::path::{Path, PathBuf};

use lmgen_core::genome::{apply_template, load_genes, sample_genes, save_genes};
use lmgen_core::io::write_atomic;
use lmgen_core::phylo::{
    build_oracle, distance_matrix, oracle_deviation_scan, rms_contrast, similarity_matrix,
    variability_scan, DistanceMatrix, LabeledMatrix, ScanSubject, SimilarityMatrix,
};
use lmgen_core::population::{
    collect_profile, connect, load_profile, save_profile, CollectOptions, CompletionCache,
    ModelSpec, Prober, Provider, RetryPolicy, Roster,
};
use lmgen_core::predict::{lofo_evaluate, BenchmarkTable, Correlation, LofoOptions};
use lmgen_core::synthlab::{build_family, rf_distance, synthetic_genes, LineageSpec};
use lmgen_core::tree::{nj_tree, render_svg, to_newick, FamilyColors, Layout, PhyloTree};

use crate::config::RunConfig;
use crate::fail::{usage, Failure};

fn ensure_dir(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Failure::io(format!("creating {}: {e}", dir.display())).into())
}

/// Model ids may contain `/` or `:`; file names get a tame version.
fn file_stem(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_alphanumeric() || matches!(c, '-' | '_' | '.') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub fn profile_path(out_dir: &Path, id: &str) -> PathBuf {
    out_dir.join(format!("{}.profile.jsonl", file_stem(id)))
}

/// Held for the life of a command; released when dropped.
struct CacheLock(#[allow(dead_code)] File);

fn lock_cache(dir: &Path) -> anyhow::Result<CacheLock> {
    ensure_dir(dir)?;
    let path = dir.join(".lock");
    let file = File::create(&path).map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
    match file.try_lock() {
        Ok(()) => Ok(CacheLock(file)),
        Err(std::fs::TryLockError::WouldBlock) => Err(Failure::io(format!(
            "cache directory {} is in use by another lmgen process",
            dir.display()
        ))
        .into()),
        Err(std::fs::TryLockError::Error(e)) => {
            Err(Failure::io(format!("locking {}: {e}", path.display())).into())
        }
    }
}

pub fn genes(
    corpus: &Path,
    count: usize,
    seed: u64,
    min_cut: usize,
    max_cut: usize,
    template: Option<&[String]>,
    out: &Path,
) -> anyhow::Result<()> {
    if count == 0 {
        return Err(usage("--count must be at least 1").into());
    }
    let text = lmgen_core::io::read_to_string(corpus)?;
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    let mut set = sample_genes(&lines, count, seed, min_cut, max_cut)?;
    set.name = corpus
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    if let Some([prefix, suffix]) = template {
        set = apply_template(&set, prefix, suffix)?;
    }
    save_genes(&set, out)?;

    let lens: Vec<usize> = set
        .genes
        .iter()
        .map(|g| g.context.chars().count())
        .collect();
    let mut hist: BTreeMap<usize, usize> = BTreeMap::new();
    for &l in &lens {
        *hist.entry(l / 20 * 20).or_default() += 1;
    }
    let hist: Vec<String> = hist
        .iter()
        .map(|(lo, n)| format!("{lo}-{}:{n}", lo + 19))
        .collect();
    println!(
        "command=genes genes={} min_chars={} max_chars={} duplicates={} out={}",
        set.len(),
        lens.iter().min().unwrap_or(&0),
        lens.iter().max().unwrap_or(&0),
        set.duplicate_context_count(),
        out.display()
    );
    println!("length_histogram={}", hist.join(","));
    Ok(())
}

fn load_roster(cfg: &RunConfig) -> anyhow::Result<(Roster, PathBuf)> {
    let roster = Roster::load(&cfg.roster)?;
    let base = cfg.roster.parent().unwrap_or(Path::new(".")).to_path_buf();
    Ok((roster, base))
}

fn select<'a>(roster: &'a Roster, ids: &[String]) -> anyhow::Result<Vec<&'a ModelSpec>> {
    if ids.is_empty() {
        return Ok(roster.models.iter().collect());
    }
    ids.iter()
        .map(|id| {
            roster
                .get(id)
                .ok_or_else(|| usage(format!("model {id} is not in the roster")).into())
        })
        .collect()
}

pub fn probe(cfg: &RunConfig, ids: &[String]) -> anyhow::Result<()> {
    let (roster, base) = load_roster(cfg)?;
    let genes = load_genes(&cfg.genes)?;
    let chosen = select(&roster, ids)?;
    let total = chosen.len();
    ensure_dir(&cfg.out_dir)?;
    let _lock = cfg.cache_dir.as_deref().map(lock_cache).transpose()?;

    let mut failed = Vec::new();
    for spec in chosen {
        let mut spec = spec.clone();
        cfg.apply_sampling(&mut spec);
        match probe_model(cfg, &spec, &base, &genes) {
            Ok(line) => println!("{line}"),
            Err(e) => {
                println!(
                    "model={} status=failed error={:?}",
                    spec.id,
                    format!("{e:#}")
                );
                failed.push(spec.id.clone());
            }
        }
    }
    println!(
        "command=probe models={} failed={} genes={} probes_per_gene={}",
        total,
        failed.len(),
        genes.len(),
        cfg.probes
    );
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::remote(format!("probing failed for {}", failed.join(", "))).into())
    }
}

fn probe_model(
    cfg: &RunConfig,
    spec: &ModelSpec,
    base: &Path,
    genes: &lmgen_core::GeneSet,
) -> anyhow::Result<String> {
    let prober = connect(spec, base, RetryPolicy::default())?;
    let cache = cfg
        .cache_dir
        .as_ref()
        .map(|d| d.join(format!("{}.jsonl", file_stem(&spec.id))));
    let wanted = genes.len() as u64 * cfg.probes;
    if spec.provider == Provider::Http {
        let cached = match &cache {
            Some(p) => CompletionCache::read(p)?.len() as u64,
            None => 0,
        };
        if cached < wanted {
            // One request up front so a dead endpoint fails fast instead of
            // retrying every probe.
            lmgen_core::population::probe_once(prober.as_ref(), &genes.genes[0])
                .map_err(|e| Failure::remote(format!("{}: endpoint check failed: {e}", spec.id)))?;
        }
    }
    let mut opts = CollectOptions::new(cfg.probes);
    opts.parallelism = cfg.parallelism;
    opts.cache = cache;
    let (profile, stats) = collect_profile(
        &spec.id,
        prober.as_ref(),
        genes,
        spec.sampling.allele_chars,
        &opts,
    )?;
    if stats.failures == wanted {
        return Err(Failure::remote(format!("{}: all {wanted} probes failed", spec.id)).into());
    }
    let path = profile_path(&cfg.out_dir, &spec.id);
    save_profile(&profile, &path)?;
    Ok(format!(
        "model={} status={} probes={} cache_hits={} failures={} profile={}",
        spec.id,
        if profile.degraded { "degraded" } else { "ok" },
        stats.issued,
        stats.cache_hits,
        stats.failures,
        path.display()
    ))
}

fn load_profiles(paths: &[PathBuf]) -> anyhow::Result<Vec<lmgen_core::PopulationProfile>> {
    paths
        .iter()
        .map(|p| load_profile(p).map_err(Into::into))
        .collect()
}

pub fn matrix(profiles: &[PathBuf], out_dir: &Path) -> anyhow::Result<()> {
    let profiles = load_profiles(profiles)?;
    let s = similarity_matrix(&profiles)?;
    let d = distance_matrix(&s);
    ensure_dir(out_dir)?;
    let (sp, dp) = (out_dir.join("similarity.tsv"), out_dir.join("distance.tsv"));
    s.0.save(&sp)?;
    d.matrix.save(&dp)?;
    let infinite = d.matrix.values.iter().filter(|v| v.is_infinite()).count() / 2;
    println!(
        "command=matrix models={} genes={} infinite_pairs={} finite_cap={} rms_contrast={:.6} similarity={} distance={}",
        s.n(),
        profiles[0].gene_count(),
        infinite,
        d.finite_cap,
        rms_contrast(&s).unwrap_or(f64::NAN),
        sp.display(),
        dp.display()
    );
    Ok(())
}

fn write_tree(
    tree: &PhyloTree,
    colors: &FamilyColors,
    layout: Layout,
    prefix: &Path,
) -> anyhow::Result<(PathBuf, PathBuf)> {
    let nwk = prefix.with_extension("nwk");
    let svg = prefix.with_extension("svg");
    if let Some(dir) = prefix.parent().filter(|d| !d.as_os_str().is_empty()) {
        ensure_dir(dir)?;
    }
    write_atomic(&nwk, format!("{}\n", to_newick(tree)).as_bytes())?;
    write_atomic(&svg, render_svg(tree, colors, layout).as_bytes())?;
    Ok((nwk, svg))
}

pub fn tree(
    distance: &Path,
    colors: Option<&Path>,
    layout: Layout,
    out: &Path,
) -> anyhow::Result<()> {
    let d = DistanceMatrix::from_matrix(LabeledMatrix::load(distance)?);
    let colors: FamilyColors = match colors {
        Some(p) => {
            let text = lmgen_core::io::read_to_string(p)?;
            serde_json::from_str(&text).map_err(|e| Failure::io(format!("{}: {e}", p.display())))?
        }
        None => FamilyColors::default(),
    };
    let t = nj_tree(&d)?;
    let (nwk, svg) = write_tree(&t, &colors, layout, out)?;
    println!(
        "command=tree leaves={} capped_infinite={} newick={} svg={}",
        t.leaf_count(),
        d.has_infinite(),
        nwk.display(),
        svg.display()
    );
    Ok(())
}

pub fn contrast(profiles: &[PathBuf], lengths: &[usize], out: Option<&Path>) -> anyhow::Result<()> {
    let profiles = load_profiles(profiles)?;
    let width = profiles.iter().map(|p| p.allele_chars).min().unwrap_or(0);
    let lengths: Vec<usize> = if lengths.is_empty() {
        (1..=width).collect()
    } else {
        lengths.to_vec()
    };
    if let Some(&k) = lengths.iter().find(|&&k| k == 0 || k > width) {
        return Err(usage(format!(
            "allele length {k} unavailable: profiles were collected with {width}-character alleles"
        ))
        .into());
    }
    let mut table = String::from("allele_chars\trms_contrast\n");
    let mut best = (0, f64::NEG_INFINITY);
    for &k in &lengths {
        let cut = profiles
            .iter()
            .map(|p| p.truncated(k))
            .collect::<Result<Vec<_>, _>>()?;
        let c = rms_contrast(&similarity_matrix(&cut)?)?;
        println!("allele_chars={k} rms_contrast={c:.6}");
        table.push_str(&format!("{k}\t{c}\n"));
        if c > best.1 {
            best = (k, c);
        }
    }
    if let Some(p) = out {
        write_atomic(p, table.as_bytes())?;
    }
    println!(
        "command=contrast models={} best_allele_chars={} best_rms_contrast={:.6}",
        profiles.len(),
        best.0,
        best.1
    );
    Ok(())
}

fn parse_cell(s: &str) -> anyhow::Result<(usize, u64)> {
    let (g, n) = s
        .trim()
        .split_once(['x', 'X'])
        .ok_or_else(|| usage(format!("grid cell {s:?} is not GxN")))?;
    let g: usize = g
        .parse()
        .map_err(|_| usage(format!("grid cell {s:?}: bad gene count")))?;
    let n: u64 = n
        .parse()
        .map_err(|_| usage(format!("grid cell {s:?}: bad probe count")))?;
    Ok((g, n))
}

pub fn hyperscan(
    cfg: &RunConfig,
    grid: &[String],
    replicates: usize,
    oracle: Option<&str>,
    out: &Path,
) -> anyhow::Result<()> {
    let (roster, base) = load_roster(cfg)?;
    let pool = load_genes(&cfg.genes)?;
    let grid = grid
        .iter()
        .map(|c| parse_cell(c))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let probers: Vec<(ModelSpec, Box<dyn Prober>)> = roster
        .models
        .iter()
        .map(|spec| {
            let mut spec = spec.clone();
            cfg.apply_sampling(&mut spec);
            let p = connect(&spec, &base, RetryPolicy::default())?;
            Ok((spec, p))
        })
        .collect::<anyhow::Result<_>>()?;
    let subjects: Vec<ScanSubject<'_>> = probers
        .iter()
        .map(|(spec, p)| ScanSubject {
            id: spec.id.clone(),
            prober: p.as_ref(),
            allele_chars: spec.sampling.allele_chars,
        })
        .collect();
    let report = match oracle {
        None => variability_scan(&subjects, &pool, &grid, replicates, cfg.seed)?,
        Some(o) => {
            let (og, on) = parse_cell(o)?;
            if og >= pool.len() {
                return Err(usage(format!(
                    "oracle needs {og} genes plus scan genes; the pool has {}",
                    pool.len()
                ))
                .into());
            }
            let idx: Vec<usize> = (0..pool.len()).collect();
            let oracle_genes = pool.subset(format!("{}-oracle", pool.name), &idx[..og]);
            let rest = pool.subset(format!("{}-scan", pool.name), &idx[og..]);
            let oracle = build_oracle(&subjects, &oracle_genes, on, cfg.seed)?;
            oracle_deviation_scan(&subjects, &rest, &grid, &oracle, replicates, cfg.seed)?
        }
    };
    write_atomic(out, report.to_jsonl().as_bytes())?;
    for c in &report.cells {
        println!(
            "genes={} probes={} score={:.6} std_error={:.6}",
            c.genes, c.probes, c.score, c.std_error
        );
    }
    println!(
        "command=hyperscan kind={} cells={} replicates={} out={}",
        serde_json::to_value(report.kind)?.as_str().unwrap_or(""),
        report.cells.len(),
        replicates,
        out.display()
    );
    Ok(())
}

fn fmt_r(c: &Correlation) -> String {
    match c {
        Correlation::Defined(r) => format!("{r:.6}"),
        Correlation::Undefined(_) => "undefined".into(),
    }
}

pub fn predict(
    similarity: &Path,
    benchmarks: &Path,
    benchmark: &str,
    opts: &LofoOptions,
    out: Option<&Path>,
) -> anyhow::Result<()> {
    let s = SimilarityMatrix::try_from_matrix(LabeledMatrix::load(similarity)?)?;
    let table = BenchmarkTable::load(benchmarks)?;
    if !table.benchmarks.iter().any(|b| b == benchmark) {
        return Err(usage(format!(
            "benchmark {benchmark} is not a column of {} (have: {})",
            benchmarks.display(),
            table.benchmarks.join(", ")
        ))
        .into());
    }
    let report = lofo_evaluate(&s, &table, benchmark, opts)?;
    if let Some(p) = out {
        let text = serde_json::to_string_pretty(&report)?;
        write_atomic(p, format!("{text}\n").as_bytes())?;
    }
    for (fam, r) in &report.per_family {
        println!("family={fam} r={}", fmt_r(r));
    }
    let status = match report.overall {
        Correlation::Defined(_) => "ok",
        Correlation::Undefined(_) => "undefined_correlation",
    };
    println!(
        "command=predict benchmark={benchmark} models={} overall_r={} mean_family_r={} degraded_fits={} status={status}",
        report.predictions.len(),
        fmt_r(&report.overall),
        report.mean_family_r().map_or("undefined".into(), |r| format!("{r:.6}")),
        report.degraded_fits.len()
    );
    Ok(())
}

pub fn synth(
    spec_path: &Path,
    seed: u64,
    genes: Option<usize>,
    probes: u64,
    allele_chars: usize,
    out: &Path,
) -> anyhow::Result<()> {
    let spec = LineageSpec::load(spec_path)?;
    let g = genes.unwrap_or(spec.gene_count.min(128));
    if g == 0 || g > spec.gene_count {
        return Err(usage(format!("--genes must be in 1..={}", spec.gene_count)).into());
    }
    let roster = build_family(&spec, seed)?;
    let models_dir = out.join("models");
    let profiles_dir = out.join("profiles");
    ensure_dir(&models_dir)?;
    ensure_dir(&profiles_dir)?;

    let mut specs = Vec::new();
    for m in &roster.models {
        let rel = format!("models/{}.json", file_stem(&m.id));
        m.save(&out.join(&rel))?;
        let mut ms = ModelSpec {
            id: m.id.clone(),
            family: m.family.clone(),
            provider: Provider::Synthetic,
            endpoint: Some(rel),
            auth_env: None,
            remote_model: None,
            sampling: Default::default(),
        };
        ms.sampling.allele_chars = allele_chars;
        specs.push(ms);
    }
    Roster::new(specs)?.save(&out.join("roster.json"))?;
    write_atomic(
        &out.join("truth.nwk"),
        format!("{}\n", to_newick(&roster.truth)).as_bytes(),
    )?;

    let set = synthetic_genes(0, g);
    save_genes(&set, &out.join("genes.jsonl"))?;
    let opts = CollectOptions::new(probes);
    let mut profiles = Vec::new();
    for m in &roster.models {
        let (p, _) = collect_profile(&m.id, m, &set, allele_chars, &opts)?;
        save_profile(&p, &profile_path(&profiles_dir, &m.id))?;
        profiles.push(p);
    }
    let s = similarity_matrix(&profiles)?;
    let d = distance_matrix(&s);
    s.0.save(&out.join("similarity.tsv"))?;
    d.matrix.save(&out.join("distance.tsv"))?;
    let t = nj_tree(&d)?;
    let colors = FamilyColors {
        leaf_family: roster
            .models
            .iter()
            .map(|m| (m.id.clone(), m.family.clone()))
            .collect(),
        colors: BTreeMap::new(),
    };
    let (nwk, _) = write_tree(&t, &colors, Layout::Radial, &out.join("tree"))?;
    let rf = rf_distance(&t, &roster.truth)?;
    let families: BTreeSet<&str> = roster.models.iter().map(|m| m.family.as_str()).collect();
    println!(
        "command=synth models={} families={} genes={g} probes={probes} truth={} tree={}",
        roster.models.len(),
        families.len(),
        out.join("truth.nwk").display(),
        nwk.display()
    );
    println!("rf_distance={rf}");
    Ok(())
}
