//! Sampling campaigns: seed-reproducible histogram collection, benchmark
//! loops and the self-test suite behind the command-line front end.
//!
//! A campaign partitions its sample count into fixed-size chunks; chunk `i`
//! always uses RNG stream `i` of the campaign seed and the merge happens in
//! chunk order, so the emitted histogram is byte-identical for any thread
//! count.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{count_table, LawKind, WalkExact};
use crate::leap::{GenMode, Generator, ObjectRef};
use crate::rng::{rng_for_chunk, rng_from_seed, RNG_NAME};
use crate::scheme::{SchemeId, SchemeSpec};
use crate::series::ratio;

pub const CHUNK_SIZE: u64 = 8192;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Statistic {
    CoreSize,
    Height,
    Leaves,
    Cherries,
    PathLength,
}

impl Statistic {
    pub fn name(&self) -> &'static str {
        match self {
            Statistic::CoreSize => "core-size",
            Statistic::Height => "height",
            Statistic::Leaves => "leaves",
            Statistic::Cherries => "cherries",
            Statistic::PathLength => "path-length",
        }
    }

    pub fn parse(s: &str) -> Result<Statistic> {
        match s {
            "core-size" => Ok(Statistic::CoreSize),
            "height" => Ok(Statistic::Height),
            "leaves" => Ok(Statistic::Leaves),
            "cherries" => Ok(Statistic::Cherries),
            "path-length" => Ok(Statistic::PathLength),
            other => Err(Error::Parse(format!("unknown statistic {other:?}"))),
        }
    }

    /// Statistic/class validity: cherries only for the binary tree class,
    /// leaves and path length for tree classes, height everywhere, and
    /// core-size everywhere (it is the quantity the exact laws constrain).
    pub fn valid_for(&self, id: SchemeId) -> bool {
        match self {
            Statistic::CoreSize | Statistic::Height => true,
            Statistic::Cherries => id == SchemeId::Phylo,
            Statistic::Leaves | Statistic::PathLength => !id.is_walk(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Campaign {
    pub class: SchemeId,
    pub n: usize,
    pub count: u64,
    pub seed: u64,
    pub mode: GenMode,
    pub stat: Statistic,
    pub threads: usize,
}

pub fn mode_name(mode: GenMode) -> String {
    match mode {
        GenMode::Leap => "leap".into(),
        GenMode::Rejection { r, a } => format!("rej(r={r},a={a})"),
        GenMode::SinglePass => "single-pass".into(),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistogramMeta {
    pub class: String,
    pub n: usize,
    pub samples: u64,
    pub seed: u64,
    pub mode: String,
    pub stat: String,
    pub rng: String,
    pub version: String,
    pub threads: usize,
    pub wall_ms: u64,
}

/// Counted empirical law of an integer statistic.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    pub meta: HistogramMeta,
    pub buckets: BTreeMap<i64, u64>,
}

impl Histogram {
    pub fn total(&self) -> u64 {
        self.buckets.values().sum()
    }

    /// Equality up to execution details (wall time, thread count).
    pub fn same_data(&self, other: &Histogram) -> bool {
        let mut a = self.meta.clone();
        let mut b = other.meta.clone();
        a.wall_ms = 0;
        b.wall_ms = 0;
        a.threads = 0;
        b.threads = 0;
        a == b && self.buckets == other.buckets
    }

    pub fn mean(&self) -> f64 {
        let total = self.total() as f64;
        self.buckets
            .iter()
            .map(|(k, c)| *k as f64 * *c as f64)
            .sum::<f64>()
            / total
    }
}

fn statistic_value(stat: Statistic, obj: &ObjectRef<'_>, core_size: usize) -> i64 {
    match (stat, obj) {
        (Statistic::CoreSize, _) => core_size as i64,
        (Statistic::Height, ObjectRef::Walk(w)) => w.height() as i64,
        (Statistic::Height, ObjectRef::Tree(t)) => t.height() as i64,
        (Statistic::Leaves, ObjectRef::Tree(t)) => t.leaf_count() as i64,
        (Statistic::Cherries, ObjectRef::Tree(t)) => t.cherry_count() as i64,
        (Statistic::PathLength, ObjectRef::Tree(t)) => t.average_path_length().floor() as i64,
        _ => unreachable!("statistic validity is checked before sampling"),
    }
}

/// Run a campaign and collect the statistic histogram.
pub fn run_campaign(c: &Campaign) -> Result<Histogram> {
    if c.count == 0 {
        return Err(Error::InvalidParameter("sample count must be >= 1".into()));
    }
    if !c.stat.valid_for(c.class) {
        return Err(Error::InvalidStatistic {
            stat: c.stat.name().into(),
            class: c.class.name(),
        });
    }
    let spec = SchemeSpec::from_id(c.class)?;
    // fail fast on unsupported sizes / bad modes
    {
        let mut g = Generator::new(&spec)?;
        let mut rng = rng_for_chunk(c.seed, 0);
        g.run_in_place(c.mode, c.n, &mut rng)?;
    }
    let start = Instant::now();
    let n_chunks = c.count.div_ceil(CHUNK_SIZE);
    let next_chunk = AtomicU64::new(0);
    let results: Mutex<Vec<Option<BTreeMap<i64, u64>>>> =
        Mutex::new(vec![None; n_chunks as usize]);
    let threads = c.threads.max(1).min(n_chunks as usize);
    let errors: Mutex<Vec<Error>> = Mutex::new(Vec::new());
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| {
                let mut gen = match Generator::new(&spec) {
                    Ok(g) => g,
                    Err(e) => {
                        errors.lock().unwrap().push(e);
                        return;
                    }
                };
                loop {
                    let chunk = next_chunk.fetch_add(1, Ordering::Relaxed);
                    if chunk >= n_chunks {
                        return;
                    }
                    let lo = chunk * CHUNK_SIZE;
                    let hi = (lo + CHUNK_SIZE).min(c.count);
                    let mut rng = rng_for_chunk(c.seed, chunk);
                    let mut local: BTreeMap<i64, u64> = BTreeMap::new();
                    for _ in lo..hi {
                        match gen.run_in_place(c.mode, c.n, &mut rng) {
                            Ok(stats) => {
                                let v = statistic_value(c.stat, &gen.object(), stats.core_size);
                                *local.entry(v).or_default() += 1;
                            }
                            Err(e) => {
                                errors.lock().unwrap().push(e);
                                return;
                            }
                        }
                    }
                    results.lock().unwrap()[chunk as usize] = Some(local);
                }
            });
        }
    });
    if let Some(e) = errors.into_inner().unwrap().into_iter().next() {
        return Err(e);
    }
    let mut buckets: BTreeMap<i64, u64> = BTreeMap::new();
    for chunk in results.into_inner().unwrap() {
        let chunk = chunk.expect("all chunks completed");
        for (k, v) in chunk {
            *buckets.entry(k).or_default() += v;
        }
    }
    Ok(Histogram {
        meta: HistogramMeta {
            class: c.class.name(),
            n: c.n,
            samples: c.count,
            seed: c.seed,
            mode: mode_name(c.mode),
            stat: c.stat.name().into(),
            rng: RNG_NAME.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            threads: c.threads,
            wall_ms: start.elapsed().as_millis() as u64,
        },
        buckets,
    })
}

// ---------------------------------------------------------------------------
// Emission and parsing.
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EmitFormat {
    Csv,
    Json,
}

impl EmitFormat {
    pub fn parse(s: &str) -> Result<EmitFormat> {
        match s {
            "csv" => Ok(EmitFormat::Csv),
            "json" => Ok(EmitFormat::Json),
            other => Err(Error::Parse(format!("unknown format {other:?}"))),
        }
    }
}

pub fn emit_string(h: &Histogram, format: EmitFormat) -> String {
    match format {
        EmitFormat::Csv => {
            let mut out = String::new();
            let m = &h.meta;
            out.push_str(&format!("# class={}\n", m.class));
            out.push_str(&format!("# n={}\n", m.n));
            out.push_str(&format!("# samples={}\n", m.samples));
            out.push_str(&format!("# seed={}\n", m.seed));
            out.push_str(&format!("# mode={}\n", m.mode));
            out.push_str(&format!("# stat={}\n", m.stat));
            out.push_str(&format!("# rng={}\n", m.rng));
            out.push_str(&format!("# version={}\n", m.version));
            out.push_str(&format!("# threads={}\n", m.threads));
            out.push_str(&format!("# wall_ms={}\n", m.wall_ms));
            out.push_str("bucket,count\n");
            for (k, v) in &h.buckets {
                out.push_str(&format!("{k},{v}\n"));
            }
            out
        }
        EmitFormat::Json => {
            let mut s = serde_json::to_string_pretty(h).expect("histogram serializes");
            s.push('\n');
            s
        }
    }
}

pub fn parse_histogram(text: &str, format: EmitFormat) -> Result<Histogram> {
    match format {
        EmitFormat::Json => {
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("bad histogram json: {e}")))
        }
        EmitFormat::Csv => {
            let mut meta: BTreeMap<String, String> = BTreeMap::new();
            let mut buckets = BTreeMap::new();
            let mut in_rows = false;
            for line in text.lines() {
                if let Some(rest) = line.strip_prefix("# ") {
                    let (k, v) = rest
                        .split_once('=')
                        .ok_or_else(|| Error::Parse(format!("bad metadata line {line:?}")))?;
                    meta.insert(k.to_string(), v.to_string());
                } else if line == "bucket,count" {
                    in_rows = true;
                } else if in_rows && !line.is_empty() {
                    let (k, v) = line
                        .split_once(',')
                        .ok_or_else(|| Error::Parse(format!("bad bucket row {line:?}")))?;
                    let k: i64 = k
                        .parse()
                        .map_err(|_| Error::Parse(format!("bad bucket {k:?}")))?;
                    let v: u64 = v
                        .parse()
                        .map_err(|_| Error::Parse(format!("bad count {v:?}")))?;
                    buckets.insert(k, v);
                }
            }
            let get = |key: &str| -> Result<String> {
                meta.get(key)
                    .cloned()
                    .ok_or_else(|| Error::Parse(format!("missing metadata {key}")))
            };
            let num = |key: &str| -> Result<u64> {
                get(key)?
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad numeric metadata {key}")))
            };
            Ok(Histogram {
                meta: HistogramMeta {
                    class: get("class")?,
                    n: num("n")? as usize,
                    samples: num("samples")?,
                    seed: num("seed")?,
                    mode: get("mode")?,
                    stat: get("stat")?,
                    rng: get("rng")?,
                    version: get("version")?,
                    threads: num("threads")? as usize,
                    wall_ms: num("wall_ms")?,
                },
                buckets,
            })
        }
    }
}

pub fn emit_to_path(h: &Histogram, format: EmitFormat, path: &str) -> Result<()> {
    let text = emit_string(h, format);
    write_output(path, &text)
}

pub fn write_output(path: &str, text: &str) -> Result<()> {
    if path == "-" {
        print!("{text}");
        return Ok(());
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::Io {
        path: path.to_string(),
        source: e,
    })?;
    f.write_all(text.as_bytes()).map_err(|e| Error::Io {
        path: path.to_string(),
        source: e,
    })
}

// ---------------------------------------------------------------------------
// Benchmarks.
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug)]
pub struct BenchRow {
    pub n: usize,
    pub mean_ms: f64,
    pub mean_trials: f64,
    pub mean_b_draws: f64,
}

/// Timing table for the linearity checks: mean wall time, trials and
/// component draws per generated object.
pub fn bench(class: SchemeId, sizes: &[usize], samples: u64, seed: u64) -> Result<Vec<BenchRow>> {
    let spec = SchemeSpec::from_id(class)?;
    let mut rows = Vec::new();
    let mut gen = Generator::new(&spec)?;
    let mut rng = rng_from_seed(seed);
    for (i, &n) in sizes.iter().enumerate() {
        if i > 0 && sizes[i] < sizes[i - 1] {
            return Err(Error::InvalidParameter("sizes must be ascending".into()));
        }
        let mut trials = 0u64;
        let mut draws = 0u64;
        let start = Instant::now();
        for _ in 0..samples {
            let stats = gen.run_in_place(GenMode::Leap, n, &mut rng)?;
            trials += stats.trials;
            draws += stats.b_draws;
        }
        let elapsed = start.elapsed().as_secs_f64() * 1e3;
        rows.push(BenchRow {
            n,
            mean_ms: elapsed / samples as f64,
            mean_trials: trials as f64 / samples as f64,
            mean_b_draws: draws as f64 / samples as f64,
        });
    }
    Ok(rows)
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("n,mean_wall_ms,mean_trials,mean_b_draws\n");
    for r in rows {
        out.push_str(&format!(
            "{},{:.6},{:.4},{:.2}\n",
            r.n, r.mean_ms, r.mean_trials, r.mean_b_draws
        ));
    }
    out
}

// ---------------------------------------------------------------------------
// Chi-square helper and the self-test suite.
// ---------------------------------------------------------------------------

/// Upper-tail p-value of a Pearson chi-square test of `counts` against
/// `probs` (cells with expectation below 5 are pooled into their neighbor).
pub fn chi_square_p(counts: &[u64], probs: &[f64]) -> f64 {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    assert_eq!(counts.len(), probs.len());
    let total: u64 = counts.iter().sum();
    let mut cells: Vec<(f64, f64)> = Vec::new(); // (observed, expected)
    let mut acc_obs = 0.0;
    let mut acc_exp = 0.0;
    for (c, p) in counts.iter().zip(probs.iter()) {
        acc_obs += *c as f64;
        acc_exp += p * total as f64;
        if acc_exp >= 5.0 {
            cells.push((acc_obs, acc_exp));
            acc_obs = 0.0;
            acc_exp = 0.0;
        }
    }
    if acc_exp > 0.0 {
        if let Some(last) = cells.last_mut() {
            last.0 += acc_obs;
            last.1 += acc_exp;
        } else {
            cells.push((acc_obs, acc_exp));
        }
    }
    if cells.len() < 2 {
        return 1.0;
    }
    let chi2: f64 = cells.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    let df = (cells.len() - 1) as f64;
    let dist = ChiSquared::new(df).expect("df >= 1");
    1.0 - dist.cdf(chi2)
}

#[derive(Clone, Debug)]
pub struct SelfTestItem {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default)]
pub struct SelfTestReport {
    pub items: Vec<SelfTestItem>,
}

impl SelfTestReport {
    pub fn passed(&self) -> bool {
        self.items.iter().all(|i| i.pass)
    }

    fn push(&mut self, name: &str, pass: bool, detail: String) {
        self.items.push(SelfTestItem {
            name: name.into(),
            pass,
            detail,
        });
    }
}

/// The release-gate invariant suite: exact identities, sensitivity of the
/// q identity to a corrupted singularity, small-size sampler uniformity,
/// component moment checks and campaign determinism.
pub fn selftest(seed: u64) -> SelfTestReport {
    use num_rational::BigRational;
    use num_traits::{One, Signed, ToPrimitive, Zero};

    let mut report = SelfTestReport::default();
    let spec = SchemeSpec::motzkin();

    // exact identities on a moderate window
    {
        let n_max = 200usize;
        match WalkExact::new(&spec, n_max) {
            Ok(we) => {
                let mut ok = true;
                let mut detail = String::new();
                let counts = crate::scheme::motzkin_numbers(n_max);
                for n in 1..=n_max {
                    let t = count_table(SchemeId::Motzkin, n).unwrap();
                    if t.c_n != counts[n] {
                        ok = false;
                        detail = format!("row sum mismatch at n={n}");
                        break;
                    }
                    let law = we.core_law(n, &LawKind::Leap).unwrap();
                    if law.total() != BigRational::one() {
                        ok = false;
                        detail = format!("sum pi d != 1 at n={n}");
                        break;
                    }
                }
                report.push(
                    "exact-identities",
                    ok,
                    if ok {
                        format!("row sums and distortion normalization exact for n <= {n_max}")
                    } else {
                        detail
                    },
                );

                // corrupting rho must break the q identity
                let rho_bad = &spec.rho_rational * ratio(1001, 1000);
                let n = 60usize;
                let t = count_table(SchemeId::Motzkin, n).unwrap();
                let mut q_bad = BigRational::zero();
                let mut rho_pow = BigRational::one();
                for _ in 0..n {
                    rho_pow *= &rho_bad;
                }
                let b_bad = &rho_bad * &rho_bad
                    / ((BigRational::one() - &rho_bad) * (BigRational::one() - &rho_bad));
                let d_bad = BigRational::one() / (BigRational::one() - &rho_bad);
                for (k, c) in t.c_nk.iter().enumerate() {
                    let mut bk = BigRational::one();
                    for _ in 0..k {
                        bk *= &b_bad;
                    }
                    q_bad += BigRational::from_integer(c.clone()) * &rho_pow / (&d_bad * bk)
                        / BigRational::from_integer(t.a_k[k].clone());
                }
                let diff = (&q_bad - we.q_n(n)).abs().to_f64().unwrap_or(1.0);
                report.push(
                    "q-sensitivity",
                    diff > 1e-6,
                    format!("perturbing rho by 1e-3 moves the q identity by {diff:.3e}"),
                );
            }
            Err(e) => report.push("exact-identities", false, e.to_string()),
        }
    }

    // small-size sampler uniformity (chi-square)
    {
        let mut rng = rng_from_seed(seed ^ 0x5eed);
        let draws = 40_000usize;
        let mut counts: BTreeMap<String, u64> = BTreeMap::new();
        for _ in 0..draws {
            let w = crate::core_samplers::dyck_uniform(3, &mut rng);
            *counts.entry(w.to_step_string()).or_default() += 1;
        }
        let obs: Vec<u64> = counts.values().copied().collect();
        let p = chi_square_p(&obs, &vec![0.2; obs.len()]);
        report.push(
            "dyck-uniformity",
            counts.len() == 5 && p > 1e-3,
            format!("chi-square p = {p:.4} over {} walks", counts.len()),
        );

        // rooted labeled trees on 3 vertices: star shape 1/3, path 2/3
        let mut star = 0u64;
        for _ in 0..draws {
            let t = crate::core_samplers::cayley_uniform(3, &mut rng);
            if t.child_count(t.root()) == 2 {
                star += 1;
            }
        }
        let p = chi_square_p(&[star, draws as u64 - star], &[1.0 / 3.0, 2.0 / 3.0]);
        report.push("cayley-shape-law", p > 1e-3, format!("chi-square p = {p:.4}"));
    }

    // component moment checks at the singularity
    {
        let mut rng = rng_from_seed(seed ^ 0xb017);
        let draws = 50_000u64;
        for name in ["motzkin", "polya"] {
            let spec = SchemeSpec::from_name(name).unwrap();
            let comp = crate::boltzmann::ComponentSampler::new(&spec).unwrap();
            let mut buf = crate::objects::Tree::new();
            let mut total = 0.0f64;
            let mut total_sq = 0.0f64;
            for _ in 0..draws {
                buf.clear();
                let c = comp.draw_b(&mut buf, &mut rng);
                total += c.size as f64;
                total_sq += (c.size * c.size) as f64;
            }
            let mean = total / draws as f64;
            let var = total_sq / draws as f64 - mean * mean;
            let se = (var / draws as f64).sqrt();
            let dev = (mean - spec.mu).abs();
            report.push(
                &format!("component-mean-{name}"),
                dev < 4.0 * se + 1e-3,
                format!("mean {mean:.4} vs mu {:.4} (4se = {:.4})", spec.mu, 4.0 * se),
            );
        }
    }

    // campaign determinism
    {
        let campaign = Campaign {
            class: SchemeId::Motzkin,
            n: 50,
            count: 2_000,
            seed,
            mode: GenMode::Leap,
            stat: Statistic::CoreSize,
            threads: 2,
        };
        let h1 = run_campaign(&campaign);
        let h2 = run_campaign(&Campaign {
            threads: 1,
            ..campaign.clone()
        });
        match (h1, h2) {
            (Ok(a), Ok(b)) => {
                let same = a.buckets == b.buckets;
                report.push(
                    "campaign-determinism",
                    same,
                    "histograms agree across thread counts".into(),
                );
            }
            _ => report.push("campaign-determinism", false, "campaign failed".into()),
        }
    }

    report
}
