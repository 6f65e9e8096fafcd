use clap::{Args, Parser, Subcommand};

use leapgen::campaign::{
    bench, bench_csv, emit_to_path, mode_name, run_campaign, selftest, write_output, Campaign,
    EmitFormat, Statistic,
};
use leapgen::error::Error;
use leapgen::exact::{dyck_height_table, tv_height, LawKind, WalkExact};
use leapgen::leap::{ComposedObject, GenMode, Generator};
use leapgen::rng::rng_from_seed;
use leapgen::scheme::{SchemeId, SchemeSpec};

#[derive(Parser)]
#[command(
    name = "leapgen",
    version,
    about = "Exact-size random generation for supercritical composition schemes"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct ModeArgs {
    /// Generator mode
    #[arg(long, default_value = "leap", value_parser = ["leap", "rej", "single-pass"])]
    mode: String,
    /// Acceleration order r for the rejection mode (0..=3)
    #[arg(long, default_value_t = 1)]
    accel_order: u8,
    /// Target acceptance a in (0,1) for the rejection mode
    #[arg(long, default_value_t = 0.5)]
    accel_a: f64,
}

impl ModeArgs {
    fn gen_mode(&self) -> GenMode {
        match self.mode.as_str() {
            "leap" => GenMode::Leap,
            "single-pass" => GenMode::SinglePass,
            "rej" => GenMode::Rejection {
                r: self.accel_order,
                a: self.accel_a,
            },
            _ => unreachable!("clap validates the mode"),
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Draw one object and print it (walks as U/E/D steps, trees as nested
    /// parentheses)
    Sample {
        #[arg(long)]
        class: String,
        #[arg(long)]
        size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        mode: ModeArgs,
        #[arg(long, default_value = "-")]
        out: String,
    },
    /// Run a sampling campaign and emit the statistic histogram
    Hist {
        #[arg(long)]
        class: String,
        #[arg(long)]
        size: usize,
        #[arg(long, default_value_t = 10_000)]
        count: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        mode: ModeArgs,
        #[arg(long, default_value = "height")]
        stat: String,
        #[arg(long, default_value = "csv", value_parser = ["csv", "json"])]
        format: String,
        #[arg(long, default_value = "-")]
        out: String,
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
    /// Total variation distance between the uniform law and the generator
    /// law over core sizes (exact rationals or the float path)
    Tv {
        #[arg(long)]
        class: String,
        /// Sizes: a single value, a comma list, or lo:hi[:step]
        #[arg(long)]
        sizes: String,
        #[command(flatten)]
        mode: ModeArgs,
        /// Arithmetic path: exact rationals, floats, or size-based choice
        #[arg(long, default_value = "auto", value_parser = ["auto", "rational", "float"])]
        path: String,
        #[arg(long, default_value = "-")]
        out: String,
    },
    /// Exact total variation distance between the uniform and generator
    /// height laws (Motzkin walks)
    TvHeight {
        #[arg(long)]
        sizes: String,
        #[command(flatten)]
        mode: ModeArgs,
        #[arg(long, default_value = "-")]
        out: String,
    },
    /// Dump counting-series coefficients as exact rationals (JSON)
    Gf {
        #[arg(long)]
        class: String,
        /// Truncation order
        #[arg(long, default_value_t = 30)]
        size: usize,
        /// Which series: composed counts, component class, or success
        /// probabilities
        #[arg(long, default_value = "c", value_parser = ["c", "b", "q"])]
        series: String,
        #[arg(long, default_value = "-")]
        out: String,
    },
    /// Mean wall time / trials / component draws per object over a size list
    Bench {
        #[arg(long)]
        class: String,
        #[arg(long)]
        sizes: String,
        #[arg(long, default_value_t = 20)]
        count: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "-")]
        out: String,
    },
    /// Run the invariant suite and exit nonzero on any failure
    Selftest {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn parse_sizes(s: &str) -> Result<Vec<usize>, Error> {
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() < 2 || parts.len() > 3 {
            return Err(Error::Parse(format!("bad size range {s:?}")));
        }
        let lo: usize = parts[0]
            .parse()
            .map_err(|_| Error::Parse(format!("bad size {:?}", parts[0])))?;
        let hi: usize = parts[1]
            .parse()
            .map_err(|_| Error::Parse(format!("bad size {:?}", parts[1])))?;
        let step: usize = if parts.len() == 3 {
            parts[2]
                .parse()
                .map_err(|_| Error::Parse(format!("bad step {:?}", parts[2])))?
        } else {
            1
        };
        if step == 0 || hi < lo {
            return Err(Error::Parse(format!("bad size range {s:?}")));
        }
        Ok((lo..=hi).step_by(step).collect())
    } else {
        s.split(',')
            .map(|p| {
                p.trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad size {p:?}")))
            })
            .collect()
    }
}

fn law_kind(mode: &ModeArgs) -> Result<LawKind, Error> {
    match mode.mode.as_str() {
        "leap" => Ok(LawKind::Leap),
        "rej" => {
            let a = leapgen::exact::rational_from_f64(mode.accel_a);
            Ok(LawKind::Rej {
                r: mode.accel_order,
                a,
            })
        }
        other => Err(Error::InvalidParameter(format!(
            "total variation is defined for the leap and rej modes, not {other}"
        ))),
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.cmd {
        Cmd::Sample {
            class,
            size,
            seed,
            mode,
            out,
        } => {
            let spec = SchemeSpec::from_name(&class)?;
            let mut gen = Generator::new(&spec)?;
            let mut rng = rng_from_seed(seed);
            let outcome = match mode.gen_mode() {
                GenMode::Leap => gen.leap_sample(size, &mut rng)?,
                GenMode::Rejection { r, a } => gen.rejection_leap_sample(size, r, a, &mut rng)?,
                GenMode::SinglePass => gen.single_pass_sample(size, &mut rng)?,
            };
            let text = match &outcome.object {
                ComposedObject::Walk(w) => w.to_step_string(),
                ComposedObject::Tree(t) => t.to_parens(),
            };
            eprintln!(
                "class={} size={} core_size={} trials={} b_draws={} mode={}",
                class,
                outcome.stats.size,
                outcome.stats.core_size,
                outcome.stats.trials,
                outcome.stats.b_draws,
                mode_name(mode.gen_mode()),
            );
            write_output(&out, &format!("{text}\n"))
        }
        Cmd::Hist {
            class,
            size,
            count,
            seed,
            mode,
            stat,
            format,
            out,
            threads,
        } => {
            let campaign = Campaign {
                class: SchemeId::parse(&class)?,
                n: size,
                count,
                seed,
                mode: mode.gen_mode(),
                stat: Statistic::parse(&stat)?,
                threads,
            };
            let h = run_campaign(&campaign)?;
            emit_to_path(&h, EmitFormat::parse(&format)?, &out)
        }
        Cmd::Tv {
            class,
            sizes,
            mode,
            path,
            out,
        } => {
            let spec = SchemeSpec::from_name(&class)?;
            if !spec.id.is_walk() {
                return Err(Error::InvalidParameter(
                    "total variation tables are computed for the walk schemes".into(),
                ));
            }
            let sizes = parse_sizes(&sizes)?;
            let kind = law_kind(&mode)?;
            let n_max = sizes.iter().copied().max().unwrap_or(1);
            let rational_limit = 1200usize;
            let use_rational = |n: usize| match path.as_str() {
                "rational" => true,
                "float" => false,
                _ => spec.id == SchemeId::Motzkin && n <= rational_limit,
            };
            let we = if sizes.iter().any(|&n| use_rational(n)) {
                Some(WalkExact::new(
                    &spec,
                    sizes
                        .iter()
                        .copied()
                        .filter(|&n| use_rational(n))
                        .max()
                        .unwrap_or(1),
                )?)
            } else {
                None
            };
            let _ = n_max;
            let rej = matches!(kind, LawKind::Rej { .. });
            let mut csv = String::from(if rej {
                "n,d_tv_rej,n_times_dtv_rej,arithmetic_path\n"
            } else {
                "n,d_tv,sqrt_n_times_dtv,arithmetic_path\n"
            });
            for &n in &sizes {
                let (d, path_name) = if use_rational(n) {
                    let we = we.as_ref().expect("rational table built");
                    let d = match &kind {
                        LawKind::Leap => we.tv_exact(n),
                        LawKind::Rej { r, a } => we.tv_rej_exact(n, *r, a)?,
                        LawKind::Uniform => unreachable!(),
                    };
                    use num_traits::ToPrimitive;
                    (d.to_f64().unwrap(), "rational")
                } else {
                    (leapgen::exact::walk_tv_f64(&spec, n, &kind), "float")
                };
                let scaled = if rej {
                    n as f64 * d
                } else {
                    (n as f64).sqrt() * d
                };
                csv.push_str(&format!("{n},{d:.15e},{scaled:.12},{path_name}\n"));
            }
            write_output(&out, &csv)
        }
        Cmd::TvHeight { sizes, mode, out } => {
            let spec = SchemeSpec::motzkin();
            let sizes = parse_sizes(&sizes)?;
            let kind = law_kind(&mode)?;
            let n_max = sizes.iter().copied().max().unwrap_or(1);
            let we = WalkExact::new(&spec, n_max)?;
            let ht = dyck_height_table(n_max / 2);
            let rej = matches!(kind, LawKind::Rej { .. });
            let mut csv = String::from(if rej {
                "n,d_tv_height_rej,n_times_dtv,arithmetic_path\n"
            } else {
                "n,d_tv_height,n_times_dtv,arithmetic_path\n"
            });
            for &n in &sizes {
                let d = tv_height(&we, &ht, n, &kind)?;
                use num_traits::ToPrimitive;
                let d = d.to_f64().unwrap();
                csv.push_str(&format!("{n},{d:.15e},{:.12},rational\n", n as f64 * d));
            }
            write_output(&out, &csv)
        }
        Cmd::Gf {
            class,
            size,
            series,
            out,
        } => {
            let spec = SchemeSpec::from_name(&class)?;
            let coeffs: Vec<String> = match series.as_str() {
                "c" => match spec.id {
                    SchemeId::Motzkin => leapgen::scheme::motzkin_numbers(size)
                        .iter()
                        .map(|c| c.to_string())
                        .collect(),
                    SchemeId::Schroder => (0..=size)
                        .map(|n| leapgen::exact::schroder_counts(n).c_n.to_string())
                        .collect(),
                    _ => spec
                        .extended_a_tilde(size)
                        .expect("tree scheme")
                        .truncated(size)
                        .coeffs()
                        .iter()
                        .map(|c| c.to_string())
                        .collect(),
                },
                "b" => spec
                    .extended_b_series(size)
                    .truncated(size)
                    .coeffs()
                    .iter()
                    .map(|c| c.to_string())
                    .collect(),
                "q" => {
                    let q = spec.q_exact(size).ok_or_else(|| {
                        Error::InvalidParameter(format!(
                            "exact success probabilities need rational scheme data; {} has none",
                            spec.id.name()
                        ))
                    })?;
                    q.iter().map(|c| c.to_string()).collect()
                }
                _ => unreachable!(),
            };
            let json = serde_json::json!({
                "class": spec.id.name(),
                "series": series,
                "order": size,
                "coefficients": coeffs,
            });
            write_output(
                &out,
                &format!("{}\n", serde_json::to_string_pretty(&json).unwrap()),
            )
        }
        Cmd::Bench {
            class,
            sizes,
            count,
            seed,
            out,
        } => {
            let rows = bench(SchemeId::parse(&class)?, &parse_sizes(&sizes)?, count, seed)?;
            write_output(&out, &bench_csv(&rows))
        }
        Cmd::Selftest { seed } => {
            let report = selftest(seed);
            for item in &report.items {
                println!(
                    "[{}] {}: {}",
                    if item.pass { "PASS" } else { "FAIL" },
                    item.name,
                    item.detail
                );
            }
            if !report.passed() {
                std::process::exit(2);
            }
            Ok(())
        }
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            e.print().ok();
            std::process::exit(1);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        let code = match e {
            Error::Io { .. } => 3,
            Error::NonConvergence(_) | Error::TrialCapExceeded { .. } => 2,
            _ => 1,
        };
        std::process::exit(code);
    }
}
