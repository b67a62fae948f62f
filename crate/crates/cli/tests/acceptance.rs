//! Acceptance suite: one PASS/FAIL line per criterion, every check at its
//! stated size and tolerance. Runs without the libtest harness so the lines
//! are always shown; exits nonzero if any criterion fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use filterlab_core::rng::Stream;
use filterlab_core::verify::{residual_suite, run_check, CheckParams, Equation, Verdict};

const SEED: u64 = 1;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    summary: String,
}

fn check(name: &str) -> Vec<Verdict> {
    run_check(name, &CheckParams::default(), SEED).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn all_intended(vs: &[Verdict]) -> bool {
    !vs.is_empty() && vs.iter().all(Verdict::as_intended)
}

fn brief(v: &Verdict) -> String {
    format!(
        "{} {:.4}±{:.4} vs {:.4} [{}]",
        v.scenario,
        v.estimate,
        v.se,
        v.reference,
        v.status()
    )
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let out = f();
    (out, t.elapsed())
}

fn within(elapsed: Duration, limit_s: u64) -> bool {
    elapsed <= Duration::from_secs(limit_s)
}

fn revuz_yor() -> Outcome {
    let (vs, el) = timed(|| check("revuz_yor_energy"));
    Outcome {
        pass: all_intended(&vs) && within(el, 60),
        summary: format!("{} in {:.1}s (limit 60s)", brief(&vs[0]), el.as_secs_f64()),
    }
}

fn zlogz() -> Outcome {
    let vs = check("zlogz_identity");
    Outcome {
        pass: all_intended(&vs),
        summary: format!(
            "E[Z log Z] {:.4} vs ½E[∫ZH²] {:.4}, band {:.4}",
            vs[0].estimate, vs[0].reference, vs[0].tolerance
        ),
    }
}

fn summarise(vs: &[Verdict]) -> Outcome {
    let ok = vs.iter().filter(|v| v.as_intended()).count();
    let worst = vs
        .iter()
        .filter(|v| !v.as_intended())
        .map(brief)
        .next()
        .unwrap_or_else(|| "all as intended".to_string());
    Outcome {
        pass: all_intended(vs),
        summary: format!("{ok}/{} verdicts; {worst}", vs.len()),
    }
}

fn dufresne() -> Outcome {
    let (vs, el) = timed(|| check("dufresne"));
    Outcome {
        pass: all_intended(&vs) && within(el, 120),
        summary: format!(
            "{}; tolerance {:.4} in {:.1}s (limit 120s)",
            brief(&vs[0]),
            vs[0].tolerance,
            el.as_secs_f64()
        ),
    }
}

fn kalman_uncorrelated() -> Outcome {
    let anchor = check("kalman_stationary");
    let lg: Vec<&Verdict> = anchor
        .iter()
        .filter(|v| v.scenario == "linear_gaussian")
        .collect();
    let anchor_ok =
        lg.len() == 1 && lg[0].pass && (lg[0].reference - (2f64.sqrt() - 1.0)).abs() < 1e-12;
    let (vs, el) = timed(|| check("kalman_uncorrelated"));
    let gaps: Vec<String> = vs
        .iter()
        .map(|v| format!("{} gap {:.4}", v.scenario, v.estimate))
        .collect();
    Outcome {
        pass: anchor_ok && all_intended(&vs) && within(el, 120),
        summary: format!(
            "stationary {:.6}; {} in {:.1}s (limit 120s)",
            lg.first().map_or(f64::NAN, |v| v.estimate),
            gaps.join(", "),
            el.as_secs_f64()
        ),
    }
}

fn kalman_correlated() -> Outcome {
    let mut vs = check("kalman_correlated");
    let correlated = summarise(&vs);
    let ablation = check("kalman_ablation");
    let ablation_fails = ablation.iter().all(|v| v.expected_fail && !v.pass);
    vs.extend(ablation.iter().cloned());
    Outcome {
        pass: all_intended(&vs) && ablation_fails,
        summary: format!(
            "{}; ablation {}",
            correlated.summary,
            ablation.iter().map(brief).collect::<Vec<_>>().join(", ")
        ),
    }
}

fn residuals() -> Outcome {
    let params = CheckParams::default();
    let stream = Stream::new(SEED).tagged("acceptance-residuals");
    let mut vs = residual_suite(
        &["linear_gaussian", "jump_ou"],
        &[Equation::Zakai, Equation::KushnerStratonovich],
        &params,
        stream,
    )
    .expect("residual suite");
    let main = summarise(&vs);
    let reductions = check("residual_reductions");
    let ablation = check("ks_residual_ablation");
    let ablation_bites = ablation.iter().any(|v| v.expected_fail && !v.pass);
    vs.extend(reductions.iter().cloned());
    vs.extend(ablation.iter().cloned());
    Outcome {
        pass: all_intended(&vs) && ablation_bites,
        summary: format!(
            "{} over 200 runs; reductions {}/{}; ablation {}",
            main.summary,
            reductions.iter().filter(|v| v.pass).count(),
            reductions.len(),
            ablation.iter().map(brief).collect::<Vec<_>>().join(", ")
        ),
    }
}

fn gronwall() -> Outcome {
    summarise(&check("gronwall"))
}

// --- reproducibility through the binary ---

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(format!("{name}.json"));
    std::fs::write(&path, body).unwrap();
    path
}

fn run_cli(cmd: &str, config: &Path, out: &Path, workers: usize) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_filterlab"))
        .args([cmd, "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(["--workers", &workers.to_string()])
        .output()
        .expect("spawn filterlab")
        .status
        .code()
        .unwrap_or(-1)
}

fn read_dir(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

fn reproducibility() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let cases = [
        (
            "simulate",
            r#"{"name":"sim","model":"jump_ou","grid":{"horizon":1.0,"dt":0.001},"n_paths":3,"seed":4}"#,
        ),
        (
            "filter",
            r#"{"name":"filt","model":"correlated_linear","grid":{"horizon":1.0,"dt":0.001},"filter":{"n_particles":2000},"seed":4}"#,
        ),
        (
            "filter",
            r#"{"name":"cd","model":"change_detection","grid":{"horizon":2.0,"dt":0.001},"filter":{"n_particles":1500},"seed":4}"#,
        ),
        (
            "verify",
            r#"{"name":"ver","diagnostics":{"checks":["dufresne","martingale_mean","kalman_uncorrelated"],"params":{"n_paths":2000,"n_seeds":2,"n_particles":1200,"horizon":1.0}},"seed":4}"#,
        ),
        (
            "counterexample",
            r#"{"name":"cx","counterexample":{"kind":"revuz_yor","alpha":1.0},"grid":{"horizon":1.0,"dt":0.001},"n_paths":3000,"seed":4}"#,
        ),
    ];
    let mut failures = Vec::new();
    for (i, (cmd, body)) in cases.iter().enumerate() {
        let config = write_config(root, &format!("case{i}"), body);
        let runs: Vec<(usize, PathBuf)> = [(1, "a"), (1, "b"), (4, "c")]
            .iter()
            .map(|&(w, tag)| (w, root.join(format!("case{i}_{tag}"))))
            .collect();
        let codes: Vec<i32> = runs
            .iter()
            .map(|(w, out)| run_cli(cmd, &config, out, *w))
            .collect();
        // verify may legitimately fail checks at this reduced size; only
        // identical behaviour matters here.
        if codes.iter().any(|&c| c != codes[0])
            || !(codes[0] == 0 || (*cmd == "verify" && codes[0] == 5))
        {
            failures.push(format!("{cmd}#{i} exit codes {codes:?}"));
            continue;
        }
        let first = read_dir(&runs[0].1);
        if !first.contains_key("manifest.json") || first.len() < 2 {
            failures.push(format!("{cmd}#{i} missing outputs"));
        }
        for (w, out) in &runs[1..] {
            if read_dir(out) != first {
                failures.push(format!("{cmd}#{i} differs (workers={w})"));
            }
        }
    }
    Outcome {
        pass: failures.is_empty(),
        summary: if failures.is_empty() {
            format!(
                "{} commands byte-identical across two runs and workers 1 vs 4",
                cases.len()
            )
        } else {
            failures.join("; ")
        },
    }
}

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        ("revuz-yor transformed energy", revuz_yor),
        ("z log z identity", zlogz),
        ("martingale mean", || summarise(&check("martingale_mean"))),
        ("maximal bound", || summarise(&check("maximal_bound"))),
        ("dufresne identity", dufresne),
        ("hitting probabilities", || summarise(&check("hitting"))),
        ("kalman agreement (uncorrelated)", kalman_uncorrelated),
        (
            "kalman agreement (correlated) + ablation",
            kalman_correlated,
        ),
        ("zakai / ks residuals + reductions + ablation", residuals),
        ("change-detection vs grid-bayes", || {
            summarise(&check("change_detection"))
        }),
        ("gronwall envelope", gronwall),
        ("reproducibility", reproducibility),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let (o, el) = timed(f);
        failed += usize::from(!o.pass);
        println!(
            "{} criterion {:>2} {name}: {} ({:.1}s)",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.summary,
            el.as_secs_f64()
        );
    }
    println!(
        "acceptance: {}/{} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
