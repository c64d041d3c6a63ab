use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use egta_cli::output::parse_profile;
use egta_core::factory::{load_game, make_mrcp_closed_game, save_game};

fn egta(args: &[&str], env_seed: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_egta"));
    cmd.args(args).env_remove("EGTA_SEED");
    if let Some(s) = env_seed {
        cmd.env("EGTA_SEED", s);
    }
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("config.toml");
    fs::write(&path, body).unwrap();
    path
}

struct Trace {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Trace {
    fn load(dir: &Path) -> Self {
        let mut r = csv::Reader::from_path(dir.join("trace.csv")).unwrap();
        let header = r.headers().unwrap().iter().map(String::from).collect();
        let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
        Trace { header, rows }
    }

    fn col(&self, name: &str) -> usize {
        self.header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
    }
}

fn table4_file(dir: &Path) -> PathBuf {
    let path = dir.join("table4.game");
    save_game(&make_mrcp_closed_game(), &path).unwrap();
    path
}

#[test]
fn solve_nash_on_the_table_game() {
    let tmp = tempfile::tempdir().unwrap();
    let game = table4_file(tmp.path());
    let o = egta(&["solve", game.to_str().unwrap(), "--solver", "nash"], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("pure (2, 2)"), "{text}");
    assert!(text.contains("\nregret 0\n"), "{text}");
}

#[test]
fn solve_rrd_with_a_loose_threshold_returns_uniform() {
    let tmp = tempfile::tempdir().unwrap();
    let game = table4_file(tmp.path());
    let o = egta(&["solve", game.to_str().unwrap(), "--solver", "rrd", "--lambda", "100"], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("player 1 0.333333 0.333333 0.333333"), "{text}");
    assert!(text.contains("steps 0"), "{text}");
    assert!(text.contains("hit_threshold true"), "{text}");
}

#[test]
fn solve_other_solvers() {
    let tmp = tempfile::tempdir().unwrap();
    let game = table4_file(tmp.path());
    let g = game.to_str().unwrap();
    for args in [
        vec!["solve", g, "--solver", "prd"],
        vec!["solve", g, "--solver", "qre", "--tau", "2"],
        vec!["solve", g, "--solver", "mrcp", "--sets", "0,1;0,1"],
    ] {
        let o = egta(&args, None);
        assert!(o.status.success(), "{args:?}: {}", stderr(&o));
        assert!(stdout(&o).contains("regret "), "{args:?}");
    }
    // a flag that does not belong to the solver is a usage error
    let o = egta(&["solve", g, "--solver", "nash", "--tau", "1"], None);
    assert_eq!(o.status.code(), Some(1));
    let o = egta(&["solve", g, "--solver", "qre"], None);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_with_one() {
    let o = egta(&["frobnicate"], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));
    let o = egta(&[], None);
    assert_eq!(o.status.code(), Some(1));
    let o = egta(&["--help"], None);
    assert_eq!(o.status.code(), Some(0));
    let o = egta(&["run", "/nonexistent/config.toml"], None);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn config_errors_report_the_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[experiment]\nseeds = [0]\n[game]\nkind = \"mrcp_closed\"\n[psro]\nmax_iterations = -3\n",
    );
    let o = egta(&["run", cfg.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("config.toml:6:"), "{}", stderr(&o));
}

#[test]
fn trace_has_one_row_per_cell_iteration() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(
        tmp.path(),
        "[experiment]\nseeds = [1, 2, 3]\n[game]\nkind = \"random\"\nsizes = [6, 6]\nzero_sum = true\n\
         [psro]\nmax_iterations = 8\n[[mss]]\nkind = \"DO_NASH\"\n[[mss]]\nkind = \"FP_UNIFORM\"\n",
    );
    let o = egta(&["run", cfg.to_str().unwrap(), "--output", out.to_str().unwrap(), "--quiet"], None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).is_empty());

    let trace = Trace::load(&out);
    assert_eq!(
        trace.header.join(","),
        "game,mss,seed,lambda,iteration,num_strategies_p1,num_strategies_p2,\
         target_regret_full,ne_regret_full,profiles_evaluated,terminated_by"
    );
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    let expected_rows: usize = manifest
        .lines()
        .filter(|l| l.starts_with("cell "))
        .map(|l| {
            let it = l.split_whitespace().find_map(|t| t.strip_prefix("iterations=")).unwrap();
            it.parse::<usize>().unwrap()
        })
        .sum();
    assert_eq!(trace.rows.len(), expected_rows);
    let pairs: BTreeSet<(String, String)> =
        trace.rows.iter().map(|r| (r[trace.col("mss")].clone(), r[trace.col("seed")].clone())).collect();
    assert_eq!(pairs.len(), 6);
    // tracking is off, so the equilibrium column is empty rather than 0
    assert!(trace.rows.iter().all(|r| r[trace.col("ne_regret_full")].is_empty()));
    assert!(manifest.contains("wall_ms="));
}

#[test]
fn lambda_sweep_produces_one_group_per_value() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(
        tmp.path(),
        "[experiment]\nseeds = [0]\nlambda_sweep = [0.0, 0.35, 0.6]\n[game]\nkind = \"random\"\nsizes = [5, 5]\n\
         [psro]\nmax_iterations = 5\n[[mss]]\nkind = \"RRD\"\nlambda = 0.1\nmax_steps = 2000\n",
    );
    let o = egta(&["run", cfg.to_str().unwrap(), "--output", out.to_str().unwrap(), "--quiet"], None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let trace = Trace::load(&out);
    let groups: BTreeSet<String> = trace.rows.iter().map(|r| r[trace.col("lambda")].clone()).collect();
    assert_eq!(groups, ["0", "0.35", "0.6"].map(String::from).into_iter().collect());

    // the sweep subcommand fills in a grid when none is configured
    let cfg = write_config(
        tmp.path(),
        "[experiment]\nseeds = [0]\n[game]\nkind = \"mrcp_closed\"\n[psro]\nmax_iterations = 3\n",
    );
    let out2 = tmp.path().join("out2");
    let o = egta(&["sweep", cfg.to_str().unwrap(), "--output", out2.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let trace = Trace::load(&out2);
    let groups: BTreeSet<String> = trace.rows.iter().map(|r| r[trace.col("lambda")].clone()).collect();
    assert_eq!(groups.len(), egta_cli::DEFAULT_SWEEP.len());
    assert!(stdout(&o).contains("mean_final_regret"));
}

#[test]
fn reruns_are_byte_identical_and_jobs_do_not_matter() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[experiment]\nseeds = [4, 5]\nmaster_seed = 9\n[game]\nkind = \"random\"\nsizes = [5, 5]\n\
         [psro]\nmax_iterations = 6\nnoise_std = 0.05\nsamples_per_profile = 3\ntrack_ne_regret = true\n\
         [[mss]]\nkind = \"RRD\"\nlambda = 0.05\nmax_steps = 3000\n[[mss]]\nkind = \"PRD\"\nmax_steps = 3000\n",
    );
    let mut traces = Vec::new();
    for (k, jobs) in ["1", "1", "4"].iter().enumerate() {
        let out = tmp.path().join(format!("out{k}"));
        let o = egta(&["run", cfg.to_str().unwrap(), "--output", out.to_str().unwrap(), "--jobs", jobs, "--quiet"], None);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        traces.push(fs::read(out.join("trace.csv")).unwrap());
    }
    assert!(traces.iter().all(|t| t == &traces[0]));

    let out = tmp.path().join("seeded");
    let o = egta(&["run", cfg.to_str().unwrap(), "--output", out.to_str().unwrap(), "--quiet"], Some("123"));
    assert_eq!(o.status.code(), Some(0));
    assert_ne!(fs::read(out.join("trace.csv")).unwrap(), traces[0]);
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("master_seed = 123"));
    assert!(manifest.contains("master_seed_source = EGTA_SEED"));

    let o = egta(&["run", cfg.to_str().unwrap(), "--quiet"], Some("not-a-number"));
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn serialized_targets_reproduce_the_regret_column() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(
        tmp.path(),
        "[experiment]\nseeds = [0, 1]\n[game]\nkind = \"random\"\nsizes = [4, 5]\n[psro]\nmax_iterations = 6\n\
         [[mss]]\nkind = \"RRD\"\nlambda = 0.02\nmax_steps = 3000\n[[mss]]\nkind = \"QRE\"\ntau = 5.0\n",
    );
    let o = egta(&["run", cfg.to_str().unwrap(), "--output", out.to_str().unwrap(), "--quiet"], None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let trace = Trace::load(&out);
    for row in &trace.rows {
        let game = load_game(out.join("games").join(format!("{}.game", row[trace.col("game")]))).unwrap();
        let mss = &row[trace.col("mss")];
        let seed = &row[trace.col("seed")];
        let iter = &row[trace.col("iteration")];
        let text = fs::read_to_string(out.join("targets").join(format!("{mss}_s{seed}")).join(format!("{iter}.profile")))
            .unwrap();
        let profile = parse_profile(&text).unwrap();
        let recomputed = game.regret(&profile).unwrap().total;
        let recorded: f64 = row[trace.col("target_regret_full")].parse().unwrap();
        assert_eq!(recomputed.to_bits(), recorded.to_bits(), "{mss} seed {seed} iteration {iter}");
    }
}

#[test]
fn do_rows_report_equal_target_and_equilibrium_regret() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(
        tmp.path(),
        "[experiment]\nseeds = [0, 1]\n[game]\nkind = \"random\"\nsizes = [6, 6]\n\
         [psro]\nmax_iterations = 8\ntrack_ne_regret = true\n[[mss]]\nkind = \"DO_NASH\"\n",
    );
    let o = egta(&["run", cfg.to_str().unwrap(), "--output", out.to_str().unwrap(), "--quiet"], None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let trace = Trace::load(&out);
    for row in &trace.rows {
        let t: f64 = row[trace.col("target_regret_full")].parse().unwrap();
        let ne: f64 = row[trace.col("ne_regret_full")].parse().unwrap();
        assert!((t - ne).abs() <= 1e-9);
    }
}

#[test]
fn compare_without_entries_uses_the_preset() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(
        tmp.path(),
        "[experiment]\nseeds = [0]\n[game]\nkind = \"random\"\nsizes = [4, 4]\nzero_sum = true\n[psro]\nmax_iterations = 4\n",
    );
    let o = egta(&["compare", cfg.to_str().unwrap(), "--output", out.to_str().unwrap(), "--jobs", "2"], None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    for label in ["DO_NASH", "FP_UNIFORM", "PRD", "RRD", "QRE"] {
        assert!(text.contains(label), "{label} missing from\n{text}");
    }
    // without --quiet every finished cell is announced
    assert_eq!(stderr(&o).matches("] ").count(), 5, "{}", stderr(&o));
}

#[test]
fn bps_demo_savings_match_recount() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(
        tmp.path(),
        "[experiment]\nseeds = [0, 1]\n[game]\nkind = \"random\"\nsizes = [6, 6, 6]\n\
         [psro]\nmax_iterations = 5\ninitial = [0, 0, 0]\n",
    );
    let o = egta(&["bps-demo", cfg.to_str().unwrap(), "--output", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let trace = Trace::load(&out);
    let printed: Vec<&str> = text.lines().filter(|l| l.trim_end().ends_with('%')).collect();
    assert_eq!(printed.len(), trace.rows.len());
    for (line, row) in printed.iter().zip(&trace.rows) {
        let evaluated: f64 = row[trace.col("profiles_evaluated")].parse().unwrap();
        let total: f64 = (1..=3)
            .map(|i| row[trace.col(&format!("num_strategies_p{i}"))].parse::<f64>().unwrap())
            .product();
        let recount = format!("{:.1}%", 100.0 * (1.0 - evaluated / total));
        assert!(line.trim_end().ends_with(&recount), "{line} vs {recount}");
    }
}

#[test]
fn failing_cells_exit_with_two_and_keep_other_output() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    // backward profile search does not support QRE targets, so that cell fails
    let cfg = write_config(
        tmp.path(),
        "[experiment]\nseeds = [0]\n[game]\nkind = \"random\"\nsizes = [3, 3, 3]\n[psro]\nmax_iterations = 3\nbps = true\n\
         [[mss]]\nkind = \"DO_NASH\"\n[[mss]]\nkind = \"QRE\"\ntau = 1.0\n",
    );
    let o = egta(&["run", cfg.to_str().unwrap(), "--output", out.to_str().unwrap(), "--quiet"], None);
    assert_eq!(o.status.code(), Some(2));
    let trace = Trace::load(&out);
    assert!(!trace.rows.is_empty());
    assert!(trace.rows.iter().all(|r| r[trace.col("mss")] == "DO_NASH"));
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("QRE_s0") && manifest.contains("status=ERROR"), "{manifest}");
}

#[test]
fn library_entry_point_matches_the_binary() {
    let tmp = tempfile::tempdir().unwrap();
    let game = table4_file(tmp.path());
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = egta_cli::run(["egta", "solve", game.to_str().unwrap(), "--solver", "nash"], None, &mut out, &mut err);
    assert_eq!(code, 0);
    let bin = egta(&["solve", game.to_str().unwrap(), "--solver", "nash"], None);
    assert_eq!(out, bin.stdout);
}
