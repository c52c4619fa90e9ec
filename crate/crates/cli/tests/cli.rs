use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const NEVO: &str = env!("CARGO_BIN_EXE_nevo");

fn nevo(args: &[&str], workers: &str) -> Output {
    Command::new(NEVO).args(args).env("NE_WORKERS", workers).output().expect("spawn nevo")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn drop_elapsed(csv: &str) -> Vec<String> {
    csv.lines().map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head).to_string()).collect()
}

fn cartpole_config(dir: &Path, tag: &str, iters: u64) -> (PathBuf, PathBuf, PathBuf) {
    let csv = dir.join(format!("{tag}.csv"));
    let ckpt = dir.join(format!("{tag}.ckpt"));
    let body = format!(
        "# short cart-pole run\n[trainer]\nseed = 3\nmax_iters = {iters}\nrepeats = 2\ntest_interval = 2\n\
         n_test_rollouts = 2\nlog_path = {}\ncheckpoint_path = {}\n\n[algorithm]\npop_size = 8\n\n\
         [policy]\nhidden = 8\n\n[task]\nname = cartpole_easy\n",
        csv.display(),
        ckpt.display()
    );
    (write_config(dir, &format!("{tag}.conf"), &body), csv, ckpt)
}

#[test]
fn one_iteration_writes_header_and_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let (conf, csv, ckpt) = cartpole_config(dir.path(), "one", 1);
    let out = nevo(&["train", conf.to_str().unwrap()], "1");
    assert!(out.status.success(), "{}", stderr(&out));
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], "iteration,best_score,mean_score,sigma_mean,elapsed_sec");
    assert!(lines[1].starts_with("1,"));
    assert!(ckpt.exists());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("# algorithm.pop_size = 8"), "{stdout}");
    assert!(stdout.contains("final test score:"));
}

#[test]
fn repeated_runs_and_worker_counts_agree() {
    let dir = tempfile::tempdir().unwrap();
    let (conf_a, csv_a, ckpt_a) = cartpole_config(dir.path(), "a", 6);
    let (conf_b, csv_b, ckpt_b) = cartpole_config(dir.path(), "b", 6);
    assert!(nevo(&["train", conf_a.to_str().unwrap()], "1").status.success());
    assert!(nevo(&["train", conf_b.to_str().unwrap()], "4").status.success());
    let (a, b) = (std::fs::read_to_string(csv_a).unwrap(), std::fs::read_to_string(csv_b).unwrap());
    assert_eq!(a.lines().count(), 7);
    assert_eq!(drop_elapsed(&a), drop_elapsed(&b));
    assert_eq!(std::fs::read(ckpt_a).unwrap(), std::fs::read(ckpt_b).unwrap());
}

#[test]
fn test_command_reports_the_checkpoint_score() {
    let dir = tempfile::tempdir().unwrap();
    let (conf, _, ckpt) = cartpole_config(dir.path(), "t", 2);
    assert!(nevo(&["train", conf.to_str().unwrap()], "1").status.success());
    let out = nevo(&["test", conf.to_str().unwrap(), ckpt.to_str().unwrap()], "1");
    assert!(out.status.success(), "{}", stderr(&out));
    let meta = std::fs::read_to_string(dir.path().join("t.ckpt.meta")).unwrap();
    let score = meta.lines().find_map(|l| l.strip_prefix("score=")).unwrap();
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), format!("mean test score: {score}"));
}

#[test]
fn bad_log_path_fails_without_partial_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("missing/sub/log.csv");
    let conf = write_config(
        dir.path(),
        "bad.conf",
        &format!("[trainer]\nseed = 1\nmax_iters = 1\nlog_path = {}\n[task]\nname = sphere\n", csv.display()),
    );
    let out = nevo(&["train", conf.to_str().unwrap()], "1");
    assert!(!out.status.success());
    let err = stderr(&out);
    assert!(err.starts_with("error: "), "{err}");
    assert_eq!(err.lines().count(), 1);
    assert!(!csv.exists());
}

#[test]
fn bad_checkpoint_path_fails_before_the_csv_is_created() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("log.csv");
    let conf = write_config(
        dir.path(),
        "bad.conf",
        &format!(
            "[trainer]\nseed = 1\nmax_iters = 1\nlog_path = {}\ncheckpoint_path = {}\n[task]\nname = sphere\n",
            csv.display(),
            dir.path().join("nope/x.ckpt").display()
        ),
    );
    let out = nevo(&["train", conf.to_str().unwrap()], "1");
    assert!(!out.status.success());
    assert!(stderr(&out).starts_with("error: "));
    assert!(!csv.exists());
}

#[test]
fn config_errors_are_single_line_and_precise() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("[trainer]\nseed = 1\n[algorithm]\npop_size = 63\n[task]\nname = sphere\n", "pop_size must be even"),
        ("[trainer]\nseed = 1\nseed = 2\n[task]\nname = sphere\n", "duplicate key [trainer] seed on lines 2 and 3"),
        ("[trainer]\nseed = 1\ncolour = red\n[task]\nname = sphere\n", "unknown key [trainer] colour on line 3"),
        ("[trainer]\nseed = one\n[task]\nname = sphere\n", "line 2"),
        ("[task]\nname = sphere\n", "missing required key [trainer] seed"),
        ("[trainer\nseed = 1\n", "syntax error on line 1"),
    ];
    for (i, (body, needle)) in cases.iter().enumerate() {
        let conf = write_config(dir.path(), &format!("c{i}.conf"), body);
        let out = nevo(&["train", conf.to_str().unwrap()], "1");
        assert!(!out.status.success());
        let err = stderr(&out);
        assert!(err.starts_with("error: ") && err.contains(needle), "case {i}: {err}");
        assert_eq!(err.lines().count(), 1);
    }
    let out = nevo(&["train", dir.path().join("absent.conf").to_str().unwrap()], "1");
    assert!(stderr(&out).starts_with("error: "));
    let conf = write_config(dir.path(), "ok.conf", "[trainer]\nseed = 1\nmax_iters = 1\n[task]\nname = sphere\n");
    let out = nevo(&["train", conf.to_str().unwrap()], "zero");
    assert!(!out.status.success());
    assert!(stderr(&out).contains("NE_WORKERS"));
}

fn frames(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}

fn check_p6(bytes: &[u8], w: usize, h: usize) {
    let header = format!("P6\n{w} {h}\n255\n");
    assert!(bytes.starts_with(header.as_bytes()));
    assert_eq!(bytes.len(), header.len() + 3 * w * h);
}

#[test]
fn cartpole_render_writes_deterministic_p6_frames() {
    let dir = tempfile::tempdir().unwrap();
    let (conf, _, ckpt) = cartpole_config(dir.path(), "r", 2);
    assert!(nevo(&["train", conf.to_str().unwrap()], "1").status.success());
    let (a, b) = (dir.path().join("fa"), dir.path().join("fb"));
    for out_dir in [&a, &b] {
        let out = nevo(&["render", ckpt.to_str().unwrap(), "cartpole_easy", "5", out_dir.to_str().unwrap()], "1");
        assert!(out.status.success(), "{}", stderr(&out));
    }
    let (fa, fb) = (frames(&a), frames(&b));
    assert!(!fa.is_empty() && fa.len() <= 1000);
    assert_eq!(fa[0].file_name().unwrap(), "frame_000001.ppm");
    assert_eq!(fa.len(), fb.len());
    for (x, y) in fa.iter().zip(&fb) {
        let bytes = std::fs::read(x).unwrap();
        check_p6(&bytes, 320, 160);
        assert_eq!(bytes, std::fs::read(y).unwrap());
    }
}

#[test]
fn paint_render_writes_one_frame() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = dir.path().join("p.ckpt");
    let conf = write_config(
        dir.path(),
        "p.conf",
        &format!(
            "[trainer]\nseed = 1\nmax_iters = 2\ncheckpoint_path = {}\n[algorithm]\npop_size = 4\n\
             [task]\nname = paint\nwidth = 24\nheight = 16\n",
            ckpt.display()
        ),
    );
    let out = nevo(&["train", conf.to_str().unwrap()], "1");
    assert!(out.status.success(), "{}", stderr(&out));
    let outdir = dir.path().join("frames");
    let out = nevo(&["render", ckpt.to_str().unwrap(), "paint", "0", outdir.to_str().unwrap()], "1");
    assert!(out.status.success(), "{}", stderr(&out));
    let f = frames(&outdir);
    assert_eq!(f.len(), 1);
    check_p6(&std::fs::read(&f[0]).unwrap(), 24, 16);
}

#[test]
fn render_rejects_unrenderable_and_mismatched_tasks() {
    let dir = tempfile::tempdir().unwrap();
    let (conf, _, ckpt) = cartpole_config(dir.path(), "m", 1);
    assert!(nevo(&["train", conf.to_str().unwrap()], "1").status.success());
    let outdir = dir.path().join("o");
    let out = nevo(&["render", ckpt.to_str().unwrap(), "mnist", "0", outdir.to_str().unwrap()], "1");
    assert!(!out.status.success());
    let err = stderr(&out);
    assert!(err.starts_with("error: ") && err.contains("cartpole_easy, cartpole_hard, waterworld"), "{err}");
    let out = nevo(&["render", ckpt.to_str().unwrap(), "waterworld", "0", outdir.to_str().unwrap()], "1");
    assert!(stderr(&out).contains("trained on cartpole_easy"));
}

#[test]
fn shipped_configs_match_the_presets() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in nevo_cli::TaskName::ALL {
        let cfg = nevo_cli::parse_config(&dir.join(format!("{name}.conf"))).unwrap();
        assert_eq!(cfg.trainer.log_path, Some(PathBuf::from(format!("runs/{name}.csv"))));
        assert_eq!(cfg.trainer.checkpoint_path, Some(PathBuf::from(format!("runs/{name}.ckpt"))));
        let strip = |c: &nevo_cli::Config| {
            let mut m = c.resolved();
            m.remove("trainer.log_path");
            m.remove("trainer.checkpoint_path");
            m
        };
        assert_eq!(strip(&cfg), strip(&nevo_cli::config::preset(name, cfg.trainer.seed)), "{name}");
    }
}
